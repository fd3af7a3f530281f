#!/usr/bin/env python3
"""Regenerate the bundled synthetic corpus under corpus/.

Fully deterministic (no RNG).  The corpus is a 2 datasets x 2 methods x
2 learning rates x 2 seeds grid of run records + metric reports + CKA
profiles, plus one pretrained baseline report per dataset.  Per-run
drift targets are chosen so that:

* the eurosat/full_ft method-summary row rounds to
  (-0.47, -1.97, 98.96, 11.28), and the other three rows also match the
  published aggregate grid;
* the pets/full_ft layer heatmap holds -20.29 at (lr=5e-5, layer 12) and
  pets/lora holds -11.53 in the same cell.

Reports carry no drift block; the engine derives drift from the baseline
reports at aggregation time.
"""

import json
from pathlib import Path

import numpy as np

ROOT = Path(__file__).resolve().parent.parent / "corpus"

DATASETS = ("eurosat", "pets")
METHODS = ("full_ft", "lora:r=8")
LRS = (1e-5, 5e-5)
SEEDS = (7, 11)
N_LAYERS = 12
N_IMAGES = 200

BASELINE_LEVELS = {
    "entropy_bits": 5.2,
    "erf95": 0.94,
    "gini": 0.12,
    "head_diversity": 0.40,
    "p2p_entropy_bits": 4.60,
}

# per (dataset, method): per-run targets in (lr, seed) order
# (1e-5, s7), (1e-5, s11), (5e-5, s7), (5e-5, s11); group means reproduce
# the published aggregate table.
TARGETS = {
    ("eurosat", "full_ft"): dict(
        dentropy=(-0.37, -0.57, -0.42, -0.52),
        derf=(-1.87, -2.07, -1.92, -2.02),
        acc=(98.90, 99.02, 98.95, 98.97),
        zs=(11.20, 11.36, 11.25, 11.31),
    ),
    ("eurosat", "lora:r=8"): dict(
        dentropy=(1.08, 1.28, 1.13, 1.23),
        derf=(1.45, 1.65, 1.50, 1.60),
        acc=(96.49, 96.69, 96.54, 96.64),
        zs=(45.03, 45.23, 45.08, 45.18),
    ),
    ("pets", "full_ft"): dict(
        dentropy=(-2.22, -2.42, -2.27, -2.37),
        derf=(-5.08, -5.28, -5.13, -5.23),
        acc=(88.84, 89.04, 88.89, 88.99),
        zs=(8.44, 8.64, 8.49, 8.59),
    ),
    ("pets", "lora:r=8"): dict(
        dentropy=(-0.23, -0.43, -0.28, -0.38),
        derf=(-1.34, -1.54, -1.39, -1.49),
        acc=(70.66, 70.86, 70.71, 70.81),
        zs=(57.91, 58.11, 57.96, 58.06),
    ),
}

# published late-layer anchors pinned into the 5e-5 cells
LAYER12_ANCHOR = {
    ("pets", "full_ft"): -20.29,
    ("pets", "lora:r=8"): -11.53,
}


def zero_sum_offsets(n, scale=0.1):
    """Symmetric +/- pattern that cancels exactly in float arithmetic."""
    return (np.arange(n) - (n - 1) / 2.0) * scale


def per_layer_drifts(run_target, layer12=None):
    if layer12 is None:
        return run_target + zero_sum_offsets(N_LAYERS)
    rest = (N_LAYERS * run_target - layer12) / (N_LAYERS - 1)
    values = rest + zero_sum_offsets(N_LAYERS - 1)
    return np.append(values, layer12)


def slug(method):
    return method.replace(":", "_").replace("=", "")


def layer_values(metric, drifts):
    base = BASELINE_LEVELS[metric]
    return [base * (1.0 + d / 100.0) for d in drifts]


def metric_report(run_id, per_layer):
    layers = []
    for i in range(N_LAYERS):
        layers.append({"layer": i + 1, **{k: per_layer[k][i] for k in BASELINE_LEVELS}})
    run_level = {k: float(np.mean(per_layer[k])) for k in BASELINE_LEVELS}
    return {
        "run_id": run_id,
        "n_images": N_IMAGES,
        "per_layer": layers,
        "run_level": run_level,
        "drift": None,
        "rollout": None,
    }


def dump_json(obj, path):
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")


def main():
    manifest = {"run_records": [], "metric_reports": [], "baseline_reports": [], "cka_profiles": {}}

    for ds in DATASETS:
        baseline_id = f"{ds}_pretrained"
        report = metric_report(
            baseline_id,
            {k: [BASELINE_LEVELS[k]] * N_LAYERS for k in BASELINE_LEVELS},
        )
        dump_json(report, ROOT / "reports" / f"{baseline_id}.report.json")
        manifest["baseline_reports"].append(f"reports/{baseline_id}.report.json")

    for (ds, method), targets in TARGETS.items():
        idx = 0
        for lr in LRS:
            for seed in SEEDS:
                run_id = f"{ds}_{slug(method)}_lr{lr:g}_s{seed}"
                dE = targets["dentropy"][idx]
                dERF = targets["derf"][idx]
                anchor = LAYER12_ANCHOR.get((ds, method)) if lr == 5e-5 else None
                drifts = {
                    "entropy_bits": per_layer_drifts(dE, anchor),
                    "erf95": per_layer_drifts(dERF) * 1.0,
                    "gini": per_layer_drifts(-2.5 * dE),
                    "head_diversity": per_layer_drifts(0.4 * dE),
                    "p2p_entropy_bits": per_layer_drifts(0.8 * dE),
                }
                per_layer = {k: layer_values(k, v) for k, v in drifts.items()}
                dump_json(
                    metric_report(run_id, per_layer),
                    ROOT / "reports" / f"{run_id}.report.json",
                )
                manifest["metric_reports"].append(f"reports/{run_id}.report.json")

                record = {
                    "run_id": run_id,
                    "dataset": ds,
                    "method": method,
                    "lr": lr,
                    "seed": seed,
                    "best_val_acc": targets["acc"][idx],
                    "zero_shot": {
                        "cifar100": targets["zs"][idx],
                        "flowers102": round(0.6 + 0.07 * idx + (0.5 if ds == "pets" else 0.0), 2),
                    },
                    "baseline_run_id": f"{ds}_pretrained",
                    "epochs": 20 if ds == "eurosat" else 30,
                }
                dump_json(record, ROOT / "records" / f"{run_id}.json")
                manifest["run_records"].append(f"records/{run_id}.json")

                cka_layers = (0.82 + 0.01 * dE) + zero_sum_offsets(N_LAYERS, 0.002)
                cka = {
                    "per_layer": [float(v) for v in cka_layers],
                    "mean": float(np.mean(cka_layers)),
                }
                dump_json(cka, ROOT / "cka" / f"{run_id}.cka.json")
                manifest["cka_profiles"][run_id] = f"cka/{run_id}.cka.json"
                idx += 1

    dump_json(manifest, ROOT / "manifest.json")
    print(f"wrote corpus under {ROOT}")


if __name__ == "__main__":
    main()
