"""Probe entry point: one JSON configuration drives subset construction,
attention/feature export, adapter-aware zero-shot evaluation, and
run-record emission.

    attn-probe --config probe.json [--ops subset,attention,features,zeroshot,record]

Config schema (keys beyond these are rejected to catch typos):

    {
      "checkpoint":  {"kind": "hf_dir", "path": "..."} |
                     {"kind": "builtin", "arch": "tiny" | "vit-b-32" |
                      "vit-b-32-vision", "seed": 0},
      "adapter":     {"kind": "lora", "rank": 8, "alpha": 16,
                      "targets": ["q_proj", "v_proj"],
                      "state_path": null} | null,
      "dataset":     {"kind": "synthetic", ...} | {"kind": "imagefolder", "path": "..."},
      "split":       "val",
      "subset_size": 200,
      "subset_seed": 0,
      "prompt_template": "a photo of a {class name}",
      "benchmarks":  [{"name": "cifar100", "dataset": {...}}],
      "batch_size":  32,
      "run":         {"run_id": "...", "method": "pretrained" | "full_ft" | "lora:r=8",
                      "lr": 0.0, "seed": 0, "baseline_run_id": "...",
                      "best_val_acc": 0.0},
      "output_dir":  "out"
    }
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .datasets import build_dataset
from .extract import extract_attention, extract_features
from .formats import (
    sidecar_meta,
    write_attention_dump,
    write_feature_dump,
    write_run_record,
)
from .model import load_checkpoint
from .subsets import fixed_eval_subset
from .zeroshot import CLASS_PLACEHOLDER, adapter_aware_zeroshot

ALL_OPS = ("subset", "attention", "features", "zeroshot", "record")

_KNOWN_KEYS = {
    "checkpoint", "adapter", "dataset", "split", "subset_size", "subset_seed",
    "prompt_template", "benchmarks", "batch_size", "run", "output_dir",
}


def normalize_config(config: dict) -> dict:
    """Validate required keys, reject unknown ones, fill defaults."""
    unknown = set(config) - _KNOWN_KEYS
    if unknown:
        raise ValueError(f"unknown config keys: {sorted(unknown)}")
    for key in ("checkpoint", "dataset", "output_dir"):
        if key not in config:
            raise ValueError(f"config missing required key {key!r}")
    config = dict(config)
    template = config.get("prompt_template", f"a photo of a {CLASS_PLACEHOLDER}")
    if CLASS_PLACEHOLDER not in template and "{}" not in template:
        raise ValueError(
            f"prompt_template must contain {CLASS_PLACEHOLDER!r} or '{{}}'"
        )
    config["prompt_template"] = template
    config.setdefault("split", "val")
    config.setdefault("subset_size", 200)
    config.setdefault("subset_seed", 0)
    config.setdefault("batch_size", 32)
    config.setdefault("benchmarks", [])
    config.setdefault("adapter", None)
    config.setdefault("run", {})
    return config


def load_config(path) -> dict:
    with open(path, "r", encoding="utf-8") as fh:
        return normalize_config(json.load(fh))


def _build_model(config):
    model = load_checkpoint(config["checkpoint"])
    adapter = config.get("adapter")
    if adapter:
        if adapter.get("kind", "lora") != "lora":
            raise ValueError(f"unknown adapter kind {adapter.get('kind')!r}")
        model.apply_lora(
            rank=adapter.get("rank", 8),
            alpha=adapter.get("alpha", 16.0),
            targets=tuple(adapter.get("targets", ("q_proj", "v_proj"))),
            state_path=adapter.get("state_path"),
        )
    return model


def run_probe(config: dict, ops=ALL_OPS) -> dict:
    """Execute the requested operations; returns a summary of artifacts."""
    config = normalize_config(config)
    out_dir = Path(config["output_dir"])
    out_dir.mkdir(parents=True, exist_ok=True)
    dataset = build_dataset(config["dataset"])
    n = min(config["subset_size"], len(dataset))
    subset_ids, warnings = fixed_eval_subset(
        dataset.image_ids, dataset.labels, n, config["subset_seed"]
    )
    id_to_index = {img_id: i for i, img_id in enumerate(dataset.image_ids)}
    indices = [id_to_index[i] for i in subset_ids]

    run = dict(config.get("run", {}))
    run_id = run.get("run_id", "probe_run")
    summary = {"run_id": run_id, "subset_size": len(subset_ids), "warnings": warnings}

    model = None
    if {"attention", "features", "zeroshot"} & set(ops):
        model = _build_model(config)

    if "subset" in ops:
        subset_path = out_dir / f"{run_id}.subset.json"
        with open(subset_path, "w", encoding="utf-8") as fh:
            json.dump(
                {"image_ids": subset_ids, "subset_seed": config["subset_seed"],
                 "warnings": warnings},
                fh, indent=2, sort_keys=True,
            )
            fh.write("\n")
        summary["subset"] = str(subset_path)

    meta = None
    if model is not None:
        meta = sidecar_meta(
            model_id=model.model_id,
            dataset=config["dataset"].get("kind", "dataset"),
            split=config["split"],
            run_id=run_id,
            method=run.get("method", "pretrained"),
            lr=float(run.get("lr", 0.0)),
            seed=int(run.get("seed", 0)),
            subset_seed=int(config["subset_seed"]),
            image_ids=subset_ids,
        )

    if "attention" in ops:
        values = extract_attention(model, dataset, indices, config["batch_size"])
        path = write_attention_dump(values, meta, out_dir / f"{run_id}.atdm")
        summary["attention_dump"] = str(path)
        summary["attention_shape"] = list(values.shape)

    if "features" in ops:
        values = extract_features(model, dataset, indices, config["batch_size"])
        path = write_feature_dump(values, meta, out_dir / f"{run_id}.ftdm")
        summary["feature_dump"] = str(path)
        summary["feature_shape"] = list(values.shape)

    zero_shot = {}
    if "zeroshot" in ops:
        for bench in config["benchmarks"]:
            bench_data = build_dataset(bench["dataset"])
            zero_shot[bench["name"]] = adapter_aware_zeroshot(
                model, bench_data, config["prompt_template"], config["batch_size"]
            )
        summary["zero_shot"] = zero_shot

    if "record" in ops:
        record = {
            "run_id": run_id,
            "dataset": config["dataset"].get("kind", "dataset"),
            "method": run.get("method", "pretrained"),
            "lr": float(run.get("lr", 0.0)),
            "seed": int(run.get("seed", 0)),
            "best_val_acc": float(run.get("best_val_acc", 0.0)),
            "zero_shot": zero_shot,
            "baseline_run_id": run.get("baseline_run_id", ""),
            "subset_seed": int(config["subset_seed"]),
        }
        path = write_run_record(record, out_dir / f"{run_id}.json")
        summary["run_record"] = str(path)

    return summary


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="attn-probe",
        description="Export attention/feature dumps and run records from "
                    "CLIP-style checkpoints.",
    )
    parser.add_argument("--config", required=True, help="probe configuration JSON")
    parser.add_argument(
        "--ops",
        default=",".join(ALL_OPS),
        help=f"comma-separated subset of {ALL_OPS}",
    )
    args = parser.parse_args(argv)
    ops = tuple(op.strip() for op in args.ops.split(",") if op.strip())
    unknown = set(ops) - set(ALL_OPS)
    if unknown:
        parser.error(f"unknown ops: {sorted(unknown)}")
    try:
        config = load_config(args.config)
        summary = run_probe(config, ops)
    except (ValueError, KeyError, OSError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    print(json.dumps(summary, indent=2, sort_keys=True))
    return 0


if __name__ == "__main__":
    sys.exit(main())
