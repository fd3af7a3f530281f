"""Experiment-matrix assembly and aggregation.

Joins run records with metric reports (and optional CKA profiles) into a
dataset x method x learning-rate x seed matrix, aggregates seed
statistics, computes drift/transfer correlations, and prepares the table
and figure data.  Missing runs become explicit completeness holes, never
imputed values.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .cka import CkaProfile
from .dump_io import RunRecord
from .errors import DegenerateInputError, DuplicateRunError, LayerMismatchError
from .metrics import MetricReport, compute_drift
from .stats import (
    cohens_d,
    coefficient_of_variation,
    exact_permutation_corr,
    pearson,
    spearman,
    welch_t,
)
from .tables import dataset_display, method_display

DRIFT_FIELDS = (
    ("dentropy_pct", "entropy_bits"),
    ("derf_pct", "erf95"),
    ("dgini_pct", "gini"),
    ("dhead_diversity_pct", "head_diversity"),
)

DEFAULT_TRANSFER_BENCHMARK = "cifar100"


@dataclass
class JoinedRun:
    record: RunRecord
    report: MetricReport
    cka: Optional[CkaProfile] = None

    @property
    def key(self) -> tuple[str, str, float, int]:
        r = self.record
        return (r.dataset, r.method, r.lr, r.seed)


@dataclass
class CompletenessReport:
    """Accounts for every input run exactly once: joined, or listed here."""

    n_records: int = 0
    n_joined: int = 0
    missing_cells: list[dict] = field(default_factory=list)
    records_without_report: list[str] = field(default_factory=list)
    unresolved_baselines: list[dict] = field(default_factory=list)
    unmatched_reports: list[str] = field(default_factory=list)

    @property
    def complete(self) -> bool:
        return (
            not self.missing_cells
            and not self.records_without_report
            and not self.unresolved_baselines
        )

    def to_json_dict(self) -> dict:
        return {
            "n_records": self.n_records,
            "n_joined": self.n_joined,
            "complete": self.complete,
            "missing_cells": self.missing_cells,
            "records_without_report": self.records_without_report,
            "unresolved_baselines": self.unresolved_baselines,
            "unmatched_reports": self.unmatched_reports,
        }


@dataclass
class RunMatrix:
    cells: dict[tuple[str, str, float], list[JoinedRun]]
    completeness: CompletenessReport

    @property
    def datasets(self) -> list[str]:
        return sorted({k[0] for k in self.cells})

    @property
    def methods(self) -> list[str]:
        return sorted({k[1] for k in self.cells})

    def lrs(self, dataset: str, method: str) -> list[float]:
        return sorted({k[2] for k in self.cells if k[0] == dataset and k[1] == method})

    def runs(self, dataset: str, method: Optional[str] = None) -> list[JoinedRun]:
        out = []
        for key in sorted(self.cells):
            if key[0] != dataset:
                continue
            if method is not None and key[1] != method:
                continue
            out.extend(self.cells[key])
        return out


def build_run_matrix(
    records: list[RunRecord],
    reports: list[MetricReport],
    baselines: dict[str, MetricReport],
    cka_profiles: Optional[dict[str, CkaProfile]] = None,
) -> RunMatrix:
    """Join records with reports and resolve baselines into a matrix.

    Reports without a drift block get one computed against the resolved
    baseline.  Records whose report or baseline cannot be resolved are
    excluded from the matrix and listed in the completeness report.
    """
    report_by_id: dict[str, MetricReport] = {}
    for rep in reports:
        if rep.run_id in report_by_id:
            raise DuplicateRunError(f"duplicate metric report for run_id {rep.run_id!r}")
        report_by_id[rep.run_id] = rep

    seen_run_ids: set[str] = set()
    seen_keys: set[tuple] = set()
    cells: dict[tuple[str, str, float], list[JoinedRun]] = {}
    comp = CompletenessReport(n_records=len(records))
    joined_report_ids: set[str] = set()
    cka_profiles = cka_profiles or {}

    for record in sorted(records, key=lambda r: (r.dataset, r.method, r.lr, r.seed)):
        if record.run_id in seen_run_ids:
            raise DuplicateRunError(f"duplicate run_id {record.run_id!r}")
        seen_run_ids.add(record.run_id)
        key4 = (record.dataset, record.method, record.lr, record.seed)
        if key4 in seen_keys:
            raise DuplicateRunError(
                f"duplicate run for (dataset, method, lr, seed) = {key4!r}"
            )
        seen_keys.add(key4)

        report = report_by_id.get(record.run_id)
        if report is None:
            comp.records_without_report.append(record.run_id)
            continue
        if report.drift is None:
            baseline = baselines.get(record.baseline_run_id)
            if baseline is None:
                comp.unresolved_baselines.append(
                    {"run_id": record.run_id, "baseline_run_id": record.baseline_run_id}
                )
                continue
            report = MetricReport(
                run_id=report.run_id,
                n_images=report.n_images,
                per_layer=report.per_layer,
                run_level=report.run_level,
                drift=compute_drift(report, baseline),
                rollout=report.rollout,
            )
        joined_report_ids.add(record.run_id)
        joined = JoinedRun(record=record, report=report, cka=cka_profiles.get(record.run_id))
        cells.setdefault(key4[:3], []).append(joined)

    for runs in cells.values():
        runs.sort(key=lambda j: j.record.seed)

    datasets = sorted({r.dataset for r in records})
    methods = sorted({r.method for r in records})
    lrs = sorted({r.lr for r in records})
    seeds = sorted({r.seed for r in records})
    present = {j.key for runs in cells.values() for j in runs}
    for d in datasets:
        for m in methods:
            for lr in lrs:
                for s in seeds:
                    if (d, m, lr, s) not in present:
                        comp.missing_cells.append(
                            {"dataset": d, "method": m, "lr": lr, "seed": s}
                        )
    comp.unmatched_reports = sorted(
        rid
        for rid in report_by_id
        if rid not in joined_report_ids and rid not in baselines
    )
    comp.n_joined = len(present)
    return RunMatrix(cells=cells, completeness=comp)


# ---------------------------------------------------------------------------
# aggregation


def _mean_std(values: list[Optional[float]]) -> tuple[Optional[float], Optional[float]]:
    """Mean and sample std over seeds; (None, None) if any value is missing
    (missing drift is reported as a hole, never averaged around)."""
    if any(v is None for v in values):
        return None, None
    arr = np.asarray(values, dtype=np.float64)
    mean = float(arr.mean())
    std = float(arr.std(ddof=1)) if arr.size > 1 else None
    return mean, std


@dataclass
class CellSummary:
    """Seed statistics for one (dataset, method, lr) cell."""

    dataset: str
    method: str
    lr: float
    n_seeds: int
    means: dict[str, Optional[float]]
    stds: dict[str, Optional[float]]

    def field_names(self) -> list[str]:
        return list(self.means)


def aggregate_cell(cell: list[JoinedRun]) -> CellSummary:
    """Per-field mean and sample std over the seeds of one cell."""
    if not cell:
        raise DegenerateInputError("aggregate_cell needs a nonempty cell")
    runs = sorted(cell, key=lambda j: j.record.seed)
    first = runs[0].record
    means: dict[str, Optional[float]] = {}
    stds: dict[str, Optional[float]] = {}

    means["best_val_acc"], stds["best_val_acc"] = _mean_std(
        [j.record.best_val_acc for j in runs]
    )
    benchmarks = sorted({b for j in runs for b in j.record.zero_shot})
    for bench in benchmarks:
        key = f"zs_{bench}"
        means[key], stds[key] = _mean_std(
            [j.record.zero_shot.get(bench) for j in runs]
        )
    for field_name, metric_key in DRIFT_FIELDS:
        values = [
            getattr(j.report.drift.run_level, metric_key) if j.report.drift else None
            for j in runs
        ]
        means[field_name], stds[field_name] = _mean_std(values)
    return CellSummary(
        dataset=first.dataset,
        method=first.method,
        lr=first.lr,
        n_seeds=len(runs),
        means=means,
        stds=stds,
    )


def summarize_cells(matrix: RunMatrix) -> list[CellSummary]:
    return [aggregate_cell(matrix.cells[key]) for key in sorted(matrix.cells)]


def method_summary(
    matrix: RunMatrix, benchmark: str = DEFAULT_TRANSFER_BENCHMARK
) -> list[dict]:
    """One row per (dataset, method): unweighted means over all runs of
    the group (pooled over learning rates and seeds)."""
    rows = []
    for dataset in matrix.datasets:
        for method in matrix.methods:
            runs = matrix.runs(dataset, method)
            if not runs:
                continue
            dentropy, _ = _mean_std(
                [
                    j.report.drift.run_level.entropy_bits if j.report.drift else None
                    for j in runs
                ]
            )
            derf, _ = _mean_std(
                [j.report.drift.run_level.erf95 if j.report.drift else None for j in runs]
            )
            acc, _ = _mean_std([j.record.best_val_acc for j in runs])
            zs, _ = _mean_std([j.record.zero_shot.get(benchmark) for j in runs])
            rows.append(
                {
                    "dataset": dataset,
                    "method": method,
                    "dataset_display": dataset_display(dataset),
                    "method_display": method_display(method),
                    "mean_dentropy_pct": dentropy,
                    "mean_derf_pct": derf,
                    "mean_best_val_acc": acc,
                    "mean_cifar100_zs": zs,
                    "n_runs": len(runs),
                }
            )
    if not rows:
        raise DegenerateInputError("method_summary over an empty matrix")
    return rows


@dataclass
class HeatmapGrid:
    """Mean per-layer drift per learning rate for one (dataset, method)."""

    dataset: str
    method: str
    metric: str
    lrs: list[float]
    grid: np.ndarray  # [n_lrs, n_layers]


def layer_heatmap(matrix: RunMatrix, metric: str = "entropy_bits") -> list[HeatmapGrid]:
    """Per (dataset, method): grid[lr, layer] = mean over seeds of the
    per-layer percent drift of ``metric``."""
    grids = []
    for dataset in matrix.datasets:
        for method in matrix.methods:
            lrs = matrix.lrs(dataset, method)
            if not lrs:
                continue
            n_layers = None
            rows = []
            for lr in lrs:
                per_seed = []
                for j in matrix.cells[(dataset, method, lr)]:
                    if j.report.drift is None:
                        raise DegenerateInputError(
                            f"run {j.record.run_id!r} has no drift block"
                        )
                    layers = [
                        getattr(m, metric) for m in j.report.drift.per_layer
                    ]
                    if any(v is None for v in layers):
                        raise DegenerateInputError(
                            f"run {j.record.run_id!r} has undefined per-layer drift"
                        )
                    if n_layers is None:
                        n_layers = len(layers)
                    elif len(layers) != n_layers:
                        raise LayerMismatchError(
                            f"run {j.record.run_id!r} has {len(layers)} layers, "
                            f"expected {n_layers}"
                        )
                    per_seed.append(layers)
                rows.append(np.asarray(per_seed, dtype=np.float64).mean(axis=0))
            grids.append(
                HeatmapGrid(
                    dataset=dataset,
                    method=method,
                    metric=metric,
                    lrs=lrs,
                    grid=np.vstack(rows),
                )
            )
    return grids


def heatmap_csv(grid: HeatmapGrid) -> str:
    header = ["lr"] + [f"layer_{i + 1}" for i in range(grid.grid.shape[1])]
    lines = [",".join(header)]
    for lr, row in zip(grid.lrs, grid.grid):
        lines.append(",".join([repr(float(lr))] + [repr(float(v)) for v in row]))
    return "\n".join(lines) + "\n"


def correlation_report(
    matrix: RunMatrix, dataset: str, benchmark: str = DEFAULT_TRANSFER_BENCHMARK
) -> dict:
    """Run-level correlations over all runs of one dataset: entropy drift
    vs transfer benchmark, entropy drift vs best val acc, and (when CKA
    profiles are joined) mean CKA vs entropy drift."""
    runs = [
        j
        for j in matrix.runs(dataset)
        if j.report.drift is not None and j.report.drift.run_level.entropy_bits is not None
    ]
    if len(runs) < 3:
        raise DegenerateInputError(
            f"correlation_report needs >= 3 usable runs for {dataset!r}, got {len(runs)}"
        )
    dentropy = [j.report.drift.run_level.entropy_bits for j in runs]
    out: dict = {"dataset": dataset, "n_runs": len(runs)}

    zs_pairs = [
        (d, j.record.zero_shot[benchmark])
        for d, j in zip(dentropy, runs)
        if benchmark in j.record.zero_shot
    ]
    if len(zs_pairs) >= 3:
        x = [p[0] for p in zs_pairs]
        y = [p[1] for p in zs_pairs]
        out["entropy_vs_zero_shot"] = {
            "benchmark": benchmark,
            "pearson": pearson(x, y).to_json_dict(),
            "spearman": spearman(x, y).to_json_dict(),
        }
    acc = [j.record.best_val_acc for j in runs]
    out["entropy_vs_val_acc"] = {
        "pearson": pearson(dentropy, acc).to_json_dict(),
        "spearman": spearman(dentropy, acc).to_json_dict(),
    }
    cka_pairs = [
        (j.cka.mean, d) for j, d in zip(runs, dentropy) if j.cka is not None
    ]
    if len(cka_pairs) >= 3:
        x = [p[0] for p in cka_pairs]
        y = [p[1] for p in cka_pairs]
        out["cka_vs_entropy"] = {
            "n_runs": len(cka_pairs),
            "pearson": pearson(x, y).to_json_dict(),
            "spearman": spearman(x, y).to_json_dict(),
        }
    return out


def subset_sensitivity(profiles: list[MetricReport]) -> dict[str, float]:
    """Coefficient of variation of run-level metric values across repeated
    evaluation-subset profiles of the same checkpoint."""
    if len(profiles) < 2:
        raise DegenerateInputError("subset_sensitivity needs >= 2 profiles")
    out = {}
    for key in ("entropy_bits", "erf95", "gini", "head_diversity", "p2p_entropy_bits"):
        values = [getattr(p.run_level, key) for p in profiles]
        if any(v is None for v in values):
            raise DegenerateInputError(f"profile missing run-level {key}")
        out[key] = coefficient_of_variation(values)
    return out


def inferential_stats(
    matrix: RunMatrix, perm_seed: int = 42, mc_draws: int = 100_000, max_exact_n: int = 8
) -> dict:
    """Method-contrast Welch tests (with Cohen's d) on run-level entropy
    drift, and exact permutation correlations of log10(lr) vs mean entropy
    drift when a dataset x method group spans >= 3 learning rates."""
    out: dict = {}
    for dataset in matrix.datasets:
        entry: dict = {"welch_dentropy": {}, "lr_perm_dentropy": {}}
        samples = {}
        for method in matrix.methods:
            runs = matrix.runs(dataset, method)
            values = [
                j.report.drift.run_level.entropy_bits
                for j in runs
                if j.report.drift and j.report.drift.run_level.entropy_bits is not None
            ]
            if len(values) >= 2:
                samples[method] = values
        methods = sorted(samples)
        for i, ma in enumerate(methods):
            for mb in methods[i + 1 :]:
                label = f"{ma}_vs_{mb}"
                try:
                    res = welch_t(samples[ma], samples[mb]).to_json_dict()
                    res["effect_size"] = cohens_d(samples[ma], samples[mb])
                    entry["welch_dentropy"][label] = res
                except DegenerateInputError as exc:
                    entry["welch_dentropy"][label] = {"error": str(exc)}

        for method in matrix.methods:
            lrs = matrix.lrs(dataset, method)
            if len(lrs) < 3:
                continue
            y = []
            for lr in lrs:
                cell = matrix.cells[(dataset, method, lr)]
                vals = [
                    j.report.drift.run_level.entropy_bits
                    for j in cell
                    if j.report.drift and j.report.drift.run_level.entropy_bits is not None
                ]
                if not vals:
                    break
                y.append(float(np.mean(vals)))
            if len(y) != len(lrs):
                continue
            x = [math.log10(lr) for lr in lrs]
            try:
                entry["lr_perm_dentropy"][method] = {
                    "pearson": exact_permutation_corr(
                        x, y, "pearson", max_exact_n, mc_draws, perm_seed
                    ).to_json_dict(),
                    "spearman": exact_permutation_corr(
                        x, y, "spearman", max_exact_n, mc_draws, perm_seed
                    ).to_json_dict(),
                }
            except DegenerateInputError as exc:
                entry["lr_perm_dentropy"][method] = {"error": str(exc)}
        out[dataset] = entry
    return out


# ---------------------------------------------------------------------------
# full-precision summary CSV (round-trips exactly; presentation rounding
# happens only in tables.py)


def summary_csv(summaries: list[CellSummary]) -> str:
    if not summaries:
        raise DegenerateInputError("summary_csv needs at least one cell")
    field_names: list[str] = []
    for s in summaries:
        for name in s.field_names():
            if name not in field_names:
                field_names.append(name)
    header = ["dataset", "method", "lr", "n_seeds"]
    for name in field_names:
        header += [f"{name}_mean", f"{name}_std"]
    lines = [",".join(header)]
    for s in summaries:
        row = [s.dataset, s.method, repr(float(s.lr)), str(s.n_seeds)]
        for name in field_names:
            mean = s.means.get(name)
            std = s.stds.get(name)
            row.append("" if mean is None else repr(float(mean)))
            row.append("" if std is None else repr(float(std)))
        lines.append(",".join(row))
    return "\n".join(lines) + "\n"


def parse_summary_csv(text: str) -> list[CellSummary]:
    """Inverse of :func:`summary_csv` (used by the round-trip checks)."""
    lines = [ln for ln in text.splitlines() if ln]
    header = lines[0].split(",")
    field_names = []
    for name in header[4:]:
        if name.endswith("_mean"):
            field_names.append(name[: -len("_mean")])
    out = []
    for line in lines[1:]:
        parts = line.split(",")
        means: dict[str, Optional[float]] = {}
        stds: dict[str, Optional[float]] = {}
        for i, name in enumerate(field_names):
            m = parts[4 + 2 * i]
            s = parts[5 + 2 * i]
            means[name] = float(m) if m else None
            stds[name] = float(s) if s else None
        out.append(
            CellSummary(
                dataset=parts[0],
                method=parts[1],
                lr=float(parts[2]),
                n_seeds=int(parts[3]),
                means=means,
                stds=stds,
            )
        )
    return out
