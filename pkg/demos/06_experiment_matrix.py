"""Aggregate the bundled synthetic corpus: join run records with metric
reports, resolve baselines, and emit the method-summary table, per-layer
drift heatmaps, and correlation statistics.

Equivalent CLI:
    attn-drift aggregate --manifest corpus/manifest.json --out out/
    attn-drift report    --manifest corpus/manifest.json --format latex --out out/
"""

import json
from pathlib import Path

from attn_drift import MetricReport, build_run_matrix, read_run_record
from attn_drift.aggregate import (
    correlation_report,
    layer_heatmap,
    method_summary,
    summarize_cells,
)
from attn_drift.cka import CkaProfile
from attn_drift.tables import emit_method_summary

CORPUS = Path(__file__).resolve().parent.parent / "corpus"
manifest = json.loads((CORPUS / "manifest.json").read_text())

records = [read_run_record(CORPUS / p) for p in manifest["run_records"]]
reports = [
    MetricReport.from_json_dict(json.loads((CORPUS / p).read_text()))
    for p in manifest["metric_reports"]
]
baselines = {}
for p in manifest["baseline_reports"]:
    rep = MetricReport.from_json_dict(json.loads((CORPUS / p).read_text()))
    baselines[rep.run_id] = rep
cka = {
    rid: CkaProfile.from_json_dict(json.loads((CORPUS / p).read_text()))
    for rid, p in manifest["cka_profiles"].items()
}

matrix = build_run_matrix(records, reports, baselines, cka)
print(f"joined {matrix.completeness.n_joined} runs into {len(matrix.cells)} cells; "
      f"complete = {matrix.completeness.complete}\n")

print(emit_method_summary(method_summary(matrix), "markdown"))

cells = summarize_cells(matrix)
print("per-cell entropy drift (mean over seeds):")
for c in cells:
    print(f"  {c.dataset:8s} {c.method:10s} lr={c.lr:g}: "
          f"{c.means['dentropy_pct']:+.2f}% (n={c.n_seeds})")

grid = next(
    g for g in layer_heatmap(matrix, "entropy_bits")
    if (g.dataset, g.method) == ("pets", "full_ft")
)
print("\npets/full_ft layer-12 entropy drift by lr:")
for lr, row in zip(grid.lrs, grid.grid):
    print(f"  lr={lr:g}: {row[-1]:+.2f}%")

corr = correlation_report(matrix, "eurosat")
r = corr["entropy_vs_zero_shot"]["pearson"]["statistic"]
print(f"\neurosat entropy-drift vs zero-shot Pearson r = {r:+.3f} "
      f"over {corr['n_runs']} runs")
