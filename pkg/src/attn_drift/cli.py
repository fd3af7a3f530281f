"""Command-line entry point.

One subcommand per engine stage: ``validate``, ``metrics``, ``rollout``,
``cka``, ``stats``, ``aggregate``, ``report``.  Exit codes: 0 success,
1 validation/content failure (with a report written where applicable),
2 usage error.  Given identical inputs and the same ``--seed``, every
subcommand produces byte-identical outputs; multi-file stages process
inputs concurrently (capped by ``ATTN_DRIFT_THREADS``) and merge results
in sorted-path order.
"""

from __future__ import annotations

import argparse
import json
import os
import re
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

from . import aggregate as agg
from . import tables
from .cka import CkaProfile, layerwise_cka_profile
from .dump_io import (
    FEATURE_MAGIC,
    read_attention_dump,
    read_feature_dump,
    read_run_record,
    validate_dump,
)
from .errors import AttnDriftError
from .metrics import MetricReport, run_structural_profile
from .rollout import run_rollout_profile
from .stats import (
    cohens_d,
    cv_result,
    exact_permutation_corr,
    holm_bonferroni,
    paired_t,
    pearson,
    spearman,
    welch_t,
)

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_USAGE = 2


def _worker_count(n_items: int) -> int:
    cap = os.environ.get("ATTN_DRIFT_THREADS")
    if cap is not None:
        try:
            limit = max(1, int(cap))
        except ValueError:
            limit = 1
    else:
        limit = 4
    return max(1, min(limit, n_items))


def _map_sorted(fn, paths):
    """Apply ``fn`` over paths concurrently, returning results in
    sorted-path order regardless of completion order."""
    ordered = sorted(str(p) for p in paths)
    workers = _worker_count(len(ordered))
    if workers == 1 or len(ordered) == 1:
        return [(p, fn(p)) for p in ordered]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        results = list(pool.map(fn, ordered))
    return list(zip(ordered, results))


def _write_json(obj, path: Path) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _read_report(path) -> MetricReport:
    with open(path, "r", encoding="utf-8") as fh:
        return MetricReport.from_json_dict(json.load(fh))


def _slug(text: str) -> str:
    return re.sub(r"[^a-z0-9]+", "_", text.lower().replace("=", "")).strip("_")


# ---------------------------------------------------------------------------
# subcommands


def _cmd_validate(args) -> int:
    def check(path):
        with open(path, "rb") as fh:
            magic = fh.read(4)
        entry = {"path": path}
        try:
            if magic == FEATURE_MAGIC:
                read_feature_dump(path)
                entry.update(kind="feature", ok=True, n_violations=0)
            else:
                dump = read_attention_dump(path)
                report = validate_dump(dump, tol=args.tol)
                entry.update(
                    kind="attention",
                    ok=report.ok,
                    n_violations=report.n_violations,
                    report=report.to_json_dict(),
                )
                if not report.ok:
                    entry["first_violation"] = report.first_violation()
        except AttnDriftError as exc:
            entry.update(ok=False, error=str(exc))
        return entry

    entries = [entry for _, entry in _map_sorted(check, args.inputs)]
    result = {"tol": args.tol, "files": entries, "ok": all(e["ok"] for e in entries)}
    if args.out:
        _write_json(result, Path(args.out) / "validation.json")
    for e in entries:
        status = "OK" if e["ok"] else f"FAIL ({e.get('error') or e.get('first_violation')})"
        print(f"{e['path']}: {status}")
    return EXIT_OK if result["ok"] else EXIT_VALIDATION


def _cmd_metrics(args) -> int:
    baseline = _read_report(args.baseline) if args.baseline else None

    def compute(path):
        dump = read_attention_dump(path)
        report = run_structural_profile(dump, baseline, erf_threshold=args.threshold)
        if args.with_rollout:
            report.rollout = run_rollout_profile(dump, erf_threshold=args.threshold)
        return report

    out_dir = Path(args.out)
    for path, report in _map_sorted(compute, args.inputs):
        target = out_dir / f"{report.run_id}.report.json"
        _write_json(report.to_json_dict(), target)
        print(f"{path} -> {target}")
    return EXIT_OK


def _cmd_rollout(args) -> int:
    dump = read_attention_dump(args.input)
    metrics = run_rollout_profile(dump, erf_threshold=args.threshold)
    out_dir = Path(args.out)
    if args.report:
        report = _read_report(args.report)
        report.rollout = metrics
        target = out_dir / f"{report.run_id}.report.json"
        _write_json(report.to_json_dict(), target)
    else:
        target = out_dir / f"{dump.meta.run_id}.rollout.json"
        _write_json({"run_id": dump.meta.run_id, "rollout": metrics}, target)
    print(f"{args.input} -> {target}")
    return EXIT_OK


def _cmd_cka(args) -> int:
    fa = read_feature_dump(args.a)
    fb = read_feature_dump(args.b)
    profile = layerwise_cka_profile(fa, fb)
    target = Path(args.out) / f"{fa.meta.run_id}__vs__{fb.meta.run_id}.cka.json"
    _write_json(
        {
            "run_id_a": fa.meta.run_id,
            "run_id_b": fb.meta.run_id,
            **profile.to_json_dict(),
        },
        target,
    )
    print(f"{args.a} vs {args.b} -> {target}")
    return EXIT_OK


_STAT_KINDS = (
    "welch_t",
    "paired_t",
    "cohens_d",
    "pearson",
    "spearman",
    "perm_pearson",
    "perm_spearman",
    "cv",
)


def _run_stat_spec(spec: dict, args) -> dict:
    kind = spec.get("kind")
    if kind not in _STAT_KINDS:
        raise AttnDriftError(f"unknown test kind {kind!r}, expected one of {_STAT_KINDS}")
    if kind == "welch_t":
        res = welch_t(spec["a"], spec["b"]).to_json_dict()
        res["effect_size"] = cohens_d(spec["a"], spec["b"])
        return res
    if kind == "paired_t":
        return paired_t(spec["a"], spec["b"]).to_json_dict()
    if kind == "cohens_d":
        return {"test": "cohens_d", "statistic": cohens_d(spec["a"], spec["b"])}
    if kind == "pearson":
        return pearson(spec["x"], spec["y"]).to_json_dict()
    if kind == "spearman":
        return spearman(spec["x"], spec["y"]).to_json_dict()
    if kind == "cv":
        return cv_result(spec["values"]).to_json_dict()
    corr_kind = kind.removeprefix("perm_")
    return exact_permutation_corr(
        spec["x"],
        spec["y"],
        corr_kind,
        max_exact_n=spec.get("max_exact_n", args.max_exact_n),
        mc_draws=spec.get("mc_draws", args.mc_draws),
        rng_seed=args.seed,
    ).to_json_dict()


def _cmd_stats(args) -> int:
    with open(args.input, "r", encoding="utf-8") as fh:
        payload = json.load(fh)
    tests = payload.get("tests", [])
    if not tests:
        raise AttnDriftError(f"{args.input}: no tests requested")
    results = {}
    rows = []
    for spec in tests:
        label = spec.get("label") or f"test_{len(results)}"
        if label in results:
            raise AttnDriftError(f"duplicate test label {label!r}")
        results[label] = _run_stat_spec(spec, args)
        rows.append(
            {
                "comparison": label,
                "test": results[label]["test"],
                "statistic": results[label].get("statistic"),
                "p_value": results[label].get("p_value"),
                "p_holm": None,
            }
        )

    holm = {}
    for family in payload.get("holm_families", []):
        members = family["members"]
        missing = [m for m in members if m not in results]
        if missing:
            raise AttnDriftError(f"holm family references unknown labels {missing}")
        p_raw = []
        for m in members:
            p = results[m].get("p_value")
            if p is None:
                raise AttnDriftError(f"holm member {m!r} has no p-value")
            p_raw.append(p)
        adjusted = holm_bonferroni(p_raw, labels=members)
        holm[family.get("label", "family")] = dict(zip(members, adjusted))
        for row in rows:
            if row["comparison"] in members:
                row["p_holm"] = holm[family.get("label", "family")][row["comparison"]]

    out_dir = Path(args.out)
    _write_json({"results": results, "holm": holm}, out_dir / "stats.json")
    ext = {"csv": "csv", "markdown": "md", "latex": "tex"}[args.format]
    table_text = tables.emit_stat_rows(rows, args.format)
    table_path = out_dir / f"stats_table.{ext}"
    table_path.parent.mkdir(parents=True, exist_ok=True)
    table_path.write_text(table_text, encoding="utf-8")
    print(table_text, end="")
    return EXIT_OK


def _load_manifest(path):
    manifest_path = Path(path)
    with open(manifest_path, "r", encoding="utf-8") as fh:
        manifest = json.load(fh)
    base = manifest_path.parent

    def resolve(p):
        candidate = Path(p)
        return candidate if candidate.is_absolute() else base / candidate

    records = [read_run_record(resolve(p)) for p in manifest.get("run_records", [])]
    reports = [_read_report(resolve(p)) for p in manifest.get("metric_reports", [])]
    baselines = {}
    for p in manifest.get("baseline_reports", []):
        rep = _read_report(resolve(p))
        baselines[rep.run_id] = rep
    cka_profiles = {}
    for run_id, p in sorted(manifest.get("cka_profiles", {}).items()):
        with open(resolve(p), "r", encoding="utf-8") as fh:
            cka_profiles[run_id] = CkaProfile.from_json_dict(json.load(fh))
    return records, reports, baselines, cka_profiles


def _build_matrix(args):
    records, reports, baselines, cka_profiles = _load_manifest(args.manifest)
    return agg.build_run_matrix(records, reports, baselines, cka_profiles)


def _cmd_aggregate(args) -> int:
    matrix = _build_matrix(args)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)

    summaries = agg.summarize_cells(matrix)
    (out_dir / "summary.csv").write_text(agg.summary_csv(summaries), encoding="utf-8")
    _write_json(matrix.completeness.to_json_dict(), out_dir / "completeness.json")

    correlations = {}
    for dataset in matrix.datasets:
        try:
            correlations[dataset] = agg.correlation_report(
                matrix, dataset, benchmark=args.benchmark
            )
        except AttnDriftError as exc:
            correlations[dataset] = {"error": str(exc)}
    _write_json(correlations, out_dir / "correlations.json")

    _write_json(
        agg.inferential_stats(
            matrix, perm_seed=args.seed, mc_draws=args.mc_draws, max_exact_n=args.max_exact_n
        ),
        out_dir / "stats.json",
    )

    for grid in agg.layer_heatmap(matrix, metric=args.heatmap_metric):
        name = f"layer_heatmap_{_slug(grid.dataset)}_{_slug(grid.method)}.csv"
        (out_dir / name).write_text(agg.heatmap_csv(grid), encoding="utf-8")

    print(f"aggregated {matrix.completeness.n_joined} runs -> {out_dir}")
    if not matrix.completeness.complete:
        print(
            f"completeness: {len(matrix.completeness.missing_cells)} missing cells, "
            f"{len(matrix.completeness.records_without_report)} records without report, "
            f"{len(matrix.completeness.unresolved_baselines)} unresolved baselines"
        )
        return EXIT_VALIDATION
    return EXIT_OK


def _cmd_report(args) -> int:
    matrix = _build_matrix(args)
    rows = agg.method_summary(matrix, benchmark=args.benchmark)
    text = tables.emit_method_summary(rows, args.format)
    ext = {"csv": "csv", "markdown": "md", "latex": "tex"}[args.format]
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    target = out_dir / f"method_summary.{ext}"
    target.write_text(text, encoding="utf-8")
    print(text, end="")
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="attn-drift",
        description=(
            "Attention-drift diagnostics: validate attention/feature dumps, "
            "compute structural metrics and drift, rollout and CKA summaries, "
            "run small-sample inference, and aggregate experiment matrices."
        ),
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="audit dump files against the format contract")
    p.add_argument("--in", dest="inputs", nargs="+", required=True, help="dump files")
    p.add_argument("--tol", type=float, default=1e-4, help="row-sum tolerance (default 1e-4)")
    p.add_argument("--out", help="directory for validation.json")
    p.set_defaults(func=_cmd_validate)

    p = sub.add_parser("metrics", help="structural profile (and drift) of attention dumps")
    p.add_argument("--in", dest="inputs", nargs="+", required=True, help="ATDM files")
    p.add_argument("--baseline", help="baseline MetricReport JSON for drift")
    p.add_argument("--threshold", type=float, default=0.95, help="ERF mass threshold")
    p.add_argument("--with-rollout", action="store_true", help="append rollout metrics")
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=_cmd_metrics)

    p = sub.add_parser("rollout", help="attention-rollout metrics of one dump")
    p.add_argument("--in", dest="input", required=True, help="ATDM file")
    p.add_argument("--report", help="existing MetricReport JSON to append rollout to")
    p.add_argument("--threshold", type=float, default=0.95, help="ERF mass threshold")
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=_cmd_rollout)

    p = sub.add_parser("cka", help="layerwise linear CKA between two feature dumps")
    p.add_argument("--a", required=True, help="first FTDM file")
    p.add_argument("--b", required=True, help="second FTDM file")
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=_cmd_cka)

    p = sub.add_parser("stats", help="run inferential tests from a JSON spec")
    p.add_argument("--in", dest="input", required=True, help="tests JSON")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--format", choices=tables.FORMATS, default="markdown")
    p.add_argument("--seed", type=int, default=42, help="Monte Carlo seed")
    p.add_argument("--max-exact-n", type=int, default=8)
    p.add_argument("--mc-draws", type=int, default=100_000)
    p.set_defaults(func=_cmd_stats)

    p = sub.add_parser("aggregate", help="build the run matrix and emit data files")
    p.add_argument("--manifest", required=True, help="corpus manifest JSON")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--benchmark", default="cifar100", help="transfer benchmark key")
    p.add_argument("--heatmap-metric", default="entropy_bits")
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("--max-exact-n", type=int, default=8)
    p.add_argument("--mc-draws", type=int, default=100_000)
    p.set_defaults(func=_cmd_aggregate)

    p = sub.add_parser("report", help="emit the method-summary table")
    p.add_argument("--manifest", required=True, help="corpus manifest JSON")
    p.add_argument("--format", choices=tables.FORMATS, default="csv")
    p.add_argument("--benchmark", default="cifar100", help="transfer benchmark key")
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=_cmd_report)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except AttnDriftError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
