"""Attention-drift diagnostics for adapted vision transformers.

Structural attention metrics (entropy, ERF@0.95, Gini, head diversity,
patch-to-patch entropy), attention rollout, layerwise linear CKA,
small-sample inference, and experiment-matrix aggregation over binary
attention/feature dumps and JSON run records.
"""

from .cka import CkaProfile, layerwise_cka_profile, linear_cka
from .dump_io import (
    AttentionDump,
    DumpMeta,
    FeatureDump,
    RunRecord,
    ValidationReport,
    read_attention_dump,
    read_feature_dump,
    read_run_record,
    validate_dump,
    write_attention_dump,
    write_feature_dump,
    write_run_record,
)
from .metrics import (
    DriftBlock,
    LayerMetrics,
    MetricReport,
    cls_attention,
    compute_drift,
    erf_at,
    gini,
    head_diversity,
    patch_to_patch_entropy,
    percent_drift,
    run_structural_profile,
    shannon_entropy_bits,
)
from .rollout import (
    RolloutMatrix,
    compose_rollout,
    layer_rollout_matrix,
    rollout_metrics,
    run_rollout_profile,
)
from .stats import (
    StatResult,
    coefficient_of_variation,
    cohens_d,
    exact_permutation_corr,
    holm_bonferroni,
    paired_t,
    pearson,
    spearman,
    student_t_two_sided_p,
    welch_t,
)
from .aggregate import (
    CellSummary,
    HeatmapGrid,
    JoinedRun,
    RunMatrix,
    aggregate_cell,
    build_run_matrix,
    correlation_report,
    layer_heatmap,
    method_summary,
    subset_sensitivity,
)

__version__ = "0.1.0"

__all__ = [
    "AttentionDump",
    "CellSummary",
    "CkaProfile",
    "DriftBlock",
    "DumpMeta",
    "FeatureDump",
    "HeatmapGrid",
    "JoinedRun",
    "LayerMetrics",
    "MetricReport",
    "RolloutMatrix",
    "RunMatrix",
    "RunRecord",
    "StatResult",
    "ValidationReport",
    "aggregate_cell",
    "build_run_matrix",
    "cls_attention",
    "coefficient_of_variation",
    "cohens_d",
    "compose_rollout",
    "compute_drift",
    "correlation_report",
    "erf_at",
    "exact_permutation_corr",
    "gini",
    "head_diversity",
    "holm_bonferroni",
    "layer_heatmap",
    "layer_rollout_matrix",
    "layerwise_cka_profile",
    "linear_cka",
    "method_summary",
    "paired_t",
    "patch_to_patch_entropy",
    "pearson",
    "percent_drift",
    "read_attention_dump",
    "read_feature_dump",
    "read_run_record",
    "rollout_metrics",
    "run_rollout_profile",
    "run_structural_profile",
    "shannon_entropy_bits",
    "spearman",
    "student_t_two_sided_p",
    "subset_sensitivity",
    "validate_dump",
    "welch_t",
    "write_attention_dump",
    "write_feature_dump",
    "write_run_record",
]
