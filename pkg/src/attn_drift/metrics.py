"""Structural attention measurements and drift versus a baseline.

All metrics operate on CLS-to-patch attention distributions (token 0
attending to tokens ``1:T``, renormalized over the patches) unless noted.
Entropies are in bits.  Reductions always run in ascending (image, layer,
head) index order so results are bit-deterministic.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .dump_io import AttentionDump
from .errors import DegenerateInputError, LayerMismatchError

METRIC_KEYS = ("entropy_bits", "erf95", "gini", "head_diversity", "p2p_entropy_bits")

ERF_THRESHOLD_EPS = 1e-12
DEGENERATE_MASS = 1e-12
DRIFT_BASELINE_FLOOR = 1e-9


def _as_prob_vector(p) -> np.ndarray:
    v = np.asarray(p, dtype=np.float64)
    if v.ndim != 1 or v.size < 1:
        raise DegenerateInputError(f"probability vector must be 1-D nonempty, got shape {v.shape}")
    return v


def _plogp_bits(p: np.ndarray) -> np.ndarray:
    # out= keeps masked slots at 0 rather than uninitialized memory
    out = np.zeros_like(p)
    np.log2(p, where=p > 0.0, out=out)
    out *= p
    return out


def cls_attention(dump: AttentionDump, image: int, layer: int, head: int) -> np.ndarray:
    """CLS-to-patch distribution: row 0 of the selected slice, CLS column
    dropped, renormalized to sum 1."""
    row = np.asarray(dump.values[image, layer, head, 0, 1:], dtype=np.float64)
    mass = row.sum()
    if mass < DEGENERATE_MASS:
        raise DegenerateInputError(
            f"all-zero CLS-to-patch mass at (image={image}, layer={layer}, head={head})"
        )
    return row / mass


def shannon_entropy_bits(p) -> float:
    """Shannon entropy in bits with the 0*log(0) = 0 convention."""
    v = _as_prob_vector(p)
    nz = v[v > 0.0]
    return float(-(nz * np.log2(nz)).sum())


def erf_at(p, threshold: float = 0.95) -> float:
    """Fraction of patches whose sorted attention mass reaches ``threshold``.

    The smallest count k with cumulative sorted-descending mass >=
    ``threshold - 1e-12`` is returned as k / P; the epsilon keeps exact
    threshold boundaries (e.g. the uniform distribution) from being pushed
    one entry too far by float rounding.
    """
    if not 0.0 < threshold <= 1.0:
        raise ValueError(f"threshold must be in (0, 1], got {threshold!r}")
    v = _as_prob_vector(p)
    cumulative = np.cumsum(np.sort(v)[::-1])
    k = int(np.searchsorted(cumulative, threshold - ERF_THRESHOLD_EPS, side="left")) + 1
    return min(k, v.size) / v.size


def gini(p) -> float:
    """Mean-absolute-difference concentration index.

    G = sum_ij |p_i - p_j| / (2 * P * sum(p)); 0 for uniform,
    (P-1)/P for one-hot.  Computed via the sorted-weights identity.
    """
    v = np.sort(_as_prob_vector(p))
    n = v.size
    total = v.sum()
    if total <= 0.0:
        raise DegenerateInputError("gini undefined for zero-mass vector")
    weights = 2.0 * np.arange(n, dtype=np.float64) - n + 1.0
    return float(weights @ v / (n * total))


def head_diversity(heads) -> float:
    """Mean pairwise cosine dissimilarity across per-head distributions."""
    mat = np.asarray(heads, dtype=np.float64)
    if mat.ndim != 2 or mat.shape[0] < 2:
        raise DegenerateInputError(
            f"head_diversity needs >= 2 heads of equal length, got shape {mat.shape}"
        )
    norms = np.linalg.norm(mat, axis=1)
    if np.any(norms == 0.0):
        raise DegenerateInputError("head_diversity undefined for a zero-norm head vector")
    cos = (mat @ mat.T) / np.outer(norms, norms)
    iu, ju = np.triu_indices(mat.shape[0], k=1)
    return float(np.mean(1.0 - cos[iu, ju]))


def patch_to_patch_entropy(dump: AttentionDump, image: int, layer: int) -> float:
    """Mean row entropy (bits) of CLS-excluded patch-to-patch attention,
    averaged over patch rows and then over heads."""
    block = np.asarray(dump.values[image, layer, :, 1:, 1:], dtype=np.float64)
    sums = block.sum(axis=-1)
    if np.any(sums < DEGENERATE_MASS):
        h, r = (int(v) for v in np.argwhere(sums < DEGENERATE_MASS)[0])
        raise DegenerateInputError(
            f"all-zero patch row at (image={image}, layer={layer}, head={h}, row={r + 1})"
        )
    row_entropy = -_plogp_bits(block / sums[..., None]).sum(axis=-1)
    return float(row_entropy.mean(axis=-1).mean())


def percent_drift(adapted: float, baseline: float) -> Optional[float]:
    """Percent change vs baseline; ``None`` when the baseline is too close
    to zero for the ratio to mean anything (never +/-inf)."""
    if abs(baseline) < DRIFT_BASELINE_FLOOR:
        return None
    return 100.0 * (adapted - baseline) / baseline


@dataclass
class LayerMetrics:
    """The five structural metrics for one layer (or their drift, in %)."""

    entropy_bits: Optional[float]
    erf95: Optional[float]
    gini: Optional[float]
    head_diversity: Optional[float]
    p2p_entropy_bits: Optional[float]

    def as_dict(self) -> dict:
        return {k: getattr(self, k) for k in METRIC_KEYS}

    @classmethod
    def from_dict(cls, obj: dict) -> "LayerMetrics":
        return cls(**{k: obj.get(k) for k in METRIC_KEYS})


@dataclass
class DriftBlock:
    per_layer: list[LayerMetrics]
    run_level: LayerMetrics

    def to_json_dict(self) -> dict:
        return {
            "per_layer": [
                {"layer": i + 1, **m.as_dict()} for i, m in enumerate(self.per_layer)
            ],
            "run_level": self.run_level.as_dict(),
        }

    @classmethod
    def from_json_dict(cls, obj: dict) -> "DriftBlock":
        return cls(
            per_layer=[LayerMetrics.from_dict(m) for m in obj["per_layer"]],
            run_level=LayerMetrics.from_dict(obj["run_level"]),
        )


@dataclass
class MetricReport:
    """Per-run structural profile, optionally with drift vs a baseline.

    ``rollout`` is an optional {entropy_bits, erf95, gini} block appended
    by the rollout stage.
    """

    run_id: str
    n_images: int
    per_layer: list[LayerMetrics]
    run_level: LayerMetrics
    drift: Optional[DriftBlock] = None
    rollout: Optional[dict] = None

    @property
    def n_layers(self) -> int:
        return len(self.per_layer)

    def to_json_dict(self) -> dict:
        return {
            "run_id": self.run_id,
            "n_images": self.n_images,
            "per_layer": [
                {"layer": i + 1, **m.as_dict()} for i, m in enumerate(self.per_layer)
            ],
            "run_level": self.run_level.as_dict(),
            "drift": self.drift.to_json_dict() if self.drift is not None else None,
            "rollout": self.rollout,
        }

    @classmethod
    def from_json_dict(cls, obj: dict) -> "MetricReport":
        drift = obj.get("drift")
        return cls(
            run_id=obj["run_id"],
            n_images=int(obj["n_images"]),
            per_layer=[LayerMetrics.from_dict(m) for m in obj["per_layer"]],
            run_level=LayerMetrics.from_dict(obj["run_level"]),
            drift=DriftBlock.from_json_dict(drift) if drift else None,
            rollout=obj.get("rollout"),
        )


def _cls_distributions(dump: AttentionDump) -> np.ndarray:
    """Renormalized CLS-to-patch rows for every (image, layer, head)."""
    rows = dump.values[:, :, :, 0, 1:].astype(np.float64)
    sums = rows.sum(axis=-1)
    if np.any(sums < DEGENERATE_MASS):
        i, l, h = (int(v) for v in np.argwhere(sums < DEGENERATE_MASS)[0])
        raise DegenerateInputError(
            f"all-zero CLS-to-patch mass at (image={i}, layer={l}, head={h})"
        )
    return rows / sums[..., None]


def _entropy_bits_nd(probs: np.ndarray) -> np.ndarray:
    return -_plogp_bits(probs).sum(axis=-1)


def _erf_nd(probs: np.ndarray, threshold: float) -> np.ndarray:
    cumulative = np.cumsum(np.sort(probs, axis=-1)[..., ::-1], axis=-1)
    counts = (cumulative < threshold - ERF_THRESHOLD_EPS).sum(axis=-1) + 1
    counts = np.minimum(counts, probs.shape[-1])
    return counts / probs.shape[-1]


def _gini_nd(probs: np.ndarray) -> np.ndarray:
    n = probs.shape[-1]
    ordered = np.sort(probs, axis=-1)
    weights = 2.0 * np.arange(n, dtype=np.float64) - n + 1.0
    return ordered @ weights / (n * probs.sum(axis=-1))


def _head_diversity_nd(probs: np.ndarray) -> np.ndarray:
    """Mean pairwise cosine dissimilarity over the head axis of
    [..., H, P] distributions."""
    n_heads = probs.shape[-2]
    if n_heads < 2:
        raise DegenerateInputError(
            f"head diversity needs >= 2 heads, dump has {n_heads}"
        )
    norms = np.linalg.norm(probs, axis=-1)
    cos = np.einsum("...hp,...gp->...hg", probs, probs)
    cos /= norms[..., :, None] * norms[..., None, :]
    iu, ju = np.triu_indices(n_heads, k=1)
    return (1.0 - cos[..., iu, ju]).mean(axis=-1)


def _p2p_entropy_nd(dump: AttentionDump) -> np.ndarray:
    block = dump.values[:, :, :, 1:, 1:].astype(np.float64)
    sums = block.sum(axis=-1)
    if np.any(sums < DEGENERATE_MASS):
        i, l, h, r = (int(v) for v in np.argwhere(sums < DEGENERATE_MASS)[0])
        raise DegenerateInputError(
            f"all-zero patch row at (image={i}, layer={l}, head={h}, row={r + 1})"
        )
    row_entropy = _entropy_bits_nd(block / sums[..., None])
    return row_entropy.mean(axis=-1)


def _drift_metrics(adapted: LayerMetrics, baseline: LayerMetrics) -> LayerMetrics:
    values = {}
    for key in METRIC_KEYS:
        a, b = getattr(adapted, key), getattr(baseline, key)
        values[key] = None if a is None or b is None else percent_drift(a, b)
    return LayerMetrics(**values)


def compute_drift(report: MetricReport, baseline: MetricReport) -> DriftBlock:
    """Percent drift of ``report`` against ``baseline``, per layer and at
    run level.  Run-level drift compares the layer-mean values, not the
    mean of per-layer drifts."""
    if report.n_layers != baseline.n_layers:
        raise LayerMismatchError(
            f"run {report.run_id!r} has {report.n_layers} layers, "
            f"baseline {baseline.run_id!r} has {baseline.n_layers}"
        )
    per_layer = [
        _drift_metrics(a, b) for a, b in zip(report.per_layer, baseline.per_layer)
    ]
    return DriftBlock(per_layer=per_layer, run_level=_drift_metrics(report.run_level, baseline.run_level))


def run_structural_profile(
    dump: AttentionDump,
    baseline: Optional[MetricReport] = None,
    erf_threshold: float = 0.95,
) -> MetricReport:
    """Full per-layer and run-level structural profile of one dump.

    Entropy, ERF@0.95 and Gini are computed per head and averaged over
    heads; head diversity is computed per (image, layer) across heads; all
    per-layer values are then averaged over images in ascending image
    order, and run-level values are the unweighted mean over layers.
    """
    dump.check_shape()
    probs = _cls_distributions(dump)  # [N, L, H, P]

    entropy = _entropy_bits_nd(probs).mean(axis=2).mean(axis=0)  # [L]
    erf = _erf_nd(probs, erf_threshold).mean(axis=2).mean(axis=0)
    gini_v = _gini_nd(probs).mean(axis=2).mean(axis=0)
    diversity = _head_diversity_nd(probs).mean(axis=0)
    p2p = _p2p_entropy_nd(dump).mean(axis=2).mean(axis=0)

    per_layer = [
        LayerMetrics(
            entropy_bits=float(entropy[l]),
            erf95=float(erf[l]),
            gini=float(gini_v[l]),
            head_diversity=float(diversity[l]),
            p2p_entropy_bits=float(p2p[l]),
        )
        for l in range(dump.n_layers)
    ]
    run_level = LayerMetrics(
        entropy_bits=float(entropy.mean()),
        erf95=float(erf.mean()),
        gini=float(gini_v.mean()),
        head_diversity=float(diversity.mean()),
        p2p_entropy_bits=float(p2p.mean()),
    )
    report = MetricReport(
        run_id=dump.meta.run_id,
        n_images=dump.n_images,
        per_layer=per_layer,
        run_level=run_level,
    )
    if baseline is not None:
        report.drift = compute_drift(report, baseline)
    return report
