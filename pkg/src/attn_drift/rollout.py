"""Attention rollout: head-averaged, identity-mixed layer matrices
composed across depth, plus CLS-row metrics of the composed map.

The residual mixing weight is fixed at 0.5 (M = 0.5 * mean_heads(A) +
0.5 * I) so outputs stay comparable across runs.  Composition applies
later layers on the left, so the rollout maps input tokens to final-layer
tokens.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dump_io import AttentionDump
from .errors import DegenerateInputError
from .metrics import DEGENERATE_MASS, erf_at, gini, shannon_entropy_bits

RESIDUAL_WEIGHT = 0.5
ROW_SUM_CHECK_TOL = 1e-6


@dataclass
class RolloutMatrix:
    """Row-stochastic [T, T] token-mixing matrix composed over ``depth`` layers."""

    values: np.ndarray
    depth: int

    @property
    def n_tokens(self) -> int:
        return self.values.shape[0]


def _check_stochastic(values: np.ndarray, context: str) -> None:
    sums = values.sum(axis=-1)
    worst = float(np.abs(sums - 1.0).max())
    if worst > ROW_SUM_CHECK_TOL:
        raise DegenerateInputError(
            f"{context}: row sums drift from 1 by {worst:.3e} (> {ROW_SUM_CHECK_TOL})"
        )


def layer_rollout_matrix(layer_attention) -> RolloutMatrix:
    """Head-average one layer, mix with the residual identity term, and
    renormalize rows.

    The renormalization is redundant for exactly stochastic inputs but
    keeps float drift and near-stochastic exports from compounding across
    depth.
    """
    attn = np.asarray(layer_attention, dtype=np.float64)
    if attn.ndim != 3 or attn.shape[1] != attn.shape[2]:
        raise DegenerateInputError(
            f"layer attention must be [H, T, T], got shape {attn.shape}"
        )
    if attn.shape[0] == 0:
        raise DegenerateInputError("layer attention has zero heads")
    mixed = RESIDUAL_WEIGHT * attn.mean(axis=0) + (1.0 - RESIDUAL_WEIGHT) * np.eye(
        attn.shape[1]
    )
    mixed /= mixed.sum(axis=-1, keepdims=True)
    return RolloutMatrix(values=mixed, depth=1)


def compose_rollout(layers: list[RolloutMatrix]) -> RolloutMatrix:
    """Compose per-layer rollout matrices across depth.

    ``layers[0]`` is the first (input-side) layer; the result is
    M_L @ ... @ M_1 with rows re-checked stochastic.
    """
    if not layers:
        raise DegenerateInputError("compose_rollout needs at least one matrix")
    n = layers[0].n_tokens
    for i, m in enumerate(layers):
        if m.values.shape != (n, n):
            raise DegenerateInputError(
                f"rollout matrix {i} has shape {m.values.shape}, expected {(n, n)}"
            )
    composed = layers[0].values
    for m in layers[1:]:
        composed = m.values @ composed
    _check_stochastic(composed, "composed rollout")
    return RolloutMatrix(values=composed, depth=sum(m.depth for m in layers))


def rollout_metrics(r: RolloutMatrix, erf_threshold: float = 0.95) -> dict:
    """Entropy/ERF@0.95/Gini of the rollout CLS row with the CLS column
    dropped and the remainder renormalized (mirrors the CLS-to-patch
    convention; the drop is a convention choice, documented here)."""
    cls_row = r.values[0]
    patches = cls_row[1:]
    mass = patches.sum()
    if mass < DEGENERATE_MASS:
        raise DegenerateInputError(
            "rollout CLS row carries no patch mass after dropping the CLS column"
        )
    p = patches / mass
    return {
        "entropy_bits": shannon_entropy_bits(p),
        "erf95": erf_at(p, erf_threshold),
        "gini": gini(p),
    }


def run_rollout_profile(dump: AttentionDump, erf_threshold: float = 0.95) -> dict:
    """Per-image rollout metrics averaged over images in ascending order."""
    dump.check_shape()
    per_image = []
    for i in range(dump.n_images):
        mats = [layer_rollout_matrix(dump.values[i, l]) for l in range(dump.n_layers)]
        per_image.append(rollout_metrics(compose_rollout(mats), erf_threshold))
    return {
        key: float(np.mean([m[key] for m in per_image]))
        for key in ("entropy_bits", "erf95", "gini")
    }
