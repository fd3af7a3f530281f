"""Centered linear kernel alignment between layerwise feature dumps.

Linear (not RBF) CKA without debiasing: deterministic, and the standard
default for layerwise similarity.  Features are column-centered
(feature-wise), matching the centered-Gram equivalence
tr(Kc Lc) / sqrt(tr(Kc^2) tr(Lc^2)).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dump_io import FeatureDump, check_image_alignment
from .errors import DegenerateInputError, LayerMismatchError


@dataclass
class CkaProfile:
    """Per-layer linear CKA values and their unweighted mean."""

    per_layer: list[float]
    mean: float

    def to_json_dict(self) -> dict:
        return {"per_layer": self.per_layer, "mean": self.mean}

    @classmethod
    def from_json_dict(cls, obj: dict) -> "CkaProfile":
        return cls(per_layer=[float(v) for v in obj["per_layer"]], mean=float(obj["mean"]))


def linear_cka(x, y) -> float:
    """Linear CKA between two feature matrices over the same N inputs.

    ||Yc^T Xc||_F^2 / (||Xc^T Xc||_F * ||Yc^T Yc||_F) after column
    centering; invariant to orthogonal right-multiplication and isotropic
    scaling of either argument.
    """
    xm = np.asarray(x, dtype=np.float64)
    ym = np.asarray(y, dtype=np.float64)
    if xm.ndim != 2 or ym.ndim != 2:
        raise DegenerateInputError("linear_cka expects 2-D [N, D] matrices")
    if xm.shape[0] != ym.shape[0]:
        raise DegenerateInputError(
            f"sample counts differ: {xm.shape[0]} vs {ym.shape[0]}"
        )
    if xm.shape[0] < 2:
        raise DegenerateInputError("linear_cka needs at least 2 samples")
    if not (np.isfinite(xm).all() and np.isfinite(ym).all()):
        raise DegenerateInputError("linear_cka inputs must be finite")

    xc = xm - xm.mean(axis=0)
    yc = ym - ym.mean(axis=0)
    cross = np.linalg.norm(yc.T @ xc) ** 2
    denom = np.linalg.norm(xc.T @ xc) * np.linalg.norm(yc.T @ yc)
    if denom == 0.0:
        raise DegenerateInputError(
            "degenerate features: at least one matrix is constant per column"
        )
    return float(cross / denom)


def layerwise_cka_profile(a: FeatureDump, b: FeatureDump) -> CkaProfile:
    """Per-layer linear CKA between two aligned feature dumps.

    Image ordering is checked via the sidecar image_ids and never silently
    reordered.
    """
    if a.n_layers != b.n_layers:
        raise LayerMismatchError(
            f"feature dumps disagree on layer count: {a.n_layers} vs {b.n_layers}"
        )
    if a.n_images != b.n_images:
        raise DegenerateInputError(
            f"feature dumps disagree on image count: {a.n_images} vs {b.n_images}"
        )
    check_image_alignment(a.meta, b.meta)
    per_layer = [
        linear_cka(a.values[l], b.values[l]) for l in range(a.n_layers)
    ]
    return CkaProfile(per_layer=per_layer, mean=float(np.mean(per_layer)))
