"""Writers for the engine's wire formats: ATDM/FTDM binary dumps with
JSON sidecars, and run-record JSON.

The byte layout is the engine's external contract (little-endian header,
float32 payload); this module implements it directly so the probe stays
decoupled from the engine package.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

_ATDM = struct.Struct("<4sIIIIIB7x")
_FTDM = struct.Struct("<4sIIIIB7x")
FORMAT_VERSION = 1
DTYPE_FLOAT32 = 0


def sidecar_meta(
    model_id: str,
    dataset: str,
    split: str,
    run_id: str,
    method: str,
    lr: float,
    seed: int,
    subset_seed: int,
    image_ids: list[str],
) -> dict:
    return {
        "model_id": model_id,
        "dataset": dataset,
        "split": split,
        "run_id": run_id,
        "method": method,
        "lr": lr,
        "seed": seed,
        "subset_seed": subset_seed,
        "image_ids": list(image_ids),
    }


def _write_sidecar(path: Path, meta: dict) -> None:
    if len(meta["image_ids"]) == 0:
        raise ValueError("sidecar needs at least one image id")
    side = path.with_name(path.name + ".meta.json")
    with open(side, "w", encoding="utf-8") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True)
        fh.write("\n")


def write_attention_dump(values: np.ndarray, meta: dict, path) -> Path:
    """values: [n_images, n_layers, n_heads, n_tokens, n_tokens] float."""
    path = Path(path)
    if values.ndim != 5 or values.shape[3] != values.shape[4]:
        raise ValueError(f"attention values must be [N, L, H, T, T], got {values.shape}")
    n, l, h, t, _ = values.shape
    if len(meta["image_ids"]) != n:
        raise ValueError(f"{len(meta['image_ids'])} image ids for {n} images")
    payload = np.ascontiguousarray(values, dtype="<f4")
    header = _ATDM.pack(b"ATDM", FORMAT_VERSION, n, l, h, t, DTYPE_FLOAT32)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(header + payload.tobytes())
    _write_sidecar(path, meta)
    return path


def write_feature_dump(values: np.ndarray, meta: dict, path) -> Path:
    """values: [n_layers, n_images, dim] float."""
    path = Path(path)
    if values.ndim != 3:
        raise ValueError(f"feature values must be [L, N, D], got {values.shape}")
    if not np.isfinite(values).all():
        raise ValueError("feature values must be finite")
    l, n, d = values.shape
    if len(meta["image_ids"]) != n:
        raise ValueError(f"{len(meta['image_ids'])} image ids for {n} images")
    payload = np.ascontiguousarray(values, dtype="<f4")
    header = _FTDM.pack(b"FTDM", FORMAT_VERSION, l, n, d, DTYPE_FLOAT32)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(header + payload.tobytes())
    _write_sidecar(path, meta)
    return path


RUN_RECORD_REQUIRED = (
    "run_id",
    "dataset",
    "method",
    "lr",
    "seed",
    "best_val_acc",
    "zero_shot",
    "baseline_run_id",
)


def write_run_record(record: dict, path) -> Path:
    """Schema-checked run record consumable by the engine."""
    missing = [k for k in RUN_RECORD_REQUIRED if k not in record]
    if missing:
        raise ValueError(f"run record missing required keys: {missing}")
    for name, value in [("best_val_acc", record["best_val_acc"])] + list(
        record["zero_shot"].items()
    ):
        if not 0.0 <= float(value) <= 100.0:
            raise ValueError(f"percent field {name}={value!r} outside [0, 100]")
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(record, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return path
