"""Readers and writers for the attention/feature dump containers and the
run-record JSON schema.

Binary layout (all integers and floats little-endian):

* attention dump: ``ATDM`` magic, ``u32`` version (=1), four ``u32`` dims
  (n_images, n_layers, n_heads, n_tokens), ``u8`` dtype code (0 = float32),
  7 reserved zero bytes, then the float32 payload in image-major order
  (image, layer, head, query row, key column).
* feature dump: ``FTDM`` magic, ``u32`` version (=1), three ``u32`` dims
  (n_layers, n_images, dim), ``u8`` dtype code, 7 reserved bytes, payload
  in layer-major order.

A JSON sidecar at ``<path>.meta.json`` carries the :class:`DumpMeta`.
Dumps are loaded whole; there is no streaming or compression.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import (
    AlignmentError,
    BadMagicError,
    DumpFormatError,
    MissingSidecarError,
    PayloadSizeError,
    PayloadValidationError,
    SchemaValidationError,
    UnsupportedVersionError,
)

ATTENTION_MAGIC = b"ATDM"
FEATURE_MAGIC = b"FTDM"
FORMAT_VERSION = 1
DTYPE_FLOAT32 = 0

_ATDM_HEADER = struct.Struct("<4sIIIIIB7x")
_FTDM_HEADER = struct.Struct("<4sIIIIB7x")

ROW_SUM_TOL = 1e-4
ENTRY_UPPER_TOL = 1e-6

METHOD_BASES = ("pretrained", "full_ft", "lora")

RUN_RECORD_REQUIRED_KEYS = (
    "run_id",
    "dataset",
    "method",
    "lr",
    "seed",
    "best_val_acc",
    "zero_shot",
    "baseline_run_id",
)


def method_base(method: str) -> str:
    """Base adaptation method, stripping an optional ``:variant`` tag."""
    return method.split(":", 1)[0]


@dataclass(frozen=True)
class DumpMeta:
    """Identity of one exported run; stored in the sidecar."""

    model_id: str
    dataset: str
    split: str
    run_id: str
    method: str
    lr: float
    seed: int
    subset_seed: int
    image_ids: tuple[str, ...]

    def validate(self, n_images: int) -> None:
        if not self.run_id:
            raise SchemaValidationError("meta.run_id must be nonempty")
        base = method_base(self.method)
        if base not in METHOD_BASES:
            raise SchemaValidationError(
                f"meta.method base {base!r} not one of {METHOD_BASES}"
            )
        if base != "pretrained" and not self.lr > 0:
            raise SchemaValidationError(
                f"meta.lr must be > 0 for adapted runs, got {self.lr!r}"
            )
        if len(self.image_ids) != n_images:
            raise SchemaValidationError(
                f"meta.image_ids has {len(self.image_ids)} entries, "
                f"dump holds {n_images} images"
            )

    def to_json_dict(self) -> dict:
        return {
            "model_id": self.model_id,
            "dataset": self.dataset,
            "split": self.split,
            "run_id": self.run_id,
            "method": self.method,
            "lr": self.lr,
            "seed": self.seed,
            "subset_seed": self.subset_seed,
            "image_ids": list(self.image_ids),
        }

    @classmethod
    def from_json_dict(cls, obj: dict) -> "DumpMeta":
        try:
            return cls(
                model_id=obj["model_id"],
                dataset=obj["dataset"],
                split=obj["split"],
                run_id=obj["run_id"],
                method=obj["method"],
                lr=float(obj["lr"]),
                seed=int(obj["seed"]),
                subset_seed=int(obj["subset_seed"]),
                image_ids=tuple(obj["image_ids"]),
            )
        except KeyError as exc:
            raise SchemaValidationError(f"sidecar missing key {exc.args[0]!r}") from None


@dataclass
class AttentionDump:
    """Per-run post-softmax attention tensor [images, layers, heads, T, T].

    Token 0 is CLS; the remaining ``n_tokens - 1`` tokens are spatial
    patches.  Every [T, T] slice is expected to be row-stochastic; that is
    enforced by :func:`write_attention_dump` and audited by
    :func:`validate_dump`, not by construction.
    """

    values: np.ndarray
    meta: DumpMeta

    @property
    def n_images(self) -> int:
        return self.values.shape[0]

    @property
    def n_layers(self) -> int:
        return self.values.shape[1]

    @property
    def n_heads(self) -> int:
        return self.values.shape[2]

    @property
    def n_tokens(self) -> int:
        return self.values.shape[3]

    @property
    def n_patches(self) -> int:
        return self.n_tokens - 1

    def check_shape(self) -> None:
        if self.values.ndim != 5:
            raise PayloadValidationError(
                f"attention values must be 5-D, got ndim={self.values.ndim}"
            )
        if self.values.shape[3] != self.values.shape[4]:
            raise PayloadValidationError(
                f"attention slices must be square, got {self.values.shape[3:]}"
            )
        n, l, h, t, _ = self.values.shape
        if n < 1 or l < 1 or h < 1 or t < 2:
            raise PayloadValidationError(
                f"shape {self.values.shape} violates n_images>=1, L>=1, H>=1, T>=2"
            )
        self.meta.validate(n)


@dataclass
class FeatureDump:
    """Per-run layerwise feature matrix [layers, images, dim]."""

    values: np.ndarray
    meta: DumpMeta

    @property
    def n_layers(self) -> int:
        return self.values.shape[0]

    @property
    def n_images(self) -> int:
        return self.values.shape[1]

    @property
    def dim(self) -> int:
        return self.values.shape[2]

    def check_shape(self) -> None:
        if self.values.ndim != 3:
            raise PayloadValidationError(
                f"feature values must be 3-D, got ndim={self.values.ndim}"
            )
        self.meta.validate(self.values.shape[1])


@dataclass
class RunRecord:
    """Scalar outcomes of one training run, parsed from JSON.

    Unknown keys are preserved in ``extras`` and written back on
    serialization so the schema can trail the training code.
    """

    run_id: str
    dataset: str
    method: str
    lr: float
    seed: int
    best_val_acc: float
    zero_shot: dict[str, float]
    baseline_run_id: str
    extras: dict = field(default_factory=dict)

    @property
    def method_base(self) -> str:
        return method_base(self.method)

    def to_json_dict(self) -> dict:
        obj = {
            "run_id": self.run_id,
            "dataset": self.dataset,
            "method": self.method,
            "lr": self.lr,
            "seed": self.seed,
            "best_val_acc": self.best_val_acc,
            "zero_shot": dict(self.zero_shot),
            "baseline_run_id": self.baseline_run_id,
        }
        obj.update(self.extras)
        return obj


# ---------------------------------------------------------------------------
# binary containers


def _sidecar_path(path) -> Path:
    path = Path(path)
    return path.with_name(path.name + ".meta.json")


def _read_header(raw: bytes, header: struct.Struct, magic: bytes, path) -> tuple:
    if len(raw) < header.size:
        raise PayloadSizeError(
            f"{path}: file has {len(raw)} bytes, header alone needs {header.size}"
        )
    fields = header.unpack_from(raw)
    if fields[0] != magic:
        raise BadMagicError(f"{path}: magic {fields[0]!r}, expected {magic!r}")
    if fields[1] != FORMAT_VERSION:
        raise UnsupportedVersionError(
            f"{path}: version {fields[1]}, this reader supports {FORMAT_VERSION}"
        )
    if fields[-1] != DTYPE_FLOAT32:
        raise DumpFormatError(f"{path}: dtype code {fields[-1]}, only 0 (float32) supported")
    return fields


def _read_payload(raw: bytes, header_size: int, shape: tuple[int, ...], path) -> np.ndarray:
    count = int(np.prod(shape, dtype=np.int64))
    expected = header_size + 4 * count
    if len(raw) != expected:
        raise PayloadSizeError(
            f"{path}: expected {expected} bytes (header {header_size} + "
            f"{count} float32), got {len(raw)}"
        )
    flat = np.frombuffer(raw, dtype="<f4", count=count, offset=header_size)
    return flat.reshape(shape)


def _load_sidecar(path) -> DumpMeta:
    sidecar = _sidecar_path(path)
    if not sidecar.exists():
        raise MissingSidecarError(f"{path}: sidecar {sidecar} not found")
    with open(sidecar, "r", encoding="utf-8") as fh:
        return DumpMeta.from_json_dict(json.load(fh))


def read_attention_dump(path) -> AttentionDump:
    """Load an ``ATDM`` file and its sidecar.

    Content-level stochasticity is deliberately not enforced here, so that
    corrupted exports can still be loaded and audited by
    :func:`validate_dump`.
    """
    raw = Path(path).read_bytes()
    _, _, n_images, n_layers, n_heads, n_tokens, _ = _read_header(
        raw, _ATDM_HEADER, ATTENTION_MAGIC, path
    )
    values = _read_payload(
        raw, _ATDM_HEADER.size, (n_images, n_layers, n_heads, n_tokens, n_tokens), path
    )
    dump = AttentionDump(values=values, meta=_load_sidecar(path))
    dump.check_shape()
    return dump


def write_attention_dump(dump: AttentionDump, path) -> None:
    """Write an ``ATDM`` file plus sidecar, refusing invariant violations.

    Rows must be stochastic within ``ROW_SUM_TOL`` and entries within
    ``[0, 1 + ENTRY_UPPER_TOL]``; the first offending (image, layer, head,
    row) index is named in the refusal.
    """
    dump.check_shape()
    report = validate_dump(dump, tol=ROW_SUM_TOL)
    if not report.ok:
        raise PayloadValidationError(
            f"refusing to write {path}: {report.first_violation()}"
        )
    values = np.ascontiguousarray(dump.values, dtype="<f4")
    header = _ATDM_HEADER.pack(
        ATTENTION_MAGIC,
        FORMAT_VERSION,
        dump.n_images,
        dump.n_layers,
        dump.n_heads,
        dump.n_tokens,
        DTYPE_FLOAT32,
    )
    Path(path).write_bytes(header + values.tobytes())
    with open(_sidecar_path(path), "w", encoding="utf-8") as fh:
        json.dump(dump.meta.to_json_dict(), fh, indent=2, sort_keys=True)
        fh.write("\n")


def read_feature_dump(path) -> FeatureDump:
    """Load an ``FTDM`` file and its sidecar; NaN/Inf payloads are rejected."""
    raw = Path(path).read_bytes()
    _, _, n_layers, n_images, dim, _ = _read_header(raw, _FTDM_HEADER, FEATURE_MAGIC, path)
    values = _read_payload(raw, _FTDM_HEADER.size, (n_layers, n_images, dim), path)
    bad = ~np.isfinite(values)
    if bad.any():
        idx = tuple(int(i) for i in np.argwhere(bad)[0])
        raise PayloadValidationError(
            f"{path}: non-finite value at (layer, image, dim)={idx}"
        )
    fd = FeatureDump(values=values, meta=_load_sidecar(path))
    fd.check_shape()
    return fd


def write_feature_dump(fd: FeatureDump, path) -> None:
    fd.check_shape()
    bad = ~np.isfinite(fd.values)
    if bad.any():
        idx = tuple(int(i) for i in np.argwhere(bad)[0])
        raise PayloadValidationError(
            f"refusing to write {path}: non-finite value at (layer, image, dim)={idx}"
        )
    values = np.ascontiguousarray(fd.values, dtype="<f4")
    header = _FTDM_HEADER.pack(
        FEATURE_MAGIC, FORMAT_VERSION, fd.n_layers, fd.n_images, fd.dim, DTYPE_FLOAT32
    )
    Path(path).write_bytes(header + values.tobytes())
    with open(_sidecar_path(path), "w", encoding="utf-8") as fh:
        json.dump(fd.meta.to_json_dict(), fh, indent=2, sort_keys=True)
        fh.write("\n")


def check_image_alignment(a_meta: DumpMeta, b_meta: DumpMeta) -> None:
    """Raise unless two dumps index the same images in the same order."""
    if a_meta.image_ids != b_meta.image_ids:
        raise AlignmentError(
            f"image_ids mismatch between runs {a_meta.run_id!r} and "
            f"{b_meta.run_id!r}; refusing to pair misaligned dumps"
        )


# ---------------------------------------------------------------------------
# content validation


@dataclass
class ValidationReport:
    """Outcome of a content audit; empty report <=> dump valid.

    ``row_sums`` lists (image, layer, head, row, sum) for rows whose mass
    deviates from 1 beyond the tolerance; ``negative_entries`` and
    ``oversize_entries`` list (image, layer, head, row, col, value);
    ``nonfinite_entries`` lists NaN/Inf coordinates.
    """

    tol: float
    row_sums: list[tuple[int, int, int, int, float]] = field(default_factory=list)
    negative_entries: list[tuple[int, int, int, int, int, float]] = field(default_factory=list)
    oversize_entries: list[tuple[int, int, int, int, int, float]] = field(default_factory=list)
    nonfinite_entries: list[tuple[int, int, int, int, int]] = field(default_factory=list)

    @property
    def n_violations(self) -> int:
        return (
            len(self.row_sums)
            + len(self.negative_entries)
            + len(self.oversize_entries)
            + len(self.nonfinite_entries)
        )

    @property
    def ok(self) -> bool:
        return self.n_violations == 0

    def first_violation(self) -> str:
        if self.nonfinite_entries:
            return f"non-finite entry at (image, layer, head, row, col)={self.nonfinite_entries[0]}"
        if self.negative_entries:
            *idx, v = self.negative_entries[0]
            return f"negative entry {v!r} at (image, layer, head, row, col)={tuple(idx)}"
        if self.oversize_entries:
            *idx, v = self.oversize_entries[0]
            return f"entry {v!r} > 1 at (image, layer, head, row, col)={tuple(idx)}"
        if self.row_sums:
            *idx, s = self.row_sums[0]
            return f"row sum {s!r} at (image, layer, head, row)={tuple(idx)}"
        return "no violations"

    def to_json_dict(self) -> dict:
        return {
            "tol": self.tol,
            "n_violations": self.n_violations,
            "row_sums": [list(v) for v in self.row_sums],
            "negative_entries": [list(v) for v in self.negative_entries],
            "oversize_entries": [list(v) for v in self.oversize_entries],
            "nonfinite_entries": [list(v) for v in self.nonfinite_entries],
        }


def validate_dump(dump: AttentionDump, tol: float = ROW_SUM_TOL) -> ValidationReport:
    """Audit an attention dump; reports, never raises, on content issues."""
    report = ValidationReport(tol=tol)
    values = dump.values.astype(np.float64, copy=False)

    bad = ~np.isfinite(values)
    for idx in np.argwhere(bad):
        report.nonfinite_entries.append(tuple(int(i) for i in idx))
    finite = np.where(np.isfinite(values), values, 0.0)

    for idx in np.argwhere(finite < 0.0):
        i, l, h, r, c = (int(v) for v in idx)
        report.negative_entries.append((i, l, h, r, c, float(values[i, l, h, r, c])))
    for idx in np.argwhere(finite > 1.0 + ENTRY_UPPER_TOL):
        i, l, h, r, c = (int(v) for v in idx)
        report.oversize_entries.append((i, l, h, r, c, float(values[i, l, h, r, c])))

    sums = finite.sum(axis=-1)
    for idx in np.argwhere(np.abs(sums - 1.0) > tol):
        i, l, h, r = (int(v) for v in idx)
        report.row_sums.append((i, l, h, r, float(sums[i, l, h, r])))
    return report


# ---------------------------------------------------------------------------
# run records


def _check_percent(name: str, value, path) -> float:
    try:
        v = float(value)
    except (TypeError, ValueError):
        raise SchemaValidationError(f"{path}: {name} is not a number: {value!r}") from None
    if not 0.0 <= v <= 100.0:
        raise SchemaValidationError(f"{path}: {name}={v!r} outside [0, 100]")
    return v


def parse_run_record(obj: dict, path="<memory>") -> RunRecord:
    """Validate a decoded run-record object; unknown keys are preserved."""
    for key in RUN_RECORD_REQUIRED_KEYS:
        if key not in obj:
            raise SchemaValidationError(f"{path}: missing required key {key!r}")
    if not obj["run_id"]:
        raise SchemaValidationError(f"{path}: run_id must be nonempty")
    method = str(obj["method"])
    if method_base(method) not in METHOD_BASES:
        raise SchemaValidationError(
            f"{path}: method base {method_base(method)!r} not one of {METHOD_BASES}"
        )
    zero_shot = obj["zero_shot"]
    if not isinstance(zero_shot, dict):
        raise SchemaValidationError(f"{path}: zero_shot must be an object")
    extras = {k: v for k, v in obj.items() if k not in RUN_RECORD_REQUIRED_KEYS}
    return RunRecord(
        run_id=str(obj["run_id"]),
        dataset=str(obj["dataset"]),
        method=method,
        lr=float(obj["lr"]),
        seed=int(obj["seed"]),
        best_val_acc=_check_percent("best_val_acc", obj["best_val_acc"], path),
        zero_shot={
            str(k): _check_percent(f"zero_shot[{k!r}]", v, path)
            for k, v in zero_shot.items()
        },
        baseline_run_id=str(obj["baseline_run_id"]),
        extras=extras,
    )


def read_run_record(path) -> RunRecord:
    with open(path, "r", encoding="utf-8") as fh:
        try:
            obj = json.load(fh)
        except json.JSONDecodeError as exc:
            raise SchemaValidationError(f"{path}: invalid JSON ({exc})") from None
    if not isinstance(obj, dict):
        raise SchemaValidationError(f"{path}: run record must be a JSON object")
    return parse_run_record(obj, path)


def write_run_record(record: RunRecord, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(record.to_json_dict(), fh, indent=2, sort_keys=True)
        fh.write("\n")
