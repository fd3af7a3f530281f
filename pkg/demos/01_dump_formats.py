"""Binary dump containers: write, read, validate, and catch corruption.

Attention dumps are ATDM files (header + float32 payload, little-endian)
with a JSON sidecar carrying run identity; feature dumps use the FTDM
layout.  Readers check byte counts exactly; content audits are separate
so corrupt exports can still be loaded and inspected.
"""

import struct
import tempfile
from pathlib import Path

import numpy as np

from attn_drift import (
    AttentionDump,
    DumpMeta,
    read_attention_dump,
    validate_dump,
    write_attention_dump,
)

tmp = Path(tempfile.mkdtemp())

# a tiny 2-image, 2-layer, 2-head, 6-token dump of softmax attention
rng = np.random.default_rng(0)
logits = rng.normal(size=(2, 2, 2, 6, 6))
values = np.exp(logits - logits.max(-1, keepdims=True))
values = (values / values.sum(-1, keepdims=True)).astype(np.float32)

meta = DumpMeta(
    model_id="vit-demo",
    dataset="eurosat",
    split="val",
    run_id="demo_run",
    method="full_ft",
    lr=1e-5,
    seed=7,
    subset_seed=0,
    image_ids=("img_0000", "img_0001"),
)
dump = AttentionDump(values=values, meta=meta)

path = tmp / "demo.atdm"
write_attention_dump(dump, path)
print(f"wrote {path} ({path.stat().st_size} bytes = 32 header + {values.size}*4 payload)")

loaded = read_attention_dump(path)
print("round trip bit-exact:", np.array_equal(loaded.values, values))

report = validate_dump(loaded, tol=1e-4)
print("violations in a clean dump:", report.n_violations)

# flip one payload float and watch the audit flag the exact row
raw = bytearray(path.read_bytes())
(v,) = struct.unpack_from("<f", raw, 32)
struct.pack_into("<f", raw, 32, v + 0.25)
path.write_bytes(bytes(raw))
report = validate_dump(read_attention_dump(path), tol=1e-4)
print("violations after corrupting one float:", report.n_violations)
print("first violation:", report.first_violation())
