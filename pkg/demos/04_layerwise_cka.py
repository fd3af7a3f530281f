"""Layerwise linear CKA between feature stacks.

CKA is 1 for identical (or orthogonally rotated, or rescaled) features
and drops toward 0 as layers decorrelate; the per-layer profile shows
where an adapted model left the pretrained representation.
"""

import numpy as np

from attn_drift import DumpMeta, FeatureDump, layerwise_cka_profile, linear_cka

rng = np.random.default_rng(3)
N, D, L = 64, 16, 6


def meta(run_id):
    return DumpMeta(
        model_id="vit-demo", dataset="eurosat", split="val", run_id=run_id,
        method="lora:r=8", lr=1e-5, seed=7, subset_seed=0,
        image_ids=tuple(f"img_{i:04d}" for i in range(N)),
    )


base = rng.normal(size=(L, N, D)).astype(np.float32)

# progressively noisier copies of each layer: early layers stay close,
# late layers drift away (a caricature of late-layer adaptation)
adapted = np.stack(
    [base[l] + rng.normal(0, 0.2 + 0.5 * l, size=(N, D)) for l in range(L)]
).astype(np.float32)

profile = layerwise_cka_profile(
    FeatureDump(base, meta("pretrained")), FeatureDump(adapted, meta("adapted"))
)
print("per-layer CKA:", [round(v, 3) for v in profile.per_layer])
print("mean CKA:     ", round(profile.mean, 4))

# invariances of the underlying similarity
x = rng.normal(size=(N, D))
q, _ = np.linalg.qr(rng.normal(size=(D, D)))
print("\nCKA(X, X)        =", round(linear_cka(x, x), 6))
print("CKA(X, X @ Q)    =", round(linear_cka(x, x @ q), 6), "(orthogonal Q)")
print("CKA(X, 37 * X)   =", round(linear_cka(x, 37 * x), 6))
print("CKA(X, noise)    =", round(linear_cka(x, rng.normal(size=(N, D))), 4))
