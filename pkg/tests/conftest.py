import numpy as np
import pytest

from attn_drift.dump_io import AttentionDump, DumpMeta, FeatureDump


def make_meta(run_id="run_a", n_images=2, method="full_ft", dataset="eurosat", **kw):
    fields = dict(
        model_id="vit-test",
        dataset=dataset,
        split="val",
        run_id=run_id,
        method=method,
        lr=1e-5,
        seed=7,
        subset_seed=0,
        image_ids=tuple(f"img_{i:04d}" for i in range(n_images)),
    )
    fields.update(kw)
    return DumpMeta(**fields)


def softmax_attention(rng, n_images, n_layers, n_heads, n_tokens, scale=2.0):
    """Random post-softmax attention tensor, float32 like a real export."""
    logits = rng.normal(0.0, scale, size=(n_images, n_layers, n_heads, n_tokens, n_tokens))
    logits -= logits.max(axis=-1, keepdims=True)
    probs = np.exp(logits)
    probs /= probs.sum(axis=-1, keepdims=True)
    return probs.astype(np.float32)


def make_dump(rng, n_images=2, n_layers=2, n_heads=2, n_tokens=6, **meta_kw):
    values = softmax_attention(rng, n_images, n_layers, n_heads, n_tokens)
    meta = make_meta(n_images=n_images, **meta_kw)
    return AttentionDump(values=values, meta=meta)


def make_feature_dump(rng, n_layers=3, n_images=5, dim=4, **meta_kw):
    values = rng.normal(size=(n_layers, n_images, dim)).astype(np.float32)
    meta = make_meta(n_images=n_images, **meta_kw)
    return FeatureDump(values=values, meta=meta)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
