"""Attention and feature extraction into the engine's dump formats.

Attention dumps hold the post-softmax per-head maps of every encoder
layer ([N, L, H, T, T], CLS at token 0); feature dumps hold per-layer
CLS-token representations ([L, N, D]).  Both follow the fixed evaluation
subset ordering, which is serialized into the sidecar image_ids so the
engine can check alignment instead of trusting it.
"""

from __future__ import annotations

import numpy as np
import torch

from .datasets import batched_pixel_values
from .model import ProbeModel


def _vision_forward(model: ProbeModel, batch: np.ndarray, **kwargs):
    pixel_values = torch.from_numpy(batch)
    with torch.no_grad():
        return model.vision_model(pixel_values=pixel_values, **kwargs)


def extract_attention(model: ProbeModel, dataset, indices, batch_size=32) -> np.ndarray:
    """Post-softmax attention maps for ``indices``: [N, L, H, T, T] float32."""
    chunks = []
    for batch in batched_pixel_values(dataset, indices, model.image_size, batch_size):
        out = _vision_forward(model, batch, output_attentions=True)
        if out.attentions is None or len(out.attentions) == 0:
            raise RuntimeError(
                "model exposes no per-head attention; eager attention is required"
            )
        stacked = np.stack(
            [a.numpy().astype(np.float32) for a in out.attentions], axis=1
        )
        chunks.append(stacked)
    return np.concatenate(chunks, axis=0)


def extract_features(model: ProbeModel, dataset, indices, batch_size=32) -> np.ndarray:
    """Per-layer CLS-token representations for ``indices``: [L, N, D] float32."""
    chunks = []
    for batch in batched_pixel_values(dataset, indices, model.image_size, batch_size):
        out = _vision_forward(model, batch, output_hidden_states=True)
        # hidden_states[0] is the embedding output; layers follow
        cls_per_layer = np.stack(
            [h[:, 0, :].numpy().astype(np.float32) for h in out.hidden_states[1:]],
            axis=0,
        )
        chunks.append(cls_per_layer)
    return np.concatenate(chunks, axis=1)
