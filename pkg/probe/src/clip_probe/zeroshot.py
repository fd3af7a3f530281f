"""Adapter-aware zero-shot classification.

Class prompts are encoded once with the text tower; image features pass
through the *active* vision branch (adapters included) and the visual
projection.  Both sides are L2-normalized and scored by dot product,
top-1.  Scoring adapted checkpoints through a base-model-only image path
would hide exactly the drift this probe exists to measure, hence the
explicit adapted-branch contract.
"""

from __future__ import annotations

import numpy as np
import torch

from .datasets import batched_pixel_values
from .model import ProbeModel

CLASS_PLACEHOLDER = "{class name}"


def fill_template(template: str, class_name: str) -> str:
    if CLASS_PLACEHOLDER in template:
        return template.replace(CLASS_PLACEHOLDER, class_name)
    if "{}" in template:
        return template.replace("{}", class_name)
    raise ValueError(
        f"prompt template must contain {CLASS_PLACEHOLDER!r} or '{{}}', got {template!r}"
    )


def _normalize(x: np.ndarray) -> np.ndarray:
    return x / np.linalg.norm(x, axis=-1, keepdims=True)


def encode_class_prompts(model: ProbeModel, class_names, template: str) -> np.ndarray:
    """Normalized text features, one row per class, encoded once."""
    if not model.supports_text():
        raise ValueError("checkpoint has no text tower/tokenizer; zero-shot unsupported")
    if not class_names:
        raise ValueError("benchmark provides no class names")
    prompts = [fill_template(template, name) for name in class_names]
    tokens = model.tokenizer(prompts, padding=True, return_tensors="pt")
    with torch.no_grad():
        out = model.clip.get_text_features(**tokens)
    features = out.pooler_output if hasattr(out, "pooler_output") else out
    return _normalize(features.numpy().astype(np.float64))


def image_features(model: ProbeModel, dataset, indices, batch_size=32) -> np.ndarray:
    """Normalized projected image features through the active vision branch."""
    if model.visual_projection is None:
        raise ValueError("checkpoint has no visual projection; zero-shot unsupported")
    chunks = []
    for batch in batched_pixel_values(dataset, indices, model.image_size, batch_size):
        with torch.no_grad():
            out = model.vision_model(pixel_values=torch.from_numpy(batch))
            projected = model.visual_projection(out.pooler_output)
        chunks.append(projected.numpy().astype(np.float64))
    return _normalize(np.concatenate(chunks, axis=0))


def top1_accuracy(image_feats: np.ndarray, text_feats: np.ndarray, labels) -> float:
    """Percent of images whose best-scoring class matches the label."""
    logits = image_feats @ text_feats.T
    predictions = logits.argmax(axis=1)
    labels = np.asarray(labels)
    if predictions.shape[0] != labels.shape[0]:
        raise ValueError(f"{predictions.shape[0]} predictions for {labels.shape[0]} labels")
    return float(100.0 * (predictions == labels).mean())


def adapter_aware_zeroshot(model: ProbeModel, dataset, template: str,
                           batch_size=32) -> float:
    """Top-1 zero-shot accuracy (%) over the whole dataset."""
    text_feats = encode_class_prompts(model, dataset.class_names, template)
    indices = list(range(len(dataset)))
    img_feats = image_features(model, dataset, indices, batch_size)
    return top1_accuracy(img_feats, text_feats, dataset.labels)
