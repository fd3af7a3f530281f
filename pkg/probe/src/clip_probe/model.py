"""Checkpoint loading for CLIP-style models with eager attention.

Per-head attention maps require the eager attention implementation, so
every load path enforces it.  Supported checkpoint kinds:

* ``{"kind": "hf_dir", "path": ...}`` — a ``save_pretrained`` directory
  holding a full CLIP model (tokenizer files included when the text
  tower is to be used);
* ``{"kind": "builtin", "arch": "tiny" | "vit-b-32" | "vit-b-32-vision",
  "seed": 0}`` — randomly initialized architectures for dry runs and
  tests.  ``vit-b-32`` uses the stock ViT-B/32 geometry (224 px, patch
  32, 12 layers, 12 heads); the ``-vision`` variant skips the text tower.

Builtin checkpoints use a deterministic character-level tokenizer, so
the text path works offline; its vocabulary is an implementation detail
of the probe, not of any released model.
"""

from __future__ import annotations

import json
import tempfile
from dataclasses import dataclass
from typing import Optional

import torch
from transformers import (
    CLIPConfig,
    CLIPModel,
    CLIPTokenizer,
    CLIPVisionConfig,
    CLIPVisionModel,
)

from .lora import DEFAULT_TARGETS, inject_lora, load_adapter_state

TINY_VISION = dict(
    hidden_size=32,
    intermediate_size=64,
    num_hidden_layers=2,
    num_attention_heads=2,
    image_size=32,
    patch_size=8,
)


def _char_vocab() -> dict:
    vocab = {"<|startoftext|>": 0, "<|endoftext|>": 1}
    for c in "abcdefghijklmnopqrstuvwxyz0123456789":
        vocab[c] = len(vocab)
        vocab[c + "</w>"] = len(vocab)
    return vocab


def char_tokenizer() -> CLIPTokenizer:
    """Deterministic character-level CLIP tokenizer built from scratch."""
    d = tempfile.mkdtemp(prefix="clip_probe_tok_")
    vocab_path = f"{d}/vocab.json"
    merges_path = f"{d}/merges.txt"
    with open(vocab_path, "w", encoding="utf-8") as fh:
        json.dump(_char_vocab(), fh)
    with open(merges_path, "w", encoding="utf-8") as fh:
        fh.write("#version: 0.2\n")
    return CLIPTokenizer(vocab_path, merges_path, model_max_length=77)


def _tiny_config() -> CLIPConfig:
    vocab = _char_vocab()
    return CLIPConfig(
        text_config=dict(
            hidden_size=32,
            intermediate_size=64,
            num_hidden_layers=2,
            num_attention_heads=2,
            vocab_size=len(vocab),
            max_position_embeddings=77,
            bos_token_id=0,
            eos_token_id=1,
            pad_token_id=1,
        ),
        vision_config=dict(TINY_VISION),
        projection_dim=16,
    )


@dataclass
class ProbeModel:
    """A vision tower (always) plus optional text tower and tokenizer."""

    model_id: str
    vision_model: torch.nn.Module
    visual_projection: Optional[torch.nn.Module]
    clip: Optional[CLIPModel]
    tokenizer: Optional[CLIPTokenizer]

    @property
    def image_size(self) -> int:
        return self.vision_model.config.image_size

    @property
    def n_layers(self) -> int:
        return self.vision_model.config.num_hidden_layers

    def supports_text(self) -> bool:
        return self.clip is not None and self.tokenizer is not None

    def apply_lora(self, rank=8, alpha=16.0, targets=DEFAULT_TARGETS,
                   state_path=None) -> list[str]:
        wrapped = inject_lora(self.vision_model, rank=rank, alpha=alpha, targets=targets)
        if state_path:
            state = torch.load(state_path, map_location="cpu", weights_only=True)
            load_adapter_state(self.vision_model, state)
        self.vision_model.eval()
        return wrapped


def load_checkpoint(spec: dict) -> ProbeModel:
    kind = spec.get("kind")
    if kind == "hf_dir":
        path = spec["path"]
        clip = CLIPModel.from_pretrained(path, attn_implementation="eager")
        clip.eval()
        try:
            tokenizer = CLIPTokenizer.from_pretrained(path)
        except (OSError, ValueError):
            tokenizer = None
        return ProbeModel(
            model_id=spec.get("model_id", str(path)),
            vision_model=clip.vision_model,
            visual_projection=clip.visual_projection,
            clip=clip,
            tokenizer=tokenizer,
        )

    if kind == "builtin":
        arch = spec.get("arch", "tiny")
        seed = int(spec.get("seed", 0))
        torch.manual_seed(seed)
        if arch == "tiny":
            clip = CLIPModel(_tiny_config())
            clip.set_attn_implementation("eager")
            clip.eval()
            return ProbeModel(
                model_id=f"builtin:tiny:{seed}",
                vision_model=clip.vision_model,
                visual_projection=clip.visual_projection,
                clip=clip,
                tokenizer=char_tokenizer(),
            )
        if arch == "vit-b-32-vision":
            vision = CLIPVisionModel(CLIPVisionConfig())  # stock ViT-B/32 geometry
            vision.set_attn_implementation("eager")
            vision.eval()
            # CLIPVisionModel is the vision transformer itself (embeddings,
            # encoder, post_layernorm), so it serves as the tower directly
            return ProbeModel(
                model_id=f"builtin:vit-b-32-vision:{seed}",
                vision_model=vision,
                visual_projection=None,
                clip=None,
                tokenizer=None,
            )
        if arch == "vit-b-32":
            clip = CLIPModel(CLIPConfig())
            clip.set_attn_implementation("eager")
            clip.eval()
            return ProbeModel(
                model_id=f"builtin:vit-b-32:{seed}",
                vision_model=clip.vision_model,
                visual_projection=clip.visual_projection,
                clip=clip,
                tokenizer=char_tokenizer(),
            )
        raise ValueError(f"unknown builtin arch {arch!r}")

    raise ValueError(f"unknown checkpoint kind {kind!r}")
