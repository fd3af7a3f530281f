"""Minimal low-rank adapters for CLIP vision attention projections.

``LoraLinear`` wraps a frozen ``nn.Linear`` and adds
``scale * B @ A @ x`` with ``A`` Gaussian-initialized and ``B``
zero-initialized, so a freshly injected adapter is a mathematical no-op:
the added term is exactly zero until ``B`` is trained or loaded.
"""

from __future__ import annotations

import torch
from torch import nn

DEFAULT_TARGETS = ("q_proj", "v_proj")


class LoraLinear(nn.Module):
    def __init__(self, base: nn.Linear, rank: int = 8, alpha: float = 16.0):
        super().__init__()
        if rank < 1:
            raise ValueError(f"rank must be >= 1, got {rank}")
        self.base = base
        self.rank = rank
        self.alpha = alpha
        self.scale = alpha / rank
        self.lora_A = nn.Parameter(torch.empty(rank, base.in_features))
        self.lora_B = nn.Parameter(torch.zeros(base.out_features, rank))
        nn.init.normal_(self.lora_A, std=0.02)
        for p in self.base.parameters():
            p.requires_grad_(False)

    def forward(self, x):
        return self.base(x) + (x @ self.lora_A.T) @ self.lora_B.T * self.scale


def inject_lora(vision_model, rank: int = 8, alpha: float = 16.0,
                targets=DEFAULT_TARGETS) -> list[str]:
    """Wrap the named projection modules of every encoder layer in-place.

    Returns the qualified names of the wrapped modules.
    """
    wrapped = []
    for i, layer in enumerate(vision_model.encoder.layers):
        attn = layer.self_attn
        for name in targets:
            module = getattr(attn, name, None)
            if module is None:
                raise ValueError(f"layer {i} has no attention projection {name!r}")
            if isinstance(module, LoraLinear):
                continue
            if not isinstance(module, nn.Linear):
                raise ValueError(
                    f"layer {i} projection {name!r} is {type(module).__name__}, "
                    "expected nn.Linear"
                )
            setattr(attn, name, LoraLinear(module, rank=rank, alpha=alpha))
            wrapped.append(f"encoder.layers.{i}.self_attn.{name}")
    return wrapped


def adapter_state_dict(vision_model) -> dict:
    """LoRA parameters only, keyed by qualified module path."""
    out = {}
    for name, module in vision_model.named_modules():
        if isinstance(module, LoraLinear):
            out[f"{name}.lora_A"] = module.lora_A.detach().clone()
            out[f"{name}.lora_B"] = module.lora_B.detach().clone()
    return out


def load_adapter_state(vision_model, state: dict) -> int:
    """Load LoRA parameters saved by :func:`adapter_state_dict`."""
    loaded = 0
    modules = dict(vision_model.named_modules())
    for key, value in state.items():
        path, _, param = key.rpartition(".")
        module = modules.get(path)
        if not isinstance(module, LoraLinear) or param not in ("lora_A", "lora_B"):
            raise KeyError(f"adapter state key {key!r} does not match an injected adapter")
        getattr(module, param).data.copy_(value)
        loaded += 1
    return loaded
