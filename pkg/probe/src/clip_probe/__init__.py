"""Probe for CLIP-style vision towers: exports per-head attention maps,
per-layer CLS features, class-balanced evaluation subsets, adapter-aware
zero-shot accuracy, and run records in the attn-drift engine's formats.
"""

from .datasets import ImageFolderDataset, SyntheticDataset, build_dataset, preprocess_image
from .extract import extract_attention, extract_features
from .formats import (
    sidecar_meta,
    write_attention_dump,
    write_feature_dump,
    write_run_record,
)
from .lora import LoraLinear, adapter_state_dict, inject_lora, load_adapter_state
from .model import ProbeModel, char_tokenizer, load_checkpoint
from .subsets import fixed_eval_subset
from .zeroshot import (
    adapter_aware_zeroshot,
    encode_class_prompts,
    fill_template,
    image_features,
    top1_accuracy,
)
from .cli import load_config, run_probe

__version__ = "0.1.0"

__all__ = [
    "ImageFolderDataset",
    "LoraLinear",
    "ProbeModel",
    "SyntheticDataset",
    "adapter_aware_zeroshot",
    "adapter_state_dict",
    "build_dataset",
    "char_tokenizer",
    "encode_class_prompts",
    "extract_attention",
    "extract_features",
    "fill_template",
    "fixed_eval_subset",
    "image_features",
    "inject_lora",
    "load_adapter_state",
    "load_checkpoint",
    "load_config",
    "preprocess_image",
    "run_probe",
    "sidecar_meta",
    "top1_accuracy",
    "write_attention_dump",
    "write_feature_dump",
    "write_run_record",
]
