import os

os.environ.setdefault("HF_HUB_OFFLINE", "1")
os.environ.setdefault("TRANSFORMERS_OFFLINE", "1")

import pytest
import torch

from clip_probe import SyntheticDataset, load_checkpoint


@pytest.fixture(scope="session")
def tiny_model():
    return load_checkpoint({"kind": "builtin", "arch": "tiny", "seed": 0})


@pytest.fixture(scope="session")
def tiny_checkpoint_dir(tmp_path_factory, tiny_model):
    """A save_pretrained directory with model weights and tokenizer files."""
    d = tmp_path_factory.mktemp("tiny_ckpt")
    tiny_model.clip.save_pretrained(d)
    tiny_model.tokenizer.save_pretrained(d)
    return d


@pytest.fixture
def small_dataset():
    return SyntheticDataset(n_classes=4, n_per_class=5, image_size=32, seed=0)


@pytest.fixture(autouse=True)
def single_threaded_torch():
    torch.set_num_threads(1)  # keep reruns bit-identical regardless of host load
    yield
