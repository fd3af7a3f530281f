"""Image sources and CLIP preprocessing.

Two dataset kinds are built in: ``synthetic`` (deterministic generated
images, for tests and dry runs) and ``imagefolder`` (class-per-subdirectory
layout).  Preprocessing follows the CLIP convention: resize the shorter
side with bicubic interpolation, center crop, scale to [0, 1], normalize
with the CLIP mean and standard deviation.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np
from PIL import Image

CLIP_MEAN = np.array([0.48145466, 0.4578275, 0.40821073], dtype=np.float32)
CLIP_STD = np.array([0.26862954, 0.26130258, 0.27577711], dtype=np.float32)

IMAGE_EXTENSIONS = {".png", ".jpg", ".jpeg", ".bmp", ".webp"}


def preprocess_image(img: Image.Image, image_size: int) -> np.ndarray:
    """PIL image -> normalized float32 CHW array."""
    img = img.convert("RGB")
    w, h = img.size
    scale = image_size / min(w, h)
    img = img.resize(
        (max(image_size, round(w * scale)), max(image_size, round(h * scale))),
        Image.BICUBIC,
    )
    w, h = img.size
    left = (w - image_size) // 2
    top = (h - image_size) // 2
    img = img.crop((left, top, left + image_size, top + image_size))
    arr = np.asarray(img, dtype=np.float32) / 255.0
    arr = (arr - CLIP_MEAN) / CLIP_STD
    return arr.transpose(2, 0, 1)


class SyntheticDataset:
    """Deterministic generated images with class-dependent color structure."""

    def __init__(self, n_classes=10, n_per_class=8, image_size=32, seed=0):
        self.n_classes = n_classes
        self.image_size = image_size
        self.seed = seed
        self.labels = [c for c in range(n_classes) for _ in range(n_per_class)]
        self.image_ids = [f"syn_{i:05d}" for i in range(len(self.labels))]
        self.class_names = [f"class {c:02d}" for c in range(n_classes)]

    def __len__(self):
        return len(self.image_ids)

    def load_image(self, index: int) -> Image.Image:
        rng = np.random.default_rng(self.seed * 1_000_003 + index)
        label = self.labels[index]
        base = np.zeros((self.image_size, self.image_size, 3), dtype=np.float64)
        base[..., label % 3] = 80 + 15 * (label // 3)
        noise = rng.integers(0, 120, size=base.shape)
        arr = np.clip(base + noise, 0, 255).astype(np.uint8)
        return Image.fromarray(arr)


class ImageFolderDataset:
    """`root/<class_name>/<image file>` layout; classes and files sorted."""

    def __init__(self, root):
        self.root = Path(root)
        if not self.root.is_dir():
            raise ValueError(f"imagefolder root {self.root} is not a directory")
        self.class_names = sorted(
            p.name for p in self.root.iterdir() if p.is_dir()
        )
        if not self.class_names:
            raise ValueError(f"imagefolder root {self.root} has no class directories")
        self._paths: list[Path] = []
        self.labels: list[int] = []
        for label, name in enumerate(self.class_names):
            files = sorted(
                p for p in (self.root / name).iterdir()
                if p.suffix.lower() in IMAGE_EXTENSIONS
            )
            self._paths.extend(files)
            self.labels.extend([label] * len(files))
        self.image_ids = [str(p.relative_to(self.root)) for p in self._paths]

    def __len__(self):
        return len(self.image_ids)

    def load_image(self, index: int) -> Image.Image:
        return Image.open(self._paths[index])


def build_dataset(spec: dict):
    kind = spec.get("kind")
    if kind == "synthetic":
        return SyntheticDataset(
            n_classes=spec.get("n_classes", 10),
            n_per_class=spec.get("n_per_class", 8),
            image_size=spec.get("image_size", 32),
            seed=spec.get("seed", 0),
        )
    if kind == "imagefolder":
        return ImageFolderDataset(spec["path"])
    raise ValueError(f"unknown dataset kind {kind!r}")


def batched_pixel_values(dataset, indices, image_size, batch_size):
    """Yield float32 [B, 3, S, S] arrays over ``indices`` in order."""
    for start in range(0, len(indices), batch_size):
        chunk = indices[start : start + batch_size]
        arrays = [
            preprocess_image(dataset.load_image(i), image_size) for i in chunk
        ]
        yield np.stack(arrays)
