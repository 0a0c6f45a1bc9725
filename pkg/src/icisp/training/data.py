"""Dataset pipeline: seeded random crops over an image directory, plus a
deterministic synthetic-texture corpus generator for desk-scale runs."""

import logging
from pathlib import Path

import numpy as np
import torch
from PIL import Image

__all__ = ["synthesize_images", "list_images", "load_image", "save_image", "make_batches"]

log = logging.getLogger(__name__)

_EXTENSIONS = (".png", ".jpg", ".jpeg", ".bmp")


def synthesize_images(out_dir, count, size=96, seed=0):
    """Write `count` procedural RGB textures (gradients, rectangles, waves,
    noise) as PNGs; fully determined by the seed."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(seed)
    paths = []
    yy, xx = np.mgrid[0:size, 0:size].astype(np.float64) / size
    for i in range(count):
        img = np.zeros((size, size, 3))
        base = rng.uniform(0.1, 0.9, size=3)
        grad = rng.uniform(-0.5, 0.5, size=(2, 3))
        img += base + grad[0] * yy[..., None] + grad[1] * xx[..., None]
        for _ in range(rng.integers(2, 6)):
            y0, x0 = rng.integers(0, size - 8, size=2)
            hh, ww = rng.integers(6, size // 2, size=2)
            img[y0 : y0 + hh, x0 : x0 + ww] += rng.uniform(-0.4, 0.4, size=3)
        freq = rng.uniform(2, 12, size=2)
        phase = rng.uniform(0, 2 * np.pi, size=2)
        wave = 0.15 * np.sin(2 * np.pi * freq[0] * yy + phase[0]) * np.cos(2 * np.pi * freq[1] * xx + phase[1])
        img += wave[..., None] * rng.uniform(0.3, 1.0, size=3)
        img += rng.normal(0, 0.015, size=img.shape)
        arr = (np.clip(img, 0, 1) * 255).round().astype(np.uint8)
        path = out_dir / f"synth_{i:04d}.png"
        Image.fromarray(arr).save(path)
        paths.append(path)
    return paths


def list_images(directory):
    directory = Path(directory)
    return sorted(p for p in directory.iterdir() if p.suffix.lower() in _EXTENSIONS)


def load_image(path) -> torch.Tensor:
    """8-bit image file -> float tensor [3, H, W] in [0, 1]."""
    arr = np.asarray(Image.open(path).convert("RGB"), dtype=np.float32) / 255.0
    return torch.from_numpy(arr).permute(2, 0, 1).contiguous()


def save_image(tensor, path):
    """Float tensor [3, H, W] (or [1, 3, H, W]) in [0, 1] -> 8-bit PNG."""
    if tensor.dim() == 4:
        tensor = tensor[0]
    arr = (tensor.clamp(0, 1).permute(1, 2, 0).numpy() * 255).round().astype(np.uint8)
    Image.fromarray(arr).save(path)


def make_batches(dataset_dir, crop, batch, seed, epochs=1):
    """Yield [batch, 3, crop, crop] tensors in [0, 1].

    Each epoch reshuffles with a seed derived from (seed, epoch) so the
    crop coordinate sequence is reproducible and epoch boundaries are
    deterministic.  Images smaller than the crop are skipped with a
    warning; trailing images that do not fill a batch are dropped.
    """
    paths = list_images(dataset_dir)
    if not paths:
        raise ValueError(f"no images found in {dataset_dir}")
    usable, skipped = [], 0
    for p in paths:
        with Image.open(p) as im:
            w, h = im.size
        if w < crop or h < crop:
            log.warning("skipping %s: %dx%d smaller than crop %d", p.name, w, h, crop)
            skipped += 1
        else:
            usable.append(p)
    if not usable:
        raise ValueError(f"all {skipped} images smaller than crop {crop}")

    for epoch in range(epochs):
        rng = np.random.default_rng((seed, epoch))
        order = rng.permutation(len(usable))
        chunk = []
        for idx in order:
            img = load_image(usable[idx])
            h, w = img.shape[-2:]
            top = int(rng.integers(0, h - crop + 1))
            left = int(rng.integers(0, w - crop + 1))
            chunk.append(img[:, top : top + crop, left : left + crop])
            if len(chunk) == batch:
                yield torch.stack(chunk)
                chunk = []
