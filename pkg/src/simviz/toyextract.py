"""Deterministic seeded feature extractor.

A single random convolution layer (splitmix64-seeded filter bank, stride
equal to filter size, relu) stands in for a trained backbone so the full
pipeline runs without any ML framework. Identical inputs give bit-identical
tensors on every platform.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ImageTooSmall
from .simcore import ActivationTensor
from .tensorio import RasterImage

_MASK64 = (1 << 64) - 1


@dataclass
class ExtractorConfig:
    seed: int = 0
    channels: int = 32
    filter_size: int = 8
    grid_h: int = 7
    grid_w: int = 7
    nonlinearity: str = "relu"

    def __post_init__(self):
        if self.channels < 1 or self.filter_size < 1 or self.grid_h < 1 or self.grid_w < 1:
            raise ValueError("channels, filter_size, and grid dims must be positive")
        if self.nonlinearity != "relu":
            raise ValueError("only relu is supported")
        self.seed &= _MASK64

    def meta_text(self) -> str:
        return (
            f"seed={self.seed}\n"
            f"channels={self.channels}\n"
            f"filter_size={self.filter_size}\n"
            f"grid_h={self.grid_h}\n"
            f"grid_w={self.grid_w}\n"
            f"nonlinearity={self.nonlinearity}\n"
        )


class SplitMix64:
    """The splitmix64 generator; fully specified, trivially portable."""

    def __init__(self, seed: int):
        self.state = seed & _MASK64

    def next_u64(self) -> int:
        self.state = (self.state + 0x9E3779B97F4A7C15) & _MASK64
        z = self.state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
        return z ^ (z >> 31)

    def next_unit(self) -> float:
        """Map one 64-bit draw to [-1, 1)."""
        return self.next_u64() / 2.0**63 - 1.0


def make_filter_bank(cfg: ExtractorConfig) -> np.ndarray:
    """Weights of shape (channels, filter_size, filter_size, 3), drawn in
    (c, fy, fx, color) order from splitmix64(cfg.seed)."""
    rng = SplitMix64(cfg.seed)
    f = cfg.filter_size
    flat = np.empty(cfg.channels * f * f * 3)
    for k in range(flat.size):
        flat[k] = rng.next_unit()
    return flat.reshape(cfg.channels, f, f, 3)


def _resize_bilinear(pixels: np.ndarray, out_h: int, out_w: int) -> np.ndarray:
    """Center-aligned bilinear resize with edge clamping; float64 in/out."""
    in_h, in_w = pixels.shape[:2]

    def axis_coords(n_out: int, n_in: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        centers = (np.arange(n_out) + 0.5) / n_out * n_in - 0.5
        i0 = np.clip(np.floor(centers).astype(np.int64), 0, n_in - 1)
        i1 = np.clip(i0 + 1, 0, n_in - 1)
        t = np.clip(centers - np.floor(centers), 0.0, 1.0)
        t[centers < 0] = 0.0
        return i0, i1, t

    y0, y1, ty = axis_coords(out_h, in_h)
    x0, x1, tx = axis_coords(out_w, in_w)
    top = pixels[y0][:, x0] * (1 - tx)[None, :, None] + pixels[y0][:, x1] * tx[None, :, None]
    bot = pixels[y1][:, x0] * (1 - tx)[None, :, None] + pixels[y1][:, x1] * tx[None, :, None]
    return top * (1 - ty)[:, None, None] + bot * ty[:, None, None]


def extract(img: RasterImage, cfg: ExtractorConfig) -> ActivationTensor:
    """Run the toy convolution: normalize, resize to the grid's pixel
    footprint, then one relu-activated stride-f filter pass per cell."""
    f = cfg.filter_size
    if img.width < f or img.height < f:
        raise ImageTooSmall(
            f"image {img.width}x{img.height} smaller than filter size {f}"
        )
    norm = img.pixels.astype(np.float64) / 255.0
    field = _resize_bilinear(norm, cfg.grid_h * f, cfg.grid_w * f)
    # (grid_h, grid_w, f*f*3) patches, flattened in (fy, fx, color) order
    patches = (
        field.reshape(cfg.grid_h, f, cfg.grid_w, f, 3)
        .transpose(0, 2, 1, 3, 4)
        .reshape(cfg.grid_h, cfg.grid_w, f * f * 3)
    )
    bank = make_filter_bank(cfg).reshape(cfg.channels, f * f * 3)
    # fixed (fy, fx, color) accumulation order per (cell, filter)
    products = patches[:, :, None, :] * bank[None, None, :, :]
    acc = np.add.accumulate(products, axis=3)[:, :, :, -1]
    return ActivationTensor(np.maximum(acc, 0.0))
