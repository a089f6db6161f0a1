"""Heatmap rendering: bilinear upsampling, colormapping, and alpha blending.

Every step is pinned down numerically (fixed color anchors, round-half-up)
so rendered pixels are bit-exactly testable and identical across interfaces.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch
from .simcore import SimilarityMap
from .tensorio import RasterImage

PER_MAP = "per_map"
SHARED = "shared"

CLAMP = "clamp_to_zero"
SIGNED = "signed"


@dataclass
class RenderOptions:
    alpha: float = 0.5
    normalization: str = PER_MAP
    shared_max: float = 0.0  # max_abs over the result set, for SHARED mode
    negative_handling: str = CLAMP

    def __post_init__(self):
        if not (0.0 <= self.alpha <= 1.0):
            raise ValueError("alpha must lie in [0, 1]")
        if self.normalization not in (PER_MAP, SHARED):
            raise ValueError(f"unknown normalization {self.normalization!r}")
        if self.negative_handling not in (CLAMP, SIGNED):
            raise ValueError(f"unknown negative handling {self.negative_handling!r}")


def upsample_bilinear(m: SimilarityMap, out_w: int, out_h: int) -> np.ndarray:
    """Upsample the cell grid to pixel resolution.

    Cell and pixel centers sit at (i + 0.5) / n in normalized coordinates;
    interpolation is bilinear between the four nearest cell centers with
    edge-replicated extrapolation beyond the outermost centers.
    """
    if out_w < 1 or out_h < 1:
        raise ValueError("output dimensions must be positive")
    cells = m.cells

    def axis(n_out: int, n_in: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        pos = (np.arange(n_out) + 0.5) / n_out * n_in - 0.5
        i0 = np.clip(np.floor(pos).astype(np.int64), 0, n_in - 1)
        i1 = np.clip(i0 + 1, 0, n_in - 1)
        t = np.clip(pos - i0, 0.0, 1.0)
        return i0, i1, t

    y0, y1, ty = axis(out_h, m.grid_h)
    x0, x1, tx = axis(out_w, m.grid_w)
    top = cells[y0][:, x0] * (1 - tx) + cells[y0][:, x1] * tx
    bot = cells[y1][:, x0] * (1 - tx) + cells[y1][:, x1] * tx
    return top * (1 - ty)[:, None] + bot * ty[:, None]


def _round_half_up(values: np.ndarray) -> np.ndarray:
    return np.clip(np.floor(values + 0.5), 0, 255).astype(np.uint8)


def normalize_field(field: np.ndarray, opts: RenderOptions) -> np.ndarray:
    """Map raw contribution values to t in [0, 1] per the options."""
    field = np.asarray(field, dtype=np.float64)
    if opts.negative_handling == CLAMP:
        field = np.maximum(field, 0.0)
        peak = opts.shared_max if opts.normalization == SHARED else float(field.max())
        if peak <= 0.0:
            return np.zeros_like(field)
        return np.clip(field / peak, 0.0, 1.0)
    # signed: [-max_abs, +max_abs] -> [0, 1]
    peak = opts.shared_max if opts.normalization == SHARED else float(np.abs(field).max())
    if peak <= 0.0:
        return np.zeros_like(field)
    return np.clip(0.5 + field / (2.0 * peak), 0.0, 1.0)


def apply_colormap(field: np.ndarray, opts: RenderOptions | None = None) -> RasterImage:
    """Colormap a field: blue (t=0) through green (t=0.5) to red (t=1),
    each channel a piecewise-linear segment, rounded half-up."""
    opts = opts or RenderOptions()
    t = normalize_field(field, opts)
    r = np.where(t <= 0.5, 0.0, 510.0 * (t - 0.5))
    g = np.where(t <= 0.5, 510.0 * t, 255.0 - 510.0 * (t - 0.5))
    b = np.where(t <= 0.5, 255.0 - 510.0 * t, 0.0)
    rgb = _round_half_up(np.stack([r, g, b], axis=-1))
    return RasterImage(width=field.shape[1], height=field.shape[0], pixels=rgb)


def blend(base: RasterImage, heat: RasterImage, alpha: float) -> RasterImage:
    """Per-channel convex combination, rounded half-up."""
    if (base.width, base.height) != (heat.width, heat.height):
        raise DimensionMismatch("base and heatmap dimensions differ")
    mixed = (1.0 - alpha) * base.pixels.astype(np.float64) + alpha * heat.pixels.astype(np.float64)
    return RasterImage(width=base.width, height=base.height, pixels=_round_half_up(mixed))


def overlay(m: SimilarityMap, base: RasterImage, opts: RenderOptions | None = None) -> RasterImage:
    """Full pipeline: upsample to the image size, colormap, blend."""
    opts = opts or RenderOptions()
    field = upsample_bilinear(m, base.width, base.height)
    heat = apply_colormap(field, opts)
    return blend(base, heat, opts.alpha)
