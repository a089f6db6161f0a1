"""Similarity math: pooling, cosine similarity, spatial decomposition,
contribution curves, class maps, and region scores.

All arithmetic is float64. Reductions that define observable values use a
fixed left-to-right order (np.add.accumulate) over (y, x) or channel axes,
so results are bit-reproducible regardless of thread count or platform.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import (
    DimensionMismatch,
    EmptyClass,
    PoolingInconsistent,
    ZeroNormEmbedding,
    ZeroSimilarity,
)

AVG = "avg"
MAX = "max"

_POOL_CONSISTENCY_TOL = 1e-9


def _seqsum(values: np.ndarray, axis: int) -> np.ndarray:
    """Strict left-to-right sum along one axis."""
    acc = np.add.accumulate(values, axis=axis)
    return np.take(acc, -1, axis=axis)


@dataclass
class ActivationTensor:
    """Last-convolutional-layer activations on a grid_h x grid_w grid of
    channel vectors."""

    values: np.ndarray  # (grid_h, grid_w, channels) float64

    def __post_init__(self):
        self.values = np.ascontiguousarray(self.values, dtype=np.float64)
        if self.values.ndim != 3 or min(self.values.shape) < 1:
            raise ValueError(f"expected a 3-D tensor, got shape {self.values.shape}")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("activations must be finite")

    @property
    def grid_h(self) -> int:
        return self.values.shape[0]

    @property
    def grid_w(self) -> int:
        return self.values.shape[1]

    @property
    def channels(self) -> int:
        return self.values.shape[2]


@dataclass
class PooledEmbedding:
    """The channel vector produced by a declared pooling mode."""

    components: np.ndarray  # (channels,) float64
    pooling_mode: str
    source_grid: tuple[int, int]

    def __post_init__(self):
        self.components = np.ascontiguousarray(self.components, dtype=np.float64)
        if self.components.ndim != 1 or self.components.size < 1:
            raise ValueError("embedding must be a non-empty vector")
        if not np.all(np.isfinite(self.components)):
            raise ValueError("embedding components must be finite")
        if self.pooling_mode not in (AVG, MAX):
            raise ValueError(f"unknown pooling mode {self.pooling_mode!r}")

    @property
    def channels(self) -> int:
        return self.components.size

    def norm(self) -> float:
        return float(np.sqrt(_seqsum(self.components * self.components, axis=0)))


@dataclass
class SimilarityMap:
    """Per-cell contributions whose sum equals the pairwise similarity."""

    cells: np.ndarray  # (grid_h, grid_w) float64
    total: float
    direction: str  # id or label of the image the map is spatialized over
    pooling_mode: str

    def __post_init__(self):
        self.cells = np.ascontiguousarray(self.cells, dtype=np.float64)
        if self.cells.ndim != 2:
            raise ValueError("similarity map must be 2-D")
        if not np.all(np.isfinite(self.cells)):
            raise ValueError("map cells must be finite")

    @property
    def grid_h(self) -> int:
        return self.cells.shape[0]

    @property
    def grid_w(self) -> int:
        return self.cells.shape[1]


@dataclass
class Region:
    """Axis-aligned rectangle in normalized image coordinates, origin top-left."""

    x0: float
    y0: float
    x1: float
    y1: float

    def __post_init__(self):
        for v in (self.x0, self.y0, self.x1, self.y1):
            if not (0.0 <= v <= 1.0):
                raise ValueError("region coordinates must lie in [0, 1]")
        if not (self.x0 < self.x1 and self.y0 < self.y1):
            raise ValueError("region must have positive area")


FULL_REGION = Region(0.0, 0.0, 1.0, 1.0)


def avg_pool(alpha: ActivationTensor) -> PooledEmbedding:
    """Mean of each channel over all spatial cells."""
    flat = alpha.values.reshape(-1, alpha.channels)  # (y, x) flattened row-major
    total = _seqsum(flat, axis=0)
    comps = total / (alpha.grid_h * alpha.grid_w)
    return PooledEmbedding(comps, AVG, (alpha.grid_h, alpha.grid_w))


def max_pool(alpha: ActivationTensor) -> PooledEmbedding:
    """Maximum of each channel over all spatial cells."""
    comps = alpha.values.reshape(-1, alpha.channels).max(axis=0)
    return PooledEmbedding(comps, MAX, (alpha.grid_h, alpha.grid_w))


def pool(alpha: ActivationTensor, mode: str) -> PooledEmbedding:
    if mode == AVG:
        return avg_pool(alpha)
    if mode == MAX:
        return max_pool(alpha)
    raise ValueError(f"unknown pooling mode {mode!r}")


def _checked_norms(beta_i: PooledEmbedding, beta_j: PooledEmbedding) -> tuple[float, float]:
    if beta_i.channels != beta_j.channels:
        raise DimensionMismatch(
            f"embedding dims differ: {beta_i.channels} vs {beta_j.channels}"
        )
    ni, nj = beta_i.norm(), beta_j.norm()
    if ni == 0.0 or nj == 0.0:
        raise ZeroNormEmbedding("cannot compare a zero-norm embedding")
    return ni, nj


def cosine_similarity(beta_i: PooledEmbedding, beta_j: PooledEmbedding) -> float:
    ni, nj = _checked_norms(beta_i, beta_j)
    dot = float(_seqsum(beta_i.components * beta_j.components, axis=0))
    return dot / (ni * nj)


def surrogate(alpha: ActivationTensor) -> ActivationTensor:
    """Max-pooling surrogate: each channel's max value placed at its argmax
    cells, divided evenly among exact-equality ties, zero elsewhere."""
    v = alpha.values
    maxima = v.reshape(-1, alpha.channels).max(axis=0)  # (C,)
    is_max = v == maxima  # exact equality against the pooled value
    counts = is_max.reshape(-1, alpha.channels).sum(axis=0)  # N_c >= 1
    out = np.where(is_max, maxima / counts, 0.0)
    return ActivationTensor(out)


def _check_pooling(alpha: ActivationTensor, beta: PooledEmbedding, mode: str) -> None:
    if beta.pooling_mode != mode:
        raise PoolingInconsistent(
            f"embedding pooled with {beta.pooling_mode!r}, requested {mode!r}"
        )
    if beta.channels != alpha.channels:
        raise DimensionMismatch(
            f"embedding has {beta.channels} channels, tensor has {alpha.channels}"
        )
    expected = pool(alpha, mode).components
    scale = np.maximum(1.0, np.abs(expected))
    if np.any(np.abs(expected - beta.components) > _POOL_CONSISTENCY_TOL * scale):
        raise PoolingInconsistent("embedding does not match pool(alpha, mode)")


def decompose(
    alpha_i: ActivationTensor,
    beta_i: PooledEmbedding,
    beta_j: PooledEmbedding,
    mode: str,
    direction: str = "i",
) -> SimilarityMap:
    """Spatially decompose the cosine similarity over alpha_i's grid.

    The cells sum to cosine_similarity(beta_i, beta_j): exactly the dot
    product rearranged cell by cell for average pooling, and the surrogate
    tensor's decomposition for max pooling.
    """
    _check_pooling(alpha_i, beta_i, mode)
    ni, nj = _checked_norms(beta_i, beta_j)
    if mode == AVG:
        source = alpha_i.values
        z = alpha_i.grid_h * alpha_i.grid_w * ni * nj
    else:
        source = surrogate(alpha_i).values
        z = ni * nj
    cells = _seqsum(source * beta_j.components, axis=2) / z
    total = float(_seqsum(cells.reshape(-1), axis=0))
    return SimilarityMap(cells=cells, total=total, direction=direction, pooling_mode=mode)


def top_k_contribution_curve(
    beta_i: PooledEmbedding, beta_j: PooledEmbedding
) -> np.ndarray:
    """Cumulative fraction of the similarity explained by the k largest
    per-component products, for k = 1..channels."""
    ni, nj = _checked_norms(beta_i, beta_j)
    contribs = beta_i.components * beta_j.components / (ni * nj)
    total = float(_seqsum(contribs, axis=0))
    if total == 0.0:
        raise ZeroSimilarity("total similarity is zero; fractions are undefined")
    ordered = np.sort(contribs)[::-1]
    return np.add.accumulate(ordered) / total


def class_map(
    alpha_q: ActivationTensor,
    beta_q: PooledEmbedding,
    members: Sequence[PooledEmbedding],
    mode: str,
    direction: str = "query",
) -> SimilarityMap:
    """Cellwise sum of the pairwise maps between the query and each member."""
    if len(members) == 0:
        raise EmptyClass("class must have at least one member")
    cells = np.zeros((alpha_q.grid_h, alpha_q.grid_w))
    total = 0.0
    for beta_m in members:
        m = decompose(alpha_q, beta_q, beta_m, mode, direction=direction)
        cells = cells + m.cells
        total += m.total
    return SimilarityMap(cells=cells, total=total, direction=direction, pooling_mode=mode)


def region_score(m: SimilarityMap, r: Region) -> float:
    """Integral of the map over the rectangle, weighting each cell by the
    fraction of its normalized-coordinate footprint covered by the region."""
    gh, gw = m.grid_h, m.grid_w
    # per-cell overlap fractions along each axis, then the product
    x_edges = np.arange(gw + 1) / gw
    y_edges = np.arange(gh + 1) / gh
    wx = np.clip(np.minimum(x_edges[1:], r.x1) - np.maximum(x_edges[:-1], r.x0), 0.0, None) * gw
    wy = np.clip(np.minimum(y_edges[1:], r.y1) - np.maximum(y_edges[:-1], r.y0), 0.0, None) * gh
    weights = np.outer(wy, wx)
    return float(_seqsum((m.cells * weights).reshape(-1), axis=0))


def map_to_array(m: SimilarityMap) -> np.ndarray:
    """Serialization shape used by tensor-io: (grid_h, grid_w, 1)."""
    return m.cells.reshape(m.grid_h, m.grid_w, 1)
