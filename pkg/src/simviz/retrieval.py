"""Embedding index construction, whole-image search, and region search.

Search is an exhaustive linear scan; exactness keeps the ranking contract
simple (descending score, ties broken by ascending id, query excluded).
"""

from __future__ import annotations

import os
import shutil
from dataclasses import dataclass

import numpy as np

from . import simcore, tensorio
from .errors import UnknownId, ZeroNormEmbedding
from .simcore import ActivationTensor, PooledEmbedding, Region, SimilarityMap

INDEX_MANIFEST = "index.manifest"
INDEX_META = "index.meta"
INDEX_EMBEDDINGS = "embeddings.npy"


@dataclass
class IndexRecord:
    id: str
    class_label: str
    embedding: PooledEmbedding
    activation_ref: str
    image_ref: str


@dataclass
class EmbeddingIndex:
    records: list[IndexRecord]
    pooling_mode: str
    grid: tuple[int, int]
    channels: int

    def ids(self) -> list[str]:
        return [r.id for r in self.records]

    def record(self, record_id: str) -> IndexRecord:
        for r in self.records:
            if r.id == record_id:
                return r
        raise UnknownId(f"no record with id {record_id!r}")

    def load_activation(self, record_id: str) -> ActivationTensor:
        r = self.record(record_id)
        return ActivationTensor(tensorio.load_array(r.activation_ref).as_ndarray())


@dataclass
class RankedResult:
    id: str
    class_label: str
    score: float
    rank: int


def build_index(manifest: tensorio.DatasetManifest, mode: str) -> EmbeddingIndex:
    """Pool every activation tensor in the manifest into an index.

    Records whose embedding has zero norm are rejected as a group, with the
    offending ids named: a zero embedding is a broken export and must not rank.
    """
    records: list[IndexRecord] = []
    zero_ids: list[str] = []
    for e in manifest.entries:
        act_path = manifest.activation_file(e)
        alpha = ActivationTensor(tensorio.load_array(act_path).as_ndarray())
        beta = simcore.pool(alpha, mode)
        if beta.norm() == 0.0:
            zero_ids.append(e.id)
            continue
        records.append(
            IndexRecord(
                id=e.id,
                class_label=e.class_label,
                embedding=beta,
                activation_ref=act_path,
                image_ref=manifest.image_file(e),
            )
        )
    if zero_ids:
        raise ZeroNormEmbedding(f"zero-norm embeddings for ids: {', '.join(zero_ids)}")
    return EmbeddingIndex(
        records=records,
        pooling_mode=mode,
        grid=manifest.grid,
        channels=manifest.channels,
    )


def save_index(index: EmbeddingIndex, manifest_path: str, out_dir: str) -> None:
    """Persist as a directory: manifest copy, flat embedding array, meta file."""
    os.makedirs(out_dir, exist_ok=True)
    shutil.copyfile(manifest_path, os.path.join(out_dir, INDEX_MANIFEST))
    flat = (
        np.concatenate([r.embedding.components for r in index.records])
        if index.records
        else np.zeros(0)
    )
    tensorio.save_array(
        tensorio.array_from_ndarray(flat, "<f8") if flat.size else
        tensorio.ArrayFile("<f8", (1,), np.zeros(1)),  # placeholder for empty index
        os.path.join(out_dir, INDEX_EMBEDDINGS),
    )
    meta = (
        f"n={len(index.records)}\n"
        f"channels={index.channels}\n"
        f"grid_h={index.grid[0]}\n"
        f"grid_w={index.grid[1]}\n"
        f"pooling_mode={index.pooling_mode}\n"
        f"root={os.path.dirname(os.path.abspath(manifest_path))}\n"
    )
    with open(os.path.join(out_dir, INDEX_META), "w", encoding="utf-8") as f:
        f.write(meta)


def load_index(index_dir: str) -> EmbeddingIndex:
    meta: dict[str, str] = {}
    with open(os.path.join(index_dir, INDEX_META), "r", encoding="utf-8") as f:
        for line in f:
            if "=" in line:
                k, v = line.rstrip("\n").split("=", 1)
                meta[k] = v
    manifest = tensorio.load_manifest(
        os.path.join(index_dir, INDEX_MANIFEST), root=meta.get("root")
    )
    mode = meta["pooling_mode"]
    n = int(meta["n"])
    channels = int(meta["channels"])
    grid = (int(meta["grid_h"]), int(meta["grid_w"]))
    flat = tensorio.load_array(os.path.join(index_dir, INDEX_EMBEDDINGS)).as_ndarray()
    records: list[IndexRecord] = []
    for i, e in enumerate(manifest.entries[:n]):
        comps = flat[i * channels:(i + 1) * channels]
        records.append(
            IndexRecord(
                id=e.id,
                class_label=e.class_label,
                embedding=PooledEmbedding(comps, mode, grid),
                activation_ref=manifest.activation_file(e),
                image_ref=manifest.image_file(e),
            )
        )
    return EmbeddingIndex(records=records, pooling_mode=mode, grid=grid, channels=channels)


def _ranked(scored: list[tuple[str, str, float]], k: int) -> list[RankedResult]:
    scored.sort(key=lambda t: (-t[2], t[0]))
    return [
        RankedResult(id=i, class_label=c, score=s, rank=pos + 1)
        for pos, (i, c, s) in enumerate(scored[:k])
    ]


def search(index: EmbeddingIndex, query_id: str, k: int) -> list[RankedResult]:
    """Top-k records by cosine similarity to the query's embedding."""
    query = index.record(query_id)
    scored = [
        (r.id, r.class_label, simcore.cosine_similarity(query.embedding, r.embedding))
        for r in index.records
        if r.id != query_id
    ]
    return _ranked(scored, k)


def query_map(index: EmbeddingIndex, query_id: str, candidate_id: str) -> SimilarityMap:
    """The query-side similarity map against one candidate."""
    query = index.record(query_id)
    candidate = index.record(candidate_id)
    alpha_q = index.load_activation(query_id)
    return simcore.decompose(
        alpha_q, query.embedding, candidate.embedding, index.pooling_mode,
        direction=query_id,
    )


def region_search(
    index: EmbeddingIndex, query_id: str, region: Region, k: int
) -> list[RankedResult]:
    """Rank candidates by the query-side map's contribution inside the region."""
    query = index.record(query_id)
    alpha_q = index.load_activation(query_id)
    scored = []
    for r in index.records:
        if r.id == query_id:
            continue
        m = simcore.decompose(
            alpha_q, query.embedding, r.embedding, index.pooling_mode, direction=query_id
        )
        scored.append((r.id, r.class_label, simcore.region_score(m, region)))
    return _ranked(scored, k)


def group_by_class(results: list[RankedResult], n_classes: int) -> list[RankedResult]:
    """Keep the best result per class, re-ranked, truncated to n_classes."""
    kept: list[RankedResult] = []
    seen: set[str] = set()
    for r in results:
        if r.class_label in seen:
            continue
        seen.add(r.class_label)
        kept.append(r)
        if len(kept) == n_classes:
            break
    return [
        RankedResult(id=r.id, class_label=r.class_label, score=r.score, rank=i + 1)
        for i, r in enumerate(kept)
    ]
