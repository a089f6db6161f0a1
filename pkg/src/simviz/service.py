"""Read-only HTTP facade over one loaded embedding index.

One index per process, no write paths; a bounded LRU map cache keeps
repeated pair lookups cheap without ever changing a response.
"""

from __future__ import annotations

import threading
from collections import OrderedDict

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse, Response
from fastapi.staticfiles import StaticFiles

from . import render, retrieval, simcore, tensorio
from .cli import round9
from .errors import SimvizError, UnknownId
from .simcore import Region, SimilarityMap

MAP_CACHE_SIZE = 256


class MapCache:
    """Bounded LRU cache from (query_id, candidate_id) to SimilarityMap."""

    def __init__(self, capacity: int = MAP_CACHE_SIZE):
        self.capacity = capacity
        self._lock = threading.Lock()
        self._entries: OrderedDict[tuple[str, str], SimilarityMap] = OrderedDict()

    def get(self, key: tuple[str, str]) -> SimilarityMap | None:
        with self._lock:
            m = self._entries.get(key)
            if m is not None:
                self._entries.move_to_end(key)
            return m

    def put(self, key: tuple[str, str], value: SimilarityMap) -> None:
        with self._lock:
            self._entries[key] = value
            self._entries.move_to_end(key)
            while len(self._entries) > self.capacity:
                self._entries.popitem(last=False)


def _error(status: int, code: str) -> JSONResponse:
    return JSONResponse({"error": code}, status_code=status)


def _parse_region(value) -> Region:
    if not isinstance(value, dict):
        raise ValueError("region must be an object with x0, y0, x1, y1")
    try:
        return Region(
            float(value["x0"]), float(value["y0"]),
            float(value["x1"]), float(value["y1"]),
        )
    except (KeyError, TypeError) as e:
        raise ValueError(f"malformed region: {e}") from None


def create_app(
    index: retrieval.EmbeddingIndex,
    static_dir: str | None = None,
    cache_enabled: bool = True,
) -> FastAPI:
    app = FastAPI(title="simviz")
    cache = MapCache()
    known = set(index.ids())

    def pair_map(query_id: str, candidate_id: str) -> SimilarityMap:
        key = (query_id, candidate_id)
        if cache_enabled:
            cached = cache.get(key)
            if cached is not None:
                return cached
        m = retrieval.query_map(index, query_id, candidate_id)
        if cache_enabled:
            cache.put(key, m)
        return m

    @app.get("/api/images")
    def list_images():
        records = sorted(index.records, key=lambda r: r.id)
        return [
            {
                "id": r.id,
                "class_label": r.class_label,
                "thumbnail_url": f"/api/image/{r.id}",
            }
            for r in records
        ]

    @app.get("/api/image/{record_id}")
    def get_image(record_id: str):
        if record_id not in known:
            return _error(404, "unknown_id")
        img = tensorio.read_image(index.record(record_id).image_ref)
        return Response(tensorio.encode_png(img), media_type="image/png")

    @app.post("/api/search")
    async def search(request: Request):
        try:
            body = await request.json()
        except Exception:
            return _error(400, "malformed_body")
        if not isinstance(body, dict) or "query_id" not in body:
            return _error(400, "malformed_body")
        query_id = body["query_id"]
        if query_id not in known:
            return _error(404, "unknown_id")
        try:
            k = int(body.get("k", 10))
            if k < 1:
                raise ValueError("k must be at least 1")
            region = _parse_region(body["region"]) if body.get("region") is not None else None
            group_classes = (
                int(body["group_classes"]) if body.get("group_classes") is not None else None
            )
        except ValueError:
            return _error(400, "malformed_body")
        if region is None:
            results = retrieval.search(index, query_id, k)
        else:
            results = retrieval.region_search(index, query_id, region, k)
        if group_classes is not None:
            results = retrieval.group_by_class(results, group_classes)
        return [
            {
                "rank": r.rank,
                "id": r.id,
                "class_label": r.class_label,
                "score": round9(r.score),
                "map_url": f"/api/map?i={query_id}&j={r.id}&direction=j&render=png",
            }
            for r in results
        ]

    def map_response(m: SimilarityMap, image_ref: str, render_as: str):
        if render_as == "json":
            return {
                "grid_h": m.grid_h,
                "grid_w": m.grid_w,
                "total": m.total,
                "cells": [float(v) for v in m.cells.reshape(-1)],
            }
        base = tensorio.read_image(image_ref)
        png = tensorio.encode_png(render.overlay(m, base, render.RenderOptions()))
        return Response(png, media_type="image/png")

    @app.get("/api/map")
    def get_map(i: str, j: str, direction: str = "i", render: str = "json"):
        if i not in known or j not in known:
            return _error(404, "unknown_id")
        if direction not in ("i", "j"):
            return _error(400, "bad_direction")
        if render not in ("json", "png"):
            return _error(400, "bad_render")
        query_id, candidate_id = (i, j) if direction == "i" else (j, i)
        m = pair_map(query_id, candidate_id)
        return map_response(m, index.record(query_id).image_ref, render)

    @app.get("/api/classmap/{record_id}")
    def get_classmap(record_id: str, render: str = "json"):
        if record_id not in known:
            return _error(404, "unknown_id")
        if render not in ("json", "png"):
            return _error(400, "bad_render")
        query = index.record(record_id)
        members = [
            r.embedding for r in index.records
            if r.class_label == query.class_label and r.id != record_id
        ]
        if not members:
            return _error(409, "singleton_class")
        alpha_q = index.load_activation(record_id)
        m = simcore.class_map(
            alpha_q, query.embedding, members, index.pooling_mode, direction=record_id
        )
        return map_response(m, query.image_ref, render)

    @app.exception_handler(UnknownId)
    def unknown_id_handler(request: Request, exc: UnknownId):
        return _error(404, "unknown_id")

    @app.exception_handler(SimvizError)
    def simviz_error_handler(request: Request, exc: SimvizError):
        return _error(500, "internal_error")

    if static_dir is not None:
        app.mount("/", StaticFiles(directory=static_dir, html=True), name="ui")

    return app
