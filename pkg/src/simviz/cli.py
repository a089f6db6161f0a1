"""Command-line entry point.

Every subcommand is a thin shell over the library modules; outputs are
byte-identical to the corresponding library calls so snapshot tests hold.
Exit codes: 0 success, 1 runtime error, 2 usage error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

from . import render, retrieval, simcore, tensorio, toyextract
from .errors import SimvizError
from .simcore import Region

IMAGE_EXTENSIONS = (".png", ".ppm")


def fmt9(x: float) -> str:
    """Nine significant digits, fixed notation for curve output."""
    return f"{x:.9g}"


def round9(x: float) -> float:
    """Score rounded to nine significant digits, for serialized payloads."""
    return float(f"{x:.9g}")


def parse_region(text: str) -> Region:
    parts = text.split(",")
    if len(parts) != 4:
        raise argparse.ArgumentTypeError("region must be x0,y0,x1,y1")
    try:
        x0, y0, x1, y1 = (float(p) for p in parts)
        return Region(x0, y0, x1, y1)
    except ValueError as e:
        raise argparse.ArgumentTypeError(str(e)) from None


def parse_grid(text: str) -> tuple[int, int]:
    try:
        h, w = text.lower().split("x")
        return int(h), int(w)
    except ValueError:
        raise argparse.ArgumentTypeError("grid must be HxW") from None


def emit_report(results: list[retrieval.RankedResult], fmt: str) -> str:
    """Render ranked results as TSV (with header) or JSON lines."""
    if fmt == "tsv":
        lines = ["rank\tid\tclass\tscore"]
        for r in results:
            lines.append(f"{r.rank}\t{r.id}\t{r.class_label}\t{fmt9(r.score)}")
        return "\n".join(lines) + "\n"
    lines = [
        json.dumps(
            {"rank": r.rank, "id": r.id, "class_label": r.class_label,
             "score": round9(r.score)},
            separators=(", ", ": "),
        )
        for r in results
    ]
    return "".join(line + "\n" for line in lines)


def _build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="simviz")
    sub = p.add_subparsers(dest="subcommand", required=True)

    ex = sub.add_parser("extract", help="extract toy activation tensors from images")
    ex.add_argument("--images", required=True)
    ex.add_argument("--out", required=True)
    ex.add_argument("--seed", required=True, type=int)
    ex.add_argument("--channels", type=int, default=32)
    ex.add_argument("--filter", type=int, default=8, dest="filter_size")
    ex.add_argument("--grid", type=parse_grid, default=(7, 7))

    ing = sub.add_parser("ingest", help="build an embedding index from a manifest")
    ing.add_argument("--manifest", required=True)
    ing.add_argument("--mode", required=True, choices=["avg", "max"])
    ing.add_argument("--out", required=True)

    pair = sub.add_parser("pair", help="write both similarity maps and overlays for a pair")
    pair.add_argument("--index", required=True)
    pair.add_argument("--i", required=True, dest="id_i")
    pair.add_argument("--j", required=True, dest="id_j")
    pair.add_argument("--mode", required=True, choices=["avg", "max"])
    pair.add_argument("--out-dir", required=True)
    pair.add_argument("--alpha", type=float, default=0.5)
    pair.add_argument("--norm", choices=["per_map", "shared"], default="per_map")
    pair.add_argument("--signed", action="store_true")

    cm = sub.add_parser("classmap", help="write the class similarity map for one image")
    cm.add_argument("--index", required=True)
    cm.add_argument("--id", required=True, dest="query_id")
    cm.add_argument("--out-dir", required=True)

    tk = sub.add_parser("topk", help="print the cumulative component-contribution curve")
    tk.add_argument("--index", required=True)
    tk.add_argument("--i", required=True, dest="id_i")
    tk.add_argument("--j", required=True, dest="id_j")

    se = sub.add_parser("search", help="rank database images against a query")
    se.add_argument("--index", required=True)
    se.add_argument("--query", required=True)
    se.add_argument("--k", required=True, type=int)
    se.add_argument("--region", type=parse_region, default=None)
    se.add_argument("--group-classes", type=int, default=None)
    se.add_argument("--format", choices=["tsv", "json-lines"], default="tsv")

    sv = sub.add_parser("serve", help="serve the HTTP API over one index")
    sv.add_argument("--index", required=True)
    sv.add_argument("--port", required=True, type=int)
    sv.add_argument("--static", default=None)
    return p


def _cmd_extract(args) -> None:
    cfg = toyextract.ExtractorConfig(
        seed=args.seed,
        channels=args.channels,
        filter_size=args.filter_size,
        grid_h=args.grid[0],
        grid_w=args.grid[1],
    )
    os.makedirs(args.out, exist_ok=True)
    names = sorted(
        n for n in os.listdir(args.images)
        if os.path.splitext(n)[1].lower() in IMAGE_EXTENSIONS
    )
    for name in names:
        img = tensorio.read_image(os.path.join(args.images, name))
        alpha = toyextract.extract(img, cfg)
        out_path = os.path.join(args.out, os.path.splitext(name)[0] + ".npy")
        tensorio.save_array(
            tensorio.array_from_ndarray(alpha.values, "<f4"), out_path
        )
    with open(os.path.join(args.out, "extractor.meta"), "w", encoding="utf-8") as f:
        f.write(cfg.meta_text())
    print(f"extracted={len(names)}")


def _cmd_ingest(args) -> None:
    manifest = tensorio.load_manifest(args.manifest)
    index = retrieval.build_index(manifest, args.mode)
    retrieval.save_index(index, args.manifest, args.out)
    print(f"indexed={len(index.records)}")


def _render_options(args) -> render.RenderOptions:
    return render.RenderOptions(
        alpha=args.alpha,
        normalization=args.norm,
        negative_handling=render.SIGNED if args.signed else render.CLAMP,
    )


def _write_map_and_overlay(index, m, image_ref: str, out_dir: str, stem: str, opts) -> None:
    tensorio.save_array(
        tensorio.array_from_ndarray(simcore.map_to_array(m), "<f8"),
        os.path.join(out_dir, stem + ".npy"),
    )
    base = tensorio.read_image(image_ref)
    tensorio.write_image(render.overlay(m, base, opts), os.path.join(out_dir, stem + ".png"))


def _cmd_pair(args) -> None:
    index = retrieval.load_index(args.index)
    if index.pooling_mode != args.mode:
        raise SimvizError(
            f"index was built with mode {index.pooling_mode!r}, requested {args.mode!r}"
        )
    os.makedirs(args.out_dir, exist_ok=True)
    opts = _render_options(args)
    map_ij = retrieval.query_map(index, args.id_i, args.id_j)
    map_ji = retrieval.query_map(index, args.id_j, args.id_i)
    _write_map_and_overlay(
        index, map_ij, index.record(args.id_i).image_ref, args.out_dir,
        f"{args.id_i}_to_{args.id_j}", opts,
    )
    _write_map_and_overlay(
        index, map_ji, index.record(args.id_j).image_ref, args.out_dir,
        f"{args.id_j}_to_{args.id_i}", opts,
    )
    print(f"similarity={fmt9(map_ij.total)}")


def _cmd_classmap(args) -> None:
    index = retrieval.load_index(args.index)
    query = index.record(args.query_id)
    members = [
        r.embedding for r in index.records
        if r.class_label == query.class_label and r.id != query.id
    ]
    alpha_q = index.load_activation(args.query_id)
    m = simcore.class_map(
        alpha_q, query.embedding, members, index.pooling_mode, direction=query.id
    )
    os.makedirs(args.out_dir, exist_ok=True)
    _write_map_and_overlay(
        index, m, query.image_ref, args.out_dir,
        f"{args.query_id}_classmap", render.RenderOptions(),
    )
    print(f"class_total={fmt9(m.total)}")


def _cmd_topk(args) -> None:
    index = retrieval.load_index(args.index)
    curve = simcore.top_k_contribution_curve(
        index.record(args.id_i).embedding, index.record(args.id_j).embedding
    )
    for v in curve:
        print(f"{v:.9f}")


def _cmd_search(args) -> None:
    index = retrieval.load_index(args.index)
    if args.k < 1:
        raise SimvizError("k must be at least 1")
    if args.region is None:
        results = retrieval.search(index, args.query, args.k)
    else:
        results = retrieval.region_search(index, args.query, args.region, args.k)
    if args.group_classes is not None:
        results = retrieval.group_by_class(results, args.group_classes)
    fmt = "json-lines" if args.format == "json-lines" else "tsv"
    sys.stdout.write(emit_report(results, fmt))


def _cmd_serve(args) -> None:
    import uvicorn

    from .service import create_app

    index = retrieval.load_index(args.index)
    app = create_app(index, static_dir=args.static)
    uvicorn.run(app, host="127.0.0.1", port=args.port, log_level="warning")


_COMMANDS = {
    "extract": _cmd_extract,
    "ingest": _cmd_ingest,
    "pair": _cmd_pair,
    "classmap": _cmd_classmap,
    "topk": _cmd_topk,
    "search": _cmd_search,
    "serve": _cmd_serve,
}


def run(argv: list[str]) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return 2 if e.code not in (0, None) else 0
    try:
        _COMMANDS[args.subcommand](args)
    except SimvizError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    except OSError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    return 0


def main() -> None:
    sys.exit(run(sys.argv[1:]))


if __name__ == "__main__":
    main()
