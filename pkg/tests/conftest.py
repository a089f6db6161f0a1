import os

import numpy as np
import pytest

from simviz import cli, retrieval, simcore, tensorio, toyextract


def random_tensor(rng, grid_h, grid_w, channels, nonneg=False):
    values = rng.standard_normal((grid_h, grid_w, channels))
    if nonneg:
        values = np.abs(values)
    return simcore.ActivationTensor(values)


def random_map(rng, grid_h, grid_w, nonneg=False):
    cells = rng.standard_normal((grid_h, grid_w))
    if nonneg:
        cells = np.abs(cells)
    return simcore.SimilarityMap(
        cells=cells, total=float(cells.reshape(-1).sum()), direction="t", pooling_mode="avg"
    )


def write_noise_image(path, rng, width=12, height=12):
    pixels = rng.integers(0, 256, size=(height, width, 3), dtype=np.uint8)
    tensorio.write_image(tensorio.RasterImage(width, height, pixels), path)


def build_dataset(root, n, n_classes=4, seed=7, mode="avg",
                  channels=8, filter_size=4, grid=(3, 3)):
    """Images + extracted tensors + manifest + built index, all under root.

    Returns (index_dir, manifest_path).
    """
    rng = np.random.default_rng(seed)
    images_dir = os.path.join(root, "images")
    feats_dir = os.path.join(root, "feats")
    os.makedirs(images_dir)
    for i in range(n):
        write_noise_image(
            os.path.join(images_dir, f"img{i:03d}.ppm"), rng,
            width=filter_size * grid[1], height=filter_size * grid[0],
        )
    rc = cli.run([
        "extract", "--images", images_dir, "--out", feats_dir,
        "--seed", str(seed), "--channels", str(channels),
        "--filter", str(filter_size), "--grid", f"{grid[0]}x{grid[1]}",
    ])
    assert rc == 0
    manifest_path = os.path.join(root, "data.manifest")
    lines = [tensorio.MANIFEST_HEADER]
    for i in range(n):
        stem = f"img{i:03d}"
        label = f"class{i % n_classes}"
        lines.append(f"{stem}\timages/{stem}.ppm\tfeats/{stem}.npy\t{label}")
    with open(manifest_path, "w", encoding="utf-8") as f:
        f.write("\n".join(lines) + "\n")
    index_dir = os.path.join(root, "index")
    rc = cli.run(["ingest", "--manifest", manifest_path, "--mode", mode, "--out", index_dir])
    assert rc == 0
    return index_dir, manifest_path


@pytest.fixture
def small_index(tmp_path):
    index_dir, _ = build_dataset(str(tmp_path), n=12, n_classes=3, seed=11)
    return retrieval.load_index(index_dir)


@pytest.fixture
def small_index_dir(tmp_path):
    index_dir, _ = build_dataset(str(tmp_path), n=12, n_classes=3, seed=11)
    return index_dir
