"""Synthetic volumes with exact ground truth, and the 8x8 toy prediction map
used to sanity-check the propagation-based uncertainty."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .graph import NeighborGraph, equal_weight_graph
from .volume import (
    Dataset,
    LabelSet,
    Volume,
    dataset_from_volume,
    grid_oversegment,
)


class SynthError(ValueError):
    pass


@dataclass(frozen=True)
class SynthSpec:
    dims: tuple[int, int, int]
    kind: str  # sphere | two-blob | layered
    noise_std: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.kind not in ("sphere", "two-blob", "layered"):
            raise SynthError(f"unknown shape kind {self.kind!r}")
        if self.noise_std < 0:
            raise SynthError("noise std must be >= 0")
        if min(self.dims) < 8:
            raise SynthError("dims too small for the configured shapes")


def _coord_grids(dims):
    nx, ny, nz = dims
    return np.meshgrid(
        np.arange(nx), np.arange(ny), np.arange(nz), indexing="ij"
    )


def generate(spec: SynthSpec) -> tuple[Volume, Volume]:
    """Seeded intensity volume plus exact class-index volume.

    Class c gets base intensity c / (n_classes - 1); Gaussian noise of the
    configured std is added on top.  The layered kind nests three classes
    with a non-smooth notch cut into the middle shell.
    """
    nx, ny, nz = spec.dims
    xs, ys, zs = _coord_grids(spec.dims)
    cx, cy, cz = (nx - 1) / 2.0, (ny - 1) / 2.0, (nz - 1) / 2.0
    d_center = np.sqrt((xs - cx) ** 2 + (ys - cy) ** 2 + (zs - cz) ** 2)

    if spec.kind == "sphere":
        radius = min(spec.dims) * 0.3
        classes = (d_center <= radius).astype(np.int64)
        n_classes = 2
    elif spec.kind == "two-blob":
        r = min(spec.dims) * 0.18
        c1 = np.array([nx * 0.3, cy, cz])
        c2 = np.array([nx * 0.7, cy, cz])
        d1 = np.sqrt((xs - c1[0]) ** 2 + (ys - c1[1]) ** 2 + (zs - c1[2]) ** 2)
        d2 = np.sqrt((xs - c2[0]) ** 2 + (ys - c2[1]) ** 2 + (zs - c2[2]) ** 2)
        classes = ((d1 <= r) | (d2 <= r)).astype(np.int64)
        n_classes = 2
    else:  # layered
        r_outer = min(spec.dims) * 0.42
        r_inner = min(spec.dims) * 0.22
        classes = np.zeros(spec.dims, dtype=np.int64)
        classes[d_center <= r_outer] = 1
        classes[d_center <= r_inner] = 2
        # rectangular notch cut through the middle shell: a deliberately
        # non-smooth boundary feature
        notch_w = max(2, nx // 16)
        notch = (
            (xs >= cx)
            & (np.abs(ys - cy) <= notch_w)
            & (np.abs(zs - cz) <= notch_w)
        )
        classes[notch & (classes == 1)] = 0
        n_classes = 3

    levels = classes.astype(float) / (n_classes - 1)
    rng = np.random.default_rng(spec.seed)
    intensities = levels + rng.normal(0.0, spec.noise_std, size=spec.dims)
    return Volume(intensities.astype(np.float32)), Volume(classes)


def synth_dataset(spec: SynthSpec, cell: int = 4) -> Dataset:
    """Grid-oversegmented dataset over a generated volume."""
    intensities, truth = generate(spec)
    n_classes = int(truth.voxels.max()) + 1
    labels = LabelSet(tuple(f"class{i}" for i in range(n_classes)))
    svmap = grid_oversegment(intensities, cell)
    return dataset_from_volume(intensities, svmap, truth, labels)


def fig3_toy() -> tuple[np.ndarray, NeighborGraph, np.ndarray, dict]:
    """8x8 binary toy: confident predictions with a stepped class boundary.

    Returns (centers, graph, initial probability field, info).  The graph
    links each pixel to its 4 nearest pixels with equal weights.  ``info``
    holds the class map and the ids at the non-smooth step corners.
    """
    n = 8
    ys, xs = np.meshgrid(np.arange(n), np.arange(n), indexing="ij")
    centers = np.column_stack([xs.ravel(), ys.ravel(), np.zeros(n * n)])

    # class 1 right of a stepped boundary: column >= 2 except a notch in
    # rows 2-5 where the boundary jumps to column >= 4
    cls = (xs >= 2).astype(np.int64)
    notch_rows = (ys >= 2) & (ys <= 5)
    cls[notch_rows & (xs < 4)] = 0
    cls = cls.ravel()

    # 4 nearest pixels, ties to lower id (diagonals enter at the border)
    ids = np.arange(n * n)
    neighbors = np.empty((n * n, 4), dtype=np.int64)
    for i in ids:
        d = np.linalg.norm(centers - centers[i], axis=1)
        d[i] = np.inf
        neighbors[i] = np.lexsort((ids, d))[:4]
    graph = equal_weight_graph(neighbors)

    p0 = np.zeros((n * n, 2))
    p0[np.arange(n * n), cls] = 1.0

    # ids of the two re-entrant corner cells where the notch boundary turns
    corner_ids = [2 * n + 3, 5 * n + 3]
    info = {"classes": cls, "grid": n, "notch_ids": np.array(corner_ids)}
    return centers, graph, p0, info
