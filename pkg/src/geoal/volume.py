"""Voxel grids, supervoxel decompositions and dataset bookkeeping.

Conventions: volumes are indexed ``[x, y, z]`` with x the fastest-varying
axis on disk; supervoxel ids are dense integers ``0..S-1``; spacing is one
voxel unit along every axis.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

FEATURE_DIM = 5


class VolumeError(ValueError):
    pass


@dataclass(frozen=True)
class Volume:
    """Dense scalar voxel grid."""

    voxels: np.ndarray  # shape (nx, ny, nz)

    def __post_init__(self):
        v = np.asarray(self.voxels)
        if v.ndim != 3:
            raise VolumeError("volume must be a 3-d array")
        if min(v.shape) < 1:
            raise VolumeError("all dims must be >= 1")
        object.__setattr__(self, "voxels", v)

    @property
    def dims(self) -> tuple[int, int, int]:
        return self.voxels.shape


@dataclass(frozen=True)
class SupervoxelMap:
    """Per-voxel supervoxel identifiers, dense 0..S-1."""

    ids: np.ndarray  # shape (nx, ny, nz), integer

    def __post_init__(self):
        ids = np.asarray(self.ids)
        if ids.ndim != 3:
            raise VolumeError("supervoxel map must be a 3-d array")
        if not np.issubdtype(ids.dtype, np.integer):
            raise VolumeError("supervoxel ids must be integers")
        counts = np.bincount(ids.ravel())
        if ids.min() != 0 or np.any(counts == 0):
            raise VolumeError("supervoxel ids must be contiguous 0..S-1")
        object.__setattr__(self, "ids", ids)

    @property
    def dims(self) -> tuple[int, int, int]:
        return self.ids.shape

    @property
    def n_supervoxels(self) -> int:
        return int(self.ids.max()) + 1

    def check_connected(self) -> bool:
        """True when every id's voxel set is 26-connected."""
        structure = np.ones((3, 3, 3), dtype=bool)
        for sv in range(self.n_supervoxels):
            _, n_comp = ndimage.label(self.ids == sv, structure=structure)
            if n_comp != 1:
                return False
        return True


@dataclass(frozen=True)
class Supervoxel:
    id: int
    center: np.ndarray  # 3-vector, voxel units
    features: np.ndarray  # length FEATURE_DIM
    member_count: int


@dataclass(frozen=True)
class LabelSet:
    classes: tuple[str, ...]

    def __post_init__(self):
        if len(self.classes) < 2:
            raise VolumeError("label set needs at least 2 classes")
        if len(set(self.classes)) != len(self.classes):
            raise VolumeError("class names must be unique")
        object.__setattr__(self, "classes", tuple(self.classes))

    def __len__(self) -> int:
        return len(self.classes)


@dataclass
class Dataset:
    """A segmentation problem: supervoxels, labels and ground truth.

    ``volume``/``svmap`` are absent in tabular mode.  ``kappa`` is the
    common spherical-approximation radius of the supervoxels.
    """

    supervoxels: list[Supervoxel]
    labels: LabelSet
    ground_truth: np.ndarray  # per-supervoxel class index
    kappa: float = 0.0
    volume: Volume | None = None
    svmap: SupervoxelMap | None = None
    spatial_dim: int = 3  # 2 for superpixel datasets

    centers: np.ndarray = field(init=False)
    features: np.ndarray = field(init=False)

    def __post_init__(self):
        gt = np.asarray(self.ground_truth)
        if gt.min() < 0 or gt.max() >= len(self.labels):
            raise VolumeError("ground truth indices out of range")
        if self.volume is not None and not self.kappa > 0:
            raise VolumeError("kappa must be positive for volume datasets")
        self.ground_truth = gt
        self.centers = np.array([s.center for s in self.supervoxels], dtype=float)
        self.features = np.array([s.features for s in self.supervoxels], dtype=float)

    @property
    def n_supervoxels(self) -> int:
        return len(self.supervoxels)


def grid_oversegment(volume: Volume, cell: int) -> SupervoxelMap:
    """Tile the volume with axis-aligned cubic cells of the given edge.

    Cells are clipped at the boundaries and ids assigned in raster order
    (x fastest).  Deterministic.
    """
    if cell < 1:
        raise VolumeError("cell must be >= 1")
    nx, ny, nz = volume.dims
    if cell > max(nx, ny, nz):
        raise VolumeError("cell larger than any volume dimension")
    ncx = -(-nx // cell)
    ncy = -(-ny // cell)
    cx = np.arange(nx) // cell
    cy = np.arange(ny) // cell
    cz = np.arange(nz) // cell
    ids = (
        cx[:, None, None]
        + ncx * cy[None, :, None]
        + ncx * ncy * cz[None, None, :]
    )
    return SupervoxelMap(ids.astype(np.int64))


def equivalent_sphere_radius(member_counts: np.ndarray) -> float:
    """Mean equivalent-sphere radius (3 n / 4 pi)^(1/3) over supervoxels."""
    counts = np.asarray(member_counts, dtype=float)
    return float(np.mean((3.0 * counts / (4.0 * np.pi)) ** (1.0 / 3.0)))


def summarize_supervoxels(volume: Volume, svmap: SupervoxelMap) -> list[Supervoxel]:
    """Per-supervoxel centers and intensity-statistics feature vectors.

    Features: mean, std, min, max and mean gradient magnitude of the
    member voxel intensities (d = 5).
    """
    if volume.dims != svmap.dims:
        raise VolumeError("volume and supervoxel map dims differ")
    ids = svmap.ids.ravel()
    vals = volume.voxels.astype(float).ravel()
    S = svmap.n_supervoxels
    counts = np.bincount(ids, minlength=S)

    nx, ny, nz = volume.dims
    xs, ys, zs = np.meshgrid(
        np.arange(nx), np.arange(ny), np.arange(nz), indexing="ij"
    )
    cx = np.bincount(ids, weights=xs.ravel(), minlength=S) / counts
    cy = np.bincount(ids, weights=ys.ravel(), minlength=S) / counts
    cz = np.bincount(ids, weights=zs.ravel(), minlength=S) / counts

    mean = np.bincount(ids, weights=vals, minlength=S) / counts
    sq = np.bincount(ids, weights=vals * vals, minlength=S) / counts
    var = np.maximum(sq - mean * mean, 0.0)
    std = np.sqrt(var)

    vmin = np.full(S, np.inf)
    vmax = np.full(S, -np.inf)
    np.minimum.at(vmin, ids, vals)
    np.maximum.at(vmax, ids, vals)

    grads = np.gradient(volume.voxels.astype(float))
    gmag = np.sqrt(sum(g * g for g in grads)).ravel()
    gmean = np.bincount(ids, weights=gmag, minlength=S) / counts

    feats = np.column_stack([mean, std, vmin, vmax, gmean])
    return [
        Supervoxel(
            id=i,
            center=np.array([cx[i], cy[i], cz[i]]),
            features=feats[i],
            member_count=int(counts[i]),
        )
        for i in range(S)
    ]


def ground_truth_labels(svmap: SupervoxelMap, gt_volume: Volume, n_classes: int) -> np.ndarray:
    """Majority-vote class per supervoxel; ties go to the lowest class index."""
    if svmap.dims != gt_volume.dims:
        raise VolumeError("supervoxel map and ground-truth dims differ")
    gt = gt_volume.voxels.ravel().astype(np.int64)
    if gt.min() < 0 or gt.max() >= n_classes:
        raise VolumeError("ground-truth class value out of range")
    ids = svmap.ids.ravel()
    S = svmap.n_supervoxels
    # votes[s, c] = count of voxels of class c in supervoxel s
    votes = np.zeros((S, n_classes), dtype=np.int64)
    np.add.at(votes, (ids, gt), 1)
    # argmax picks the lowest index on ties
    return votes.argmax(axis=1)


def dataset_from_volume(
    volume: Volume,
    svmap: SupervoxelMap,
    gt_volume: Volume,
    labels: LabelSet,
) -> Dataset:
    supervoxels = summarize_supervoxels(volume, svmap)
    gt = ground_truth_labels(svmap, gt_volume, len(labels))
    kappa = equivalent_sphere_radius(np.array([s.member_count for s in supervoxels]))
    return Dataset(
        supervoxels=supervoxels,
        labels=labels,
        ground_truth=gt,
        kappa=kappa,
        volume=volume,
        svmap=svmap,
    )
