"""Supervoxel neighborhood graph and random-walk probability propagation."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import sparse

from .entropy import UncertaintyMeasure, entropy_fn

DISTANCE_EPS = 1e-6


@dataclass(frozen=True)
class NeighborGraph:
    """Directed k-nearest-neighbor graph with incoming edges normalized.

    ``transition`` is row-stochastic: row i holds the weights of the edges
    from the k nearest neighbors of node i.
    """

    neighbors: np.ndarray  # (S, k) neighbor ids of each node
    transition: sparse.csr_matrix  # (S, S), rows sum to 1

    @property
    def n_nodes(self) -> int:
        return self.transition.shape[0]

    @property
    def k(self) -> int:
        return self.neighbors.shape[1]


def _knn(centers: np.ndarray, k: int) -> tuple[np.ndarray, np.ndarray]:
    """k nearest neighbors per node by center distance, ties to lower id.

    The tree query over-fetches so that equal-distance shells (common on
    grid centers) can be re-ranked by id before cutting to k.
    """
    from scipy.spatial import cKDTree

    S = centers.shape[0]
    kk = min(S - 1, k + 48)
    d, idx = cKDTree(centers).query(centers, k=kk + 1, workers=-1)
    d[idx == np.arange(S)[:, None]] = np.inf  # no self-edges
    order = np.lexsort((idx, d), axis=-1)[:, :k]
    neighbors = np.take_along_axis(idx, order, axis=1).astype(np.int64)
    dists = np.take_along_axis(d, order, axis=1)
    return neighbors, dists


def build_graph(centers: np.ndarray, k: int) -> NeighborGraph:
    """Inverse-distance weighted kNN graph, incoming weights normalized to 1."""
    centers = np.asarray(centers, dtype=float)
    S = centers.shape[0]
    if k < 1:
        raise ValueError("k must be >= 1")
    if S <= k:
        raise ValueError("need more supervoxels than neighbors")
    neighbors, dists = _knn(centers, k)
    raw = 1.0 / np.maximum(dists, DISTANCE_EPS)
    weights = raw / raw.sum(axis=1, keepdims=True)
    rows = np.repeat(np.arange(S), k)
    T = sparse.csr_matrix(
        (weights.ravel(), (rows, neighbors.ravel())), shape=(S, S)
    )
    return NeighborGraph(neighbors=neighbors, transition=T)


def equal_weight_graph(neighbors: np.ndarray) -> NeighborGraph:
    """Graph from explicit neighbor lists with equal incoming weights."""
    neighbors = np.asarray(neighbors, dtype=np.int64)
    S, k = neighbors.shape
    weights = np.full((S, k), 1.0 / k)
    rows = np.repeat(np.arange(S), k)
    T = sparse.csr_matrix((weights.ravel(), (rows, neighbors.ravel())), shape=(S, S))
    return NeighborGraph(neighbors=neighbors, transition=T)


def propagate(graph: NeighborGraph, p0: np.ndarray, tau_max: int) -> np.ndarray:
    """Apply the neighborhood-averaging update exactly ``tau_max`` times.

    Rows stay valid distributions because the transition rows sum to 1.
    """
    if tau_max < 0:
        raise ValueError("tau_max must be >= 0")
    p = np.asarray(p0, dtype=float)
    for _ in range(tau_max):
        p = graph.transition @ p
    return p


def geometric_uncertainty(field: np.ndarray, measure: UncertaintyMeasure) -> np.ndarray:
    """Per-node entropy of the propagated distributions."""
    return entropy_fn(measure)(np.asarray(field, dtype=float))


def combined_uncertainty(feature_field: np.ndarray, geometric_field: np.ndarray) -> np.ndarray:
    """Elementwise sum, the upper bound of the joint entropy."""
    f = np.asarray(feature_field, dtype=float)
    g = np.asarray(geometric_field, dtype=float)
    if f.shape != g.shape:
        raise ValueError("field length mismatch")
    return f + g
