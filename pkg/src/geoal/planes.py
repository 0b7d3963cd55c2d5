"""Bisecting-plane search: angular parameterization, corridor bounds and
branch-and-bound maximization of patch uncertainty.

A plane through a supervoxel center is parameterized by two angles
(phi, gamma) in [0, pi): phi orients its trace in the XY plane, gamma the
trace in the YZ plane.  A corridor is a rectangle in angle space bounded by
its four corner planes; its uncertainty upper-bounds every plane inside it.
"""

from __future__ import annotations

import heapq
import itertools
import math
from dataclasses import dataclass

import numpy as np

DEGENERACY_EPS = 1e-9
ANGLE_NUDGE = 1e-6


class DegeneratePlaneError(ValueError):
    pass


def _raw_normal(phi: float, gamma: float) -> np.ndarray:
    # cross product of the two trace directions v1, v2
    cp, sp = math.cos(phi), math.sin(phi)
    cg, sg = math.cos(gamma), math.sin(gamma)
    return np.array([cp * cg, sp * cg, sp * sg])


def plane_normal(phi: float, gamma: float) -> np.ndarray:
    """Unit normal of the plane with the given angular coordinates."""
    n = _raw_normal(phi, gamma)
    norm = math.sqrt(n[0] ** 2 + n[1] ** 2 + n[2] ** 2)
    if norm < DEGENERACY_EPS:
        raise DegeneratePlaneError(f"degenerate plane angles ({phi}, {gamma})")
    return n / norm


def _safe_angles(phi: float, gamma: float) -> tuple[float, float]:
    """Nudge the single degenerate angle pair off the singularity."""
    cg, sp = math.cos(gamma), math.sin(phi)
    if cg * cg + sp * sp * (1.0 - cg * cg) < DEGENERACY_EPS**2:
        return phi + ANGLE_NUDGE, gamma
    return phi, gamma


@dataclass(frozen=True)
class Plane:
    center: np.ndarray
    phi: float
    gamma: float

    @property
    def normal(self) -> np.ndarray:
        return plane_normal(self.phi, self.gamma)


@dataclass(frozen=True)
class Corridor:
    phi_min: float
    phi_max: float
    gamma_min: float
    gamma_max: float

    def corner_angles(self) -> list[tuple[float, float]]:
        return [
            (self.phi_min, self.gamma_min),
            (self.phi_min, self.gamma_max),
            (self.phi_max, self.gamma_min),
            (self.phi_max, self.gamma_max),
        ]

    def midpoint(self) -> tuple[float, float]:
        return (
            0.5 * (self.phi_min + self.phi_max),
            0.5 * (self.gamma_min + self.gamma_max),
        )

    def split(self) -> list["Corridor"]:
        phi0, gamma0 = self.midpoint()
        return [
            Corridor(self.phi_min, phi0, self.gamma_min, gamma0),
            Corridor(self.phi_min, phi0, gamma0, self.gamma_max),
            Corridor(phi0, self.phi_max, self.gamma_min, gamma0),
            Corridor(phi0, self.phi_max, gamma0, self.gamma_max),
        ]


@dataclass(frozen=True)
class PatchQuery:
    center_id: int
    plane: Plane
    radius: float
    member_ids: np.ndarray
    uncertainty: float


def _ball_members(center: np.ndarray, r: float, centers: np.ndarray) -> np.ndarray:
    d = np.linalg.norm(centers - center[None, :], axis=1)
    return np.flatnonzero(d <= r)


def patch_members(
    center_id: int,
    r: float,
    plane: Plane,
    centers: np.ndarray,
    kappa: float,
) -> np.ndarray:
    """Supervoxels within r of the center and within 2*kappa of the plane."""
    centers = np.asarray(centers, dtype=float)
    c = centers[center_id]
    ball = _ball_members(c, r, centers)
    rel = centers[ball] - c[None, :]
    dist = np.abs(rel @ plane.normal)
    return ball[dist <= 2.0 * kappa]


def plane_uncertainty(member_ids: np.ndarray, U: np.ndarray) -> float:
    return float(np.asarray(U, dtype=float)[member_ids].sum())


def _interval_trig(lo: float, hi: float) -> tuple[tuple[float, float], tuple[float, float]]:
    """Intervals of cos and sin over an angle interval within [0, pi]."""
    cos_iv = (math.cos(hi), math.cos(lo))  # cos decreasing on [0, pi]
    slo, shi = math.sin(lo), math.sin(hi)
    sin_min = slo if slo < shi else shi
    if lo <= math.pi / 2 <= hi:
        sin_max = 1.0
    else:
        sin_max = slo if slo > shi else shi
    return cos_iv, (sin_min, sin_max)


def _interval_mul(a, b):
    c0, c1, c2, c3 = a[0] * b[0], a[0] * b[1], a[1] * b[0], a[1] * b[1]
    return min(c0, c1, c2, c3), max(c0, c1, c2, c3)


def _corridor_coeffs(corridor: Corridor):
    """Interval coefficients of the raw normal over the angle box, plus an
    upper bound on the raw normal's norm over the box."""
    cos_p, sin_p = _interval_trig(corridor.phi_min, corridor.phi_max)
    cos_g, sin_g = _interval_trig(corridor.gamma_min, corridor.gamma_max)
    cx = _interval_mul(cos_p, cos_g)
    cy = _interval_mul(sin_p, cos_g)
    cz = _interval_mul(sin_p, sin_g)
    # squared norm of the raw normal is sin^2(phi) + cos^2(gamma) (1 - sin^2(phi));
    # its box maximum turns the dot bound into a true distance lower bound
    sin2p_hi = sin_p[1] ** 2
    cos2g_hi = max(cos_g[0] ** 2, cos_g[1] ** 2)
    norm_hi = math.sqrt(min(1.0, sin2p_hi + cos2g_hi * (1.0 - sin2p_hi)))
    return (cx, cy, cz), norm_hi


def _corridor_mask(corridor: Corridor, rel: np.ndarray, kappa: float) -> np.ndarray:
    """Membership of ball supervoxels (rel coords) in the corridor.

    A supervoxel belongs when some plane of the corridor can reach it,
    i.e. when an interval enclosure of its distance to the plane family
    over the whole angle box dips to 2*kappa or below.  The enclosure is
    an upper bound of the swept set, so corridor uncertainty bounds every
    interior plane's uncertainty from above.
    """
    coeffs, norm_hi = _corridor_coeffs(corridor)
    if norm_hi < DEGENERACY_EPS:
        return np.ones(rel.shape[0], dtype=bool)
    lo = np.zeros(rel.shape[0])
    hi = np.zeros(rel.shape[0])
    for axis, (clo, chi) in enumerate(coeffs):
        a = rel[:, axis] * clo
        b = rel[:, axis] * chi
        lo += np.minimum(a, b)
        hi += np.maximum(a, b)
    abs_lo = np.minimum(np.abs(lo), np.abs(hi))
    abs_lo[(lo <= 0) & (hi >= 0)] = 0.0
    return abs_lo <= 2.0 * kappa * norm_hi


def corridor_uncertainty(
    corridor: Corridor,
    center_id: int,
    r: float,
    centers: np.ndarray,
    kappa: float,
    U: np.ndarray,
) -> float:
    """Sum of uncertainty over the supervoxels the corridor can touch."""
    centers = np.asarray(centers, dtype=float)
    c = centers[center_id]
    ball = _ball_members(c, r, centers)
    rel = centers[ball] - c[None, :]
    mask = _corridor_mask(corridor, rel, kappa)
    return float(np.asarray(U, dtype=float)[ball[mask]].sum())


def _corridor_cone(corridor: Corridor) -> float:
    """Upper bound on ``|unit_normal(angles) - unit_normal(midpoint)|`` over
    the corridor.

    The unit normal traces a patch on the sphere as the angles sweep the
    box; its arc distance from the midpoint normal is at most the box
    half-widths scaled by per-axis derivative bounds of the raw normal and
    divided by the smallest raw-normal norm in the box.  Boxes too close
    to the parameterization singularity (tiny raw norm) get the trivial
    bound 2, which makes every supervoxel reachable.
    """
    hw_p = 0.5 * (corridor.phi_max - corridor.phi_min)
    hw_g = 0.5 * (corridor.gamma_max - corridor.gamma_min)
    cga, cgb = math.cos(corridor.gamma_max), math.cos(corridor.gamma_min)
    c2g_lo = 0.0 if cga <= 0.0 <= cgb else min(cga * cga, cgb * cgb)
    c2g_hi = max(cga * cga, cgb * cgb)
    spa, spb = math.sin(corridor.phi_min), math.sin(corridor.phi_max)
    s2p_lo = min(spa * spa, spb * spb)
    s2p_hi = (
        1.0
        if corridor.phi_min <= math.pi / 2 <= corridor.phi_max
        else max(spa * spa, spb * spb)
    )
    sga, sgb = math.sin(corridor.gamma_min), math.sin(corridor.gamma_max)
    s2g_hi = (
        1.0
        if corridor.gamma_min <= math.pi / 2 <= corridor.gamma_max
        else max(sga * sga, sgb * sgb)
    )
    s2g_lo = min(sga * sga, sgb * sgb)
    cpa, cpb = math.cos(corridor.phi_min), math.cos(corridor.phi_max)
    c2p_hi = max(cpa * cpa, cpb * cpb)
    # raw norm^2 = cos^2(gamma) + sin^2(phi) sin^2(gamma)
    n2_lo = c2g_lo + s2p_lo * s2g_lo
    if n2_lo < 1e-4:
        return 2.0
    lip_phi = math.sqrt(min(1.0, c2g_hi + c2p_hi * s2g_hi))
    lip_gamma = math.sqrt(min(1.0, s2g_hi * c2p_hi + s2p_hi))
    return min(2.0, (hw_p * lip_phi + hw_g * lip_gamma) / math.sqrt(n2_lo))


WIDTH_FLOOR = math.radians(0.5)


def branch_and_bound(
    center_id: int,
    r: float,
    centers: np.ndarray,
    kappa: float,
    U: np.ndarray,
    max_pops: int = 500_000,
    warm_step: float = math.radians(6.0),
    floor: float = WIDTH_FLOOR,
    batch: int = 64,
) -> PatchQuery:
    """Find the plane through the center whose patch has maximal uncertainty.

    Best-first search over angle-space corridors.  Each corridor is scored
    once, at creation: its midpoint plane gives a candidate value and a
    cone enclosure of its normals gives an upper bound on every interior
    plane (midpoint slab widened by ``|x| * cone``).  Corridors whose bound
    beats the incumbent go on a priority queue; popped corridors are split
    in four and the children of up to ``batch`` pops are scored in one
    vectorized pass.  A coarse grid warm-starts the incumbent so pruning
    bites immediately.  Corridors narrower than ``floor`` keep their
    midpoint candidate and are not split, so the result is optimal to
    within the bound slack of a floor-width corridor (zero slack when no
    extra supervoxel fits in the widened slab, the common case).
    """
    centers = np.asarray(centers, dtype=float)
    U = np.asarray(U, dtype=float)
    if np.any(U < 0):
        raise ValueError("uncertainty field must be nonnegative")
    c = centers[center_id]
    ball = _ball_members(c, r, centers)
    rel = centers[ball] - c[None, :]
    rho = np.linalg.norm(rel, axis=1)
    Ub = U[ball]
    relT = rel.T.copy()

    counter = itertools.count()
    heap: list[tuple[float, int, Corridor]] = []
    best_angles: tuple[float, float] | None = None
    best_value = -1.0
    processed = 0

    # warm start: best plane of a coarse grid seeds the incumbent
    angles = np.arange(0.0, np.pi, warm_step)
    phis, gammas = np.meshgrid(angles, angles, indexing="ij")
    phis, gammas = phis.ravel(), gammas.ravel()
    normals = np.column_stack(
        [
            np.cos(phis) * np.cos(gammas),
            np.sin(phis) * np.cos(gammas),
            np.sin(phis) * np.sin(gammas),
        ]
    )
    norms = np.linalg.norm(normals, axis=1)
    ok = norms >= DEGENERACY_EPS
    vals = ((np.abs((normals[ok] / norms[ok, None]) @ relT) <= 2.0 * kappa) @ Ub)
    j = int(np.argmax(vals))
    best_value = float(vals[j])
    best_angles = (float(phis[ok][j]), float(gammas[ok][j]))

    def process_batch(corrs: list[Corridor]) -> None:
        nonlocal best_angles, best_value
        n_corr = len(corrs)
        normal_mat = np.empty((n_corr, 3))
        cones = np.empty(n_corr)
        mids = []
        for i, corr in enumerate(corrs):
            pm, gm = _safe_angles(*corr.midpoint())
            mids.append((pm, gm))
            normal_mat[i] = plane_normal(pm, gm)
            cones[i] = _corridor_cone(corr)
        dist = np.abs(normal_mat @ relT)  # (n_corr, m)
        vals = (dist <= 2.0 * kappa) @ Ub
        j = int(np.argmax(vals))
        if vals[j] > best_value:
            best_value = float(vals[j])
            best_angles = mids[j]
        bounds = (dist <= 2.0 * kappa + cones[:, None] * rho[None, :]) @ Ub
        for i, corr in enumerate(corrs):
            if bounds[i] > best_value:
                heapq.heappush(heap, (-float(bounds[i]), next(counter), corr))

    process_batch(Corridor(0.0, np.pi, 0.0, np.pi).split())
    while heap and processed < max_pops:
        todo: list[Corridor] = []
        while heap and len(todo) < batch:
            neg_bound, _, corr = heapq.heappop(heap)
            if -neg_bound <= best_value:
                heap.clear()
                break
            if corr.phi_max - corr.phi_min >= floor:
                todo.extend(corr.split())
            processed += 1
        if todo:
            process_batch(todo)

    phi0, gamma0 = best_angles
    n0 = plane_normal(phi0, gamma0)
    mask = np.abs(rel @ n0) <= 2.0 * kappa
    # final value re-summed the same way as patch values elsewhere
    return PatchQuery(
        center_id=center_id,
        plane=Plane(center=c, phi=phi0, gamma=gamma0),
        radius=r,
        member_ids=ball[mask],
        uncertainty=float(Ub[mask].sum()),
    )


def exhaustive_plane_search(
    center_id: int,
    r: float,
    centers: np.ndarray,
    kappa: float,
    U: np.ndarray,
    step: float,
) -> PatchQuery:
    """Grid-search oracle over (phi, gamma); ties go to the lexicographically
    lowest angle pair."""
    if step <= 0:
        raise ValueError("step must be positive")
    centers = np.asarray(centers, dtype=float)
    U = np.asarray(U, dtype=float)
    c = centers[center_id]
    ball = _ball_members(c, r, centers)
    rel = centers[ball] - c[None, :]
    Ub = U[ball]

    angles = np.arange(0.0, np.pi, step)
    phis, gammas = np.meshgrid(angles, angles, indexing="ij")
    phis, gammas = phis.ravel(), gammas.ravel()
    normals = np.column_stack(
        [
            np.cos(phis) * np.cos(gammas),
            np.sin(phis) * np.cos(gammas),
            np.sin(phis) * np.sin(gammas),
        ]
    )
    norms = np.linalg.norm(normals, axis=1)
    ok = norms >= DEGENERACY_EPS
    normals = normals[ok] / norms[ok, None]
    phis, gammas = phis[ok], gammas[ok]
    dist = np.abs(normals @ rel.T)  # (G, m)
    sums = (dist <= 2.0 * kappa) @ Ub
    # argmax picks the first index, i.e. the lexicographically lowest pair
    j = int(np.argmax(sums))
    u, phi, gamma = float(sums[j]), phis[j], gammas[j]
    plane = Plane(center=c, phi=float(phi), gamma=float(gamma))
    members = patch_members(center_id, r, plane, centers, kappa)
    return PatchQuery(
        center_id=center_id,
        plane=plane,
        radius=r,
        member_ids=members,
        uncertainty=u,
    )


def select_best_patch(
    U: np.ndarray,
    t: int,
    r: float,
    centers: np.ndarray,
    kappa: float,
) -> PatchQuery:
    """Branch-and-bound from the t most uncertain centers, best patch wins."""
    U = np.asarray(U, dtype=float)
    if U.size == 0:
        raise ValueError("empty uncertainty field")
    if t < 1:
        raise ValueError("t must be >= 1")
    ids = np.arange(U.size)
    order = np.lexsort((ids, -U))[: min(t, U.size)]
    best = None
    for center_id in order:
        patch = branch_and_bound(int(center_id), r, centers, kappa, U)
        if (
            best is None
            or patch.uncertainty > best.uncertainty + 1e-12
            or (
                abs(patch.uncertainty - best.uncertainty) <= 1e-12
                and patch.center_id < best.center_id
            )
        ):
            best = patch
    return best
