"""Plane-search tests: the angular parameterization, corridor bound
soundness and branch-and-bound against the exhaustive grid oracle."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from geoal import planes as P


class TestPlaneNormal:
    def test_axis_aligned(self):
        np.testing.assert_allclose(P.plane_normal(0.0, 0.0), [1, 0, 0], atol=1e-12)
        np.testing.assert_allclose(
            P.plane_normal(np.pi / 2, np.pi / 2), [0, 0, 1], atol=1e-12
        )

    def test_unit_norm(self):
        rng = np.random.default_rng(0)
        for _ in range(100):
            phi, gamma = rng.uniform(0, np.pi, 2)
            try:
                n = P.plane_normal(phi, gamma)
            except P.DegeneratePlaneError:
                continue
            assert np.linalg.norm(n) == pytest.approx(1.0, abs=1e-12)

    def test_degenerate_raises(self):
        with pytest.raises(P.DegeneratePlaneError):
            P.plane_normal(0.0, np.pi / 2)

    def test_raw_norm_at_most_one(self):
        rng = np.random.default_rng(1)
        for _ in range(200):
            phi, gamma = rng.uniform(0, np.pi, 2)
            assert np.linalg.norm(P._raw_normal(phi, gamma)) <= 1.0 + 1e-12

    def test_safe_angles_nudges_only_singularity(self):
        phi, gamma = P._safe_angles(0.0, np.pi / 2)
        assert (phi, gamma) != (0.0, np.pi / 2)
        P.plane_normal(phi, gamma)  # no longer degenerate
        assert P._safe_angles(0.3, 0.7) == (0.3, 0.7)


class TestPatchMembers:
    def test_ball_and_slab(self):
        centers = np.array(
            [
                [0.0, 0, 0],
                [1.0, 0, 0],  # on the plane, in the ball
                [0, 0, 3.0],  # off the plane (z), in the ball
                [50.0, 0, 0],  # outside the ball
            ]
        )
        plane = P.Plane(center=centers[0], phi=np.pi / 2, gamma=np.pi / 2)  # n = z
        members = P.patch_members(0, 10.0, plane, centers, kappa=1.0)
        np.testing.assert_array_equal(members, [0, 1])

    def test_slab_width_is_two_kappa(self):
        centers = np.array([[0.0, 0, 0], [0, 0, 1.9], [0, 0, 2.1]])
        plane = P.Plane(center=centers[0], phi=np.pi / 2, gamma=np.pi / 2)
        members = P.patch_members(0, 10.0, plane, centers, kappa=1.0)
        np.testing.assert_array_equal(members, [0, 1])

    def test_uncertainty_sums_members(self):
        U = np.array([0.5, 0.25, 1.0])
        assert P.plane_uncertainty(np.array([0, 2]), U) == pytest.approx(1.5)


class TestCorridor:
    def test_split_into_four(self):
        corr = P.Corridor(0.0, 1.0, 0.0, 2.0)
        kids = corr.split()
        assert len(kids) == 4
        assert kids[0].phi_max == pytest.approx(0.5)
        assert kids[0].gamma_max == pytest.approx(1.0)

    def test_corner_angles(self):
        corr = P.Corridor(0.1, 0.2, 0.3, 0.4)
        assert len(corr.corner_angles()) == 4

    def test_bound_dominates_interior_planes(self):
        """Corridor uncertainty upper-bounds every interior plane's
        uncertainty (1000 random corridor/plane checks)."""
        rng = np.random.default_rng(5)
        checks = 0
        while checks < 1000:
            S = int(rng.integers(30, 120))
            centers = rng.uniform(0, 40, size=(S, 3))
            U = rng.uniform(0, 1, size=S)
            cid = int(rng.integers(S))
            r = float(rng.uniform(6, 15))
            kappa = float(rng.uniform(0.8, 2.5))
            lo = rng.uniform(0, np.pi, size=2)
            w = rng.uniform(0.01, 1.2, size=2)
            corr = P.Corridor(
                lo[0], min(lo[0] + w[0], np.pi), lo[1], min(lo[1] + w[1], np.pi)
            )
            bound = P.corridor_uncertainty(corr, cid, r, centers, kappa, U)
            for _ in range(5):
                phi = rng.uniform(corr.phi_min, corr.phi_max)
                gamma = rng.uniform(corr.gamma_min, corr.gamma_max)
                try:
                    plane = P.Plane(centers[cid], phi, gamma)
                    members = P.patch_members(cid, r, plane, centers, kappa)
                except P.DegeneratePlaneError:
                    continue
                assert P.plane_uncertainty(members, U) <= bound + 1e-9
                checks += 1


class TestBranchAndBound:
    def test_beats_or_matches_grid(self):
        rng = np.random.default_rng(7)
        for _ in range(15):
            S = int(rng.integers(50, 150))
            centers = rng.uniform(0, 40, size=(S, 3))
            U = rng.uniform(0, 1, size=S)
            cid = int(rng.integers(S))
            bb = P.branch_and_bound(cid, 12.0, centers, 1.8, U)
            grid = P.exhaustive_plane_search(
                cid, 12.0, centers, 1.8, U, step=np.deg2rad(5)
            )
            assert bb.uncertainty >= grid.uncertainty - 1e-9

    def test_returned_patch_is_consistent(self):
        rng = np.random.default_rng(8)
        centers = rng.uniform(0, 30, size=(80, 3))
        U = rng.uniform(0, 1, size=80)
        q = P.branch_and_bound(5, 10.0, centers, 1.5, U)
        recomputed = P.patch_members(5, 10.0, q.plane, centers, 1.5)
        np.testing.assert_array_equal(np.sort(q.member_ids), np.sort(recomputed))
        assert q.uncertainty == pytest.approx(U[q.member_ids].sum())

    def test_negative_uncertainty_rejected(self):
        centers = np.zeros((5, 3))
        with pytest.raises(ValueError):
            P.branch_and_bound(0, 5.0, centers, 1.0, np.array([-1.0, 0, 0, 0, 0]))

    def test_single_supervoxel(self):
        centers = np.array([[0.0, 0, 0], [100.0, 0, 0]])
        q = P.branch_and_bound(0, 5.0, centers, 1.0, np.array([0.7, 0.1]))
        np.testing.assert_array_equal(q.member_ids, [0])
        assert q.uncertainty == pytest.approx(0.7)


class TestExhaustiveSearch:
    def test_bad_step(self):
        with pytest.raises(ValueError):
            P.exhaustive_plane_search(0, 5.0, np.zeros((3, 3)), 1.0, np.zeros(3), 0.0)

    def test_tie_breaks_lowest_angles(self):
        # symmetric single point: every plane sees the same patch; the
        # lexicographically lowest grid pair must win
        centers = np.array([[0.0, 0, 0], [100.0, 0, 0]])
        q = P.exhaustive_plane_search(
            0, 5.0, centers, 1.0, np.array([1.0, 0.0]), step=np.pi / 4
        )
        assert (q.plane.phi, q.plane.gamma) == (0.0, 0.0)


class TestSelectBestPatch:
    def test_picks_highest_uncertainty_patch(self):
        rng = np.random.default_rng(9)
        centers = rng.uniform(0, 25, size=(60, 3))
        U = rng.uniform(0, 1, size=60)
        q = P.select_best_patch(U, t=3, r=8.0, centers=centers, kappa=1.5)
        # candidate centers are the top-3 most uncertain supervoxels
        top3 = np.argsort(-U, kind="stable")[:3]
        assert q.center_id in top3

    def test_empty_field_rejected(self):
        with pytest.raises(ValueError):
            P.select_best_patch(np.array([]), 1, 5.0, np.zeros((0, 3)), 1.0)

    def test_bad_t(self):
        with pytest.raises(ValueError):
            P.select_best_patch(np.ones(3), 0, 5.0, np.zeros((3, 3)), 1.0)


@given(st.integers(0, 2**16))
@settings(max_examples=30, deadline=None)
def test_corridor_mask_contains_midpoint_patch(seed):
    """The corridor's swept-set enclosure contains its midpoint plane's
    slab members."""
    rng = np.random.default_rng(seed)
    rel = rng.uniform(-10, 10, size=(40, 3))
    kappa = float(rng.uniform(0.5, 2.5))
    lo = rng.uniform(0, np.pi - 0.2, size=2)
    w = rng.uniform(0.05, 1.0, size=2)
    corr = P.Corridor(lo[0], min(lo[0] + w[0], np.pi), lo[1], min(lo[1] + w[1], np.pi))
    mask = P._corridor_mask(corr, rel, kappa)
    phi0, gamma0 = P._safe_angles(*corr.midpoint())
    try:
        n0 = P.plane_normal(phi0, gamma0)
    except P.DegeneratePlaneError:
        return
    in_patch = np.abs(rel @ n0) <= 2.0 * kappa
    assert np.all(mask[in_patch])
