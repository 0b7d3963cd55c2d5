"""Annotation-service tests: the /v1 contract, error codes and the
line-resolution geometry."""

import base64

import numpy as np
import pytest
from fastapi.testclient import TestClient

from geoal.engine import SessionConfig
from geoal.planes import PatchQuery, Plane
from geoal.service import (
    create_app,
    line_side_labels,
    plane_basis,
    render_patch_raster,
)
from geoal.synth import SynthSpec, synth_dataset


@pytest.fixture(scope="module")
def dataset():
    return synth_dataset(
        SynthSpec(dims=(24, 24, 24), kind="sphere", noise_std=0.1, seed=0), cell=4
    )


@pytest.fixture()
def client(dataset):
    app = create_app(
        dataset,
        default_strategy="pFEnt",
        default_budget=20,
        config=SessionConfig(rounds=8),
        seed=0,
    )
    return TestClient(app)


def open_session(client, **kwargs):
    r = client.post("/v1/sessions", json=kwargs)
    assert r.status_code == 200
    return r.json()["session_id"]


def get_query(client, sid):
    r = client.get(f"/v1/sessions/{sid}/query")
    assert r.status_code == 200
    return r.json()


class TestSessionLifecycle:
    def test_create_returns_awaiting(self, client):
        r = client.post("/v1/sessions", json={})
        assert r.status_code == 200
        assert r.json()["status"] == "awaiting_annotation"

    def test_unknown_session_404(self, client):
        assert client.get("/v1/sessions/zzz/query").status_code == 404
        assert (
            client.post(
                "/v1/sessions/zzz/annotate", json={"query_id": 0, "corrections": []}
            ).status_code
            == 404
        )

    def test_bad_strategy_400(self, client):
        r = client.post("/v1/sessions", json={"strategy": "Nope"})
        assert r.status_code == 400

    def test_query_payload_shape(self, client):
        sid = open_session(client)
        q = get_query(client, sid)
        assert q["status"] == "awaiting_annotation"
        assert q["inputs_spent"] == 0
        assert q["budget"] == 20
        raster = q["raster"]
        side = raster["side"]
        assert side == 2 * int(round(q["radius"])) + 1
        pixels = base64.b64decode(raster["intensities_b64"])
        assert len(pixels) == side * side
        assert len(raster["supervoxel_ids"]) == side

    def test_raster_ids_subset_of_members(self, client):
        sid = open_session(client)
        q = get_query(client, sid)
        ids = {v for row in q["raster"]["supervoxel_ids"] for v in row}
        ids.discard(-1)
        assert ids <= set(q["member_ids"])

    def test_raster_center_is_center_supervoxel(self, client, dataset):
        sid = open_session(client)
        q = get_query(client, sid)
        R = (q["raster"]["side"] - 1) // 2
        center_id = q["raster"]["supervoxel_ids"][R][R]
        np.testing.assert_allclose(
            dataset.centers[center_id], q["center"], atol=1e-9
        )

    def test_metrics_endpoint(self, client):
        sid = open_session(client)
        m = client.get(f"/v1/sessions/{sid}/metrics").json()
        assert m["inputs_spent"] == 0
        assert len(m["curve"]) == 1
        assert 0.0 <= m["curve"][0]["value"] <= 1.0


class TestAnnotate:
    def test_line_costs_two(self, client):
        sid = open_session(client)
        q = get_query(client, sid)
        r = client.post(
            f"/v1/sessions/{sid}/annotate",
            json={
                "query_id": q["query_id"],
                "line": {"a": [0.0, -1.0], "b": [0.0, 1.0],
                         "side_a_class": 0, "side_b_class": 1},
            },
        )
        assert r.status_code == 200
        body = r.json()
        assert body["accepted"] is True
        assert body["inputs_spent"] == 2
        assert body["newly_labeled"] == len(q["member_ids"])

    def test_empty_corrections_cost_three(self, client):
        sid = open_session(client)
        q = get_query(client, sid)
        r = client.post(
            f"/v1/sessions/{sid}/annotate",
            json={"query_id": q["query_id"], "corrections": []},
        )
        assert r.status_code == 200
        assert r.json()["inputs_spent"] == 3

    def test_correction_overrides_prediction(self, client):
        sid = open_session(client)
        q = get_query(client, sid)
        target = q["member_ids"][0]
        old = q["raster"]["predicted"][str(target)]
        r = client.post(
            f"/v1/sessions/{sid}/annotate",
            json={
                "query_id": q["query_id"],
                "corrections": [{"supervoxel_id": target, "cls": 1 - old}],
            },
        )
        assert r.status_code == 200

    def test_stale_query_id_409(self, client):
        sid = open_session(client)
        q = get_query(client, sid)
        assert (
            client.post(
                f"/v1/sessions/{sid}/annotate",
                json={"query_id": q["query_id"] + 1, "corrections": []},
            ).status_code
            == 409
        )

    def test_double_submit_409(self, client):
        sid = open_session(client)
        q = get_query(client, sid)
        body = {"query_id": q["query_id"], "corrections": []}
        assert client.post(f"/v1/sessions/{sid}/annotate", json=body).status_code == 200
        # the query id has rotated; replaying the old annotation must fail
        assert client.post(f"/v1/sessions/{sid}/annotate", json=body).status_code == 409

    def test_both_or_neither_400(self, client):
        sid = open_session(client)
        q = get_query(client, sid)
        assert (
            client.post(
                f"/v1/sessions/{sid}/annotate", json={"query_id": q["query_id"]}
            ).status_code
            == 400
        )
        assert (
            client.post(
                f"/v1/sessions/{sid}/annotate",
                json={
                    "query_id": q["query_id"],
                    "corrections": [],
                    "line": {"a": [0, 0], "b": [1, 0],
                             "side_a_class": 0, "side_b_class": 1},
                },
            ).status_code
            == 400
        )

    def test_invalid_class_400(self, client):
        sid = open_session(client)
        q = get_query(client, sid)
        r = client.post(
            f"/v1/sessions/{sid}/annotate",
            json={
                "query_id": q["query_id"],
                "line": {"a": [0, 0], "b": [1, 0],
                         "side_a_class": 0, "side_b_class": 5},
            },
        )
        assert r.status_code == 400

    def test_endpoint_outside_circle_400(self, client):
        sid = open_session(client)
        q = get_query(client, sid)
        far = q["radius"] * 2
        r = client.post(
            f"/v1/sessions/{sid}/annotate",
            json={
                "query_id": q["query_id"],
                "line": {"a": [far, 0], "b": [0, 0],
                         "side_a_class": 0, "side_b_class": 1},
            },
        )
        assert r.status_code == 400

    def test_correction_outside_patch_400(self, client, dataset):
        sid = open_session(client)
        q = get_query(client, sid)
        outside = next(
            i for i in range(dataset.n_supervoxels) if i not in q["member_ids"]
        )
        r = client.post(
            f"/v1/sessions/{sid}/annotate",
            json={
                "query_id": q["query_id"],
                "corrections": [{"supervoxel_id": outside, "cls": 0}],
            },
        )
        assert r.status_code == 400

    def test_loop_until_done(self, client):
        sid = open_session(client, budget=6)
        for _ in range(10):
            q = get_query(client, sid)
            if q["status"] == "done":
                break
            client.post(
                f"/v1/sessions/{sid}/annotate",
                json={"query_id": q["query_id"], "corrections": []},
            )
        m = client.get(f"/v1/sessions/{sid}/metrics").json()
        assert m["inputs_spent"] >= 6 - 2
        assert get_query(client, sid)["status"] == "done"


def toy_patch(dataset):
    """A hand-built patch around supervoxel 0 for geometry-only tests."""
    plane = Plane(center=dataset.centers[0], phi=0.3, gamma=0.7)
    rel = dataset.centers - plane.center
    members = np.where(
        (np.linalg.norm(rel, axis=1) <= 8.0)
        & (np.abs(rel @ plane.normal) <= 2 * dataset.kappa)
    )[0]
    return PatchQuery(
        center_id=0, plane=plane, radius=8.0, member_ids=members, uncertainty=0.0
    )


class TestLineGeometry:
    def test_swap_invariance(self, dataset):
        patch = toy_patch(dataset)
        u_axis, v_axis = plane_basis(patch.plane)
        rng = np.random.default_rng(0)
        for _ in range(20):
            a = tuple(rng.uniform(-5, 5, 2))
            b = tuple(rng.uniform(-5, 5, 2))
            fwd = line_side_labels(
                patch, dataset.centers, u_axis, v_axis, a, b, 0, 1
            )
            rev = line_side_labels(
                patch, dataset.centers, u_axis, v_axis, b, a, 1, 0
            )
            # swapping endpoints flips the sign; only centers exactly on the
            # line may differ, and none of these random lines hit one
            assert fwd == rev

    def test_on_line_goes_to_side_a(self, dataset):
        patch = toy_patch(dataset)
        u_axis, v_axis = plane_basis(patch.plane)
        # vertical line through the center: the center supervoxel projects
        # to (0, 0), exactly on it
        labels = line_side_labels(
            patch, dataset.centers, u_axis, v_axis, (0.0, -1.0), (0.0, 1.0), 7, 8
        )
        assert labels[0] == 7

    def test_partition_matches_cross_product(self, dataset):
        patch = toy_patch(dataset)
        u_axis, v_axis = plane_basis(patch.plane)
        a, b = (-3.0, -2.0), (4.0, 1.0)
        labels = line_side_labels(
            patch, dataset.centers, u_axis, v_axis, a, b, 0, 1
        )
        for m in patch.member_ids:
            p = dataset.centers[int(m)] - patch.plane.center
            px, py = float(p @ u_axis), float(p @ v_axis)
            cross = (b[0] - a[0]) * (py - a[1]) - (b[1] - a[1]) * (px - a[0])
            assert labels[int(m)] == (0 if cross >= 0 else 1)


class TestRaster:
    def test_basis_orthonormal(self):
        plane = Plane(center=np.zeros(3), phi=0.4, gamma=1.1)
        u_axis, v_axis = plane_basis(plane)
        assert abs(u_axis @ plane.normal) < 1e-12
        assert abs(v_axis @ plane.normal) < 1e-12
        assert abs(u_axis @ v_axis) < 1e-12
        assert np.linalg.norm(u_axis) == pytest.approx(1.0)
        assert np.linalg.norm(v_axis) == pytest.approx(1.0)

    def test_render_fields(self, dataset):
        patch = toy_patch(dataset)
        predicted = np.zeros(dataset.n_supervoxels, dtype=np.int64)
        raster = render_patch_raster(dataset, patch, predicted)
        side = raster["side"]
        assert side == 2 * 8 + 1
        ids = np.array(raster["supervoxel_ids"])
        assert ids.shape == (side, side)
        present = set(np.unique(ids)) - {-1}
        assert present <= {int(m) for m in patch.member_ids}
        assert set(raster["predicted"]) == {str(int(m)) for m in patch.member_ids}

    def test_member_uv_matches_projection(self, dataset):
        patch = toy_patch(dataset)
        u_axis, v_axis = plane_basis(patch.plane)
        raster = render_patch_raster(
            dataset, patch, np.zeros(dataset.n_supervoxels, dtype=np.int64)
        )
        for m in patch.member_ids:
            p = dataset.centers[int(m)] - patch.plane.center
            np.testing.assert_allclose(
                raster["member_uv"][str(int(m))],
                [p @ u_axis, p @ v_axis],
                atol=1e-9,
            )
