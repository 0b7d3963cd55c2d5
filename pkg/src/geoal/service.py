"""HTTP annotation service: serves the next optimal patch as a rasterized
planar slice, accepts line or correction annotations from a human, retrains
and reports the learning curve.

JSON over HTTP, versioned under /v1.  Sessions are in-memory; within a
session requests are serialized.
"""

from __future__ import annotations

import base64
import itertools
import math
import threading
from dataclasses import dataclass, field

import numpy as np
from fastapi import FastAPI, HTTPException
from pydantic import BaseModel

from .engine import ALSession, OracleAnswer, SessionConfig, SingleQuery, Strategy
from .planes import PatchQuery, Plane
from .volume import Dataset


def plane_basis(plane: Plane) -> tuple[np.ndarray, np.ndarray]:
    """In-plane unit axes: u along the plane's XY-trace direction v1,
    v = n x v1."""
    u = np.array([-math.sin(plane.phi), math.cos(plane.phi), 0.0])
    v = np.cross(plane.normal, u)
    return u, v / np.linalg.norm(v)


def render_patch_raster(
    dataset: Dataset, patch: PatchQuery, predicted: np.ndarray
) -> dict:
    """Rasterize the patch plane: (2r+1)^2 nearest-voxel intensity samples,
    the parallel supervoxel-id grid (non-members -1), the circle outline
    and the members' predicted classes.

    Intensities are min-max normalized to u8 and base64-encoded row-major.
    """
    plane, r = patch.plane, patch.radius
    R = int(round(r))
    side = 2 * R + 1
    u_axis, v_axis = plane_basis(plane)
    offsets = np.arange(-R, R + 1)
    vv, uu = np.meshgrid(offsets, offsets, indexing="ij")  # rows follow v
    points = (
        plane.center[None, :]
        + uu.reshape(-1, 1) * u_axis[None, :]
        + vv.reshape(-1, 1) * v_axis[None, :]
    )
    idx = np.rint(points).astype(np.int64)

    if dataset.volume is not None:
        dims = dataset.volume.dims
        inside = np.all((idx >= 0) & (idx < np.array(dims)[None, :]), axis=1)
        intens = np.zeros(side * side)
        sv = np.full(side * side, -1, dtype=np.int64)
        ix, iy, iz = idx[inside].T
        intens[inside] = dataset.volume.voxels[ix, iy, iz]
        sv[inside] = dataset.svmap.ids[ix, iy, iz]
        sv[~np.isin(sv, patch.member_ids)] = -1
    else:
        intens = np.zeros(side * side)
        sv = np.full(side * side, -1, dtype=np.int64)

    lo, hi = intens.min(), intens.max()
    scale = 255.0 / (hi - lo) if hi > lo else 0.0
    u8 = np.clip((intens - lo) * scale, 0, 255).astype(np.uint8)

    return {
        "side": side,
        "intensities_b64": base64.b64encode(u8.tobytes()).decode("ascii"),
        "supervoxel_ids": sv.reshape(side, side).tolist(),
        "circle": {"cx": R, "cy": R, "r": float(r)},
        "predicted": {
            str(int(m)): int(predicted[int(m)]) for m in patch.member_ids
        },
        "member_uv": {
            str(int(m)): [
                float((dataset.centers[int(m)] - plane.center) @ u_axis),
                float((dataset.centers[int(m)] - plane.center) @ v_axis),
            ]
            for m in patch.member_ids
        },
    }


def line_side_labels(
    patch: PatchQuery,
    centers: np.ndarray,
    u_axis: np.ndarray,
    v_axis: np.ndarray,
    a: tuple[float, float],
    b: tuple[float, float],
    side_a_class: int,
    side_b_class: int,
) -> dict[int, int]:
    """Label every patch member by the side of the in-plane line its
    projected center falls on; points exactly on the line go to side a."""
    ax, ay = a
    bx, by = b
    labels = {}
    for m in patch.member_ids:
        p = centers[int(m)] - patch.plane.center
        px, py = float(p @ u_axis), float(p @ v_axis)
        cross = (bx - ax) * (py - ay) - (by - ay) * (px - ax)
        labels[int(m)] = side_a_class if cross >= 0 else side_b_class
    return labels


class LineBody(BaseModel):
    a: tuple[float, float]
    b: tuple[float, float]
    side_a_class: int
    side_b_class: int


class CorrectionBody(BaseModel):
    supervoxel_id: int
    cls: int


class AnnotateBody(BaseModel):
    query_id: int
    line: LineBody | None = None
    corrections: list[CorrectionBody] | None = None


class CreateSessionBody(BaseModel):
    strategy: str | None = None
    budget: int | None = None
    seed: int | None = None


@dataclass
class _LiveSession:
    session: ALSession
    status: str = "training"
    query: PatchQuery | SingleQuery | None = None
    query_id: int = -1
    raster: dict | None = None
    lock: threading.Lock = field(default_factory=threading.Lock)


def _as_patch(session: ALSession, query) -> PatchQuery:
    if isinstance(query, SingleQuery):
        sv = query.supervoxel_id
        return PatchQuery(
            center_id=sv,
            plane=Plane(center=session.dataset.centers[sv], phi=0.0, gamma=0.0),
            radius=session.config.r,
            member_ids=np.array([sv]),
            uncertainty=0.0,
        )
    return query


def create_app(
    dataset: Dataset,
    default_strategy: str = "p*CEnt",
    default_budget: int = 100,
    config: SessionConfig | None = None,
    seed: int = 0,
    metric_kind: str = "iou",
) -> FastAPI:
    app = FastAPI(title="geoal annotation service")
    config = config or SessionConfig()
    sessions: dict[str, _LiveSession] = {}
    session_counter = itertools.count()
    query_counter = itertools.count()
    n_classes = len(dataset.labels)

    def _advance(live: _LiveSession) -> None:
        """Retrain, record the curve point and stage the next query."""
        live.status = "training"
        s = live.session
        s.retrain()
        s.curve.append((s.inputs_spent, s.evaluate()))
        if s.inputs_spent >= s.budget or s.unlabeled_ids.size == 0:
            live.status = "done"
            live.query = None
            live.raster = None
            return
        patch = _as_patch(s, s.next_query())
        predicted = s._probabilities(np.arange(dataset.n_supervoxels)).argmax(axis=1)
        live.query = patch
        live.query_id = next(query_counter)
        live.raster = render_patch_raster(dataset, patch, predicted)
        live.status = "awaiting_annotation"

    def _get(session_id: str) -> _LiveSession:
        if session_id not in sessions:
            raise HTTPException(status_code=404, detail="unknown session")
        return sessions[session_id]

    @app.post("/v1/sessions")
    def create_session(body: CreateSessionBody):
        name = body.strategy or default_strategy
        try:
            strategy = Strategy.parse(name)
        except ValueError as exc:
            raise HTTPException(status_code=400, detail=str(exc))
        session = ALSession(
            dataset=dataset,
            strategy=strategy,
            budget=default_budget if body.budget is None else body.budget,
            seed=seed if body.seed is None else body.seed,
            config=config,
            metric_kind=metric_kind,
        )
        live = _LiveSession(session=session)
        session_id = str(next(session_counter))
        sessions[session_id] = live
        with live.lock:
            _advance(live)
        return {"session_id": session_id, "status": live.status}

    @app.get("/v1/sessions/{session_id}/query")
    def get_query(session_id: str):
        live = _get(session_id)
        with live.lock:
            s = live.session
            out = {
                "status": live.status,
                "inputs_spent": s.inputs_spent,
                "budget": s.budget,
                "metric": {"kind": s.metric_kind, "value": s.curve[-1][1]},
            }
            if live.status == "awaiting_annotation":
                patch = live.query
                out.update(
                    {
                        "query_id": live.query_id,
                        "center": patch.plane.center.tolist(),
                        "plane": {"phi": patch.plane.phi, "gamma": patch.plane.gamma},
                        "radius": patch.radius,
                        "member_ids": [int(m) for m in patch.member_ids],
                        "raster": live.raster,
                        "n_classes": n_classes,
                    }
                )
            return out

    @app.post("/v1/sessions/{session_id}/annotate")
    def annotate(session_id: str, body: AnnotateBody):
        live = _get(session_id)
        with live.lock:
            if live.status != "awaiting_annotation" or live.query is None:
                raise HTTPException(status_code=409, detail="no outstanding query")
            if body.query_id != live.query_id:
                raise HTTPException(status_code=409, detail="stale query id")
            if (body.line is None) == (body.corrections is None):
                raise HTTPException(
                    status_code=400, detail="provide exactly one of line or corrections"
                )
            patch = live.query
            s = live.session
            u_axis, v_axis = plane_basis(patch.plane)
            if body.line is not None:
                line = body.line
                for cls in (line.side_a_class, line.side_b_class):
                    if not 0 <= cls < n_classes:
                        raise HTTPException(status_code=400, detail="invalid class")
                for pt in (line.a, line.b):
                    if math.hypot(*pt) > patch.radius + 1e-9:
                        raise HTTPException(
                            status_code=400, detail="line endpoint outside the circle"
                        )
                labeled = line_side_labels(
                    patch,
                    dataset.centers,
                    u_axis,
                    v_axis,
                    line.a,
                    line.b,
                    line.side_a_class,
                    line.side_b_class,
                )
                cost = 2
            else:
                member_set = {int(m) for m in patch.member_ids}
                predicted = s._probabilities(
                    np.arange(dataset.n_supervoxels)
                ).argmax(axis=1)
                labeled = {m: int(predicted[m]) for m in member_set}
                for corr in body.corrections:
                    if corr.supervoxel_id not in member_set:
                        raise HTTPException(
                            status_code=400, detail="correction outside the patch"
                        )
                    if not 0 <= corr.cls < n_classes:
                        raise HTTPException(status_code=400, detail="invalid class")
                    labeled[corr.supervoxel_id] = corr.cls
                cost = 3
            s.apply_answer(OracleAnswer(labeled=labeled, input_cost=cost))
            newly = len(labeled)
            _advance(live)
            return {
                "accepted": True,
                "newly_labeled": newly,
                "inputs_spent": s.inputs_spent,
                "status": live.status,
            }

    @app.get("/v1/sessions/{session_id}/metrics")
    def get_metrics(session_id: str):
        live = _get(session_id)
        with live.lock:
            s = live.session
            return {
                "metric": s.metric_kind,
                "budget": s.budget,
                "inputs_spent": s.inputs_spent,
                "curve": [
                    {"inputs": int(i), "value": float(v)} for i, v in s.curve
                ],
            }

    return app
