"""Command-line entry point: dataset synthesis, experiment runs, plane-search
verification and the annotation service.

All commands are driven by a JSON config (schema-validated, unknown keys
rejected); the only flags are --config, --out, --port and --seed-override.
Exit codes: 0 success, 2 usage/schema error, 1 runtime error.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from pathlib import Path

import jsonschema
import numpy as np

from . import engine, io, planes, synth
from .volume import (
    Dataset,
    LabelSet,
    Supervoxel,
    dataset_from_volume,
    grid_oversegment,
)

_SYNTH_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "required": ["dims", "kind"],
    "properties": {
        "dims": {
            "type": "array",
            "items": {"type": "integer", "minimum": 1},
            "minItems": 3,
            "maxItems": 3,
        },
        "kind": {"enum": ["sphere", "two-blob", "layered"]},
        "noise_std": {"type": "number", "minimum": 0},
        "seed": {"type": "integer"},
        "cell": {"type": "integer", "minimum": 1},
    },
}

_ENGINE_PROPS = {
    "rounds": {"type": "integer", "minimum": 0},
    "learning_rate": {"type": "number", "exclusiveMinimum": 0},
    "k": {"type": "integer", "minimum": 1},
    "tau_max_binary": {"type": "integer", "minimum": 0},
    "tau_max_multiclass": {"type": "integer", "minimum": 0},
    "r": {"type": "number", "exclusiveMinimum": 0},
    "t": {"type": "integer", "minimum": 1},
    "seeds_per_class": {"type": "integer", "minimum": 1},
}

_DATASET_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "synth": _SYNTH_SCHEMA,
        "volume": {"type": "string"},
        "svmap": {"type": "string"},
        "ground_truth": {"type": "string"},
        "features": {"type": "string"},
        "labels": {"type": "string"},
    },
}

_RUN_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "required": ["dataset", "strategies", "budget", "repeats", "seed"],
    "properties": {
        "dataset": _DATASET_SCHEMA,
        "strategies": {
            "type": "array",
            "items": {"enum": list(engine.STRATEGY_NAMES)},
            "minItems": 1,
        },
        "budget": {"type": "integer", "minimum": 0},
        "repeats": {"type": "integer", "minimum": 1},
        "seed": {"type": "integer"},
        "metric": {"enum": ["iou", "dice", "avg_precision", "accuracy"]},
        **_ENGINE_PROPS,
    },
}

_BNB_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "count": {"type": "integer", "minimum": 0},
        "seed": {"type": "integer"},
        "n_supervoxels": {"type": "integer", "minimum": 2},
        "r": {"type": "number", "exclusiveMinimum": 0},
        "kappa": {"type": "number", "exclusiveMinimum": 0},
        "grid_step_deg": {"type": "number", "exclusiveMinimum": 0},
    },
}

_SERVE_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "required": ["dataset", "strategy", "budget"],
    "properties": {
        "dataset": _DATASET_SCHEMA,
        "strategy": {"enum": list(engine.STRATEGY_NAMES)},
        "budget": {"type": "integer", "minimum": 0},
        "seed": {"type": "integer"},
        "metric": {"enum": ["iou", "dice", "avg_precision", "accuracy"]},
        **_ENGINE_PROPS,
    },
}


class ConfigError(ValueError):
    pass


def _load_config(path: str, schema: dict) -> dict:
    try:
        cfg = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    try:
        jsonschema.validate(cfg, schema)
    except jsonschema.ValidationError as exc:
        raise ConfigError(f"invalid config: {exc.message}") from exc
    return cfg


def _session_config(cfg: dict) -> engine.SessionConfig:
    sc = engine.SessionConfig()
    for key in _ENGINE_PROPS:
        if key in cfg:
            setattr(sc, key, cfg[key])
    return sc


def _tabular_dataset(features_path: str, labels_path: str) -> Dataset:
    feats = io.read_features(features_path)
    gt = io.read_labels(labels_path)
    if feats.shape[0] != gt.size:
        raise ConfigError("feature and label counts differ")
    n_cls = int(gt.max()) + 1
    supervoxels = [
        Supervoxel(id=i, center=np.zeros(3), features=feats[i], member_count=1)
        for i in range(feats.shape[0])
    ]
    return Dataset(
        supervoxels=supervoxels,
        labels=LabelSet(tuple(f"class{i}" for i in range(n_cls))),
        ground_truth=gt,
    )


def load_dataset(spec: dict) -> Dataset:
    """Build a Dataset from a config ``dataset`` object: an inline synth
    spec, volume file paths, or tabular feature/label files."""
    if "synth" in spec:
        s = spec["synth"]
        synth_spec = synth.SynthSpec(
            dims=tuple(s["dims"]),
            kind=s["kind"],
            noise_std=s.get("noise_std", 0.0),
            seed=s.get("seed", 0),
        )
        return synth.synth_dataset(synth_spec, cell=s.get("cell", 4))
    if "volume" in spec:
        for key in ("svmap", "ground_truth"):
            if key not in spec:
                raise ConfigError(f"dataset paths require {key!r}")
        volume = io.read_volume(spec["volume"])
        svmap = io.read_svmap(spec["svmap"])
        gt = io.read_volume(spec["ground_truth"])
        n_cls = int(gt.voxels.max()) + 1
        labels = LabelSet(tuple(f"class{i}" for i in range(n_cls)))
        return dataset_from_volume(volume, svmap, gt, labels)
    if "features" in spec:
        if "labels" not in spec:
            raise ConfigError("tabular dataset requires 'labels'")
        return _tabular_dataset(spec["features"], spec["labels"])
    raise ConfigError("dataset must specify 'synth', 'volume' or 'features'")


def cmd_synth(config_path: str, out_dir: str) -> None:
    cfg = _load_config(config_path, _SYNTH_SCHEMA)
    spec = synth.SynthSpec(
        dims=tuple(cfg["dims"]),
        kind=cfg["kind"],
        noise_std=cfg.get("noise_std", 0.0),
        seed=cfg.get("seed", 0),
    )
    intensities, truth = synth.generate(spec)
    svmap = grid_oversegment(intensities, cfg.get("cell", 4))
    n_cls = int(truth.voxels.max()) + 1
    labels = LabelSet(tuple(f"class{i}" for i in range(n_cls)))
    ds = dataset_from_volume(intensities, svmap, truth, labels)

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    io.write_volume(out / "volume.json", intensities)
    io.write_volume(out / "ground_truth.json", truth)
    io.write_svmap(out / "svmap.json", svmap)
    io.write_features(out / "features.json", ds.features)
    io.write_labels(out / "labels.txt", ds.ground_truth)


def _format(value: float) -> str:
    return format(float(value), ".17g")


def cmd_run(config_path: str, out_dir: str, seed_override: int | None = None) -> None:
    cfg = _load_config(config_path, _RUN_SCHEMA)
    seed = cfg["seed"] if seed_override is None else seed_override
    metric_kind = cfg.get("metric", "iou")
    dataset = load_dataset(cfg["dataset"])
    sc = _session_config(cfg)
    budget, repeats = cfg["budget"], cfg["repeats"]

    graph = None
    rows = []
    summary: dict = {
        "metric": metric_kind,
        "budget": budget,
        "seed": seed,
        "strategies": {},
    }
    for name in cfg["strategies"]:
        strat = engine.Strategy.parse(name)
        if graph is None and (strat.combined or strat.base == "Boundary"):
            graph = engine.build_graph(dataset.centers, sc.k)
        curves = engine.run_experiment(
            dataset,
            name,
            repeats=repeats,
            budget=budget,
            seed=seed,
            config=sc,
            metric_kind=metric_kind,
            graph=graph,
        )
        for rep, curve in enumerate(curves):
            for inputs, value in curve:
                rows.append((name, rep, inputs, metric_kind, value))
        band = engine.percentile_band(curves, budget)
        summary["strategies"][name] = {
            "mean_aulc": float(
                np.mean([engine.aulc(c, budget) for c in curves])
            ),
            "band": {
                "inputs": band["inputs"].tolist(),
                "mean": band["mean"].tolist(),
                "p10": band["p10"].tolist(),
                "p90": band["p90"].tolist(),
            },
        }
    order = sorted(
        summary["strategies"],
        key=lambda s: -summary["strategies"][s]["mean_aulc"],
    )
    summary["aulc_ordering"] = order

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    lines = ["strategy,repeat,inputs,metric,value"]
    lines += [
        f"{name},{rep},{inputs},{kind},{_format(value)}"
        for name, rep, inputs, kind, value in rows
    ]
    (out / "curves.csv").write_text("\n".join(lines) + "\n")
    (out / "summary.json").write_text(json.dumps(summary, sort_keys=True, indent=2))


def cmd_bnb_check(config_path: str | None, out_path: str, seed_override: int | None = None) -> None:
    cfg = _load_config(config_path, _BNB_SCHEMA) if config_path else {}
    count = cfg.get("count", 100)
    seed = cfg.get("seed", 0) if seed_override is None else seed_override
    S = cfg.get("n_supervoxels", 200)
    r = cfg.get("r", 15.0)
    kappa = cfg.get("kappa", 2.0)
    step = np.deg2rad(cfg.get("grid_step_deg", 1.0))

    rng = np.random.default_rng(seed)
    lines = ["instance,u_bnb,u_grid,seconds"]
    for i in range(count):
        centers = rng.uniform(0, 60, size=(S, 3))
        U = rng.uniform(0, 1, size=S)
        cid = int(rng.integers(S))
        t0 = time.perf_counter()
        bb = planes.branch_and_bound(cid, r, centers, kappa, U)
        elapsed = time.perf_counter() - t0
        grid = planes.exhaustive_plane_search(cid, r, centers, kappa, U, step=step)
        lines.append(
            f"{i},{_format(bb.uncertainty)},{_format(grid.uncertainty)},{_format(elapsed)}"
        )
    Path(out_path).parent.mkdir(parents=True, exist_ok=True)
    Path(out_path).write_text("\n".join(lines) + "\n")


def cmd_serve(config_path: str, port: int) -> None:
    import uvicorn

    from .service import create_app

    cfg = _load_config(config_path, _SERVE_SCHEMA)
    dataset = load_dataset(cfg["dataset"])
    app = create_app(
        dataset,
        default_strategy=cfg["strategy"],
        default_budget=cfg["budget"],
        config=_session_config(cfg),
        seed=cfg.get("seed", 0),
        metric_kind=cfg.get("metric", "iou"),
    )
    uvicorn.run(app, host="127.0.0.1", port=port)


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(prog="geoal")
    sub = parser.add_subparsers(dest="command", required=True)

    p_synth = sub.add_parser("synth", help="generate a synthetic dataset")
    p_synth.add_argument("--config", required=True)
    p_synth.add_argument("--out", required=True)

    p_run = sub.add_parser("run", help="run active-learning experiments")
    p_run.add_argument("--config", required=True)
    p_run.add_argument("--out", required=True)
    p_run.add_argument("--seed-override", type=int, default=None)

    p_bnb = sub.add_parser("bnb-check", help="compare plane search to a grid oracle")
    p_bnb.add_argument("--config", default=None)
    p_bnb.add_argument("--out", required=True)
    p_bnb.add_argument("--seed-override", type=int, default=None)

    p_serve = sub.add_parser("serve", help="start the annotation service")
    p_serve.add_argument("--config", required=True)
    p_serve.add_argument("--port", type=int, default=8000)

    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 2 if exc.code not in (0, None) else 0

    try:
        if args.command == "synth":
            cmd_synth(args.config, args.out)
        elif args.command == "run":
            cmd_run(args.config, args.out, args.seed_override)
        elif args.command == "bnb-check":
            cmd_bnb_check(args.config, args.out, args.seed_override)
        elif args.command == "serve":
            cmd_serve(args.config, args.port)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # runtime failures: IO, engine errors, bind errors
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
