"""Active-learning loop: strategy catalog, simulated oracle, budget ledger,
metrics and the repeated-experiment harness."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import boosting
from .entropy import (
    UncertaintyMeasure,
    entropy_fn,
    min_margin_score,
    min_max_score,
)
from .graph import NeighborGraph, build_graph, geometric_uncertainty, propagate
from .planes import PatchQuery, Plane, patch_members, select_best_patch
from .volume import Dataset

STRATEGY_NAMES = (
    "Rand",
    "FMnMx",
    "FMnMar",
    "FEnt",
    "FEntS",
    "FEntC",
    "CEnt",
    "CEntS",
    "CEntC",
    "pRand",
    "pFEnt",
    "pCEnt",
    "p*FEnt",
    "p*FEntS",
    "p*FEntC",
    "p*CEnt",
    "p*CEntS",
    "p*CEntC",
    "MaxError",
    "Boundary",
)

_MEASURES = {
    "Ent": UncertaintyMeasure.TOTAL_ENTROPY,
    "EntS": UncertaintyMeasure.SELECTION_ENTROPY,
    "EntC": UncertaintyMeasure.CONDITIONAL_ENTROPY,
    "MnMx": UncertaintyMeasure.MIN_MAX,
    "MnMar": UncertaintyMeasure.MIN_MARGIN,
}


class StrategyError(ValueError):
    pass


@dataclass(frozen=True)
class Strategy:
    """A query-selection strategy parsed from its catalog name."""

    name: str
    base: str  # Rand | MnMx | MnMar | Ent | EntS | EntC | MaxError | Boundary
    combined: bool  # add the propagated geometric entropy
    plane: str | None  # None | "random" | "optimal"

    @classmethod
    def parse(cls, name: str) -> "Strategy":
        if name not in STRATEGY_NAMES:
            raise StrategyError(f"unknown strategy {name!r}")
        rest = name
        plane = None
        if rest.startswith("p*"):
            plane, rest = "optimal", rest[2:]
        elif rest.startswith("p") and rest not in ("pRand",) and rest[1].isupper():
            plane, rest = "random", rest[1:]
        elif rest == "pRand":
            plane, rest = "random", "Rand"
        if rest in ("Rand", "MaxError", "Boundary"):
            return cls(name=name, base=rest, combined=False, plane=plane)
        combined = rest.startswith("C")
        base = rest[1:]
        return cls(name=name, base=base, combined=combined, plane=plane)

    @property
    def measure(self) -> UncertaintyMeasure | None:
        return _MEASURES.get(self.base)


@dataclass
class SessionConfig:
    rounds: int = 100
    learning_rate: float = 0.1
    k: int = 10
    tau_max_binary: int = 20
    tau_max_multiclass: int = 10
    r: float = 12.0
    t: int = 5
    neighbors_2d_binary: int = 4
    neighbors_2d_multiclass: int = 7
    seeds_per_class: int = 5


@dataclass
class SingleQuery:
    supervoxel_id: int


@dataclass
class OracleAnswer:
    labeled: dict[int, int]  # supervoxel id -> class
    input_cost: int


@dataclass
class ALSession:
    """One active-learning run over the pool half of a dataset."""

    dataset: Dataset
    strategy: Strategy
    budget: int
    seed: int
    config: SessionConfig = field(default_factory=SessionConfig)
    graph: NeighborGraph | None = None
    metric_kind: str = "iou"

    def __post_init__(self):
        if self.budget < 0:
            raise ValueError("budget must be >= 0")
        ds = self.dataset
        if self.strategy.plane is not None and ds.volume is None and ds.spatial_dim == 3:
            raise StrategyError(f"{self.strategy.name} requires a spatial dataset")
        if ds.volume is None and ds.spatial_dim == 3 and self.strategy.combined:
            raise StrategyError(f"{self.strategy.name} requires geometry")
        self.rng = np.random.default_rng(self.seed)
        S = ds.n_supervoxels
        perm = self.rng.permutation(S)
        self.pool_ids = np.sort(perm[: S // 2])
        self.test_ids = np.sort(perm[S // 2 :])
        self._seed_labels()
        if self.graph is None and self._needs_graph():
            self.graph = build_graph(ds.centers, self.config.k)
        self.inputs_spent = 0
        self.curve: list[tuple[int, float]] = []
        self.model: boosting.BoostedModel | None = None
        self.thresholds: np.ndarray | None = None

    def _needs_graph(self) -> bool:
        return self.strategy.combined or self.strategy.base == "Boundary"

    def _seed_labels(self):
        ds = self.dataset
        n_cls = len(ds.labels)
        need = self.config.seeds_per_class
        labeled = []
        gt_pool = ds.ground_truth[self.pool_ids]
        for c in range(n_cls):
            members = self.pool_ids[gt_pool == c]
            if members.size < need:
                raise ValueError("pool has fewer than the required seed samples per class")
            labeled.extend(self.rng.choice(members, size=need, replace=False))
        self.labeled_ids = np.sort(np.array(labeled, dtype=np.int64))
        mask = np.ones(self.pool_ids.size, dtype=bool)
        mask[np.isin(self.pool_ids, self.labeled_ids)] = False
        self.unlabeled_ids = self.pool_ids[mask]
        # labels as assigned by the annotator (oracle answers use ground
        # truth; a human's labels are trusted verbatim, last write wins)
        self.assigned_labels = np.full(ds.n_supervoxels, -1, dtype=np.int64)
        self.assigned_labels[self.labeled_ids] = ds.ground_truth[self.labeled_ids]

    @property
    def tau_max(self) -> int:
        if len(self.dataset.labels) == 2:
            return self.config.tau_max_binary
        return self.config.tau_max_multiclass

    # -- training ---------------------------------------------------------

    def retrain(self):
        ds = self.dataset
        train_seed = int(self.rng.integers(0, 2**31 - 1))
        self.model = boosting.train(
            ds.features[self.labeled_ids],
            self.assigned_labels[self.labeled_ids],
            n_classes=len(ds.labels),
            rounds=self.config.rounds,
            learning_rate=self.config.learning_rate,
            seed=train_seed,
        )
        self.thresholds = self._compute_thresholds()

    def _compute_thresholds(self) -> np.ndarray:
        ds = self.dataset
        n_cls = len(ds.labels)
        h = np.zeros(n_cls)
        if n_cls != 2:
            return h
        F = self.model.scores_batch(ds.features[self.labeled_ids])
        margins = F[:, 1] - F[:, 0]
        y = self.assigned_labels[self.labeled_ids]
        pos, neg = margins[y == 1], margins[y == 0]
        if pos.size >= 2 and neg.size >= 2:
            h[1] = boosting.adaptive_threshold(pos, neg)
        return h

    # -- scoring ----------------------------------------------------------

    def _probabilities(self, ids: np.ndarray) -> np.ndarray:
        F = self.model.scores_batch(self.dataset.features[ids])
        return boosting.scores_to_probs(F, self.thresholds)

    def score_pool(self) -> np.ndarray:
        """Uncertainty over the unlabeled pool, per the strategy."""
        if self.model is None:
            raise RuntimeError("classifier not trained")
        strat = self.strategy
        if strat.base in ("Rand", "MaxError", "Boundary"):
            raise StrategyError(f"{strat.name} does not score the pool")
        measure = strat.measure
        probs_pool = self._probabilities(self.unlabeled_ids)
        if measure is UncertaintyMeasure.MIN_MAX:
            return -np.atleast_1d(min_max_score(probs_pool))
        if measure is UncertaintyMeasure.MIN_MARGIN:
            return -np.atleast_1d(min_margin_score(probs_pool))
        feat = np.atleast_1d(entropy_fn(measure)(probs_pool))
        if not strat.combined:
            return feat
        geo = self._geometric_field(measure)
        return feat + geo[self.unlabeled_ids]

    def _geometric_field(self, measure: UncertaintyMeasure) -> np.ndarray:
        probs_all = self._probabilities(np.arange(self.dataset.n_supervoxels))
        pg = propagate(self.graph, probs_all, self.tau_max)
        return np.atleast_1d(geometric_uncertainty(pg, measure))

    def _full_field(self) -> np.ndarray:
        """Pool uncertainty embedded in a full-length field, zero elsewhere."""
        full = np.zeros(self.dataset.n_supervoxels)
        full[self.unlabeled_ids] = self.score_pool()
        return full

    # -- query selection --------------------------------------------------

    def next_query(self):
        if self.unlabeled_ids.size == 0:
            raise RuntimeError("unlabeled pool is empty")
        strat = self.strategy
        if strat.base == "MaxError" or strat.base == "Boundary":
            return SingleQuery(self._human_baseline_query(strat.base))

        if strat.base == "Rand":
            pick = int(self.rng.choice(self.unlabeled_ids))
        else:
            scores = self.score_pool()
            pick = int(self.unlabeled_ids[np.lexsort((self.unlabeled_ids, -scores))[0]])

        if strat.plane is None:
            return SingleQuery(pick)
        if self.dataset.spatial_dim == 2:
            return self._superpixel_patch(pick)
        if strat.plane == "random":
            return self._random_plane_patch(pick)
        return select_best_patch(
            self._full_field(),
            self.config.t,
            self.config.r,
            self.dataset.centers,
            self.dataset.kappa,
        )

    def _random_plane_patch(self, center_id: int) -> PatchQuery:
        ds = self.dataset
        while True:
            phi = float(self.rng.uniform(0.0, np.pi))
            gamma = float(self.rng.uniform(0.0, np.pi))
            try:
                plane = Plane(center=ds.centers[center_id], phi=phi, gamma=gamma)
                plane.normal
                break
            except ValueError:
                continue
        members = patch_members(center_id, self.config.r, plane, ds.centers, ds.kappa)
        return PatchQuery(
            center_id=center_id,
            plane=plane,
            radius=self.config.r,
            member_ids=members,
            uncertainty=0.0,
        )

    def _superpixel_patch(self, center_id: int) -> PatchQuery:
        ds = self.dataset
        m = (
            self.config.neighbors_2d_binary
            if len(ds.labels) == 2
            else self.config.neighbors_2d_multiclass
        )
        d = np.linalg.norm(ds.centers - ds.centers[center_id], axis=1)
        d[center_id] = np.inf
        ids = np.arange(ds.n_supervoxels)
        nearest = np.lexsort((ids, d))[:m]
        members = np.sort(np.concatenate([[center_id], nearest]))
        return PatchQuery(
            center_id=center_id,
            plane=Plane(center=ds.centers[center_id], phi=0.0, gamma=0.0),
            radius=float(d[nearest].max()) if m else 0.0,
            member_ids=members,
            uncertainty=0.0,
        )

    def _human_baseline_query(self, kind: str) -> int:
        ds = self.dataset
        probs = self._probabilities(self.unlabeled_ids)
        predicted = probs.argmax(axis=1)
        if kind == "MaxError":
            wrong = predicted != ds.ground_truth[self.unlabeled_ids]
            if not wrong.any():
                return int(self.rng.choice(self.unlabeled_ids))
            conf = np.atleast_1d(min_max_score(probs))
            cand = self.unlabeled_ids[wrong]
            conf = conf[wrong]
            return int(cand[np.lexsort((cand, -conf))[0]])
        # Boundary: a graph neighbor predicts a different class
        pred_all = self._probabilities(np.arange(ds.n_supervoxels)).argmax(axis=1)
        neigh_pred = pred_all[self.graph.neighbors[self.unlabeled_ids]]
        differs = (neigh_pred != pred_all[self.unlabeled_ids, None]).any(axis=1)
        if not differs.any():
            return int(self.rng.choice(self.unlabeled_ids))
        return int(self.rng.choice(self.unlabeled_ids[differs]))

    # -- oracle -----------------------------------------------------------

    def oracle_answer(self, query) -> OracleAnswer:
        ds = self.dataset
        if isinstance(query, SingleQuery):
            sv = query.supervoxel_id
            return OracleAnswer(
                labeled={sv: int(ds.ground_truth[sv])}, input_cost=1
            )
        members = np.asarray(query.member_ids)
        classes = np.unique(ds.ground_truth[members])
        cost = 2 if classes.size <= 2 else 3
        new = members[np.isin(members, self.unlabeled_ids)]
        return OracleAnswer(
            labeled={int(i): int(ds.ground_truth[i]) for i in new},
            input_cost=cost,
        )

    def apply_answer(self, answer: OracleAnswer):
        ids = np.array(sorted(answer.labeled), dtype=np.int64)
        for i in ids:
            self.assigned_labels[i] = answer.labeled[int(i)]
        new = ids[~np.isin(ids, self.labeled_ids)]
        self.labeled_ids = np.sort(np.concatenate([self.labeled_ids, new]))
        self.unlabeled_ids = self.unlabeled_ids[~np.isin(self.unlabeled_ids, ids)]
        self.inputs_spent += answer.input_cost

    # -- evaluation -------------------------------------------------------

    def evaluate(self) -> float:
        ds = self.dataset
        pred = self._probabilities(self.test_ids).argmax(axis=1)
        truth = ds.ground_truth[self.test_ids]
        return metric(pred, truth, self.metric_kind)

    def run(self) -> list[tuple[int, float]]:
        """Full loop until the budget is exhausted or the pool runs dry."""
        while True:
            self.retrain()
            self.curve.append((self.inputs_spent, self.evaluate()))
            if self.inputs_spent >= self.budget or self.unlabeled_ids.size == 0:
                break
            query = self.next_query()
            answer = self.oracle_answer(query)
            if not answer.labeled:
                # patch covered only already-labeled supervoxels; fall back
                # to the single most uncertain sample so progress continues
                sv = int(self.rng.choice(self.unlabeled_ids))
                answer = OracleAnswer(
                    labeled={sv: int(self.dataset.ground_truth[sv])}, input_cost=1
                )
            if self.inputs_spent + answer.input_cost > self.budget:
                break
            self.apply_answer(answer)
        return self.curve


def metric(prediction: np.ndarray, truth: np.ndarray, kind: str) -> float:
    """IoU / Dice on the foreground class, mean per-class precision, or accuracy."""
    pred = np.asarray(prediction)
    tr = np.asarray(truth)
    if pred.shape != tr.shape:
        raise ValueError("prediction and truth length mismatch")
    if kind == "accuracy":
        return float(np.mean(pred == tr))
    if kind in ("iou", "dice"):
        p = pred == 1
        t = tr == 1
        inter = np.sum(p & t)
        if kind == "iou":
            union = np.sum(p | t)
            return 1.0 if union == 0 else float(inter / union)
        denom = p.sum() + t.sum()
        return 1.0 if denom == 0 else float(2.0 * inter / denom)
    if kind == "avg_precision":
        n_cls = int(tr.max()) + 1
        precs = []
        for c in range(n_cls):
            sel = pred == c
            precs.append(float(np.sum(sel & (tr == c)) / sel.sum()) if sel.any() else 0.0)
        return float(np.mean(precs))
    raise ValueError(f"unknown metric {kind!r}")


def aulc(curve: list[tuple[int, float]], budget: int) -> float:
    """Mean of the step-interpolated learning curve over inputs 1..budget."""
    xs = np.array([c[0] for c in curve])
    ys = np.array([c[1] for c in curve])
    grid = np.arange(1, budget + 1)
    idx = np.searchsorted(xs, grid, side="right") - 1
    idx = np.clip(idx, 0, len(xs) - 1)
    return float(ys[idx].mean())


def run_experiment(
    dataset: Dataset,
    strategy_name: str,
    repeats: int,
    budget: int,
    seed: int,
    config: SessionConfig | None = None,
    metric_kind: str = "iou",
    graph: NeighborGraph | None = None,
) -> list[list[tuple[int, float]]]:
    """Repeat the AL loop; repeat i uses seed ``seed + i``.

    Returns one learning curve per repeat.  Fully deterministic for a
    fixed (dataset, config, seed).
    """
    config = config or SessionConfig()
    strategy = Strategy.parse(strategy_name)
    if graph is None and (strategy.combined or strategy.base == "Boundary"):
        graph = build_graph(dataset.centers, config.k)
    curves = []
    for rep in range(repeats):
        session = ALSession(
            dataset=dataset,
            strategy=strategy,
            budget=budget,
            seed=seed + rep,
            config=config,
            graph=graph,
            metric_kind=metric_kind,
        )
        curves.append(session.run())
    return curves


def percentile_band(
    curves: list[list[tuple[int, float]]], budget: int
) -> dict[str, np.ndarray]:
    """Mean and 10th/90th-percentile curves on a shared 0..budget grid."""
    grid = np.arange(0, budget + 1)
    mat = []
    for curve in curves:
        xs = np.array([c[0] for c in curve])
        ys = np.array([c[1] for c in curve])
        idx = np.clip(np.searchsorted(xs, grid, side="right") - 1, 0, len(xs) - 1)
        mat.append(ys[idx])
    mat = np.array(mat)
    return {
        "inputs": grid,
        "mean": mat.mean(axis=0),
        "p10": np.percentile(mat, 10, axis=0),
        "p90": np.percentile(mat, 90, axis=0),
    }
