"""Gradient-boosted shallow regression trees and score calibration.

One-vs-rest least-squares boosting with depth-2 trees, the softmax link
p = softmax(2 (F - h)), and the minimum-Bayes-error Adaptive Threshold for
the binary case.  Everything is deterministic for a fixed seed.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

SUBSAMPLE_FRACTION = 0.5
MAX_FEATURES_PER_SPLIT = 10
MODEL_FORMAT_VERSION = 1


class TrainingError(ValueError):
    pass


@dataclass(frozen=True)
class TreeNode:
    """A regression tree node; leaves carry a value, splits a feature/threshold."""

    value: float = 0.0
    feature: int = -1
    threshold: float = 0.0
    left: "TreeNode | None" = None
    right: "TreeNode | None" = None

    @property
    def is_leaf(self) -> bool:
        return self.left is None

    def predict(self, X: np.ndarray) -> np.ndarray:
        if self.is_leaf:
            return np.full(X.shape[0], self.value)
        go_left = X[:, self.feature] <= self.threshold
        out = np.empty(X.shape[0])
        out[go_left] = self.left.predict(X[go_left])
        out[~go_left] = self.right.predict(X[~go_left])
        return out


def _flatten_depth2(t: TreeNode) -> tuple | None:
    """Flatten a depth-<=2 tree into the 10-tuple
    (f0, t0, fl, tl, vll, vlr, fr, tr, vrl, vrr) so whole ensembles can be
    evaluated with three vectorized comparisons.  Leaves become degenerate
    splits on feature 0 with threshold +inf.  Returns None for deeper trees.
    """

    def child(node: TreeNode | None) -> tuple | None:
        if node is None or node.is_leaf:
            v = 0.0 if node is None else node.value
            return (0, np.inf, v, v)
        if not (node.left.is_leaf and node.right.is_leaf):
            return None
        return (node.feature, node.threshold, node.left.value, node.right.value)

    if t.is_leaf:
        return (0, np.inf, 0, np.inf, t.value, t.value, 0, np.inf, t.value, t.value)
    lo, hi = child(t.left), child(t.right)
    if lo is None or hi is None:
        return None
    return (t.feature, t.threshold, *lo, *hi)


def _best_split(X: np.ndarray, y: np.ndarray, feat_idx: np.ndarray):
    """Exhaustive least-squares split search over the given features.

    Returns (feature, threshold, left_mean, right_mean) or None when no
    split reduces the error.
    """
    n = y.shape[0]
    total = y.sum()
    best = None
    best_gain = 1e-12
    for f in feat_idx:
        order = np.argsort(X[:, f], kind="stable")
        xs = X[order, f]
        ys = y[order]
        csum = np.cumsum(ys)[:-1]
        cnt = np.arange(1, n)
        valid = xs[:-1] < xs[1:]
        if not valid.any():
            continue
        left_mean = csum / cnt
        right_mean = (total - csum) / (n - cnt)
        # gain of splitting, up to constants: sum of squared means times counts
        gain = cnt * left_mean**2 + (n - cnt) * right_mean**2 - total**2 / n
        gain = np.where(valid, gain, -np.inf)
        j = int(np.argmax(gain))
        if gain[j] > best_gain:
            best_gain = gain[j]
            thr = 0.5 * (xs[j] + xs[j + 1])
            best = (int(f), float(thr), float(left_mean[j]), float(right_mean[j]))
    return best


def _fit_tree(X: np.ndarray, y: np.ndarray, depth: int, rng: np.random.Generator) -> TreeNode:
    if depth == 0 or y.shape[0] < 2:
        return TreeNode(value=float(y.mean()) if y.size else 0.0)
    d = X.shape[1]
    n_feat = min(d, MAX_FEATURES_PER_SPLIT)
    feat_idx = np.sort(rng.choice(d, size=n_feat, replace=False))
    split = _best_split(X, y, feat_idx)
    if split is None:
        return TreeNode(value=float(y.mean()))
    f, thr, _, _ = split
    mask = X[:, f] <= thr
    return TreeNode(
        feature=f,
        threshold=thr,
        left=_fit_tree(X[mask], y[mask], depth - 1, rng),
        right=_fit_tree(X[~mask], y[~mask], depth - 1, rng),
    )


@dataclass
class BoostedModel:
    """One depth-<=2 tree ensemble per class, one-vs-rest."""

    n_classes: int
    learning_rate: float
    rounds: int
    rng_seed: int
    ensembles: list[list[TreeNode]] = field(default_factory=list)
    base_scores: np.ndarray | None = None
    _compiled: tuple | None = field(default=None, repr=False, compare=False)

    def scores(self, x: np.ndarray) -> np.ndarray:
        """Per-class score vector F for a single feature vector."""
        return self.scores_batch(np.asarray(x, dtype=float)[None, :])[0]

    def scores_batch(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        d_min = self._feature_dim()
        if d_min is not None and X.shape[1] < d_min:
            raise ValueError("feature dimension mismatch")
        F = np.zeros((X.shape[0], self.n_classes))
        if self.base_scores is not None:
            F += self.base_scores[None, :]
        comp = self._compile()
        for c, trees in enumerate(self.ensembles):
            if comp is not None:
                if comp[c] is None:
                    continue
                f0, t0, fl, tl, vll, vlr, fr, tr, vrl, vrr = comp[c]
                lv = np.where(X[:, fl] <= tl, vll, vlr)
                rv = np.where(X[:, fr] <= tr, vrl, vrr)
                val = np.where(X[:, f0] <= t0, lv, rv)
                F[:, c] += self.learning_rate * val.sum(axis=1)
            else:
                for tree in trees:
                    F[:, c] += self.learning_rate * tree.predict(X)
        return F

    def _compile(self) -> tuple | None:
        """Flat per-class arrays for vectorized depth-<=2 evaluation; None
        when any tree is deeper.  Recompiled whenever trees were appended."""
        count = sum(len(trees) for trees in self.ensembles)
        if self._compiled is not None and self._compiled[0] == count:
            return self._compiled[1]
        per_class = []
        for trees in self.ensembles:
            rows = [_flatten_depth2(t) for t in trees]
            if any(r is None for r in rows):
                self._compiled = (count, None)
                return None
            per_class.append(
                tuple(np.array(col) for col in zip(*rows)) if rows else None
            )
        self._compiled = (count, tuple(per_class))
        return self._compiled[1]

    def predict(self, X: np.ndarray, thresholds: np.ndarray | None = None) -> np.ndarray:
        F = self.scores_batch(X)
        if thresholds is not None:
            F = F - thresholds[None, :]
        return F.argmax(axis=1)

    def _feature_dim(self) -> int | None:
        """Minimum feature-vector width the ensembles can score."""

        def deepest(t: TreeNode) -> int:
            if t.is_leaf:
                return -1
            return max(t.feature, deepest(t.left), deepest(t.right))

        dims = [deepest(t) for trees in self.ensembles for t in trees]
        top = max(dims, default=-1)
        return (top + 1) if top >= 0 else None

    def to_json(self) -> str:
        def node(t: TreeNode):
            if t.is_leaf:
                return {"value": t.value}
            return {
                "feature": t.feature,
                "threshold": t.threshold,
                "left": node(t.left),
                "right": node(t.right),
            }

        doc = {
            "version": MODEL_FORMAT_VERSION,
            "n_classes": self.n_classes,
            "learning_rate": self.learning_rate,
            "rounds": self.rounds,
            "rng_seed": self.rng_seed,
            "base_scores": list(self.base_scores) if self.base_scores is not None else None,
            "ensembles": [[node(t) for t in trees] for trees in self.ensembles],
        }
        return json.dumps(doc)

    @classmethod
    def from_json(cls, text: str) -> "BoostedModel":
        doc = json.loads(text)
        if doc.get("version") != MODEL_FORMAT_VERSION:
            raise ValueError("unsupported model format version")

        def node(d) -> TreeNode:
            if "value" in d:
                return TreeNode(value=d["value"])
            return TreeNode(
                feature=d["feature"],
                threshold=d["threshold"],
                left=node(d["left"]),
                right=node(d["right"]),
            )

        model = cls(
            n_classes=doc["n_classes"],
            learning_rate=doc["learning_rate"],
            rounds=doc["rounds"],
            rng_seed=doc["rng_seed"],
        )
        model.ensembles = [[node(t) for t in trees] for trees in doc["ensembles"]]
        bs = doc.get("base_scores")
        model.base_scores = np.array(bs) if bs is not None else None
        return model


def train(
    features: np.ndarray,
    labels: np.ndarray,
    n_classes: int,
    rounds: int = 100,
    learning_rate: float = 0.1,
    seed: int = 0,
    max_depth: int = 2,
) -> BoostedModel:
    """Fit one-vs-rest boosted trees on +-1 targets with squared loss.

    Each round subsamples half the training data; splits explore at most
    ``MAX_FEATURES_PER_SPLIT`` features.
    """
    X = np.asarray(features, dtype=float)
    y = np.asarray(labels, dtype=np.int64)
    present = np.bincount(y, minlength=n_classes)
    if np.any(present == 0):
        raise TrainingError("insufficient labels: every class needs >= 1 sample")

    rng = np.random.default_rng(seed)
    n = X.shape[0]
    model = BoostedModel(
        n_classes=n_classes, learning_rate=learning_rate, rounds=rounds, rng_seed=seed
    )
    model.ensembles = [[] for _ in range(n_classes)]
    if rounds == 0:
        return model

    targets = np.where(y[:, None] == np.arange(n_classes)[None, :], 1.0, -1.0)
    preds = np.zeros((n, n_classes))
    n_sub = max(2, int(round(SUBSAMPLE_FRACTION * n)))
    n_sub = min(n_sub, n)
    for _ in range(rounds):
        for c in range(n_classes):
            idx = rng.choice(n, size=n_sub, replace=False) if n_sub < n else np.arange(n)
            residual = targets[idx, c] - preds[idx, c]
            tree = _fit_tree(X[idx], residual, max_depth, rng)
            model.ensembles[c].append(tree)
            preds[:, c] += learning_rate * tree.predict(X)
    return model


def scores_to_probs(F: np.ndarray, h: np.ndarray | None = None) -> np.ndarray:
    """softmax(2 (F - h)) along the last axis; overflow-guarded."""
    F = np.asarray(F, dtype=float)
    z = 2.0 * (F - (0.0 if h is None else np.asarray(h, dtype=float)))
    z = z - z.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def adaptive_threshold(pos_scores: np.ndarray, neg_scores: np.ndarray) -> float:
    """Equal-prior Gaussian-crossing threshold between the two score sets.

    Fits one Gaussian per class and returns the density crossing between
    the means; degenerate variances fall back to the midpoint.
    """
    pos = np.asarray(pos_scores, dtype=float)
    neg = np.asarray(neg_scores, dtype=float)
    if pos.size < 2 or neg.size < 2:
        raise ValueError("need >= 2 samples per class")
    mu_p, sd_p = pos.mean(), pos.std(ddof=1)
    mu_n, sd_n = neg.mean(), neg.std(ddof=1)
    if mu_p == mu_n:
        return float(mu_p)
    lo, hi = min(mu_p, mu_n), max(mu_p, mu_n)
    # near-zero spread (scores saturated on a separable training set) makes
    # the density crossing collapse onto the narrow class's mean, flipping
    # almost every prediction; treat it as the degenerate equal-sd case
    if min(sd_p, sd_n) < 1e-3 * (hi - lo) or np.isclose(sd_p, sd_n):
        return float(0.5 * (mu_p + mu_n))
    # equal log densities: quadratic a x^2 + b x + c = 0
    a = 1.0 / (2 * sd_n**2) - 1.0 / (2 * sd_p**2)
    b = mu_p / sd_p**2 - mu_n / sd_n**2
    c = (
        mu_n**2 / (2 * sd_n**2)
        - mu_p**2 / (2 * sd_p**2)
        + np.log(sd_n / sd_p)
    )
    disc = b * b - 4 * a * c
    if disc < 0:
        return float(0.5 * (mu_p + mu_n))
    roots = np.array([(-b + np.sqrt(disc)) / (2 * a), (-b - np.sqrt(disc)) / (2 * a)])
    inside = roots[(roots >= lo) & (roots <= hi)]
    if inside.size == 0:
        return float(0.5 * (mu_p + mu_n))
    return float(inside[0])
