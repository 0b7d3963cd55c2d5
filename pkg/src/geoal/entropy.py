"""Per-distribution uncertainty measures.

All entropies are in bits (base-2 logarithms) so that binary maxima equal 1.
Functions accept a single distribution (1-d array) or a field of
distributions (2-d array, one row per sample) and apply along the last axis.
Argmax ties are broken by the lowest class index throughout.
"""

from __future__ import annotations

import enum

import numpy as np


class UncertaintyMeasure(enum.Enum):
    TOTAL_ENTROPY = "total"
    SELECTION_ENTROPY = "selection"
    CONDITIONAL_ENTROPY = "conditional"
    MIN_MAX = "minmax"
    MIN_MARGIN = "minmargin"

    @property
    def is_entropy(self) -> bool:
        return self in (
            UncertaintyMeasure.TOTAL_ENTROPY,
            UncertaintyMeasure.SELECTION_ENTROPY,
            UncertaintyMeasure.CONDITIONAL_ENTROPY,
        )


def _xlog2x(p: np.ndarray) -> np.ndarray:
    out = np.zeros_like(p, dtype=float)
    nz = p > 0
    out[nz] = p[nz] * np.log2(p[nz])
    return out


def _binary_entropy(p: np.ndarray) -> np.ndarray:
    return -(_xlog2x(p) + _xlog2x(1.0 - p))


def _top2(p: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Two largest entries along the last axis, lower index first on ties."""
    p = np.asarray(p, dtype=float)
    # stable sort on negated values keeps the lower index first among equals
    order = np.argsort(-p, axis=-1, kind="stable")
    b1 = np.take_along_axis(p, order[..., :1], axis=-1)[..., 0]
    b2 = np.take_along_axis(p, order[..., 1:2], axis=-1)[..., 0]
    return b1, b2


def total_entropy(p: np.ndarray) -> np.ndarray | float:
    """Shannon entropy of the full class distribution, range [0, log2 |Y|]."""
    p = np.asarray(p, dtype=float)
    h = -np.sum(_xlog2x(p), axis=-1)
    return float(h) if h.ndim == 0 else h


def selection_entropy(p: np.ndarray) -> np.ndarray | float:
    """Binary entropy of the top class against all others together."""
    b1, _ = _top2(p)
    h = _binary_entropy(np.clip(b1, 0.0, 1.0))
    return float(h) if h.ndim == 0 else h


def conditional_entropy(p: np.ndarray) -> np.ndarray | float:
    """Binary entropy of the top-2 classes renormalized to each other."""
    b1, b2 = _top2(p)
    scalar = np.ndim(b1) == 0
    b1, denom = np.atleast_1d(b1), np.atleast_1d(b1 + b2)
    safe = np.where(denom > 0, denom, 1.0)
    pc = np.where(denom > 0, b1 / safe, 1.0)
    h = _binary_entropy(pc)
    return float(h[0]) if scalar else h


def min_max_score(p: np.ndarray) -> np.ndarray | float:
    """Posterior of the predicted class; lower means more uncertain."""
    b1, _ = _top2(p)
    return float(b1) if b1.ndim == 0 else b1


def min_margin_score(p: np.ndarray) -> np.ndarray | float:
    """Gap between the two top classes; lower means more uncertain."""
    b1, b2 = _top2(p)
    m = b1 - b2
    return float(m) if m.ndim == 0 else m


_ENTROPY_FNS = {
    UncertaintyMeasure.TOTAL_ENTROPY: total_entropy,
    UncertaintyMeasure.SELECTION_ENTROPY: selection_entropy,
    UncertaintyMeasure.CONDITIONAL_ENTROPY: conditional_entropy,
}


def entropy_fn(measure: UncertaintyMeasure):
    if not measure.is_entropy:
        raise ValueError(f"{measure.name} is not combinable")
    return _ENTROPY_FNS[measure]
