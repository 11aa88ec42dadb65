"""Finite measures, feature tables and the moment operator.

At finite support a measure is just a weight vector indexed by support
points, the moment operator is ``Q -> sum_z theta(z) Q_z`` and its adjoint
sends a dual vector ``y`` to the function ``z -> <y, theta(z)>``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Hashable, Optional, Sequence

import numpy as np


class StructuralError(ValueError):
    """Inputs with inconsistent shapes, ids or non-finite entries."""


@dataclass(frozen=True)
class SupportPoint:
    id: Hashable
    coordinates: Optional[tuple] = None


def _as_support(support) -> tuple:
    pts = []
    for p in support:
        pts.append(p if isinstance(p, SupportPoint) else SupportPoint(p))
    ids = [p.id for p in pts]
    if len(set(ids)) != len(ids):
        raise StructuralError("support point ids must be unique")
    return tuple(pts)


def _frozen(a) -> np.ndarray:
    a = np.array(a, dtype=np.float64)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class DiscreteMeasure:
    """Weighted point masses on an ordered finite support.

    Weights may have any sign; use :meth:`check_reference` or
    :meth:`check_probability` where positivity or normalisation matters.
    """

    support: tuple
    weights: np.ndarray

    def __init__(self, support, weights):
        weights = _frozen(weights)
        if weights.ndim != 1:
            raise StructuralError("weights must be a vector")
        if support is None:
            support = range(len(weights))
        support = _as_support(support)
        if len(support) != len(weights):
            raise StructuralError(
                f"support has {len(support)} points but {len(weights)} weights")
        if not np.all(np.isfinite(weights)):
            raise StructuralError("weights must be finite")
        object.__setattr__(self, "support", support)
        object.__setattr__(self, "weights", weights)

    @classmethod
    def from_weights(cls, weights) -> "DiscreteMeasure":
        return cls(None, weights)

    def __len__(self):
        return len(self.weights)

    @property
    def ids(self) -> list:
        return [p.id for p in self.support]

    @property
    def mass(self) -> float:
        return float(np.sum(self.weights))

    def check_reference(self) -> "DiscreteMeasure":
        if not np.all(self.weights > 0):
            raise StructuralError("reference measure must have positive weights")
        return self

    def check_probability(self, tol: float = 1e-12) -> "DiscreteMeasure":
        if np.any(self.weights < 0) or abs(self.mass - 1.0) > tol:
            raise StructuralError("not a probability vector")
        return self

    def with_weights(self, weights) -> "DiscreteMeasure":
        """Same support, new weights."""
        return DiscreteMeasure(self.support, weights)

    def same_support(self, other: "DiscreteMeasure") -> bool:
        return self.ids == other.ids


@dataclass(frozen=True, eq=False)
class FeatureMap:
    """An ``n x K`` table whose row ``z`` holds the feature vector theta(z)."""

    features: np.ndarray

    def __init__(self, features):
        table = _frozen(features)
        if table.ndim == 1:
            table = _frozen(table[:, None])
        if table.ndim != 2 or table.shape[1] < 1 or table.shape[0] < 1:
            raise StructuralError("features must be a non-empty n x K table")
        if not np.all(np.isfinite(table)):
            raise StructuralError("features must be finite")
        object.__setattr__(self, "features", table)

    @property
    def n(self) -> int:
        return self.features.shape[0]

    @property
    def K(self) -> int:
        return self.features.shape[1]

    def mass_row(self) -> Optional[int]:
        """Index of a constant positive feature, if there is one."""
        for k in range(self.K):
            col = self.features[:, k]
            if col[0] > 0 and np.all(col == col[0]):
                return k
        return None


def push_moments(T: FeatureMap, Q: DiscreteMeasure) -> np.ndarray:
    """Moments ``sum_z theta(z) Q_z``, accumulated in support order."""
    if len(Q) != T.n:
        raise StructuralError(
            f"measure has {len(Q)} points but feature table has {T.n} rows")
    out = np.zeros(T.K)
    for z in range(T.n):
        out += T.features[z] * Q.weights[z]
    return out


def adjoint_features(T: FeatureMap, y) -> np.ndarray:
    """The function ``z -> <y, theta(z)>`` as a length-n vector."""
    y = np.asarray(y, dtype=np.float64)
    if y.shape != (T.K,):
        raise StructuralError(f"dual vector must have length {T.K}")
    return T.features @ y


def marginal_feature_map(m: int, n: int) -> FeatureMap:
    """Features of the product space {a_1..a_m} x {b_1..b_n}, row-major.

    Row ``i*n + j`` is ``(e_i, e_j)``, so the moments of a plan are its
    row sums followed by its column sums.
    """
    if m < 1 or n < 1:
        raise StructuralError("marginal sizes must be positive")
    table = np.zeros((m * n, m + n))
    for i in range(m):
        for j in range(n):
            table[i * n + j, i] = 1.0
            table[i * n + j, m + j] = 1.0
    return FeatureMap(table)


def product_support(m: int, n: int) -> list:
    return [SupportPoint((i, j)) for i in range(m) for j in range(n)]
