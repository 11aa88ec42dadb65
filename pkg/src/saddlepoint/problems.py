"""Moment problem statements and constraint sets."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Union

import numpy as np

from .integrands import IntegrandFamily
from .measures import DiscreteMeasure, FeatureMap, StructuralError


def _vector(values, name):
    a = np.array(values, dtype=np.float64).ravel()
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class Box:
    """``{x : lower <= x <= upper}``; bounds may be infinite, ``lower == upper`` pins a coordinate."""

    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        lo = _vector(self.lower, "lower")
        hi = _vector(self.upper, "upper")
        if lo.shape != hi.shape:
            raise StructuralError("box bounds must have the same length")
        if np.any(np.isnan(lo)) or np.any(np.isnan(hi)):
            raise StructuralError("box bounds must not be NaN")
        if np.any(lo > hi) or np.any(lo == math.inf) or np.any(hi == -math.inf):
            raise StructuralError("empty box")
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)

    @property
    def K(self) -> int:
        return len(self.lower)

    @property
    def is_point(self) -> bool:
        return bool(np.all(self.lower == self.upper))

    @property
    def values(self) -> np.ndarray:
        if not self.is_point:
            raise StructuralError("box is not a single point")
        return self.lower

    def project(self, x) -> np.ndarray:
        return np.clip(x, self.lower, self.upper)

    def distance(self, x) -> float:
        """Sup-norm distance from ``x`` to the box."""
        x = np.asarray(x, dtype=np.float64)
        return float(np.max(np.maximum(self.lower - x, 0.0) + np.maximum(x - self.upper, 0.0),
                            initial=0.0))

    def min_linear(self, y, zero_tol: float = 0.0) -> float:
        """``min {<y, x> : x in box}``.

        Coefficients with ``|y_k| <= zero_tol`` facing an infinite bound
        contribute 0 instead of ``-inf``.
        """
        total = 0.0
        for yk, lo, hi in zip(np.asarray(y, dtype=np.float64), self.lower, self.upper):
            if yk == 0.0:
                continue
            bound = lo if yk > 0 else hi
            if math.isinf(bound):
                if abs(yk) <= zero_tol:
                    continue
                return -math.inf
            total += yk * bound
        return total


class Equality(Box):
    """The single point ``{values}``."""

    def __init__(self, values):
        v = _vector(values, "values")
        super().__init__(v, v)


Constraint = Union[Equality, Box]


@dataclass(frozen=True, eq=False)
class MomentProblem:
    """Minimise the entropy of Q relative to R subject to ``T Q in constraint``."""

    reference: DiscreteMeasure
    family: IntegrandFamily
    features: FeatureMap
    constraint: Box

    def __post_init__(self):
        self.reference.check_reference()
        if self.features.n != len(self.reference):
            raise StructuralError("feature table rows must match the reference support")
        if self.constraint.K != self.features.K:
            raise StructuralError("constraint dimension must match the number of features")
        if not np.all(np.isfinite(self.constraint.lower[self.constraint.lower == self.constraint.upper])):
            raise StructuralError("pinned constraint values must be finite")
        self.family.check_size(len(self.reference))

    @property
    def n(self) -> int:
        return self.features.n

    @property
    def K(self) -> int:
        return self.features.K

    @property
    def is_equality(self) -> bool:
        return self.constraint.is_point

    def with_constraint(self, constraint: Box) -> "MomentProblem":
        return MomentProblem(self.reference, self.family, self.features, constraint)
