"""Gauges of convex level sets and the norms built from them.

For a nonnegative convex ``theta`` with ``theta(0) = 0``:

* ``gauge(theta, s) = inf {a > 0 : theta(s / a) <= 1}``
* ``support_of_levelset(theta, r) = sup {<r, s> : theta(s) <= 1}``
* the support function is sandwiched between half and twice the gauge
  of the conjugate, see :func:`pgauge_sandwich`.

Ridge functions built from the integrand families go through the
compiled kernels; arbitrary callables use :mod:`saddlepoint.search`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, NamedTuple, Optional

import numpy as np

from . import kernels, search
from .integrands import FAMILY_CODES, IntegrandFamily
from .measures import DiscreteMeasure, FeatureMap, StructuralError, adjoint_features

SANDWICH_RTOL = 1e-6
SANDWICH_ATOL = 1e-9


@dataclass(frozen=True, eq=False)
class ConvexGaugeSpec:
    """A convex ``theta: R^d -> [0, inf]`` with ``theta(0) = 0``.

    ``ridge`` (family code, which, A, w, mode) marks the built-in ridge
    form ``sum_k w_k phi(<a_k, s>)`` and enables the compiled kernels.
    """

    theta: Callable
    dim: int
    ridge: Optional[tuple] = None

    @classmethod
    def from_ridge(cls, family: str, A, w, which: str = "lambda_max",
                   symmetric: bool = False) -> "ConvexGaugeSpec":
        code = FAMILY_CODES[family]
        wh = {"gamma": kernels.GAMMA, "lambda": kernels.LAMBDA,
              "lambda_max": kernels.LAMBDA_MAX}[which]
        A = np.atleast_2d(np.asarray(A, dtype=np.float64))
        w = np.asarray(w, dtype=np.float64).ravel()
        if np.any(w <= 0) or len(w) != A.shape[0]:
            raise StructuralError("ridge weights must be positive, one per row")
        mode = 1 if symmetric else 0
        args = (code, wh, A, w, mode)
        return cls(lambda s: kernels.ridge_eval(*args, s), A.shape[1], args)

    def __call__(self, s) -> float:
        return float(self.theta(np.asarray(s, dtype=np.float64)))

    def check(self, n: int = 200, seed: int = 0, tol: float = 1e-10) -> None:
        """Sampled sanity checks: theta(0) = 0, nonnegativity, midpoint convexity."""
        if abs(self(np.zeros(self.dim))) > tol:
            raise StructuralError("theta(0) must be 0")
        rng = np.random.default_rng(seed)
        for _ in range(n):
            a, b = rng.normal(size=(2, self.dim))
            fa, fb, fm = self(a), self(b), self(0.5 * (a + b))
            if min(fa, fb, fm) < -tol:
                raise StructuralError("theta must be nonnegative")
            if fm > 0.5 * (fa + fb) + tol * (1.0 + abs(fm)):
                raise StructuralError("theta failed a midpoint convexity check")


def _vec(spec, s):
    s = np.asarray(s, dtype=np.float64).ravel()
    if s.shape != (spec.dim,):
        raise StructuralError(f"expected a point of dimension {spec.dim}")
    if not np.all(np.isfinite(s)):
        raise StructuralError("point must be finite")
    return s


def gauge(spec: ConvexGaugeSpec, s, tol: float = 1e-10) -> float:
    s = _vec(spec, s)
    if spec.ridge is not None:
        return kernels.ridge_gauge(*spec.ridge, s, tol)
    return search.gauge(spec.theta, s, tol)


def conjugate(spec: ConvexGaugeSpec, r, tol: float = 1e-10) -> float:
    """Numeric conjugate of theta at ``r`` (dimension <= 3)."""
    r = _vec(spec, r)
    if spec.dim > 3:
        raise StructuralError("conjugate search is limited to dimension <= 3")
    if spec.ridge is not None:
        return kernels.ridge_conjugate(*spec.ridge, r, tol)
    return search.conjugate(spec.theta, r, tol)


def conjugate_gauge(spec: ConvexGaugeSpec, r, tol: float = 1e-10) -> float:
    r = _vec(spec, r)
    if spec.dim > 3:
        raise StructuralError("conjugate search is limited to dimension <= 3")
    if spec.ridge is not None:
        return kernels.ridge_conjugate_gauge(*spec.ridge, r, tol)
    return search.conjugate_gauge(spec.theta, r, tol)


def support_of_levelset(spec: ConvexGaugeSpec, r, tol: float = 1e-10) -> float:
    r = _vec(spec, r)
    if spec.dim > 3:
        raise StructuralError("support search is limited to dimension <= 3")
    if spec.ridge is not None:
        return kernels.ridge_support(*spec.ridge, r, tol)
    return search.support(spec.theta, r, tol)


class Sandwich(NamedTuple):
    lower: float
    mid: float
    upper: float
    ok: bool

    @property
    def ratio(self) -> float:
        """``support / conjugate gauge``, always within [1/2, 2]."""
        j = 2.0 * self.lower
        if j == 0.0 or math.isinf(j):
            return math.nan
        return self.mid / j


def _leq(a, b):
    if math.isinf(a) and math.isinf(b):
        return True
    return a <= b * (1.0 + SANDWICH_RTOL) + SANDWICH_ATOL


def pgauge_sandwich(spec: ConvexGaugeSpec, r, tol: float = 1e-10) -> Sandwich:
    """``(j/2, support, 2j)`` with ``j`` the gauge of the numeric conjugate."""
    j = conjugate_gauge(spec, r, tol)
    mid = support_of_levelset(spec, r, tol)
    lower, upper = 0.5 * j, 2.0 * j
    return Sandwich(lower, mid, upper, _leq(lower, mid) and _leq(mid, upper))


def _family_ridge_args(fam: IntegrandFamily, R: DiscreteMeasure, A):
    n = len(R)
    fam.check_size(n)
    c = np.broadcast_to(fam.scale, (n,))
    d = np.broadcast_to(fam.divisor, (n,))
    return (fam.code, kernels.LAMBDA, c[:, None] * A, R.weights / d, 1)


def _phi_pm(fam, R, u):
    u = np.asarray(u, dtype=np.float64)
    a = float(np.sum(fam.lam(u) * R.weights))
    b = float(np.sum(fam.lam(-u) * R.weights))
    return max(a, b)


def _checked_norm(value, nonzero):
    if nonzero and value == 0.0:
        raise StructuralError("the symmetrised integral vanishes along this direction")
    return value


def norm_phi(R: DiscreteMeasure, fam: IntegrandFamily, u, tol: float = 1e-10) -> float:
    """Gauge of ``u`` under ``max(Phi(u), Phi(-u))``, ``Phi(u) = sum lambda_z(u_z) R_z``."""
    u = np.asarray(u, dtype=np.float64)
    if u.shape != (len(R),):
        raise StructuralError("u must have one entry per support point")
    if not np.any(u):
        return 0.0
    if fam.code is not None:
        args = _family_ridge_args(fam, R, np.eye(len(R)))
        val = kernels.ridge_gauge(*args, u, tol)
    else:
        val = search.gauge(lambda v: _phi_pm(fam, R, v), u, tol)
    return _checked_norm(val, True)


def norm_lambda(R: DiscreteMeasure, fam: IntegrandFamily, T: FeatureMap, y,
                tol: float = 1e-10) -> float:
    """Gauge of ``y`` under ``max(Lambda(y), Lambda(-y))``, ``Lambda(y) = Phi(T* y)``.

    Evaluates ``Lambda`` directly from the feature rows, without forming
    ``T* y`` first; :func:`norm_identity` compares it to :func:`norm_phi`.
    """
    y = np.asarray(y, dtype=np.float64)
    if y.shape != (T.K,) or T.n != len(R):
        raise StructuralError("dimension mismatch between y, T and R")
    if not np.any(y):
        return 0.0
    if fam.code is not None:
        args = _family_ridge_args(fam, R, T.features)
        val = kernels.ridge_gauge(*args, y, tol)
    else:
        def lam_pm(v):
            return max(_lam_sum(fam, R, T, v), _lam_sum(fam, R, T, -v))
        val = search.gauge(lam_pm, y, tol)
    return _checked_norm(val, True)


def _lam_sum(fam, R, T, y):
    total = 0.0
    for z in range(T.n):
        s = 0.0
        for k in range(T.K):
            s += y[k] * T.features[z, k]
        total += float(fam.lam(s, z)) * R.weights[z]
    return total


class NormIdentity(NamedTuple):
    norm_lambda: float
    norm_phi: float
    ok: bool


def norm_identity(R, fam, T, y, rtol: float = 1e-9) -> NormIdentity:
    """Both routes to ``|y|_Lambda``; ``ok`` when they agree to ``rtol``."""
    a = norm_lambda(R, fam, T, y)
    b = norm_phi(R, fam, adjoint_features(T, y))
    return NormIdentity(a, b, abs(a - b) <= rtol * (1.0 + a))
