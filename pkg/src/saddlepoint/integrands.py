"""Per-point convex integrands and the entropy functional.

Each family is described by its base function ``gamma`` (convex, finite
at 0) together with the conjugate ``gamma*``, the derivatives and the
minimiser ``m`` of ``gamma*``.  Per-point scaling
``gamma_z(s) = gamma(c_z s) / d_z`` is supported; then

    gamma_z*(t) = gamma*(t d_z / c_z) / d_z,    m_z = m c_z / d_z.

``lam`` is the shifted integrand ``gamma_z(s) - m_z s`` (nonnegative,
zero at the origin) and ``lam_max`` its symmetrisation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy.special import expit, xlogy

from . import search
from .measures import DiscreteMeasure, StructuralError

LN2 = math.log(2.0)

FAMILY_TAGS = ("RelativeEntropy", "Quadratic", "Burg", "Fermi", "Custom")
# integer codes shared with the compiled kernels
FAMILY_CODES = {"RelativeEntropy": 0, "Quadratic": 1, "Burg": 2, "Fermi": 3}


def _rel_gamma(s):
    with np.errstate(over="ignore"):
        return np.expm1(s)


def _rel_dgamma(s):
    with np.errstate(over="ignore"):
        return np.exp(s)


def _rel_conj(t):
    t = np.asarray(t, dtype=np.float64)
    with np.errstate(invalid="ignore", divide="ignore"):
        out = xlogy(t, t) - t + 1.0
    return np.where(t < 0, np.inf, out)


def _quad_gamma(s):
    return 0.5 * np.square(s)


def _quad_dgamma(s):
    return np.asarray(s, dtype=np.float64) * 1.0


def _quad_d2gamma(s):
    return np.ones_like(np.asarray(s, dtype=np.float64))


def _burg_gamma(s):
    s = np.asarray(s, dtype=np.float64)
    with np.errstate(invalid="ignore", divide="ignore"):
        out = -np.log1p(-s)
    return np.where(s < 1.0, out, np.inf)


def _burg_dgamma(s):
    s = np.asarray(s, dtype=np.float64)
    with np.errstate(divide="ignore"):
        return np.where(s < 1.0, 1.0 / (1.0 - s), np.inf)


def _burg_d2gamma(s):
    s = np.asarray(s, dtype=np.float64)
    with np.errstate(divide="ignore"):
        return np.where(s < 1.0, 1.0 / np.square(1.0 - s), np.inf)


def _burg_conj(t):
    t = np.asarray(t, dtype=np.float64)
    with np.errstate(invalid="ignore", divide="ignore"):
        out = t - 1.0 - np.log(t)
    return np.where(t > 0, out, np.inf)


def _fermi_gamma(s):
    return np.logaddexp(0.0, s) - LN2


def _fermi_d2gamma(s):
    p = expit(s)
    return p * (1.0 - p)


def _fermi_conj(t):
    t = np.asarray(t, dtype=np.float64)
    with np.errstate(invalid="ignore", divide="ignore"):
        out = xlogy(t, t) + xlogy(1.0 - t, 1.0 - t) + LN2
    return np.where((t >= 0) & (t <= 1), out, np.inf)


@dataclass(frozen=True)
class _Base:
    gamma: Callable
    dgamma: Callable
    d2gamma: Callable
    conj: Optional[Callable]
    m: float
    dom_hi: float = math.inf


_BUILTIN = {
    "RelativeEntropy": _Base(_rel_gamma, _rel_dgamma, _rel_dgamma, _rel_conj, 1.0),
    "Quadratic": _Base(_quad_gamma, _quad_dgamma, _quad_d2gamma,
                       lambda t: 0.5 * np.square(t), 0.0),
    "Burg": _Base(_burg_gamma, _burg_dgamma, _burg_d2gamma, _burg_conj, 1.0, 1.0),
    "Fermi": _Base(_fermi_gamma, expit, _fermi_d2gamma, _fermi_conj, 0.5),
}


def _custom_base(gamma, dgamma, d2gamma=None, domain=(-math.inf, math.inf),
                 n_check=201):
    lo, hi = domain
    g0 = float(gamma(0.0))
    if not (lo < 0.0 < hi) or not math.isfinite(g0):
        raise StructuralError("custom integrand must be finite on a neighbourhood of 0")

    def in_dom(s):
        return (s > lo) & (s < hi)

    def g(s):
        s = np.asarray(s, dtype=np.float64)
        safe = np.where(in_dom(s), s, 0.0)
        return np.where(in_dom(s), np.vectorize(gamma, otypes=[float])(safe) - g0, np.inf)

    def dg(s):
        s = np.asarray(s, dtype=np.float64)
        safe = np.where(in_dom(s), s, 0.0)
        return np.where(in_dom(s), np.vectorize(dgamma, otypes=[float])(safe), np.inf)

    if d2gamma is None:
        def d2g(s, h=1e-6):
            s = np.asarray(s, dtype=np.float64)
            return (dg(s + h) - dg(s - h)) / (2.0 * h)
    else:
        def d2g(s):
            s = np.asarray(s, dtype=np.float64)
            safe = np.where(in_dom(s), s, 0.0)
            return np.where(in_dom(s), np.vectorize(d2gamma, otypes=[float])(safe), np.inf)

    # strict convexity is only sampled, not proven
    a = max(lo, -50.0)
    b = min(hi, 50.0)
    pts = np.linspace(a, b, n_check)[1:-1]
    slopes = dg(pts)
    if not np.all(np.diff(slopes) > 0):
        raise StructuralError("custom integrand derivative is not strictly increasing")
    return _Base(g, dg, d2g, None, float(dgamma(0.0)), hi)


@dataclass(frozen=True, eq=False)
class IntegrandFamily:
    """One convex integrand family with optional per-point scaling.

    ``scale`` (c) and ``divisor`` (d) are scalars or length-n arrays.
    Custom families are built with :meth:`custom` or :meth:`from_table`.
    """

    tag: str
    scale: object = 1.0
    divisor: object = 1.0
    _base: _Base = field(default=None, repr=False)
    params: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        if self.tag not in FAMILY_TAGS:
            raise StructuralError(f"unknown family tag {self.tag!r}")
        c = np.asarray(self.scale, dtype=np.float64)
        d = np.asarray(self.divisor, dtype=np.float64)
        if np.any(~np.isfinite(c)) or np.any(c <= 0) or np.any(~np.isfinite(d)) or np.any(d <= 0):
            raise StructuralError("scale and divisor must be positive and finite")
        object.__setattr__(self, "scale", c)
        object.__setattr__(self, "divisor", d)
        if self._base is None:
            if self.tag == "Custom":
                raise StructuralError("Custom family needs callables; use IntegrandFamily.custom")
            object.__setattr__(self, "_base", _BUILTIN[self.tag])

    @classmethod
    def custom(cls, gamma, dgamma, d2gamma=None, domain=(-math.inf, math.inf),
               scale=1.0, divisor=1.0):
        return cls("Custom", scale, divisor, _custom_base(gamma, dgamma, d2gamma, domain))

    @classmethod
    def from_table(cls, s, gamma, dgamma, scale=1.0, divisor=1.0):
        """Custom family from tabulated values, Hermite-interpolated.

        The domain of gamma is the open range of the table.
        """
        from scipy.interpolate import CubicHermiteSpline

        s = np.asarray(s, dtype=np.float64)
        spline = CubicHermiteSpline(s, np.asarray(gamma, float), np.asarray(dgamma, float))
        d1 = spline.derivative()
        d2 = spline.derivative(2)
        base = _custom_base(lambda x: float(spline(x)), lambda x: float(d1(x)),
                            lambda x: float(d2(x)), (float(s[0]), float(s[-1])))
        params = {"s": s.tolist(), "gamma": list(map(float, gamma)),
                  "dgamma": list(map(float, dgamma))}
        return cls("Custom", scale, divisor, base, params)

    @property
    def code(self) -> Optional[int]:
        return FAMILY_CODES.get(self.tag)

    def _cd(self, z=None):
        c, d = self.scale, self.divisor
        if z is not None:
            c = c if c.ndim == 0 else c[z]
            d = d if d.ndim == 0 else d[z]
        return c, d

    def check_size(self, n):
        for a in (self.scale, self.divisor):
            if a.ndim != 0 and a.shape != (n,):
                raise StructuralError(f"per-point parameters must have length {n}")

    def m(self, z=None):
        c, d = self._cd(z)
        return self._base.m * c / d

    def dom_hi(self, z=None):
        c, _ = self._cd(z)
        return self._base.dom_hi / c

    def gamma(self, s, z=None):
        c, d = self._cd(z)
        return self._base.gamma(c * np.asarray(s, dtype=np.float64)) / d

    def dgamma(self, s, z=None):
        c, d = self._cd(z)
        return (c / d) * self._base.dgamma(c * np.asarray(s, dtype=np.float64))

    def d2gamma(self, s, z=None):
        c, d = self._cd(z)
        return (c * c / d) * self._base.d2gamma(c * np.asarray(s, dtype=np.float64))

    def conj(self, t, z=None):
        c, d = self._cd(z)
        t = np.asarray(t, dtype=np.float64)
        if self._base.conj is not None:
            return self._base.conj(t * d / c) / d
        flat = np.broadcast_arrays(t, c, d)
        out = [search.concave_sup(lambda s, tt=tt, cc=cc, dd=dd:
                                  tt * s - float(self._base.gamma(cc * s)) / dd)[0]
               for tt, cc, dd in zip(*(a.ravel() for a in flat))]
        return np.asarray(out).reshape(flat[0].shape)

    def lam(self, s, z=None):
        s = np.asarray(s, dtype=np.float64)
        return self.gamma(s, z) - self.m(z) * s

    def lam_max(self, s, z=None):
        s = np.asarray(s, dtype=np.float64)
        return np.maximum(self.lam(s, z), self.lam(-s, z))


WHICH = ("value", "conjugate", "derivative", "lambda", "lambda_max")


def integrand_eval(fam: IntegrandFamily, z, which: str, s: float) -> float:
    """Scalar evaluation of gamma_z and its companions; +inf off domain."""
    if s is None or math.isnan(s):
        raise StructuralError("NaN argument")
    if which == "value":
        return float(fam.gamma(s, z))
    if which == "conjugate":
        return float(fam.conj(s, z))
    if which == "derivative":
        return float(fam.dgamma(s, z))
    if which == "lambda":
        return float(fam.lam(s, z))
    if which == "lambda_max":
        return float(fam.lam_max(s, z))
    raise StructuralError(f"unknown quantity {which!r}")


def numeric_conjugate(fam: IntegrandFamily, z, t: float, tol: float = 1e-10) -> float:
    """``sup_s t s - gamma_z(s)`` by golden-section search.

    Independent of the closed-form conjugates; returns the limit value when
    the maximiser runs off to infinity and ``+inf`` when unbounded.
    """

    def obj(s):
        g = float(fam.gamma(s, z))
        return -math.inf if g == math.inf else t * s - g

    return search.concave_sup(obj, 0.0, tol)[0]


def entropy_value(fam: IntegrandFamily, R: DiscreteMeasure, Q: DiscreteMeasure) -> float:
    """``sum_z gamma_z*(Q_z / R_z) R_z``; +inf if any ratio is off domain."""
    if not R.same_support(Q):
        raise StructuralError("Q and R must share their support")
    R.check_reference()
    vals = fam.conj(Q.weights / R.weights) * R.weights
    if np.any(np.isinf(vals)):
        return math.inf
    total = 0.0
    for v in vals:
        total += v
    return float(total)
