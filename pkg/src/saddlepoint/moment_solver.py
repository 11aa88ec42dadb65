"""Entropy minimisation under moment constraints, solved through the dual.

For an equality constraint ``T Q = xhat`` the dual is the smooth concave
maximisation of

    D(y) = <y, xhat> - sum_z gamma_z(<y, theta(z)>) R_z

and the primal minimiser is read off the dual optimum as
``Q_z = gamma_z'(<y, theta(z)>) R_z``. Box constraints are handled in
moment space: the optimal value ``x -> min {I(Q) : T Q = x}`` is smooth
with gradient equal to the dual optimiser at ``x``, and is minimised over
the box by a projected Newton method whose every inner step is an
equality solve.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import NamedTuple, Optional

import numpy as np
from scipy.linalg import LinAlgError, cho_factor, cho_solve

from . import certificates as cert
from .certificates import BOUNDARY, INTERIOR, OUTSIDE, UNAVAILABLE, Certificate
from .integrands import entropy_value
from .measures import DiscreteMeasure, StructuralError, push_moments
from .oracles import OPTIMAL, simplex_solve
from .problems import Box, Equality, MomentProblem

log = logging.getLogger(__name__)

ARMIJO_SLOPE = 1e-4
BACKTRACK = 0.5
MIN_STEP = 1e-20
REG_START = 1e-10
REG_GROWTH = 10.0
DIVERGENCE_NORM = 1e8
QUAL_EPS = 1e-9
# largest LP (rows + columns) handed to the dense simplex
QUAL_MAX_SIZE = 400
CERT_TOL = 1e-8
# extra Newton steps allowed to shrink <y, grad> once the gradient test passes
POLISH_STEPS = 5
# inner equality solves of the box iteration run this much tighter, so the
# dual they return is accurate enough for the outer stopping test
INNER_TIGHTEN = 1e-3

INFEASIBLE_MSG = "primal infeasible or qualification fails"


class DualEval(NamedTuple):
    value: float
    gradient: Optional[np.ndarray]
    hessian: Optional[np.ndarray]
    feasible: bool


@dataclass
class DualState:
    y: np.ndarray
    dual_value: float
    gradient: np.ndarray
    iterations: int
    converged: bool
    message: str = ""
    history: list = field(default_factory=list)   # dual values at accepted iterates


@dataclass
class PrimalSolution:
    Q: DiscreteMeasure
    value: float
    moments: np.ndarray


class MomentSolution(NamedTuple):
    dual: DualState
    primal: PrimalSolution
    certificate: Certificate


class BoxSolution(NamedTuple):
    x: np.ndarray
    dual: DualState
    primal: PrimalSolution
    certificate: Certificate


class Qualification(NamedTuple):
    status: str
    witness: Optional[np.ndarray]
    margin: float


def _target(p: MomentProblem, xhat):
    if xhat is not None:
        xhat = np.asarray(xhat, dtype=np.float64)
        if xhat.shape != (p.K,):
            raise StructuralError(f"moment vector must have length {p.K}")
        return xhat
    return p.constraint.values


def dual_objective(p: MomentProblem, y, xhat=None) -> DualEval:
    """Value, gradient and Hessian of the equality dual at ``y``.

    Off the dual domain the value is ``-inf`` and ``feasible`` is False.
    """
    xhat = _target(p, xhat)
    y = np.asarray(y, dtype=np.float64)
    Th = p.features.features
    s = Th @ y
    w = p.reference.weights
    g = p.family.gamma(s)
    if not np.all(np.isfinite(g)):
        return DualEval(-math.inf, None, None, False)
    value = float(y @ xhat) - float(np.sum(g * w))
    q = p.family.dgamma(s) * w
    grad = xhat - Th.T @ q
    curv = p.family.d2gamma(s) * w
    hess = -(Th.T * curv) @ Th
    return DualEval(value, grad, hess, True)


def _primal_from_dual(p: MomentProblem, y) -> PrimalSolution:
    q = p.family.dgamma(p.features.features @ y) * p.reference.weights
    Q = p.reference.with_weights(q)
    return PrimalSolution(Q, entropy_value(p.family, p.reference, Q), push_moments(p.features, Q))


def _newton_direction(g, H):
    M = -H
    mu = REG_START * max(float(np.trace(M)) / len(g), 1.0)
    while True:
        try:
            factor = cho_factor(M + mu * np.eye(len(g)))
            return cho_solve(factor, g)
        except (LinAlgError, ValueError):
            mu *= REG_GROWTH
            if mu > 1e20:
                return g.copy()


def _newton(p, xhat, y0, tol, max_iter):
    y = np.zeros(p.K) if y0 is None else np.array(y0, dtype=np.float64)
    cur = dual_objective(p, y, xhat)
    if not cur.feasible:
        y = np.zeros(p.K)
        cur = dual_objective(p, y, xhat)
    it = 0
    message = ""
    history = [cur.value]
    polish = 0
    best = None
    while True:
        gnorm = float(np.max(np.abs(cur.gradient)))
        if gnorm <= tol:
            # <y, grad> is exactly the primal-dual gap at the recovered primal;
            # a few extra steps shrink it when y is large
            if best is None or abs(y @ cur.gradient) < abs(best[0] @ best[1].gradient):
                best = (y, cur)
            gap = abs(float(y @ cur.gradient))
            if gap <= tol * (1.0 + abs(cur.value)) or polish >= POLISH_STEPS:
                y, cur = best
                return DualState(y, cur.value, cur.gradient, it, True, "converged", history)
            polish += 1
        if it >= max_iter:
            if best is not None:
                y, cur = best
                return DualState(y, cur.value, cur.gradient, it, True, "converged", history)
            message = "iteration limit reached"
            break
        if np.linalg.norm(y) > DIVERGENCE_NORM:
            message = INFEASIBLE_MSG
            break
        step = _newton_direction(cur.gradient, cur.hessian)
        slope = float(cur.gradient @ step)
        alpha = 1.0
        accepted = None
        while alpha >= MIN_STEP:
            trial = y + alpha * step
            nxt = dual_objective(p, trial, xhat)
            if nxt.feasible:
                gain = nxt.value - cur.value
                if gain >= ARMIJO_SLOPE * alpha * slope:
                    accepted = (trial, nxt)
                    break
                # gains at round-off level: fall back on the gradient norm
                if (abs(gain) <= 1e-13 * (1.0 + abs(cur.value))
                        and np.max(np.abs(nxt.gradient)) < gnorm):
                    accepted = (trial, nxt)
                    break
            alpha *= BACKTRACK
        it += 1
        if accepted is None:
            if best is not None:
                y, cur = best
                return DualState(y, cur.value, cur.gradient, it, True, "converged", history)
            message = "line search stalled"
            break
        y, cur = accepted
        history.append(cur.value)
        log.debug("newton it=%d |y|=%.3g |g|=%.3g step=%.3g", it, np.linalg.norm(y), gnorm, alpha)
    if np.linalg.norm(y) > 1e6 and message != INFEASIBLE_MSG:
        message = INFEASIBLE_MSG
    return DualState(y, cur.value, cur.gradient, it, False, message, history)


def qualification_check(p: MomentProblem, xhat=None) -> Qualification:
    """Where ``xhat`` sits relative to the achievable moments.

    For families whose entropy is finite exactly on nonnegative densities
    (relative entropy, Burg) with a mass feature, and for Fermi (densities
    in [0, c/d]), solves ``max t : T q = xhat, t <= q_z (<= cap_z - t)``:
    ``t > eps`` is relative-interior membership with witness ``q``,
    ``|t| <= eps`` the boundary, infeasibility means outside. Quadratic
    entropies accept every ``xhat`` in the range of ``T``. Other families
    report ``Unavailable``.
    """
    xhat = _target(p, xhat)
    fam = p.family
    Th = p.features.features
    n, K = Th.shape
    if fam.tag == "Quadratic":
        q, *_ = np.linalg.lstsq(Th.T, xhat, rcond=None)
        ok = np.max(np.abs(Th.T @ q - xhat)) <= QUAL_EPS * (1.0 + np.max(np.abs(xhat)))
        return Qualification(INTERIOR if ok else OUTSIDE, q if ok else None, math.inf if ok else -math.inf)
    bounded = fam.tag == "Fermi"
    if fam.tag not in ("RelativeEntropy", "Burg", "Fermi"):
        return Qualification(UNAVAILABLE, None, math.nan)
    if not bounded and p.features.mass_row() is None:
        return Qualification(UNAVAILABLE, None, math.nan)
    rows_n = K + n * (2 if bounded else 1)
    if rows_n + n + 1 > QUAL_MAX_SIZE:
        return Qualification(UNAVAILABLE, None, math.nan)
    A = [np.append(Th[:, k], 0.0) for k in range(K)]
    b = list(xhat)
    rows = ["="] * K
    for z in range(n):
        a = np.zeros(n + 1)
        a[z], a[n] = 1.0, -1.0
        A.append(a)
        b.append(0.0)
        rows.append(">=")
    if bounded:
        cap = p.reference.weights * np.broadcast_to(fam.scale, (n,)) / np.broadcast_to(fam.divisor, (n,))
        for z in range(n):
            a = np.zeros(n + 1)
            a[z], a[n] = 1.0, 1.0
            A.append(a)
            b.append(cap[z])
            rows.append("<=")
    c = np.zeros(n + 1)
    c[n] = 1.0
    res = simplex_solve(np.array(A), np.array(b), c, "max", rows)
    if res.status != OPTIMAL:
        return Qualification(OUTSIDE, None, -math.inf)
    t = res.value
    q = res.x[:n]
    return Qualification(INTERIOR if t > QUAL_EPS else BOUNDARY, q, t)


def _finish(p: MomentProblem, state: DualState, qual: str, cert_tol: float) -> MomentSolution:
    primal = _primal_from_dual(p, state.y)
    c = cert.moment_certificate(p, primal.Q, state.y, state.converged, qual, cert_tol)
    return MomentSolution(state, primal, c)


def solve_equality(p: MomentProblem, tol: float = 1e-10, max_iter: int = 200, xhat=None,
                   y0=None, qualify: bool = True, cert_tol: float = CERT_TOL) -> MomentSolution:
    """Damped Newton ascent on the equality dual, then primal recovery.

    ``xhat`` overrides the problem's pinned moments (used by the box
    solver). A certificate is attached whether or not the solve converged.
    """
    target = p if xhat is None else p.with_constraint(Equality(xhat))
    xhat = _target(p, xhat)
    if not np.all(np.isfinite(xhat)):
        raise StructuralError("target moments must be finite")
    qual = qualification_check(p, xhat).status if qualify else UNAVAILABLE
    if qual == OUTSIDE:
        y = np.zeros(p.K)
        ev = dual_objective(p, y, xhat)
        state = DualState(y, ev.value, ev.gradient, 0, False, INFEASIBLE_MSG)
        return _finish(target, state, qual, cert_tol)
    state = _newton(p, xhat, y0, tol, max_iter)
    if not state.converged:
        log.warning("equality solve did not converge: %s", state.message)
    return _finish(target, state, qual, cert_tol)


def _interior_start(p: MomentProblem, box: Box):
    """A point of the box carried by a strictly positive density, if any."""
    fam = p.family
    Th = p.features.features
    n, K = Th.shape
    if fam.tag not in ("RelativeEntropy", "Burg", "Fermi") or n + 2 * K + 1 > QUAL_MAX_SIZE:
        return None
    A, b, rows = [], [], []
    for k in range(K):
        row = np.append(Th[:, k], 0.0)
        if math.isfinite(box.lower[k]):
            A.append(row)
            b.append(box.lower[k])
            rows.append(">=")
        if math.isfinite(box.upper[k]) and box.upper[k] != box.lower[k]:
            A.append(row)
            b.append(box.upper[k])
            rows.append("<=")
        elif box.upper[k] == box.lower[k]:
            rows[-1] = "="
    for z in range(n):
        a = np.zeros(n + 1)
        a[z], a[n] = 1.0, -1.0
        A.append(a)
        b.append(0.0)
        rows.append(">=")
    # keep the density bounded so the LP stays bounded
    a = np.zeros(n + 1)
    a[n] = 1.0
    A.append(a)
    b.append(1.0)
    rows.append("<=")
    if fam.tag == "Fermi":
        cap = p.reference.weights * np.broadcast_to(fam.scale, (n,)) / np.broadcast_to(fam.divisor, (n,))
        for z in range(n):
            a = np.zeros(n + 1)
            a[z], a[n] = 1.0, 1.0
            A.append(a)
            b.append(cap[z])
            rows.append("<=")
    c = np.zeros(n + 1)
    c[n] = 1.0
    res = simplex_solve(np.array(A), np.array(b), c, "max", rows)
    if res.status != OPTIMAL or res.value <= QUAL_EPS:
        return None
    return Th.T @ res.x[:n]


def solve_box(p: MomentProblem, tol: float = 1e-10, max_iter: int = 200,
              inner_max_iter: int = 200, cert_tol: float = CERT_TOL) -> BoxSolution:
    """Minimise the entropy subject to ``lower <= T Q <= upper``.

    Works on ``F(x) = min {I(Q) : T Q = x}``, whose gradient is the
    equality dual optimiser and whose Hessian is the inverse of the dual
    curvature ``sum_z theta theta^T gamma_z'' R_z``. Steps are projected
    Newton steps (inverse-Hessian block on the free coordinates, gradient
    on the bound ones) with Armijo backtracking along the projection arc;
    the iteration stops when ``|x - P(x - grad F(x))|_inf <= tol``.
    """
    box = p.constraint
    if box.is_point:
        sol = solve_equality(p, tol, inner_max_iter, cert_tol=cert_tol)
        return BoxSolution(box.values.copy(), sol.dual, sol.primal, sol.certificate)

    def inner(x, y0=None):
        # a plain solve on the equality problem keeps the trial cheap
        st = _newton(p, x, y0, tol * INNER_TIGHTEN, inner_max_iter)
        if not st.converged:
            st = _newton(p, x, y0, tol, inner_max_iter)
        return st

    lo, hi = box.lower, box.upper
    Th = p.features.features
    m_r = p.family.m() * p.reference.weights
    starts = [box.project(Th.T @ np.broadcast_to(m_r, (p.n,)))]
    x, st = None, None
    for cand in starts + [None]:
        if cand is None:
            cand = _interior_start(p, box)
            if cand is None:
                break
            cand = box.project(cand)
        trial = inner(cand)
        if trial.converged:
            x, st = cand, trial
            break
    if x is None:
        log.warning("box solve: no starting point in the domain")
        y = np.zeros(p.K)
        ev = dual_objective(p, y, box.project(np.zeros(p.K)))
        state = DualState(y, -math.inf, ev.gradient, 0, False, INFEASIBLE_MSG)
        primal = _primal_from_dual(p, y)
        c = cert.moment_certificate(p, primal.Q, y, False, OUTSIDE, cert_tol)
        return BoxSolution(primal.moments, state, primal, c)

    F = entropy_value(p.family, p.reference, _primal_from_dual(p, st.y).Q)
    it = 0
    converged = False
    message = ""
    total_inner = st.iterations
    while True:
        y = st.y
        resid = x - box.project(x - y)
        rnorm = float(np.max(np.abs(resid)))
        if rnorm <= tol:
            converged = True
            message = "converged"
            break
        if it >= max_iter:
            message = "iteration limit reached"
            break
        eps_act = min(rnorm, 1e-6)
        active = ((x <= lo + eps_act) & (y > 0)) | ((x >= hi - eps_act) & (y < 0)) | (lo == hi)
        free = ~active
        d = -y.copy()
        if np.any(free):
            curv = -dual_objective(p, y, x).hessian
            try:
                Hinv = np.linalg.solve(curv, np.eye(p.K))
                d[free] = -np.linalg.solve(Hinv[np.ix_(free, free)], y[free])
            except np.linalg.LinAlgError:
                pass
        d[lo == hi] = 0.0
        alpha = 1.0
        accepted = None
        while alpha >= MIN_STEP:
            xt = box.project(x + alpha * d)
            stt = inner(xt, y)
            if stt.converged:
                Ft = entropy_value(p.family, p.reference, _primal_from_dual(p, stt.y).Q)
                decrease = float(y @ (xt - x))
                if Ft <= F + ARMIJO_SLOPE * decrease:
                    accepted = (xt, stt, Ft)
                    break
                rt = float(np.max(np.abs(xt - box.project(xt - stt.y))))
                if abs(Ft - F) <= 1e-13 * (1.0 + abs(F)) and rt < rnorm:
                    accepted = (xt, stt, Ft)
                    break
            alpha *= BACKTRACK
        it += 1
        if accepted is None:
            message = "line search stalled"
            break
        x, st, F = accepted
        total_inner += st.iterations
        log.debug("box it=%d F=%.12g |r|=%.3g step=%.3g", it, F, rnorm, alpha)

    # the reported dual value is the box dual at y
    dv = cert.dual_value(p, st.y)
    state = DualState(st.y, dv, x - box.project(x - st.y), it, converged, message)
    primal = _primal_from_dual(p, st.y)
    qual = qualification_check(p, x).status
    c = cert.moment_certificate(p, primal.Q, st.y, converged, qual, cert_tol)
    log.debug("box solve: %d outer, %d inner iterations", it, total_inner)
    return BoxSolution(x, state, primal, c)


def solve(p: MomentProblem, tol: float = 1e-10, max_iter: int = 200,
          cert_tol: float = CERT_TOL):
    """Dispatch on the constraint type; returns ``(x, dual, primal, certificate)``."""
    if p.is_equality:
        sol = solve_equality(p, tol, max_iter, cert_tol=cert_tol)
        return BoxSolution(p.constraint.values.copy(), *sol)
    return solve_box(p, tol, max_iter, cert_tol=cert_tol)
