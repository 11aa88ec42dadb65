"""Optimality certificates: duality gap, Young residual, KKT residuals.

For a moment problem with constraint set C, a pair (Q, y) is optimal iff

    (a) T Q lies in C,
    (b) <y, T Q> <= <y, x> for every x in C,
    (c) Q_z = gamma_z'(<y, theta(z)>) R_z for every z,

and then ``I(Q) = inf_C <y, .> - Gamma(y)`` with
``Gamma(y) = sum_z gamma_z(<y, theta(z)>) R_z``. Each residual measures
one of these conditions on its own; (b) is evaluated at the projection of
``T Q`` onto C so that a violation of (a) does not leak into it.

All residuals are compared against ``tol * (1 + |primal_value|)``; the
rule is recorded in every certificate.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .integrands import entropy_value
from .measures import DiscreteMeasure, adjoint_features, push_moments
from .problems import Box, MomentProblem

NORMALIZATION = "residual <= tol * (1 + |primal_value|)"
# dual coefficients this small facing an infinite bound count as zero
ZERO_DUAL = 1e-9

INTERIOR, BOUNDARY, OUTSIDE = "Interior", "Boundary", "Outside"
UNAVAILABLE, NOT_APPLICABLE = "Unavailable", "NotApplicable"


@dataclass(frozen=True)
class KKTReport:
    constraint_residual: float
    support_condition_residual: float
    representation_residual: float

    def worst(self) -> float:
        return max(self.constraint_residual, self.support_condition_residual,
                   self.representation_residual)


@dataclass(frozen=True)
class Certificate:
    primal_value: float
    dual_value: float
    gap: float
    young_residual: float
    kkt: KKTReport
    qualification: str
    converged: bool
    tolerances: dict = field(default_factory=dict)
    violations: tuple = ()

    def passed(self, tol=None) -> bool:
        tol = self.tolerances.get("tol", 1e-8) if tol is None else tol
        scale = tol * (1.0 + abs(self.primal_value)) if math.isfinite(self.primal_value) else 0.0
        return (saddle_check(self.primal_value, self.dual_value, tol)
                and self.young_residual <= scale
                and self.kkt.worst() <= scale
                and not self.violations)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["violations"] = [list(v) for v in self.violations]
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "Certificate":
        d = dict(d)
        d["kkt"] = KKTReport(**d["kkt"])
        d["violations"] = tuple(tuple(v) for v in d.get("violations", ()))
        return cls(**d)


def saddle_check(primal_value: float, dual_value: float, tol: float) -> bool:
    """True iff the primal and dual values agree to ``tol * (1 + |primal|)``."""
    if not (math.isfinite(primal_value) and math.isfinite(dual_value)):
        return False
    return abs(primal_value - dual_value) <= tol * (1.0 + abs(primal_value))


def gamma_total(problem: MomentProblem, y) -> float:
    """``sum_z gamma_z(<y, theta(z)>) R_z``; +inf off the dual domain."""
    s = adjoint_features(problem.features, y)
    vals = problem.family.gamma(s) * problem.reference.weights
    if np.any(np.isinf(vals)):
        return math.inf
    total = 0.0
    for v in vals:
        total += v
    return float(total)


def dual_value(problem: MomentProblem, y, zero_tol: float = ZERO_DUAL) -> float:
    """``inf_{x in C} <y, x> - Gamma(y)``."""
    g = gamma_total(problem, y)
    if g == math.inf:
        return -math.inf
    return problem.constraint.min_linear(y, zero_tol) - g


def young_residual(problem: MomentProblem, Q: DiscreteMeasure, y) -> float:
    """``|I(Q) + Gamma(y) - <y, T Q>|``; zero exactly at Fenchel pairs."""
    y = np.asarray(y, dtype=np.float64)
    primal = entropy_value(problem.family, problem.reference, Q)
    g = gamma_total(problem, y)
    if math.isinf(primal) or math.isinf(g):
        return math.inf
    return abs(primal + g - float(y @ push_moments(problem.features, Q)))


def kkt_report(problem: MomentProblem, Q: DiscreteMeasure, y, C: Box = None,
               zero_tol: float = ZERO_DUAL) -> KKTReport:
    C = problem.constraint if C is None else C
    y = np.asarray(y, dtype=np.float64)
    x = push_moments(problem.features, Q)
    a = C.distance(x)
    xp = C.project(x)
    lowest = C.min_linear(y, zero_tol)
    b = max(0.0, float(y @ xp) - lowest) if lowest > -math.inf else math.inf
    target = problem.family.dgamma(adjoint_features(problem.features, y)) * problem.reference.weights
    with np.errstate(invalid="ignore"):
        c = float(np.max(np.abs(Q.weights - target)))
    if math.isnan(c):
        c = math.inf
    return KKTReport(a, b, c)


def moment_certificate(problem: MomentProblem, Q: DiscreteMeasure, y, converged: bool,
                       qualification: str, tol: float = 1e-8) -> Certificate:
    primal = entropy_value(problem.family, problem.reference, Q)
    dual = dual_value(problem, y)
    gap = primal - dual if math.isfinite(primal) and math.isfinite(dual) else math.inf
    return Certificate(
        primal_value=primal,
        dual_value=dual,
        gap=gap,
        young_residual=young_residual(problem, Q, y),
        kkt=kkt_report(problem, Q, y),
        qualification=qualification,
        converged=bool(converged),
        tolerances={"tol": tol, "normalization": NORMALIZATION, "zero_dual": ZERO_DUAL},
    )


def transport_certificate(mu, nu, cost, plan, f, g, converged: bool = True,
                          tol: float = 1e-9) -> Certificate:
    """Certificate for a transport plan and Kantorovich potentials.

    Field mapping: constraint residual = worst marginal violation;
    support-condition residual = worst violation of ``f_i + g_j <= c_ij``;
    representation residual = worst slack ``c_ij - f_i - g_j`` on cells
    carrying mass; Young residual = ``|sum pi_ij (c_ij - f_i - g_j)|``.
    """
    mu, nu, cost, plan, f, g = (np.asarray(a, dtype=np.float64) for a in (mu, nu, cost, plan, f, g))
    # compensated sums keep the gap sign honest down to the last ulp
    primal = math.fsum((plan * cost).ravel())
    dual = math.fsum(np.concatenate([f * mu, g * nu]))
    gap = math.fsum(np.concatenate([(plan * cost).ravel(), -f * mu, -g * nu]))
    slack = cost - f[:, None] - g[None, :]
    marg = max(float(np.max(np.abs(plan.sum(axis=1) - mu))),
               float(np.max(np.abs(plan.sum(axis=0) - nu))),
               float(max(0.0, -plan.min())))
    feas = max(0.0, float(-slack.min()))
    on_support = slack[plan > tol]
    rep = float(np.max(np.abs(on_support), initial=0.0))
    viol = tuple((int(i), int(j)) for i, j in zip(*np.nonzero((plan > tol) & (slack > tol))))
    return Certificate(
        primal_value=primal,
        dual_value=dual,
        gap=gap,
        young_residual=abs(math.fsum((plan * slack).ravel())),
        kkt=KKTReport(marg, feas, rep),
        qualification=NOT_APPLICABLE,
        converged=bool(converged),
        tolerances={"tol": tol, "normalization": NORMALIZATION},
        violations=viol,
    )
