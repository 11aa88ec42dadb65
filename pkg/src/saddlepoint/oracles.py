"""Brute-force verifiers kept independent of the solvers.

Nothing here imports :mod:`moment_solver` or :mod:`transport`.
"""

from __future__ import annotations

import itertools
import logging
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import kernels
from .measures import StructuralError
from .problems import MomentProblem

log = logging.getLogger(__name__)

OPTIMAL, INFEASIBLE, UNBOUNDED = "Optimal", "Infeasible", "Unbounded"


@dataclass
class LPResult:
    status: str
    value: float
    x: Optional[np.ndarray]


def _pivot(tab, row, col):
    tab[row] /= tab[row, col]
    f = tab[:, col].copy()
    f[row] = 0.0
    tab -= np.outer(f, tab[row])


def _bland(tab, basis, ncols, tol):
    """Run simplex iterations on ``tab`` (last row = reduced costs, minimisation)."""
    m = len(basis)
    while True:
        neg = np.flatnonzero(tab[-1, :ncols] < -tol)
        if neg.size == 0:
            return OPTIMAL
        entering = int(neg[0])
        col = tab[:m, entering]
        rows = np.flatnonzero(col > tol)
        if rows.size == 0:
            return UNBOUNDED
        ratios = tab[rows, -1] / col[rows]
        tied = rows[ratios <= ratios.min() + tol]
        leaving = int(min(tied, key=lambda i: basis[i]))
        _pivot(tab, leaving, entering)
        basis[leaving] = entering


def simplex_solve(A, b, c, sense: str = "min", rows=None, tol: float = 1e-9) -> LPResult:
    """Dense two-phase primal simplex with Bland's rule.

    Solves ``min`` (or ``max``) ``c @ x`` subject to ``A x (rows) b`` and
    ``x >= 0``, where ``rows`` lists ``"<="``, ``">="`` or ``"="`` per
    constraint (default all ``"<="``).
    """
    A = np.atleast_2d(np.asarray(A, dtype=np.float64))
    b = np.asarray(b, dtype=np.float64).ravel()
    c = np.asarray(c, dtype=np.float64).ravel()
    m, n = A.shape
    if b.shape != (m,) or c.shape != (n,):
        raise StructuralError("LP dimensions do not match")
    if not (np.all(np.isfinite(A)) and np.all(np.isfinite(b)) and np.all(np.isfinite(c))):
        raise StructuralError("LP data must be finite")
    rows = list(rows) if rows is not None else ["<="] * m
    if sense not in ("min", "max"):
        raise StructuralError("sense must be 'min' or 'max'")
    obj = c if sense == "min" else -c

    A = A.copy()
    b = b.copy()
    for i in range(m):
        if b[i] < 0:
            A[i] *= -1.0
            b[i] *= -1.0
            rows[i] = {"<=": ">=", ">=": "<=", "=": "="}[rows[i]]

    n_slack = sum(r != "=" for r in rows)
    n_art = sum(r != "<=" for r in rows)
    ncols = n + n_slack + n_art
    tab = np.zeros((m + 1, ncols + 1))
    tab[:m, :n] = A
    tab[:m, -1] = b
    basis = [0] * m
    s = n
    a = n + n_slack
    art_cols = []
    for i, r in enumerate(rows):
        if r == "<=":
            tab[i, s] = 1.0
            basis[i] = s
            s += 1
        elif r == ">=":
            tab[i, s] = -1.0
            s += 1
        if r != "<=":
            tab[i, a] = 1.0
            basis[i] = a
            art_cols.append(a)
            a += 1

    # phase 1: minimise the sum of artificials
    if art_cols:
        tab[-1, :] = 0.0
        tab[-1, art_cols] = 1.0
        for i in range(m):
            if basis[i] in art_cols:
                tab[-1] -= tab[i]
        _bland(tab, basis, ncols, tol)
        if -tab[-1, -1] > tol * (1.0 + np.abs(b).max(initial=0.0)):
            return LPResult(INFEASIBLE, math.nan, None)
        # drive remaining artificials out of the basis, dropping redundant rows
        keep = []
        for i in range(m):
            if basis[i] in art_cols:
                cand = next((j for j in range(n + n_slack) if abs(tab[i, j]) > tol), None)
                if cand is None:
                    continue
                _pivot(tab, i, cand)
                basis[i] = cand
            keep.append(i)
        tab = np.vstack([tab[keep], tab[-1:]])
        basis = [basis[i] for i in keep]
        tab = np.delete(tab, art_cols, axis=1)
        ncols = n + n_slack

    tab[-1, :] = 0.0
    tab[-1, :n] = obj
    for i, j in enumerate(basis):
        if tab[-1, j] != 0.0:
            tab[-1] -= tab[-1, j] * tab[i]
    status = _bland(tab, basis, ncols, tol)
    if status == UNBOUNDED:
        return LPResult(UNBOUNDED, -math.inf if sense == "min" else math.inf, None)
    x = np.zeros(ncols)
    for i, j in enumerate(basis):
        x[j] = tab[i, -1]
    x = x[:n]
    return LPResult(OPTIMAL, float(c @ x), x)


# ----------------------------------------------------------------- entropy


@dataclass
class GridOracleResult:
    feasible: bool
    value: float
    Q: Optional[np.ndarray]
    h: float
    eps: float
    lipschitz: float      # L in the guarantee value >= optimum - L*h
    bound: float          # L*h

    def agrees(self, solver_value: float, atol: float = 1e-9) -> bool:
        return self.feasible and self.value - atol <= solver_value <= self.value + self.bound


def _default_cap(problem: MomentProblem, eps: float) -> np.ndarray:
    Th = problem.features.features
    xhat = problem.constraint.values
    caps = np.full(problem.n, math.inf)
    for k in range(problem.K):
        col = Th[:, k]
        if np.all(col > 0):
            caps = np.minimum(caps, (xhat[k] + eps) / col)
    if problem.family.tag == "Fermi":
        fam = problem.family
        c = np.broadcast_to(fam.scale, (problem.n,))
        d = np.broadcast_to(fam.divisor, (problem.n,))
        caps = np.minimum(caps, problem.reference.weights * c / d)
    if not np.all(np.isfinite(caps)):
        raise StructuralError("no mass feature to bound the grid; pass mass_cap")
    return np.maximum(caps, 0.0)


def entropy_oracle_grid(problem: MomentProblem, h: float = 1e-3, eps: float = 2e-3,
                        mass_cap=None) -> GridOracleResult:
    """Minimum entropy over grid measures ``Q_z in hZ ∩ [0, cap]`` in the slab
    ``|T Q - xhat|_inf <= eps``.

    The result carries its own error bound, expressed as ``L*h``: the entropy
    increase of the least-norm correction of the best grid point back onto
    the exact constraint (never less than one secant step). When that
    correction leaves the domain, a local Lipschitz estimate times the
    correction size is used instead.
    """
    if not problem.is_equality:
        raise StructuralError("grid oracle needs an equality constraint")
    if problem.n > 4:
        raise StructuralError("grid oracle is limited to n <= 4")
    fam = problem.family
    if fam.code is None:
        raise StructuralError("grid oracle supports the built-in families only")
    n = problem.n
    cap = _default_cap(problem, eps) if mass_cap is None else np.broadcast_to(
        np.asarray(mass_cap, float), (n,))
    c = np.broadcast_to(fam.scale, (n,)).astype(float)
    d = np.broadcast_to(fam.divisor, (n,)).astype(float)
    R = problem.reference.weights
    Th = problem.features.features
    xhat = problem.constraint.values
    value, Q = kernels.grid_entropy_min(fam.code, c, d, R, Th, xhat, h, eps, cap)
    if Q is None:
        log.info("grid oracle: no feasible grid point")
        return GridOracleResult(False, math.inf, None, h, eps, math.inf, math.inf)

    def term(z, q):
        return float(fam.conj(q / R[z], z)) * R[z]

    slope = 0.0
    for z in range(n):
        here = term(z, Q[z])
        for q2 in (Q[z] + h, Q[z] - h):
            if q2 < 0:
                continue
            other = term(z, q2)
            if math.isfinite(other):
                slope = max(slope, abs(other - here) / h)
    resid = xhat - Th.T @ Q
    delta = np.linalg.lstsq(Th.T, resid, rcond=None)[0]
    fixed = Q + delta
    excess = math.inf
    if np.all(fixed >= 0):
        # Q + delta meets the constraint exactly, so it caps the true optimum
        excess = sum(term(z, fixed[z]) - term(z, Q[z]) for z in range(n))
    if math.isfinite(excess):
        # allowance for summation round-off in the two entropy values
        bound = max(float(excess), slope * h) + 1e-12 * (1.0 + abs(value))
    else:
        bound = float(2.0 * slope * max(float(np.abs(delta).sum()), h))
    L = bound / h
    log.info("grid oracle: value=%.9g, local Lipschitz L=%.6g, bound L*h=%.3g", value, L, bound)
    return GridOracleResult(True, float(value), Q, h, eps, L, bound)


# --------------------------------------------------------------- transport


def _tree_solution(cells, mu, nu):
    """Flows on a spanning tree of the bipartite graph by leaf peeling."""
    m, n = len(mu), len(nu)
    supply = list(mu) + list(nu)
    adj = {v: [] for v in range(m + n)}
    for e, (i, j) in enumerate(cells):
        adj[i].append(e)
        adj[m + j].append(e)
    flow = [0.0] * len(cells)
    alive = [True] * len(cells)
    degree = {v: len(adj[v]) for v in adj}
    leaves = [v for v in adj if degree[v] == 1]
    while leaves:
        v = leaves.pop()
        if degree[v] != 1:
            continue
        e = next(e for e in adj[v] if alive[e])
        i, j = cells[e]
        u = m + j if v == i else i
        flow[e] = supply[v]
        supply[u] -= supply[v]
        supply[v] = 0.0
        alive[e] = False
        degree[v] -= 1
        degree[u] -= 1
        if degree[u] == 1:
            leaves.append(u)
    return flow


def _is_spanning_tree(cells, m, n):
    parent = list(range(m + n))

    def find(v):
        while parent[v] != v:
            parent[v] = parent[parent[v]]
            v = parent[v]
        return v

    for i, j in cells:
        a, b = find(i), find(m + j)
        if a == b:
            return False
        parent[a] = b
    return True


def ot_oracle_vertices(mu, nu, cost, tol: float = 1e-12) -> float:
    """Minimum transport cost over all basic feasible solutions.

    Every vertex of the transportation polytope is carried by a spanning
    tree of the complete bipartite graph; all ``m+n-1``-subsets of cells
    are tried.
    """
    mu = np.asarray(mu, dtype=np.float64)
    nu = np.asarray(nu, dtype=np.float64)
    cost = np.asarray(cost, dtype=np.float64)
    m, n = cost.shape
    if m > 4 or n > 4:
        raise StructuralError("vertex enumeration is limited to m, n <= 4")
    all_cells = [(i, j) for i in range(m) for j in range(n)]
    best = math.inf
    for cells in itertools.combinations(all_cells, m + n - 1):
        if not _is_spanning_tree(cells, m, n):
            continue
        flow = _tree_solution(cells, mu, nu)
        if min(flow) < -tol:
            continue
        val = sum(f * cost[i, j] for f, (i, j) in zip(flow, cells))
        best = min(best, val)
    return best
