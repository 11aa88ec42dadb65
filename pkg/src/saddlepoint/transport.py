"""Exact discrete optimal transport with Kantorovich potentials.

The plan is computed by successive shortest paths on the bipartite
transportation network ``S -> rows -> columns -> T``. Node potentials are
kept so that every residual arc has a nonnegative reduced cost; at the end
they are Kantorovich potentials, tightened by a c-transform round and
normalised so that ``f[0] == 0``.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .certificates import Certificate, transport_certificate
from .measures import StructuralError

MASS_TOL = 1e-12
# residual capacities below this are treated as saturated
CAP_EPS = 1e-15


@dataclass(frozen=True, eq=False)
class TransportProblem:
    mu: np.ndarray
    nu: np.ndarray
    cost: np.ndarray

    def __post_init__(self):
        mu = np.array(self.mu, dtype=np.float64).ravel()
        nu = np.array(self.nu, dtype=np.float64).ravel()
        cost = np.array(self.cost, dtype=np.float64)
        if cost.ndim == 1 and len(mu) == 1:
            cost = cost[None, :]
        if cost.shape != (len(mu), len(nu)):
            raise StructuralError(f"cost must be {len(mu)} x {len(nu)}")
        for name, a in (("mu", mu), ("nu", nu)):
            if len(a) == 0 or not np.all(np.isfinite(a)) or np.any(a < 0):
                raise StructuralError(f"{name} must be a nonnegative finite vector")
            if abs(a.sum() - 1.0) > MASS_TOL:
                raise StructuralError(f"{name} must sum to 1 (got {a.sum()!r})")
        if not np.all(np.isfinite(cost)) or np.any(cost < 0):
            raise StructuralError("cost must be finite and nonnegative")
        for a in (mu, nu, cost):
            a.setflags(write=False)
        object.__setattr__(self, "mu", mu)
        object.__setattr__(self, "nu", nu)
        object.__setattr__(self, "cost", cost)

    @property
    def shape(self):
        return self.cost.shape


class Potentials(NamedTuple):
    f: np.ndarray
    g: np.ndarray


class OTSolution(NamedTuple):
    plan: np.ndarray
    potentials: Potentials
    certificate: Certificate


def c_transform(p: TransportProblem, g) -> np.ndarray:
    """``f_i = min_j (c_ij - g_j)``: the largest f with ``f + g <= c``."""
    g = np.asarray(g, dtype=np.float64)
    return np.min(p.cost - g[None, :], axis=1)


def c_transform_cols(p: TransportProblem, f) -> np.ndarray:
    """``g_j = min_i (c_ij - f_i)``."""
    f = np.asarray(f, dtype=np.float64)
    return np.min(p.cost - f[:, None], axis=0)


def slackness_check(p: TransportProblem, plan, pot: Potentials, tol: float = 1e-9) -> list:
    """Cells carrying mass (``> tol``) where ``c_ij - f_i - g_j > tol``."""
    plan = np.asarray(plan, dtype=np.float64)
    slack = p.cost - pot.f[:, None] - pot.g[None, :]
    return [(int(i), int(j)) for i, j in zip(*np.nonzero((plan > tol) & (slack > tol)))]


def _shortest_paths(n_nodes, arcs_from, red_cost, source):
    """Label-correcting (FIFO) shortest paths on reduced costs."""
    dist = [math.inf] * n_nodes
    pred = [-1] * n_nodes
    dist[source] = 0.0
    queue = deque([source])
    queued = [False] * n_nodes
    queued[source] = True
    while queue:
        u = queue.popleft()
        queued[u] = False
        du = dist[u]
        for v, rc in arcs_from(u, red_cost):
            nd = du + rc
            if nd < dist[v] - 1e-15 * (1.0 + abs(nd)):
                dist[v] = nd
                pred[v] = u
                if not queued[v]:
                    queue.append(v)
                    queued[v] = True
    return dist, pred


def _ssp(mu, nu, cost):
    """Min-cost flow on the reduced (strictly positive marginal) problem."""
    m, n = cost.shape
    S, T = 0, m + n + 1
    N = m + n + 2
    row = lambda i: 1 + i  # noqa: E731
    col = lambda j: 1 + m + j  # noqa: E731
    out = np.zeros(m)
    inn = np.zeros(n)
    plan = np.zeros((m, n))
    pot = np.zeros(N)

    def arcs_from(u, rc):
        # yields (v, reduced cost) over residual arcs
        if u == S:
            for i in range(m):
                if mu[i] - out[i] > CAP_EPS:
                    yield row(i), rc(S, row(i), 0.0)
        elif u == T:
            for j in range(n):
                if inn[j] > CAP_EPS:
                    yield col(j), rc(T, col(j), 0.0)
        elif u <= m:
            i = u - 1
            if out[i] > CAP_EPS:
                yield S, rc(u, S, 0.0)
            for j in range(n):
                yield col(j), rc(u, col(j), cost[i, j])
        else:
            j = u - 1 - m
            if nu[j] - inn[j] > CAP_EPS:
                yield T, rc(u, T, 0.0)
            for i in range(m):
                if plan[i, j] > CAP_EPS:
                    yield row(i), rc(u, row(i), -cost[i, j])

    def rc(u, v, c):
        return max(c + pot[u] - pot[v], 0.0)

    remaining = float(mu.sum())
    while remaining > CAP_EPS:
        dist, pred = _shortest_paths(N, arcs_from, rc, S)
        if not math.isfinite(dist[T]):
            raise StructuralError("transport network has no augmenting path")
        cap_t = dist[T]
        for v in range(N):
            pot[v] += min(dist[v], cap_t)
        path = []
        v = T
        while v != S:
            path.append((pred[v], v))
            v = pred[v]
        path.reverse()
        delta = math.inf
        for u, v in path:
            if u == S:
                delta = min(delta, mu[v - 1] - out[v - 1])
            elif v == T:
                delta = min(delta, nu[u - 1 - m] - inn[u - 1 - m])
            elif u == T:
                delta = min(delta, inn[v - 1 - m])
            elif v == S:
                delta = min(delta, out[u - 1])
            elif u <= m:
                pass
            else:
                delta = min(delta, plan[v - 1, u - 1 - m])
        for u, v in path:
            if u == S:
                out[v - 1] += delta
            elif v == T:
                inn[u - 1 - m] += delta
            elif u == T:
                inn[v - 1 - m] -= delta
            elif v == S:
                out[u - 1] -= delta
            elif u <= m:
                plan[u - 1, v - 1 - m] += delta
            else:
                plan[v - 1, u - 1 - m] -= delta
        remaining -= delta
        if delta <= 0.0:
            break
    # reduced cost c_ij + pot_i - pot_j >= 0, so f = -pot(row), g = pot(col)
    f = -pot[1:1 + m]
    g = pot[1 + m:1 + m + n]
    return plan, f, g


def solve_ot(p: TransportProblem, tol: float = 1e-9) -> OTSolution:
    """Optimal plan, normalised potentials and a duality certificate."""
    mu, nu, cost = p.mu, p.nu, p.cost
    rows = np.flatnonzero(mu > 0)
    cols = np.flatnonzero(nu > 0)
    sub_plan, f_sub, g_sub = _ssp(mu[rows], nu[cols], cost[np.ix_(rows, cols)])
    plan = np.zeros(p.shape)
    plan[np.ix_(rows, cols)] = sub_plan
    # zero-mass rows/columns get the tightest potentials compatible with the rest
    g = np.full(len(nu), math.inf)
    g[cols] = g_sub
    f = np.full(len(mu), math.inf)
    f[rows] = f_sub
    dropped_cols = np.setdiff1d(np.arange(len(nu)), cols)
    if dropped_cols.size:
        g[dropped_cols] = np.min(cost[np.ix_(rows, dropped_cols)] - f_sub[:, None], axis=0)
    f = c_transform(p, g)
    g = c_transform_cols(p, f)
    shift = f[0]
    f = f - shift
    g = g + shift
    pot = Potentials(f, g)
    cert = transport_certificate(mu, nu, cost, plan, f, g, True, tol)
    return OTSolution(plan, pot, cert)
