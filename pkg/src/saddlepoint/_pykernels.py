"""Pure-Python kernels, used when the compiled extension is unavailable.

Ridge functions are ``theta(s) = sum_k w_k phi(<a_k, s>)`` with ``phi`` one
of gamma / lambda / lambda_max of a built-in family (``which`` = 0 / 1 / 2);
``mode=1`` symmetrises the whole sum, ``max(theta(s), theta(-s))``.
"""

import itertools
import math

import numpy as np

from . import search

LN2 = math.log(2.0)
_M = (1.0, 0.0, 1.0, 0.5)
_EXP_MAX = 709.0


def base_gamma(code, x):
    if code == 0:
        return math.expm1(x) if x < _EXP_MAX else math.inf
    if code == 1:
        return 0.5 * x * x
    if code == 2:
        return -math.log1p(-x) if x < 1.0 else math.inf
    if code == 3:
        if x > 0.0:
            return x + math.log1p(math.exp(-x)) - LN2
        return math.log1p(math.exp(x)) - LN2
    raise ValueError(f"unknown family code {code}")


def base_conj(code, t):
    if code == 0:
        if t < 0.0:
            return math.inf
        return 1.0 if t == 0.0 else t * math.log(t) - t + 1.0
    if code == 1:
        return 0.5 * t * t
    if code == 2:
        return t - 1.0 - math.log(t) if t > 0.0 else math.inf
    if code == 3:
        if t < 0.0 or t > 1.0:
            return math.inf
        v = LN2
        if t > 0.0:
            v += t * math.log(t)
        if t < 1.0:
            v += (1.0 - t) * math.log(1.0 - t)
        return v
    raise ValueError(f"unknown family code {code}")


def base_phi(code, which, x):
    if which == 0:
        return base_gamma(code, x)
    if which == 1:
        g = base_gamma(code, x)
        return g if g == math.inf else g - _M[code] * x
    a = base_phi(code, 1, x)
    b = base_phi(code, 1, -x)
    return a if a > b else b


def make_ridge(code, which, A, w, mode):
    A = np.asarray(A, dtype=np.float64)
    rows = [tuple(float(v) for v in row) for row in A]
    w = [float(v) for v in w]

    def theta(s):
        s = [float(v) for v in s]
        tot_p = 0.0
        tot_m = 0.0
        for wk, row in zip(w, rows):
            p = 0.0
            for a, x in zip(row, s):
                p += a * x
            tot_p += wk * base_phi(code, which, p)
            if mode == 1:
                tot_m += wk * base_phi(code, which, -p)
        return max(tot_p, tot_m) if mode == 1 else tot_p

    return theta


def ridge_eval(code, which, A, w, mode, s):
    return make_ridge(code, which, A, w, mode)(s)


def ridge_gauge(code, which, A, w, mode, s, tol=1e-10):
    return search.gauge(make_ridge(code, which, A, w, mode), s, tol)


def ridge_conjugate(code, which, A, w, mode, r, tol=1e-10):
    return search.conjugate(make_ridge(code, which, A, w, mode), r, tol)


def ridge_conjugate_gauge(code, which, A, w, mode, r, tol=1e-10):
    return search.conjugate_gauge(make_ridge(code, which, A, w, mode), r, tol)


def ridge_support(code, which, A, w, mode, r, tol=1e-10):
    return search.support(make_ridge(code, which, A, w, mode), r, tol)


def grid_entropy_min(code, c, d, R, Theta, xhat, h, eps, cap):
    """Minimise the entropy over grid measures in the constraint slab.

    Coordinates ``0..n-2`` run over ``{0, h, 2h, ...} ∩ [0, cap_z]``; the
    last coordinate is restricted to the grid points of the interval cut
    out by the slab ``|sum_z theta(z) Q_z - xhat| <= eps``. Returns
    ``(value, Q)``; value is ``inf`` (and Q None) when no grid point fits.
    """
    c = np.asarray(c, float)
    d = np.asarray(d, float)
    R = np.asarray(R, float)
    Theta = np.asarray(Theta, float)
    xhat = np.asarray(xhat, float)
    cap = np.asarray(cap, float)
    n, K = Theta.shape
    conj = np.vectorize(lambda t: base_conj(code, t), otypes=[float])

    def cost(z, q):
        return conj(q * d[z] / (c[z] * R[z])) / d[z] * R[z]

    def grid(z):
        return np.arange(int(math.floor(cap[z] / h + 1e-9)) + 1) * h

    best_v, best_q = math.inf, None
    last = n - 1
    th_last = Theta[last]
    if n >= 2:
        vz = n - 2
        V = grid(vz)
        V_cost = cost(vz, V)
        outer = [grid(z) for z in range(n - 2)]
    else:
        vz = None
        V = np.zeros(1)
        V_cost = np.zeros(1)
        outer = []

    for prefix in itertools.product(*outer):
        pre_mom = np.zeros(K)
        pre_cost = 0.0
        for z, q in enumerate(prefix):
            pre_mom += Theta[z] * q
            pre_cost += float(cost(z, np.float64(q)))
        if pre_cost == math.inf or pre_cost >= best_v:
            continue
        part = pre_mom[None, :] + (np.outer(V, Theta[vz]) if vz is not None else 0.0)
        lo = np.zeros(len(V))
        hi = np.full(len(V), cap[last])
        feas = np.ones(len(V), dtype=bool)
        for k in range(K):
            a = th_last[k]
            if a == 0.0:
                feas &= np.abs(part[:, k] - xhat[k]) <= eps
                continue
            b1 = (xhat[k] - eps - part[:, k]) / a
            b2 = (xhat[k] + eps - part[:, k]) / a
            lo = np.maximum(lo, np.minimum(b1, b2))
            hi = np.minimum(hi, np.maximum(b1, b2))
        ilo = np.ceil(lo / h - 1e-9).astype(np.int64)
        ihi = np.floor(hi / h + 1e-9).astype(np.int64)
        count = np.where(feas, ihi - ilo + 1, 0)
        if count.max(initial=0) <= 0:
            continue
        base_cost = pre_cost + V_cost
        for j in range(int(count.max())):
            sel = count > j
            q_last = (ilo[sel] + j) * h
            mom = part[sel] + np.outer(q_last, th_last)
            ok = np.all(np.abs(mom - xhat) <= eps * (1.0 + 1e-12), axis=1)
            if not np.any(ok):
                continue
            vals = base_cost[sel][ok] + cost(last, q_last[ok])
            i = int(np.argmin(vals))
            if vals[i] < best_v:
                best_v = float(vals[i])
                qv = V[sel][ok][i]
                best_q = list(prefix) + ([float(qv)] if vz is not None else []) \
                    + [float(q_last[ok][i])]
    return best_v, (None if best_q is None else np.array(best_q))
