"""Scalar search primitives over Python callables.

These are the reference versions of the loops in ``_kernels.pyx``; the
compiled kernel repeats the same steps for the built-in ridge functions.
Extended values are plain floats: ``inf`` outside a domain, ``-inf`` for a
concave objective evaluated outside its domain.
"""

import math

import numpy as np

INV_PHI = (math.sqrt(5.0) - 1.0) / 2.0

# operational infinity for brackets, see gauge()
BRACKET_LO = 1e-8
BRACKET_HI = 1e8
EXPAND_CAP = 1e16
SHRINK_FLOOR = 1e-300
SUP_CAP = 1e8
# level whose gauge locates a feasible start for the nested conjugate
FEAS_LEVEL = 1e3


def golden_max(f, a, b, tol=1e-10, fa=None, fb=None):
    """Golden-section search for the max of a unimodal ``f`` on [a, b].

    Returns ``(value, argmax)``; the best evaluated point is returned, so
    endpoint values passed in are honoured.
    """
    best_v, best_x = -math.inf, a
    if fa is not None and fa > best_v:
        best_v, best_x = fa, a
    if fb is not None and fb > best_v:
        best_v, best_x = fb, b
    ea = -math.inf if fa is None else fa
    eb = -math.inf if fb is None else fb
    x1 = b - INV_PHI * (b - a)
    x2 = a + INV_PHI * (b - a)
    f1 = f(x1)
    f2 = f(x2)
    while b - a > tol * (1.0 + abs(x1)):
        # both probes off the domain: it lies towards the finite endpoint
        if f1 > f2 or (f1 == f2 and not eb > ea):
            b, eb, x2, f2 = x2, f2, x1, f1
            x1 = b - INV_PHI * (b - a)
            f1 = f(x1)
        else:
            a, ea, x1, f1 = x1, f1, x2, f2
            x2 = a + INV_PHI * (b - a)
            f2 = f(x2)
    for v, x in ((f1, x1), (f2, x2)):
        if v > best_v:
            best_v, best_x = v, x
    return best_v, best_x


def concave_sup(f, x0=0.0, tol=1e-10, cap=SUP_CAP):
    """Supremum of a concave ``f`` over the real line.

    ``f(x0)`` must be finite. The bracket grows geometrically from ``x0``;
    if the maximiser escapes past ``cap`` the supremum is either the limit
    value (objective flattened out) or ``+inf`` (still growing between
    ``cap/2`` and ``cap``). Returns ``(value, argmax)``, argmax being
    ``+-inf`` for limit values.
    """
    f0 = f(x0)
    if f0 == math.inf:
        return math.inf, x0
    h = 1.0
    fp = f(x0 + h)
    fm = f(x0 - h)
    if fp == math.inf or fm == math.inf:
        return math.inf, x0
    if fp <= f0 and fm <= f0:
        if fp == -math.inf and fm == -math.inf:
            # narrow domain around x0: search each side separately
            v, x = golden_max(f, x0 - h, x0, tol, fm, f0)
            v2, x2 = golden_max(f, x0, x0 + h, tol, f0, fp)
            if v2 > v:
                v, x = v2, x2
        else:
            v, x = golden_max(f, x0 - h, x0 + h, tol, fm, fp)
        return (v, x) if v > f0 else (f0, x0)
    sgn = 1.0 if fp > fm else -1.0
    a, fa = x0, f0
    b, fb = x0 + sgn * h, max(fp, fm)
    step = h
    while True:
        step *= 2.0
        c = b + sgn * step
        fc = f(c)
        if fc == math.inf:
            return math.inf, c
        if not fc > fb:
            break
        if abs(c - x0) > cap:
            # fb sits at roughly half the distance of fc
            if fc - fb > 1e-9 * (1.0 + abs(fc)):
                return math.inf, sgn * math.inf
            return fc, sgn * math.inf
        a, fa, b, fb = b, fb, c, fc
    lo, hi = (a, c) if sgn > 0 else (c, a)
    flo, fhi = (fa, fc) if sgn > 0 else (fc, fa)
    v, x = golden_max(f, lo, hi, tol, flo, fhi)
    if fb > v:
        v, x = fb, b
    return v, x


def gauge(theta, s, tol=1e-10):
    """``inf {alpha > 0 : theta(s / alpha) <= 1}`` by bisection.

    The bracket starts at [1e-8, 1e8] and is widened by factors of ten up
    to 1e16 (beyond which the gauge is reported as ``+inf``) or down to
    1e-300 (reported as 0).
    """
    s = np.asarray(s, dtype=np.float64)
    if not np.any(s):
        return 0.0

    def ok(alpha):
        v = theta(s / alpha)
        return v <= 1.0

    lo, hi = BRACKET_LO, BRACKET_HI
    while not ok(hi):
        hi *= 10.0
        if hi > EXPAND_CAP:
            return math.inf
    while ok(lo):
        lo /= 10.0
        if lo < SHRINK_FLOOR:
            return 0.0
    while hi - lo > max(tol, 4.0 * np.finfo(float).eps * hi):
        mid = math.sqrt(lo * hi) if hi > 4.0 * lo else 0.5 * (lo + hi)
        if ok(mid):
            hi = mid
        else:
            lo = mid
    return 0.5 * (lo + hi)


def _feasible_tail(theta, s, k, tol):
    """Fill ``s[k:]`` with a point of the slice where ``theta`` is finite.

    Minimises the gauge of ``{theta <= FEAS_LEVEL}`` over the free
    coordinates; that gauge is finite everywhere when theta is finite
    around the origin, so no feasible start is needed.
    """
    d = s.shape[0]

    def depth(i):
        def obj(x):
            s[i] = x
            if i == d - 1:
                return -gauge(lambda q: theta(q) / FEAS_LEVEL, s, tol)
            return -depth(i + 1)

        v, x = concave_sup(obj, 0.0, tol)
        if not math.isfinite(x):
            x = math.copysign(SUP_CAP, x)
        obj(x)
        return -v

    depth(k)


def conjugate(theta, r, tol=1e-10):
    """``sup_s <r, s> - theta(s)`` by nested golden-section search.

    Works coordinate by coordinate: the inner suprema of a jointly concave
    objective are concave in the outer coordinates. Each inner search starts
    at the previous argmax, then at 0, then at a point found by
    ``_feasible_tail``, so thin or off-centre domains are still reached.
    Requires theta finite around 0.
    """
    r = np.asarray(r, dtype=np.float64).ravel()
    d = r.shape[0]
    s = np.zeros(d)
    warm = np.zeros(d)

    def level(k):
        def obj(x):
            s[k] = x
            if k == d - 1:
                v = theta(s)
                return -math.inf if v == math.inf else float(r @ s) - v
            return level(k + 1)

        x0 = warm[k]
        if obj(x0) == -math.inf:
            x0 = 0.0
            if obj(x0) == -math.inf:
                _feasible_tail(theta, s, k, tol)
                x0 = s[k]
                if obj(x0) == -math.inf:
                    return -math.inf
        v, x = concave_sup(obj, x0, tol)
        if math.isfinite(x):
            warm[k] = x
        return v

    return level(0)


def conjugate_gauge(theta, r, tol=1e-10):
    """Gauge of the unit level set of the numeric conjugate of ``theta``."""
    return gauge(lambda q: conjugate(theta, q, tol), r, tol)


def _ray_value(theta, r, u, tol):
    ru = float(np.dot(r, u))
    if ru <= 0.0:
        return 0.0
    j = gauge(theta, u, tol)
    # the boundary point u / j lies beyond the search bracket: unbounded
    if j * BRACKET_HI < 1.0:
        return math.inf
    return ru / j


def _sphere(angles):
    if len(angles) == 1:
        (p,) = angles
        return np.array([math.cos(p), math.sin(p)])
    a, b = angles
    return np.array([math.sin(a) * math.cos(b), math.sin(a) * math.sin(b),
                     math.cos(a)])


GRID_2D = 720
GRID_3D = (48, 96)
POLISH_ROUNDS = 4


def support(theta, r, tol=1e-10):
    """``sup {<r, s> : theta(s) <= 1}`` for dimension 1 to 3.

    One dimension is exact up to the gauge bisection; two and three
    dimensions scan a grid of directions then polish the best one with
    golden-section searches along each angle.
    """
    r = np.asarray(r, dtype=np.float64).ravel()
    d = r.shape[0]
    if not np.any(r):
        return 0.0
    if d == 1:
        u = np.array([1.0 if r[0] > 0 else -1.0])
        return _ray_value(theta, r, u, tol)
    if d == 2:
        grid = [(2.0 * math.pi * i / GRID_2D,) for i in range(GRID_2D)]
        steps = (2.0 * math.pi / GRID_2D,)
    elif d == 3:
        na, nb = GRID_3D
        grid = [(math.pi * (i + 0.5) / na, 2.0 * math.pi * j / nb)
                for i in range(na) for j in range(nb)]
        steps = (math.pi / na, 2.0 * math.pi / nb)
    else:
        raise ValueError("support search is limited to dimension <= 3")

    def val(ang):
        return _ray_value(theta, r, _sphere(ang), tol)

    best_v, best_a = -math.inf, None
    for ang in grid:
        v = val(ang)
        if v == math.inf:
            return math.inf
        if v > best_v:
            best_v, best_a = v, ang
    best_a = list(best_a)
    for _ in range(POLISH_ROUNDS if d == 3 else 1):
        for k in range(d - 1):
            def along(x, k=k):
                ang = list(best_a)
                ang[k] = x
                return val(ang)

            v, x = golden_max(along, best_a[k] - steps[k], best_a[k] + steps[k],
                              1e-12)
            if v == math.inf:
                return math.inf
            if v > best_v:
                best_v = v
                best_a[k] = x
    return best_v
