# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled kernels: ridge functions, nested conjugates, gauges, supports
and the grid-oracle enumeration.

Same algorithms and constants as ``search.py`` / ``_pykernels.py``.
"""

from libc.math cimport exp, log, log1p, expm1, sqrt, fabs, floor, ceil, cos, sin, INFINITY, M_PI
from libc.stdlib cimport malloc, free

import numpy as np

cdef double LN2 = log(2.0)
cdef double INV_PHI = (sqrt(5.0) - 1.0) / 2.0
cdef double EPS = 2.220446049250313e-16
cdef double BRACKET_LO = 1e-8
cdef double BRACKET_HI = 1e8
cdef double EXPAND_CAP = 1e16
cdef double SHRINK_FLOOR = 1e-300
cdef double SUP_CAP = 1e8
cdef double FEAS_LEVEL = 1e3
cdef int GRID_2D = 720
cdef int GRID_3D_A = 48
cdef int GRID_3D_B = 96
cdef int POLISH_ROUNDS = 4

ctypedef double (*scalar_fn)(void* ctx, double x) noexcept nogil
ctypedef double (*vector_fn)(void* ctx, const double* s) noexcept nogil

cdef struct VFun:
    vector_fn f
    void* ctx
    int d


# ---------------------------------------------------------------- families

cdef inline double _m(int code) noexcept nogil:
    if code == 0 or code == 2:
        return 1.0
    if code == 3:
        return 0.5
    return 0.0


cdef double base_gamma(int code, double x) noexcept nogil:
    if code == 0:
        if x < 709.0:
            return expm1(x)
        return INFINITY
    if code == 1:
        return 0.5 * x * x
    if code == 2:
        if x < 1.0:
            return -log1p(-x)
        return INFINITY
    if x > 0.0:
        return x + log1p(exp(-x)) - LN2
    return log1p(exp(x)) - LN2


cdef double base_conj(int code, double t) noexcept nogil:
    cdef double v
    if code == 0:
        if t < 0.0:
            return INFINITY
        if t == 0.0:
            return 1.0
        return t * log(t) - t + 1.0
    if code == 1:
        return 0.5 * t * t
    if code == 2:
        if t > 0.0:
            return t - 1.0 - log(t)
        return INFINITY
    if t < 0.0 or t > 1.0:
        return INFINITY
    v = LN2
    if t > 0.0:
        v += t * log(t)
    if t < 1.0:
        v += (1.0 - t) * log(1.0 - t)
    return v


cdef double base_phi(int code, int which, double x) noexcept nogil:
    cdef double g, a, b
    if which == 0:
        return base_gamma(code, x)
    if which == 1:
        g = base_gamma(code, x)
        if g == INFINITY:
            return g
        return g - _m(code) * x
    a = base_phi(code, 1, x)
    b = base_phi(code, 1, -x)
    return a if a > b else b


cdef struct Ridge:
    int code
    int which
    int mode
    int K
    int d
    const double* A
    const double* w


cdef double ridge_val(void* ctx, const double* s) noexcept nogil:
    cdef Ridge* rg = <Ridge*>ctx
    cdef double tot_p = 0.0, tot_m = 0.0, p
    cdef int k, i
    for k in range(rg.K):
        p = 0.0
        for i in range(rg.d):
            p += rg.A[k * rg.d + i] * s[i]
        tot_p += rg.w[k] * base_phi(rg.code, rg.which, p)
        if rg.mode == 1:
            tot_m += rg.w[k] * base_phi(rg.code, rg.which, -p)
    if rg.mode == 1:
        return tot_p if tot_p > tot_m else tot_m
    return tot_p


# ---------------------------------------------------------------- searches

cdef double golden_max(scalar_fn f, void* ctx, double a, double b, double tol,
                       double fa, double fb, double* argmax) noexcept nogil:
    # fa / fb are -inf when unknown
    cdef double best_v = fa, best_x = a
    if fb > best_v:
        best_v = fb
        best_x = b
    cdef double x1 = b - INV_PHI * (b - a)
    cdef double x2 = a + INV_PHI * (b - a)
    cdef double f1 = f(ctx, x1)
    cdef double f2 = f(ctx, x2)
    cdef double ea = fa, eb = fb
    while b - a > tol * (1.0 + fabs(x1)):
        # both probes off the domain: it lies towards the finite endpoint
        if f1 > f2 or (f1 == f2 and not eb > ea):
            b = x2
            eb = f2
            x2 = x1
            f2 = f1
            x1 = b - INV_PHI * (b - a)
            f1 = f(ctx, x1)
        else:
            a = x1
            ea = f1
            x1 = x2
            f1 = f2
            x2 = a + INV_PHI * (b - a)
            f2 = f(ctx, x2)
    if f1 > best_v:
        best_v = f1
        best_x = x1
    if f2 > best_v:
        best_v = f2
        best_x = x2
    argmax[0] = best_x
    return best_v


cdef double concave_sup(scalar_fn f, void* ctx, double x0, double tol, double cap,
                        double* argmax) noexcept nogil:
    cdef double f0 = f(ctx, x0)
    cdef double h = 1.0, fp, fm, sgn, a, fa, b, fb, c, fc, step, v, lo, hi, flo, fhi
    argmax[0] = x0
    if f0 == INFINITY:
        return INFINITY
    fp = f(ctx, x0 + h)
    fm = f(ctx, x0 - h)
    if fp == INFINITY or fm == INFINITY:
        return INFINITY
    cdef double v2, arg2
    if fp <= f0 and fm <= f0:
        if fp == -INFINITY and fm == -INFINITY:
            # narrow domain around x0: search each side separately
            v = golden_max(f, ctx, x0 - h, x0, tol, fm, f0, argmax)
            v2 = golden_max(f, ctx, x0, x0 + h, tol, f0, fp, &arg2)
            if v2 > v:
                v = v2
                argmax[0] = arg2
        else:
            v = golden_max(f, ctx, x0 - h, x0 + h, tol, fm, fp, argmax)
        if v > f0:
            return v
        argmax[0] = x0
        return f0
    sgn = 1.0 if fp > fm else -1.0
    a = x0
    fa = f0
    b = x0 + sgn * h
    fb = fp if fp > fm else fm
    step = h
    while True:
        step *= 2.0
        c = b + sgn * step
        fc = f(ctx, c)
        if fc == INFINITY:
            argmax[0] = c
            return INFINITY
        if not fc > fb:
            break
        if fabs(c - x0) > cap:
            argmax[0] = sgn * INFINITY
            if fc - fb > 1e-9 * (1.0 + fabs(fc)):
                return INFINITY
            return fc
        a = b
        fa = fb
        b = c
        fb = fc
    if sgn > 0:
        lo = a
        hi = c
        flo = fa
        fhi = fc
    else:
        lo = c
        hi = a
        flo = fc
        fhi = fa
    v = golden_max(f, ctx, lo, hi, tol, flo, fhi, argmax)
    if fb > v:
        argmax[0] = b
        v = fb
    return v


cdef double vgauge(VFun* th, const double* s, double tol) noexcept nogil:
    cdef int d = th.d, i
    cdef bint nonzero = False
    for i in range(d):
        if s[i] != 0.0:
            nonzero = True
    if not nonzero:
        return 0.0
    cdef double* buf = <double*>malloc(d * sizeof(double))
    cdef double lo = BRACKET_LO, hi = BRACKET_HI, mid
    while not _ok(th, s, buf, hi):
        hi *= 10.0
        if hi > EXPAND_CAP:
            free(buf)
            return INFINITY
    while _ok(th, s, buf, lo):
        lo /= 10.0
        if lo < SHRINK_FLOOR:
            free(buf)
            return 0.0
    while hi - lo > (tol if tol > 4.0 * EPS * hi else 4.0 * EPS * hi):
        if hi > 4.0 * lo:
            mid = sqrt(lo * hi)
        else:
            mid = 0.5 * (lo + hi)
        if _ok(th, s, buf, mid):
            hi = mid
        else:
            lo = mid
    free(buf)
    return 0.5 * (lo + hi)


cdef inline bint _ok(VFun* th, const double* s, double* buf, double alpha) noexcept nogil:
    cdef int i
    for i in range(th.d):
        buf[i] = s[i] / alpha
    return th.f(th.ctx, buf) <= 1.0


# nested conjugate: one Level per coordinate, sharing the point s
cdef struct ConjShared:
    VFun* th
    const double* r
    double s[3]
    double warm[3]
    int d
    double tol

cdef struct Level:
    ConjShared* sh
    int k


cdef double _scaled_theta(void* ctx, const double* s) noexcept nogil:
    cdef VFun* th = <VFun*>ctx
    return th.f(th.ctx, s) / FEAS_LEVEL


cdef double _depth_obj(void* ctx, double x) noexcept nogil:
    cdef Level* lv = <Level*>ctx
    cdef ConjShared* sh = lv.sh
    cdef VFun lvl
    sh.s[lv.k] = x
    if lv.k == sh.d - 1:
        lvl.f = _scaled_theta
        lvl.ctx = sh.th
        lvl.d = sh.d
        return -vgauge(&lvl, sh.s, sh.tol)
    cdef Level nxt
    nxt.sh = sh
    nxt.k = lv.k + 1
    return -_depth(&nxt)


cdef double _depth(Level* lv) noexcept nogil:
    # min over s[k:] of the gauge of {theta <= FEAS_LEVEL}; leaves the argmin in s
    cdef double arg, v
    v = concave_sup(_depth_obj, lv, 0.0, lv.sh.tol, SUP_CAP, &arg)
    if arg == INFINITY or arg == -INFINITY:
        arg = SUP_CAP if arg > 0 else -SUP_CAP
    _depth_obj(lv, arg)
    return -v


cdef double _level_obj(void* ctx, double x) noexcept nogil:
    cdef Level* lv = <Level*>ctx
    cdef ConjShared* sh = lv.sh
    cdef double v, dot
    cdef int i
    cdef Level nxt
    sh.s[lv.k] = x
    if lv.k == sh.d - 1:
        v = sh.th.f(sh.th.ctx, sh.s)
        if v == INFINITY:
            return -INFINITY
        dot = 0.0
        for i in range(sh.d):
            dot += sh.r[i] * sh.s[i]
        return dot - v
    nxt.sh = sh
    nxt.k = lv.k + 1
    return _level_sup(&nxt)


cdef double _level_sup(Level* lv) noexcept nogil:
    cdef double arg, v, x0
    cdef ConjShared* sh = lv.sh
    x0 = sh.warm[lv.k]
    if _level_obj(lv, x0) == -INFINITY:
        x0 = 0.0
        if _level_obj(lv, x0) == -INFINITY:
            _depth(lv)
            x0 = sh.s[lv.k]
            if _level_obj(lv, x0) == -INFINITY:
                return -INFINITY
    v = concave_sup(_level_obj, lv, x0, sh.tol, SUP_CAP, &arg)
    if arg != INFINITY and arg != -INFINITY:
        sh.warm[lv.k] = arg
    return v


cdef double vconjugate(VFun* th, const double* r, double tol) noexcept nogil:
    cdef ConjShared sh
    cdef Level top
    cdef int i
    sh.th = th
    sh.r = r
    sh.d = th.d
    sh.tol = tol
    for i in range(3):
        sh.s[i] = 0.0
        sh.warm[i] = 0.0
    top.sh = &sh
    top.k = 0
    return _level_sup(&top)


cdef struct ConjFn:
    VFun* th
    double tol


cdef double _conj_as_theta(void* ctx, const double* r) noexcept nogil:
    cdef ConjFn* cf = <ConjFn*>ctx
    return vconjugate(cf.th, r, cf.tol)


cdef double ray_value(VFun* th, const double* r, const double* u, double tol) noexcept nogil:
    cdef double ru = 0.0, j
    cdef int i
    for i in range(th.d):
        ru += r[i] * u[i]
    if ru <= 0.0:
        return 0.0
    j = vgauge(th, u, tol)
    # the boundary point u / j lies beyond the search bracket: unbounded
    if j * BRACKET_HI < 1.0:
        return INFINITY
    return ru / j


cdef inline void sphere(int d, double a, double b, double* u) noexcept nogil:
    if d == 2:
        u[0] = cos(a)
        u[1] = sin(a)
    else:
        u[0] = sin(a) * cos(b)
        u[1] = sin(a) * sin(b)
        u[2] = cos(a)


cdef struct AngleCtx:
    VFun* th
    const double* r
    double ang[2]
    int k
    double tol


cdef double _angle_obj(void* ctx, double x) noexcept nogil:
    cdef AngleCtx* ac = <AngleCtx*>ctx
    cdef double u[3]
    cdef double a = ac.ang[0], b = ac.ang[1]
    if ac.k == 0:
        a = x
    else:
        b = x
    sphere(ac.th.d, a, b, u)
    return ray_value(ac.th, ac.r, u, ac.tol)


cdef double vsupport(VFun* th, const double* r, double tol) noexcept nogil:
    cdef int d = th.d, i, j, rounds, k, it
    cdef double u[3]
    cdef double best_v = -INFINITY, v, a, b, best_a = 0.0, best_b = 0.0, x
    cdef double steps[2]
    cdef bint nonzero = False
    cdef AngleCtx ac
    for i in range(d):
        if r[i] != 0.0:
            nonzero = True
    if not nonzero:
        return 0.0
    if d == 1:
        u[0] = 1.0 if r[0] > 0.0 else -1.0
        return ray_value(th, r, u, tol)
    if d == 2:
        steps[0] = 2.0 * M_PI / GRID_2D
        for i in range(GRID_2D):
            a = 2.0 * M_PI * i / GRID_2D
            sphere(2, a, 0.0, u)
            v = ray_value(th, r, u, tol)
            if v == INFINITY:
                return INFINITY
            if v > best_v:
                best_v = v
                best_a = a
        rounds = 1
    else:
        steps[0] = M_PI / GRID_3D_A
        steps[1] = 2.0 * M_PI / GRID_3D_B
        for i in range(GRID_3D_A):
            for j in range(GRID_3D_B):
                a = M_PI * (i + 0.5) / GRID_3D_A
                b = 2.0 * M_PI * j / GRID_3D_B
                sphere(3, a, b, u)
                v = ray_value(th, r, u, tol)
                if v == INFINITY:
                    return INFINITY
                if v > best_v:
                    best_v = v
                    best_a = a
                    best_b = b
        rounds = POLISH_ROUNDS
    ac.th = th
    ac.r = r
    ac.tol = tol
    for it in range(rounds):
        for k in range(d - 1):
            ac.ang[0] = best_a
            ac.ang[1] = best_b
            ac.k = k
            if k == 0:
                v = golden_max(_angle_obj, &ac, best_a - steps[0], best_a + steps[0],
                               1e-12, -INFINITY, -INFINITY, &x)
            else:
                v = golden_max(_angle_obj, &ac, best_b - steps[1], best_b + steps[1],
                               1e-12, -INFINITY, -INFINITY, &x)
            if v == INFINITY:
                return INFINITY
            if v > best_v:
                best_v = v
                if k == 0:
                    best_a = x
                else:
                    best_b = x
    return best_v


# ---------------------------------------------------------------- python API

cdef class _RidgeHolder:
    cdef const double[::1] A
    cdef const double[::1] w
    cdef Ridge rg
    cdef VFun fn

    def __init__(self, int code, int which, A, w, int mode):
        A2 = np.ascontiguousarray(A, dtype=np.float64)
        if A2.ndim != 2:
            raise ValueError("A must be a matrix")
        self.A = A2.ravel()
        self.w = np.ascontiguousarray(w, dtype=np.float64)
        if self.w.shape[0] != A2.shape[0]:
            raise ValueError("one weight per row of A")
        if code < 0 or code > 3:
            raise ValueError(f"unknown family code {code}")
        self.rg.code = code
        self.rg.which = which
        self.rg.mode = mode
        self.rg.K = A2.shape[0]
        self.rg.d = A2.shape[1]
        self.rg.A = &self.A[0]
        self.rg.w = &self.w[0]
        self.fn.f = ridge_val
        self.fn.ctx = &self.rg
        self.fn.d = A2.shape[1]


def _vec(s, int d):
    arr = np.ascontiguousarray(s, dtype=np.float64).ravel()
    if arr.shape[0] != d:
        raise ValueError(f"expected a vector of length {d}")
    return arr


def ridge_eval(int code, int which, A, w, int mode, s):
    cdef _RidgeHolder h = _RidgeHolder(code, which, A, w, mode)
    cdef const double[::1] sv = _vec(s, h.fn.d)
    return ridge_val(&h.rg, &sv[0])


def ridge_gauge(int code, int which, A, w, int mode, s, double tol=1e-10):
    cdef _RidgeHolder h = _RidgeHolder(code, which, A, w, mode)
    cdef const double[::1] sv = _vec(s, h.fn.d)
    cdef double out
    with nogil:
        out = vgauge(&h.fn, &sv[0], tol)
    return out


def ridge_conjugate(int code, int which, A, w, int mode, r, double tol=1e-10):
    cdef _RidgeHolder h = _RidgeHolder(code, which, A, w, mode)
    if h.fn.d > 3:
        raise ValueError("nested conjugate search is limited to dimension <= 3")
    cdef const double[::1] rv = _vec(r, h.fn.d)
    cdef double out
    with nogil:
        out = vconjugate(&h.fn, &rv[0], tol)
    return out


def ridge_conjugate_gauge(int code, int which, A, w, int mode, r, double tol=1e-10):
    cdef _RidgeHolder h = _RidgeHolder(code, which, A, w, mode)
    if h.fn.d > 3:
        raise ValueError("nested conjugate search is limited to dimension <= 3")
    cdef const double[::1] rv = _vec(r, h.fn.d)
    cdef ConjFn cf
    cdef VFun outer
    cdef double out
    cf.th = &h.fn
    cf.tol = tol
    outer.f = _conj_as_theta
    outer.ctx = &cf
    outer.d = h.fn.d
    with nogil:
        out = vgauge(&outer, &rv[0], tol)
    return out


def ridge_support(int code, int which, A, w, int mode, r, double tol=1e-10):
    cdef _RidgeHolder h = _RidgeHolder(code, which, A, w, mode)
    if h.fn.d > 3:
        raise ValueError("support search is limited to dimension <= 3")
    cdef const double[::1] rv = _vec(r, h.fn.d)
    cdef double out
    with nogil:
        out = vsupport(&h.fn, &rv[0], tol)
    return out


# ---------------------------------------------------------------- grid oracle

cdef struct Grid:
    int code
    int n
    int K
    const double* c
    const double* d
    const double* R
    const double* Theta
    const double* xhat
    const double* cap
    double h
    double eps
    double* lo_rest    # per (z, k): min contribution of coordinates z..n-1
    double* hi_rest
    double* q
    double* best_q
    double best


cdef inline double _cost(Grid* g, int z, double q) noexcept nogil:
    return base_conj(g.code, q * g.d[z] / (g.c[z] * g.R[z])) / g.d[z] * g.R[z]


cdef void _grid_last(Grid* g, double* part, double acc) noexcept nogil:
    cdef int last = g.n - 1, k
    cdef double lo = 0.0, hi = g.cap[last], a, b1, b2, t, q, v, mom
    cdef long ilo, ihi, i
    cdef bint ok
    for k in range(g.K):
        a = g.Theta[last * g.K + k]
        if a == 0.0:
            if fabs(part[k] - g.xhat[k]) > g.eps:
                return
            continue
        b1 = (g.xhat[k] - g.eps - part[k]) / a
        b2 = (g.xhat[k] + g.eps - part[k]) / a
        if b1 > b2:
            t = b1
            b1 = b2
            b2 = t
        if b1 > lo:
            lo = b1
        if b2 < hi:
            hi = b2
    ilo = <long>ceil(lo / g.h - 1e-9)
    ihi = <long>floor(hi / g.h + 1e-9)
    for i in range(ilo, ihi + 1):
        q = i * g.h
        ok = True
        for k in range(g.K):
            mom = part[k] + g.Theta[last * g.K + k] * q
            if fabs(mom - g.xhat[k]) > g.eps * (1.0 + 1e-12):
                ok = False
                break
        if not ok:
            continue
        v = acc + _cost(g, last, q)
        if v < g.best:
            g.best = v
            g.q[last] = q
            for k in range(g.n):
                g.best_q[k] = g.q[k]


cdef void _grid_rec(Grid* g, int z, double* part, double acc) noexcept nogil:
    cdef long i, top
    cdef int k
    cdef double q, v, lo_k, hi_k
    cdef double* nxt
    cdef bint prune
    if z == g.n - 1:
        _grid_last(g, part, acc)
        return
    nxt = <double*>malloc(g.K * sizeof(double))
    top = <long>floor(g.cap[z] / g.h + 1e-9)
    for i in range(top + 1):
        q = i * g.h
        v = acc + _cost(g, z, q)
        if v >= g.best:
            continue
        prune = False
        for k in range(g.K):
            nxt[k] = part[k] + g.Theta[z * g.K + k] * q
            lo_k = nxt[k] + g.lo_rest[(z + 1) * g.K + k]
            hi_k = nxt[k] + g.hi_rest[(z + 1) * g.K + k]
            if hi_k < g.xhat[k] - g.eps * (1.0 + 1e-12) or lo_k > g.xhat[k] + g.eps * (1.0 + 1e-12):
                prune = True
                break
        if prune:
            continue
        g.q[z] = q
        _grid_rec(g, z + 1, nxt, v)
    free(nxt)


def grid_entropy_min(int code, c, d, R, Theta, xhat, double h, double eps, cap):
    cdef const double[::1] cv = np.ascontiguousarray(c, dtype=np.float64)
    cdef const double[::1] dv = np.ascontiguousarray(d, dtype=np.float64)
    cdef const double[::1] Rv = np.ascontiguousarray(R, dtype=np.float64)
    Th = np.ascontiguousarray(Theta, dtype=np.float64)
    cdef int n = Th.shape[0], K = Th.shape[1]
    cdef const double[::1] Tv = Th.ravel()
    cdef const double[::1] xv = np.ascontiguousarray(xhat, dtype=np.float64)
    cdef const double[::1] capv = np.ascontiguousarray(cap, dtype=np.float64)
    lo_rest = np.zeros((n + 1) * K)
    hi_rest = np.zeros((n + 1) * K)
    for z in range(n - 1, -1, -1):
        for k in range(K):
            contrib = Th[z, k] * capv[z]
            lo_rest[z * K + k] = lo_rest[(z + 1) * K + k] + min(0.0, contrib)
            hi_rest[z * K + k] = hi_rest[(z + 1) * K + k] + max(0.0, contrib)
    cdef double[::1] lov = lo_rest
    cdef double[::1] hiv = hi_rest
    q = np.zeros(n)
    best_q = np.zeros(n)
    part = np.zeros(K)
    cdef double[::1] qv = q
    cdef double[::1] bqv = best_q
    cdef double[::1] pv = part
    cdef Grid g
    g.code = code
    g.n = n
    g.K = K
    g.c = &cv[0]
    g.d = &dv[0]
    g.R = &Rv[0]
    g.Theta = &Tv[0]
    g.xhat = &xv[0]
    g.cap = &capv[0]
    g.h = h
    g.eps = eps
    g.lo_rest = &lov[0]
    g.hi_rest = &hiv[0]
    g.q = &qv[0]
    g.best_q = &bqv[0]
    g.best = INFINITY
    with nogil:
        _grid_rec(&g, 0, &pv[0], 0.0)
    if g.best == INFINITY:
        return float("inf"), None
    return g.best, best_q
