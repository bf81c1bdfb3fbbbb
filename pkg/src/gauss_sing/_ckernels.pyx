# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled hot loops: kernel integrals over r and Mehler-bump integrals.

Mirrors ``_pykernels`` exactly (same panels, same adaptive rule); see that
module for the formulas.  Kernel functions F are Hermite expansions passed
as ``(idx[n_terms, d], coef[n_terms])``.
"""
import numpy as np
cimport numpy as cnp
from libc.math cimport exp, log, log1p, expm1, sqrt, fabs, pow, INFINITY

cnp.import_array()

DEF MAXD = 3
DEF MAXDEG = 16
DEF MAXIV = 4096
DEF MAXGH = 64

cdef double[8] XGK = [0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
                      0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
                      0.586087235467691130294144845693013, 0.405845151377397166906606412076961,
                      0.207784955007898467600689403773245, 0.0]
cdef double[8] WGK = [0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
                      0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
                      0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
                      0.204432940075298892414161999234649, 0.209482141084727828012999174891714]
cdef double[4] WG = [0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
                     0.381830050505118944950369775488975, 0.417959183673469387755102040816327]

cdef double EPSM = 2.220446049250313e-16


cdef struct Ctx:
    int d
    int m
    int kind      # 0 alternative weight, 1 general weight, 2 flat
    int orient    # 0 alternative argument, 1 general argument
    int mode      # 0 point kernel, 1 Gaussian bump
    double x[MAXD]
    double z[MAXD]
    double y[MAXD]
    int nterms
    const long* idx
    const double* coef
    int maxdeg[MAXD]
    # bump data
    double sig2
    double sig
    int ngh
    const double* ghx
    const double* ghw


cdef inline double eval_F(Ctx* c, double* arg) noexcept nogil:
    cdef double tab[MAXD][MAXDEG + 1]
    cdef int i, n, k
    cdef double v, term
    for i in range(c.d):
        tab[i][0] = 1.0
        if c.maxdeg[i] >= 1:
            tab[i][1] = 2.0 * arg[i]
        for n in range(1, c.maxdeg[i]):
            tab[i][n + 1] = 2.0 * arg[i] * tab[i][n] - 2.0 * n * tab[i][n - 1]
    v = 0.0
    for k in range(c.nterms):
        term = c.coef[k]
        for i in range(c.d):
            term *= tab[i][c.idx[k * c.d + i]]
        v += term
    return v


cdef inline double weight(Ctx* c, double t, double r, double L) noexcept nogil:
    cdef double w
    if c.kind == 2:
        return 2.0
    if c.m != 2:
        w = pow(L / t, 0.5 * (c.m - 2))
    else:
        w = 1.0
    if c.kind == 0:
        if c.d != 2:
            w *= pow(r, c.d - 2)
    else:
        if c.m != 2:
            w *= pow(r, c.m - 2)
    return w


cdef inline double point_core(Ctx* c, double t, double r, double omr) noexcept nogil:
    # F(arg) * exp(-u(t)) * t^(-d/2-1)
    cdef double arg[MAXD]
    cdef double u = 0.0, q, st = sqrt(t)
    cdef int i
    for i in range(c.d):
        q = c.z[i] + omr * c.x[i]          # y - r x
        u += q * q
        if c.orient == 0:
            arg[i] = (-c.z[i] + omr * c.y[i]) / st   # (x - r y)/sqrt t
        else:
            arg[i] = q / st
    u /= t
    return eval_F(c, arg) * exp(-u - (0.5 * c.d + 1.0) * log(t))


cdef inline double bump_core(Ctx* c, double t, double r, double omr) noexcept nogil:
    # t^-1 (sig2+t)^(-d/2) exp(-|r x - y0|^2/(t+sig2)) E[F(a - b w)]
    cdef double arg[MAXD]
    cdef double st = sqrt(t), den = c.sig2 + t, e = 0.0, q, acc = 0.0, wk
    cdef double a[MAXD]
    cdef double bcoef
    cdef int i, k, j, rem
    cdef int total = 1
    for i in range(c.d):
        q = r * c.x[i] - c.z[i]            # z holds y0 in bump mode
        e += q * q
        if c.orient == 0:
            a[i] = st * (c.x[i] * (1.0 + c.sig2) - r * c.z[i]) / den
        else:
            a[i] = st * (c.z[i] - r * c.x[i]) / den
        total *= c.ngh
    if c.orient == 0:
        bcoef = -r * c.sig / sqrt(den)
    else:
        bcoef = c.sig / sqrt(den)
    for k in range(total):
        rem = k
        wk = 1.0
        for i in range(c.d):
            j = rem % c.ngh
            rem = rem // c.ngh
            arg[i] = a[i] + bcoef * c.ghx[j]
            wk *= c.ghw[j]
        acc += wk * eval_F(c, arg)
    return acc * exp(-e / den - log(t) - 0.5 * c.d * log(den))


cdef inline double panel_value(Ctx* c, int panel, double v) noexcept nogil:
    # panel 0: r = exp(-v); panel 1: t = exp(-v)
    cdef double r, t, omr, L, core
    if panel == 0:
        r = exp(-v)
        t = -expm1(-2.0 * v)
        omr = -expm1(-v)
        L = v
    else:
        t = exp(-v)
        if t >= 1.0:
            return 0.0
        r = sqrt(1.0 - t)
        omr = t / (1.0 + r)
        L = -0.5 * log1p(-t)
    if c.mode == 0:
        core = point_core(c, t, r, omr)
    else:
        core = bump_core(c, t, r, omr)
    if panel == 0:
        return weight(c, t, r, L) * r * r * core
    return 0.5 * weight(c, t, r, L) * t * core


cdef inline void gk_pass(Ctx* c, int panel, double a, double b,
                         double* val, double* err, double* rabs) noexcept nogil:
    cdef double half = 0.5 * (b - a), center = 0.5 * (a + b)
    cdef double fv[15]
    cdef double kron = 0.0, gau = 0.0, ra = 0.0, rasc = 0.0, mean, e
    cdef int j
    for j in range(7):
        fv[j] = panel_value(c, panel, center - half * XGK[j])
        fv[14 - j] = panel_value(c, panel, center + half * XGK[j])
    fv[7] = panel_value(c, panel, center)
    for j in range(7):
        kron += WGK[j] * (fv[j] + fv[14 - j])
        ra += WGK[j] * (fabs(fv[j]) + fabs(fv[14 - j]))
    kron += WGK[7] * fv[7]
    ra += WGK[7] * fabs(fv[7])
    gau = WG[0] * (fv[1] + fv[13]) + WG[1] * (fv[3] + fv[11]) + WG[2] * (fv[5] + fv[9]) + WG[3] * fv[7]
    mean = 0.5 * kron
    for j in range(15):
        rasc += WGK[j if j < 8 else 14 - j] * fabs(fv[j] - mean)
    half = fabs(half)
    kron *= half
    gau *= half
    ra *= half
    rasc *= half
    e = fabs(kron - gau)
    if rasc > 0.0:
        e = rasc * min(1.0, pow(200.0 * e / rasc, 1.5))
    if e < 50.0 * EPSM * ra:
        e = 50.0 * EPSM * ra
    val[0] = kron * (1.0 if b >= a else -1.0)
    err[0] = e
    rabs[0] = ra


cdef int adapt(Ctx* c, int nint, int* pan, double* lo, double* hi,
               double abs_tol, double rel_tol, int max_ref,
               double* out_val, double* out_err, int* out_evals) noexcept nogil:
    cdef double val[MAXIV]
    cdef double er[MAXIV]
    cdef double ra[MAXIV]
    cdef int k, worst, n = nint, refs = 0, conv = 0
    cdef double tv, te, tr, target, mid, a, b
    cdef int p
    for k in range(n):
        gk_pass(c, pan[k], lo[k], hi[k], &val[k], &er[k], &ra[k])
    out_evals[0] = 15 * n
    while True:
        tv = 0.0
        te = 0.0
        tr = 0.0
        worst = 0
        for k in range(n):
            tv += val[k]
            te += er[k]
            tr += ra[k]
            if er[k] > er[worst]:
                worst = k
        target = rel_tol * fabs(tv)
        if target < abs_tol:
            target = abs_tol
        if te <= target or te <= 100.0 * EPSM * tr:
            conv = 1
            break
        if refs >= max_ref or n + 1 >= MAXIV:
            break
        a = lo[worst]
        b = hi[worst]
        p = pan[worst]
        mid = 0.5 * (a + b)
        if mid == a or mid == b:
            break
        hi[worst] = mid
        gk_pass(c, p, a, mid, &val[worst], &er[worst], &ra[worst])
        pan[n] = p
        lo[n] = mid
        hi[n] = b
        gk_pass(c, p, mid, b, &val[n], &er[n], &ra[n])
        n += 1
        refs += 1
        out_evals[0] += 30
    out_val[0] = tv
    out_err[0] = te
    return conv


cdef inline double u_at(Ctx* c, double t) noexcept nogil:
    cdef double r = sqrt(1.0 - t), omr = t / (1.0 + r), q, u = 0.0
    cdef int i
    for i in range(c.d):
        q = c.z[i] + omr * c.x[i]
        u += q * q
    return u / t


cdef int point_panels(Ctx* c, int* pan, double* lo, double* hi) noexcept nogil:
    cdef double rho2 = 0.0, a = 0.0, b = 0.0, t_pk, t_s, u_s, t, t0, disc, smax, wmax
    cdef double sb[4]
    cdef int i, n = 0, nb = 0, it, p1
    for i in range(c.d):
        rho2 += c.z[i] * c.z[i]
        a += c.x[i] * c.x[i] + c.y[i] * c.y[i]
        b += 2.0 * c.x[i] * c.y[i]
    if c.kind == 0:
        p1 = c.d
    elif c.kind == 1:
        p1 = c.m
    else:
        p1 = 2
    wmax = 46.0 / p1 + c.m + 2.0
    pan[0] = 0; lo[0] = log(2.0); hi[0] = 4.0
    pan[1] = 0; lo[1] = 4.0; hi[1] = wmax
    n = 2
    t_pk = 2.0 * rho2 / (c.d + 2.0)
    t_s = t_pk if t_pk < 0.75 else 0.75
    u_s = u_at(c, t_s)
    t = t_s
    for it in range(2000):
        t *= 0.5
        if t < 1e-300:
            break
        if u_at(c, t) - u_s - (0.5 * c.d + 1.0) * log(t_s / t) > 50.0:
            break
    smax = -log(t)
    sb[nb] = log(4.0 / 3.0); nb += 1
    if t_pk < 0.75:
        sb[nb] = -log(t_pk); nb += 1
    if b > 0.0:
        disc = sqrt(fabs(a * a - b * b))
        t0 = 2.0 * disc / (a + disc)
        if t0 < 0.75 and t0 > t and fabs(log(t0 / t_pk)) > 1e-3:
            sb[nb] = -log(t0); nb += 1
    sb[nb] = smax; nb += 1
    # sort the interior breakpoints
    if nb == 4 and sb[1] > sb[2]:
        sb[1], sb[2] = sb[2], sb[1]
    for i in range(nb - 1):
        if sb[i + 1] > sb[i]:
            pan[n] = 1; lo[n] = sb[i]; hi[n] = sb[i + 1]; n += 1
    return n


cdef int bump_panels(Ctx* c, int* pan, double* lo, double* hi) noexcept nogil:
    cdef double sb[4]
    cdef double smax, tmp, dist2 = 0.0, q, wmax
    cdef int nb = 0, n, i, j, p1
    for i in range(c.d):
        q = c.x[i] - c.z[i]
        dist2 += q * q
    p1 = c.d if c.kind == 0 else c.m
    wmax = 46.0 / p1 + c.m + 2.0
    pan[0] = 0; lo[0] = log(2.0); hi[0] = 4.0
    pan[1] = 0; lo[1] = 4.0; hi[1] = wmax
    n = 2
    smax = -log(1e-30 * (c.sig2 if c.sig2 < 1.0 else 1.0))
    sb[nb] = log(4.0 / 3.0); nb += 1
    if c.sig2 < 0.75:
        sb[nb] = -log(c.sig2); nb += 1
    if dist2 < 0.75 and dist2 > 1e-30 and fabs(log(dist2 / c.sig2)) > 0.1:
        sb[nb] = -log(dist2); nb += 1
    sb[nb] = smax; nb += 1
    for i in range(1, nb - 1):
        for j in range(i + 1, nb - 1):
            if sb[j] < sb[i]:
                tmp = sb[i]; sb[i] = sb[j]; sb[j] = tmp
    for i in range(nb - 1):
        if sb[i + 1] > sb[i]:
            pan[n] = 1; lo[n] = sb[i]; hi[n] = sb[i + 1]; n += 1
    return n


cdef void setup_F(Ctx* c, const long[:, ::1] idx, const double[::1] coef):
    cdef int k, i
    c.nterms = idx.shape[0]
    c.idx = &idx[0, 0] if idx.shape[0] > 0 else NULL
    c.coef = &coef[0] if coef.shape[0] > 0 else NULL
    for i in range(c.d):
        c.maxdeg[i] = 0
        for k in range(c.nterms):
            if idx[k, i] > c.maxdeg[i]:
                c.maxdeg[i] = idx[k, i]


def kernel_batch(int kind, int orient, int m, const double[:, ::1] X, const double[:, ::1] Z,
                 const long[:, ::1] idx, const double[::1] coef,
                 double abs_tol, double rel_tol, int max_ref):
    """Kernel integrals at pairs ``(X[k], X[k] + Z[k])``.

    Returns ``(values, errors, evaluations, converged)`` arrays.
    """
    cdef Py_ssize_t n = X.shape[0], k
    cdef int d = X.shape[1], i, nint, conv
    if d > MAXD or d < 1:
        raise ValueError("dimension must be 1, 2 or 3")
    if idx.shape[0] > 0 and idx.shape[1] != d:
        raise ValueError("index width does not match the dimension")
    for k in range(idx.shape[0]):
        for i in range(d):
            if idx[k, i] > MAXDEG:
                raise ValueError("Hermite degree above the compiled cap")
    vals = np.zeros(n)
    errs = np.zeros(n)
    evs = np.zeros(n, dtype=np.int64)
    cvg = np.zeros(n, dtype=np.uint8)
    cdef double[::1] vv = vals, ee = errs
    cdef long[::1] nv = evs
    cdef unsigned char[::1] cv = cvg
    cdef Ctx c
    cdef int pan[MAXIV]
    cdef double lo[MAXIV]
    cdef double hi[MAXIV]
    cdef double val, err
    cdef int ne
    c.d = d; c.m = m; c.kind = kind; c.orient = orient; c.mode = 0
    setup_F(&c, idx, coef)
    with nogil:
        for k in range(n):
            for i in range(d):
                c.x[i] = X[k, i]
                c.z[i] = Z[k, i]
                c.y[i] = X[k, i] + Z[k, i]
            nint = point_panels(&c, pan, lo, hi)
            conv = adapt(&c, nint, pan, lo, hi, abs_tol, rel_tol, max_ref, &val, &err, &ne)
            vv[k] = val
            ee[k] = err
            nv[k] = ne
            cv[k] = conv
    return vals, errs, evs, cvg.astype(bool)


def bump_batch(int kind, int orient, int m, const double[:, ::1] X, const double[::1] y0, double sigma,
               const long[:, ::1] idx, const double[::1] coef, const double[::1] ghx, const double[::1] ghw,
               double abs_tol, double rel_tol, int max_ref):
    """``r``-integrals of the Gaussian-bump representation at each row of ``X``.

    The returned values omit the constant ``A * pi**(d/2) * sigma**d``.
    """
    cdef Py_ssize_t n = X.shape[0], k
    cdef int d = X.shape[1], i, nint, conv
    if d > MAXD or d < 1:
        raise ValueError("dimension must be 1, 2 or 3")
    if ghx.shape[0] > MAXGH or ghx.shape[0] < 1:
        raise ValueError("unsupported Gauss-Hermite node count")
    vals = np.zeros(n)
    errs = np.zeros(n)
    evs = np.zeros(n, dtype=np.int64)
    cvg = np.zeros(n, dtype=np.uint8)
    cdef double[::1] vv = vals, ee = errs
    cdef long[::1] nv = evs
    cdef unsigned char[::1] cv = cvg
    cdef Ctx c
    cdef int pan[MAXIV]
    cdef double lo[MAXIV]
    cdef double hi[MAXIV]
    cdef double val, err
    cdef int ne
    c.d = d; c.m = m; c.kind = kind; c.orient = orient; c.mode = 1
    c.sig = sigma; c.sig2 = sigma * sigma
    c.ngh = ghx.shape[0]; c.ghx = &ghx[0]; c.ghw = &ghw[0]
    setup_F(&c, idx, coef)
    for i in range(d):
        c.z[i] = y0[i]
    with nogil:
        for k in range(n):
            for i in range(d):
                c.x[i] = X[k, i]
            nint = bump_panels(&c, pan, lo, hi)
            conv = adapt(&c, nint, pan, lo, hi, abs_tol, rel_tol, max_ref, &val, &err, &ne)
            vv[k] = val
            ee[k] = err
            nv[k] = ne
            cv[k] = conv
    return vals, errs, evs, cvg.astype(bool)
