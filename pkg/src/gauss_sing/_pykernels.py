"""Pure-Python twin of the compiled kernel loops.

Every kernel is an integral over ``r`` in ``(0, 1)`` (equivalently
``t = 1 - r**2``) split into two families of panels:

* panel 0, ``r = exp(-v)`` on ``r <= 1/2``; integrand ``W * r**2 * core``
* panel 1, ``t = exp(-v)`` on ``t <= 3/4``; integrand ``W * t * core / 2``

where ``W`` is the weight in the ``t`` variable and ``core`` depends on the
mode:

* point kernel: ``F(arg) exp(-u(t)) t**(-d/2-1)`` with ``u = |y - r x|**2/t``
  and ``arg = (x - r y)/sqrt t`` (orientation 0) or ``(y - r x)/sqrt t``
  (orientation 1);
* Gaussian bump ``exp(-|y - y0|**2/sigma**2)``: the ``y`` integral done in
  closed form up to a Gauss-Hermite average over ``F``.

Weight kinds: 0 gives ``(L/t)**((m-2)/2) r**(d-2)``, 1 gives
``(L/t)**((m-2)/2) r**(m-2)``, 2 is the constant 2, with ``L = -log r``.
"""
from __future__ import annotations

import math

import numpy as np

from .quadrature import GK15_NODES, GK15_WEIGHTS, G7_WEIGHTS

EPSM = np.finfo(float).eps
MAXDEG = 16


def _eval_F(idx: np.ndarray, coef: np.ndarray, arg: np.ndarray) -> np.ndarray:
    """Hermite expansion at ``arg`` of shape ``(n, d)``."""
    n, d = arg.shape
    out = np.zeros(n)
    if len(coef) == 0:
        return out
    maxdeg = idx.max(axis=0)
    tabs = []
    for i in range(d):
        tab = np.empty((maxdeg[i] + 1, n))
        tab[0] = 1.0
        if maxdeg[i] >= 1:
            tab[1] = 2.0 * arg[:, i]
        for k in range(1, maxdeg[i]):
            tab[k + 1] = 2.0 * arg[:, i] * tab[k] - 2.0 * k * tab[k - 1]
        tabs.append(tab)
    for nu, c in zip(idx, coef):
        term = np.full(n, c)
        for i in range(d):
            term = term * tabs[i][nu[i]]
        out += term
    return out


class _Ctx:
    def __init__(self, kind, orient, m, d, idx, coef, F=None):
        self.kind, self.orient, self.m, self.d = kind, orient, m, d
        self.F = F
        if F is None:
            self.idx = np.asarray(idx, dtype=np.int64).reshape(-1, d)
            self.coef = np.asarray(coef, dtype=float)
            if self.idx.size and self.idx.max() > MAXDEG:
                raise ValueError("Hermite degree above the supported cap")

    def evalF(self, arg):
        if self.F is not None:
            return np.asarray(self.F(arg), dtype=float).reshape(len(arg))
        return _eval_F(self.idx, self.coef, arg)

    def weight(self, t, r, L):
        if self.kind == 2:
            return np.full_like(t, 2.0)
        w = (L / t) ** (0.5 * (self.m - 2)) if self.m != 2 else np.ones_like(t)
        p = self.d - 2 if self.kind == 0 else self.m - 2
        return w * r ** p if p else w


class _Point(_Ctx):
    def set_pair(self, x, z):
        self.x, self.z, self.y = x, z, x + z

    def core(self, t, r, omr):
        q = self.z[None, :] + omr[:, None] * self.x[None, :]
        u = np.sum(q * q, axis=1) / t
        st = np.sqrt(t)[:, None]
        if self.orient == 0:
            arg = (-self.z[None, :] + omr[:, None] * self.y[None, :]) / st
        else:
            arg = q / st
        return self.evalF(arg) * np.exp(-u - (0.5 * self.d + 1.0) * np.log(t))

    def u_at(self, t):
        r = math.sqrt(1.0 - t)
        omr = t / (1.0 + r)
        q = self.z + omr * self.x
        return float(q @ q) / t

    def panels(self):
        d = self.d
        rho2 = float(self.z @ self.z)
        a = float(self.x @ self.x + self.y @ self.y)
        b = 2.0 * float(self.x @ self.y)
        p1 = d if self.kind == 0 else (self.m if self.kind == 1 else 2)
        wmax = 46.0 / p1 + self.m + 2.0
        out = [(0, math.log(2.0), 4.0), (0, 4.0, wmax)]
        t_pk = 2.0 * rho2 / (d + 2.0)
        t_s = min(t_pk, 0.75)
        u_s = self.u_at(t_s)
        t = t_s
        for _ in range(2000):
            t *= 0.5
            if t < 1e-300:
                break
            if self.u_at(t) - u_s - (0.5 * d + 1.0) * math.log(t_s / t) > 50.0:
                break
        sb = [math.log(4.0 / 3.0)]
        mids = []
        if t_pk < 0.75:
            mids.append(-math.log(t_pk))
        if b > 0.0:
            disc = math.sqrt(abs(a * a - b * b))
            t0 = 2.0 * disc / (a + disc)
            if t < t0 < 0.75 and abs(math.log(t0 / t_pk)) > 1e-3:
                mids.append(-math.log(t0))
        sb += sorted(mids) + [-math.log(t)]
        out += [(1, lo, hi) for lo, hi in zip(sb, sb[1:]) if hi > lo]
        return out


class _Bump(_Ctx):
    def set_bump(self, y0, sigma, ghx, ghw):
        self.y0 = np.asarray(y0, dtype=float)
        self.sig = float(sigma)
        self.sig2 = self.sig ** 2
        d = self.d
        grids = np.meshgrid(*([ghx] * d), indexing="ij")
        wgrids = np.meshgrid(*([ghw] * d), indexing="ij")
        self.gx = np.stack([g.ravel(order="F") for g in grids], axis=-1)
        self.gw = np.prod(np.stack([g.ravel(order="F") for g in wgrids], axis=-1), axis=-1)

    def set_x(self, x):
        self.x = x

    def core(self, t, r, omr):
        st = np.sqrt(t)
        den = self.sig2 + t
        q = r[:, None] * self.x[None, :] - self.y0[None, :]
        e = np.sum(q * q, axis=1)
        if self.orient == 0:
            a = st[:, None] * (self.x[None, :] * (1.0 + self.sig2) - r[:, None] * self.y0[None, :]) / den[:, None]
            bcoef = -r * self.sig / np.sqrt(den)
        else:
            a = st[:, None] * (self.y0[None, :] - r[:, None] * self.x[None, :]) / den[:, None]
            bcoef = self.sig / np.sqrt(den)
        n, k = len(t), len(self.gw)
        arg = a[:, None, :] + bcoef[:, None, None] * self.gx[None, :, :]
        vals = self.evalF(arg.reshape(n * k, self.d)).reshape(n, k)
        acc = vals @ self.gw
        return acc * np.exp(-e / den - np.log(t) - 0.5 * self.d * np.log(den))

    def panels(self):
        dist2 = float(np.sum((self.x - self.y0) ** 2))
        p1 = self.d if self.kind == 0 else self.m
        wmax = 46.0 / p1 + self.m + 2.0
        out = [(0, math.log(2.0), 4.0), (0, 4.0, wmax)]
        smax = -math.log(1e-30 * min(self.sig2, 1.0))
        mids = []
        if self.sig2 < 0.75:
            mids.append(-math.log(self.sig2))
        if 1e-30 < dist2 < 0.75 and abs(math.log(dist2 / self.sig2)) > 0.1:
            mids.append(-math.log(dist2))
        sb = [math.log(4.0 / 3.0)] + sorted(mids) + [smax]
        out += [(1, lo, hi) for lo, hi in zip(sb, sb[1:]) if hi > lo]
        return out


def _panel_values(ctx, panel: int, v: np.ndarray) -> np.ndarray:
    if panel == 0:
        r = np.exp(-v)
        t = -np.expm1(-2.0 * v)
        omr = -np.expm1(-v)
        L = v
        return ctx.weight(t, r, L) * r * r * ctx.core(t, r, omr)
    t = np.exp(-v)
    out = np.zeros_like(v)
    ok = t < 1.0
    t = t[ok]
    r = np.sqrt(1.0 - t)
    omr = t / (1.0 + r)
    L = -0.5 * np.log1p(-t)
    out[ok] = 0.5 * ctx.weight(t, r, L) * t * ctx.core(t, r, omr)
    return out


def _gk_pass(ctx, panel, a, b):
    half = 0.5 * (b - a)
    center = 0.5 * (a + b)
    fv = _panel_values(ctx, panel, center + half * GK15_NODES)
    kron = GK15_WEIGHTS @ fv
    gau = G7_WEIGHTS @ fv
    ra = GK15_WEIGHTS @ np.abs(fv)
    rasc = GK15_WEIGHTS @ np.abs(fv - 0.5 * kron)
    h = abs(half)
    kron, gau, ra, rasc = kron * h, gau * h, ra * h, rasc * h
    e = abs(kron - gau)
    if rasc > 0.0:
        e = rasc * min(1.0, (200.0 * e / rasc) ** 1.5)
    e = max(e, 50.0 * EPSM * ra)
    return kron * (1.0 if b >= a else -1.0), e, ra


def _adapt(ctx, panels, abs_tol, rel_tol, max_ref, maxiv=4096):
    ivs = []
    for p, lo, hi in panels:
        ivs.append([p, lo, hi, *_gk_pass(ctx, p, lo, hi)])
    evals = 15 * len(ivs)
    refs = 0
    conv = False
    while True:
        tv = sum(iv[3] for iv in ivs)
        te = sum(iv[4] for iv in ivs)
        tr = sum(iv[5] for iv in ivs)
        target = max(rel_tol * abs(tv), abs_tol)
        if te <= target or te <= 100.0 * EPSM * tr:
            conv = True
            break
        if refs >= max_ref or len(ivs) + 1 >= maxiv:
            break
        worst = max(range(len(ivs)), key=lambda k: (ivs[k][4], -k))
        p, a, b = ivs[worst][:3]
        mid = 0.5 * (a + b)
        if mid in (a, b):
            break
        ivs[worst] = [p, a, mid, *_gk_pass(ctx, p, a, mid)]
        ivs.append([p, mid, b, *_gk_pass(ctx, p, mid, b)])
        refs += 1
        evals += 30
    return tv, te, evals, conv


def kernel_batch(kind, orient, m, X, Z, idx, coef, abs_tol, rel_tol, max_ref, F=None):
    """Kernel integrals at pairs ``(X[k], X[k] + Z[k])``; ``F`` overrides the expansion."""
    X = np.ascontiguousarray(X, dtype=float)
    Z = np.ascontiguousarray(Z, dtype=float)
    n, d = X.shape
    if not 1 <= d <= 3:
        raise ValueError("dimension must be 1, 2 or 3")
    ctx = _Point(kind, orient, m, d, idx, coef, F)
    vals, errs = np.zeros(n), np.zeros(n)
    evs = np.zeros(n, dtype=np.int64)
    cvg = np.zeros(n, dtype=bool)
    for k in range(n):
        ctx.set_pair(X[k], Z[k])
        vals[k], errs[k], evs[k], cvg[k] = _adapt(ctx, ctx.panels(), abs_tol, rel_tol, max_ref)
    return vals, errs, evs, cvg


def bump_batch(kind, orient, m, X, y0, sigma, idx, coef, ghx, ghw, abs_tol, rel_tol, max_ref, F=None):
    X = np.ascontiguousarray(X, dtype=float)
    n, d = X.shape
    if not 1 <= d <= 3:
        raise ValueError("dimension must be 1, 2 or 3")
    ctx = _Bump(kind, orient, m, d, idx, coef, F)
    ctx.set_bump(y0, sigma, np.asarray(ghx, dtype=float), np.asarray(ghw, dtype=float))
    vals, errs = np.zeros(n), np.zeros(n)
    evs = np.zeros(n, dtype=np.int64)
    cvg = np.zeros(n, dtype=bool)
    for k in range(n):
        ctx.set_x(X[k])
        vals[k], errs[k], evs[k], cvg[k] = _adapt(ctx, ctx.panels(), abs_tol, rel_tol, max_ref)
    return vals, errs, evs, cvg
