"""Scalar kernel machinery and pointwise kernel evaluators.

Notation: ``t = 1 - r**2``, ``a = |x|**2 + |y|**2``, ``b = 2<x, y>`` and

    u(t)  = |y - sqrt(1-t) x|**2 / t
    t0    = 2 sqrt(a**2 - b**2) / (a + sqrt(a**2 - b**2))
    u0    = (|y|**2 - |x|**2)/2 + sqrt(a**2 - b**2)/2

Kernels (all integrals over ``r`` in ``(0, 1)``, ``s = sqrt(1 - r**2)``):

=====================  ==============================================  ===============
evaluator              weight                                          F argument
=====================  ==============================================  ===============
``kernel_general_alt``  ``(-log r/s**2)**((m-2)/2) r**(d-1)``          ``(x - r y)/s``
``kernel_general``      ``(-log r/s**2)**((m-2)/2) r**(m-1)``          ``(y - r x)/s``
``kernel_k1``           ``2 r`` (no logarithmic factor)                ``(x - r y)/s``
=====================  ==============================================  ===============

each multiplied by ``exp(-|y - r x|**2/s**2) / s**(d+2)``.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

import numpy as np

from . import _backend
from .hermite import HermiteExpansion, MultiIndex
from .quadrature import (IntegrationResult, QuadratureConfig, QuadratureError, gauss_hermite,
                         integrate_halfline, integrate_unit, sphere_rule)

__all__ = [
    "KernelSpec",
    "GeometryCache",
    "KernelEvaluationError",
    "varphi_m",
    "psi_m",
    "psi_m0",
    "geometry",
    "kernel_values",
    "kernel_general_alt",
    "kernel_general",
    "kernel_k1",
    "cz_approx_kernel",
    "diagnostic_kernels",
    "orthogonality_check",
    "growth_probe",
    "diagonal_coefficient",
    "kernel_dump",
]

KIND_CODES = {"alt": (0, 0), "general": (1, 1), "k1": (2, 0)}


class KernelEvaluationError(QuadratureError):
    """Kernel requested on the diagonal or failed to converge."""


def _as_points(x, d: int) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.ndim <= 1:
        x = x.reshape(-1, d)
    if x.ndim != 2 or x.shape[-1] != d:
        raise ValueError(f"points must have {d} coordinates")
    return x


@dataclass(frozen=True)
class KernelSpec:
    """Kernel function ``F`` on ``R^d`` together with the order ``m``.

    Parameters
    ----------
    dim, m
        Dimension and order (both positive integers).
    F
        Vectorized callable, ``(N, d)`` points to ``(N,)`` values.
    grad
        Optional gradient callable, ``(N, d)`` to ``(N, d)``.  Without it a
        central finite difference is used and ``gradient_is_numeric`` is set.
    hermite
        The Hermite expansion of ``F`` when ``F`` is a polynomial; enables the
        compiled kernel path and exact spectral identities.
    """

    dim: int
    m: int
    F: Callable
    grad: Callable | None = None
    hermite: HermiteExpansion | None = None
    label: str = ""

    def __post_init__(self):
        if self.dim < 1 or self.m < 1:
            raise ValueError("dimension and m must be positive integers")
        if self.hermite is not None and self.hermite.dim != self.dim:
            raise ValueError("Hermite expansion dimension differs from the kernel dimension")

    @classmethod
    def from_hermite(cls, f: HermiteExpansion | Iterable[int], m: int | None = None,
                     scale: float = 1.0, label: str | None = None) -> "KernelSpec":
        """Kernel with ``F = scale * f``; a multi-index gives ``f = H_beta`` and ``m = |beta|`` by default."""
        if not isinstance(f, HermiteExpansion):
            beta = MultiIndex(f)
            f = HermiteExpansion.basis(beta)
            m = beta.order if m is None else m
            label = label or f"H{tuple(beta)}"
        if m is None:
            raise ValueError("m is required for a general expansion")
        f = f * scale
        return cls(f.dim, int(m), f, f.gradient, f, label or "hermite")

    @property
    def gradient_is_numeric(self) -> bool:
        return self.grad is None

    def scaled(self, c: float) -> "KernelSpec":
        F, g = self.F, self.grad
        herm = self.hermite * c if self.hermite is not None else None
        return KernelSpec(self.dim, self.m, lambda p: c * np.asarray(F(p)),
                          None if g is None else (lambda p: c * np.asarray(g(p))), herm, self.label)

    def value(self, pts) -> np.ndarray:
        pts = _as_points(pts, self.dim)
        return np.asarray(self.F(pts), dtype=float).reshape(len(pts))

    def gradient(self, pts) -> np.ndarray:
        pts = _as_points(pts, self.dim)
        if self.grad is not None:
            return np.asarray(self.grad(pts), dtype=float).reshape(pts.shape)
        h = np.finfo(float).eps ** (1 / 3) * (1.0 + np.linalg.norm(pts, axis=1))
        out = np.empty_like(pts)
        for i in range(self.dim):
            e = np.zeros(self.dim)
            e[i] = 1.0
            step = h[:, None] * e[None, :]
            out[:, i] = (self.value(pts + step) - self.value(pts - step)) / (2 * h)
        return out


@dataclass(frozen=True)
class GeometryCache:
    """Pair quantities ``a, b, t0, u0`` for points ``x, y``."""

    x: np.ndarray
    y: np.ndarray
    a: float
    b: float
    t0: float
    u0: float

    def _quad_form(self, t, p, q):
        t = np.asarray(t, dtype=float)
        tt = t.reshape(-1)
        omr = tt / (1.0 + np.sqrt(1.0 - tt))
        w = (p - q)[None, :] + omr[:, None] * q[None, :]
        out = (np.sum(w * w, axis=1) / tt).reshape(t.shape)
        return float(out) if out.ndim == 0 else out

    def u(self, t):
        """``u(t) = |y - sqrt(1-t) x|**2 / t``."""
        return self._quad_form(t, self.y, self.x)

    def v(self, t):
        """``v(t) = |x - sqrt(1-t) y|**2 / t``."""
        return self._quad_form(t, self.x, self.y)


def geometry(x, y) -> GeometryCache:
    x = np.atleast_1d(np.asarray(x, dtype=float))
    y = np.atleast_1d(np.asarray(y, dtype=float))
    if x.shape != y.shape:
        raise ValueError("x and y must have the same dimension")
    a = float(x @ x + y @ y)
    b = float(2.0 * x @ y)
    disc = math.sqrt(max(a * a - b * b, 0.0))
    t0 = 2.0 * disc / (a + disc) if disc > 0 else 0.0
    u0 = 0.5 * float(y @ y - x @ x) + 0.5 * disc
    return GeometryCache(x, y, a, b, t0, u0)


# -- weights --------------------------------------------------------------


def psi_m0(m: int) -> float:
    """Continuous extension ``psi_m(0) = 2**(-(m-2)/2)``."""
    return 2.0 ** (-(m - 2) / 2)


def varphi_m(r, m: int, d: int, extend: bool = False):
    """``((-log r)/(1 - r**2))**((m-2)/2) * r**(d-1)``."""
    r = np.asarray(r, dtype=float)
    bad = (r <= 0) | (r >= 1)
    if np.any(bad) and not extend:
        raise ValueError("r must lie in (0, 1); pass extend=True for endpoint limits")
    with np.errstate(divide="ignore", invalid="ignore"):
        rr = np.clip(r, np.finfo(float).tiny, 1 - 1e-16)
        ratio = -np.log(rr) / (-np.expm1(2 * np.log(rr)))
        out = ratio ** ((m - 2) / 2) * rr ** (d - 1)
    if extend:
        out = np.where(r >= 1, psi_m0(m), out)
        if d > 1:
            lim0 = 0.0
        else:
            lim0 = 1.0 if m == 2 else (math.inf if m > 2 else 0.0)
        out = np.where(r <= 0, lim0, out)
    return float(out) if out.ndim == 0 else out


def psi_m(t, m: int, d: int):
    """``((-log sqrt(1-t))/t)**((m-2)/2) * (1-t)**((d-2)/2)``, extended to ``t = 0``."""
    t = np.asarray(t, dtype=float)
    if np.any(t >= 1) or np.any(t < 0):
        raise ValueError("t must lie in [0, 1)")
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(t > 0, -0.5 * np.log1p(-t) / np.where(t > 0, t, 1.0), 0.5)
        out = ratio ** ((m - 2) / 2) * (1.0 - t) ** ((d - 2) / 2)
    out = np.where(t == 0, psi_m0(m), out)
    return float(out) if out.ndim == 0 else out


# -- kernels --------------------------------------------------------------


def kernel_values(spec: KernelSpec, X, Z, quad: QuadratureConfig | None = None, kind: str = "alt",
                  backend: str | None = None) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Kernel at pairs ``(X[k], X[k] + Z[k])``; returns (values, errors, converged).

    Displacements ``Z`` are passed separately so that ``y - x`` stays exact
    for nearly coincident points.  Rows with ``Z = 0`` are rejected.
    """
    quad = quad or QuadratureConfig()
    d = spec.dim
    X = np.ascontiguousarray(_as_points(X, d))
    Z = np.ascontiguousarray(_as_points(Z, d))
    if len(X) == 1 and len(Z) > 1:
        X = np.ascontiguousarray(np.repeat(X, len(Z), axis=0))
    if X.shape != Z.shape:
        raise ValueError("X and Z must have matching shapes")
    if np.any(np.all(Z == 0, axis=1)):
        raise KernelEvaluationError("kernel requested on the diagonal x = y")
    kcode, ocode = KIND_CODES[kind]
    if spec.hermite is not None:
        idx, coef = spec.hermite.as_arrays()
        be = _backend.get(backend)
        vals, errs, _, conv = be.kernel_batch(kcode, ocode, spec.m, X, Z, np.ascontiguousarray(idx),
                                              np.ascontiguousarray(coef), quad.abs_tol, quad.rel_tol,
                                              quad.max_refinements)
    else:
        vals, errs, _, conv = _backend.python_backend.kernel_batch(
            kcode, ocode, spec.m, X, Z, None, None, quad.abs_tol, quad.rel_tol, quad.max_refinements, F=spec.value)
    return vals, errs, conv


def _single(spec, x, y, quad, kind) -> IntegrationResult:
    x = np.atleast_1d(np.asarray(x, dtype=float))
    y = np.atleast_1d(np.asarray(y, dtype=float))
    if x.shape != (spec.dim,) or y.shape != (spec.dim,):
        raise ValueError(f"x and y must be points of R^{spec.dim}")
    if np.array_equal(x, y):
        raise KernelEvaluationError("kernel is singular at x = y; principal values live in operators")
    v, e, c = kernel_values(spec, x[None], (y - x)[None], quad, kind)
    res = IntegrationResult(float(v[0]), float(e[0]), 0, bool(c[0]))
    if not res.converged:
        raise KernelEvaluationError(f"kernel quadrature did not converge (error estimate {res.error_estimate:.2e})")
    return res


def kernel_general_alt(spec: KernelSpec, x, y, quad: QuadratureConfig | None = None) -> IntegrationResult:
    """Kernel of the alternative operator at ``(x, y)`` with error estimate."""
    return _single(spec, x, y, quad, "alt")


def kernel_general(spec: KernelSpec, x, y, quad: QuadratureConfig | None = None) -> IntegrationResult:
    """Kernel of the (non-alternative) general operator at ``(x, y)``."""
    return _single(spec, x, y, quad, "general")


def kernel_k1(spec: KernelSpec, x, y, quad: QuadratureConfig | None = None) -> IntegrationResult:
    """``int_0^1 F((x - sqrt(1-t) y)/sqrt t) exp(-u(t)) t**(-d/2-1) dt``."""
    return _single(spec, x, y, quad, "k1")


def _radial_moment(spec: KernelSpec, dirs: np.ndarray, power: int, log_weight: bool,
                   quad: QuadratureConfig) -> np.ndarray:
    """``int_0^inf F(s * dir) e^{-s^2} s^power [2 log s] ds`` for each direction."""
    d = spec.dim

    def g(s):
        s = np.asarray(s)
        pts = (s[:, None, None] * dirs[None, :, :]).reshape(-1, d)
        vals = spec.value(pts).reshape(len(s), len(dirs))
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            w = np.exp(-s * s) * s ** power
            if log_weight:
                w = w * 2.0 * np.log(s)
        w = np.where(np.isfinite(w), w, 0.0)
        return vals * w[:, None]

    return np.asarray(integrate_halfline(g, 0.0, quad).value)


def cz_approx_kernel(spec: KernelSpec, z, quad: QuadratureConfig | None = None):
    """Convolution kernel ``K(z) = 2 |z|**-d int_0^inf F(-s z/|z|) exp(-s**2) s**(d-1) ds``.

    ``z`` may be a single point or an ``(N, d)`` array.
    """
    quad = quad or QuadratureConfig()
    z = np.asarray(z, dtype=float)
    single = z.ndim <= 1 and (z.size == spec.dim)
    Z = _as_points(z, spec.dim)
    norms = np.linalg.norm(Z, axis=1)
    if np.any(norms == 0):
        raise KernelEvaluationError("K(z) is undefined at z = 0")
    dirs = -Z / norms[:, None]
    omega = 2.0 * _radial_moment(spec, dirs, spec.dim - 1, False, quad)
    out = omega / norms ** spec.dim
    return float(out[0]) if single else out


def diagnostic_kernels(x, y, delta: float, quad: QuadratureConfig | None = None) -> tuple[float, float]:
    """``(K2(x - y), K3(x, y))`` with ``K2`` by quadrature and ``K3`` in closed form."""
    if delta <= 0:
        raise ValueError("delta must be positive")
    x = np.atleast_1d(np.asarray(x, dtype=float))
    y = np.atleast_1d(np.asarray(y, dtype=float))
    d = x.size
    rho = float(np.linalg.norm(x - y))
    if rho == 0:
        raise KernelEvaluationError("diagnostic kernels are singular at x = y")
    c = delta * rho * rho

    def f(t):
        with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
            v = np.exp(-c / t - 0.5 * d * np.log(t)) / np.sqrt(1.0 - t)
        return np.where(np.isfinite(v), v, 0.0)

    k2 = integrate_unit(f, quad or QuadratureConfig()).value
    k3 = (1.0 + math.sqrt(float(np.linalg.norm(x)))) / rho ** (d - 0.5)
    return float(k2), float(k3)


def orthogonality_check(spec: KernelSpec, quad: QuadratureConfig | None = None) -> float:
    """``int F d gamma_d``; admissible kernels give zero."""
    quad = quad or QuadratureConfig()
    nodes = quad.gh_nodes_per_axis
    if spec.hermite is not None:
        nodes = max(1, spec.hermite.degree // 2 + 1)
        nodes = min(max(nodes, 2), quad.gh_nodes_per_axis)
    if spec.dim > 1:
        nodes = min(nodes, max(2, int(quad.eval_budget ** (1 / spec.dim))))
    return float(gauss_hermite(spec.value, quad, spec.dim, nodes=nodes).value)


def growth_probe(spec: KernelSpec, radius: float, grid: int = 64) -> float:
    """Heuristic exponent ``eps`` with ``|F|, |grad F| <= C exp(eps |x|**2)`` up to ``radius``.

    The profiles ``max |F|`` and ``max |grad F|`` over directions are taken
    on ``grid`` radii in ``(0, radius]``; ``eps`` is the slope of their
    logarithm against ``|x|**2`` across the outermost grid cell, so
    polynomial factors show up as ``O(1/radius**2)`` and vanish as the
    radius grows.  Returns ``inf`` if the profile overflows.
    """
    if radius <= 0:
        raise ValueError("radius must be positive")
    if grid < 2:
        raise ValueError("grid needs at least 2 radii")
    d = spec.dim
    dirs, _ = sphere_rule(d, 16)
    radii = np.linspace(radius / grid, radius, grid)[-2:]
    pts = (radii[:, None, None] * dirs[None]).reshape(-1, d)
    with np.errstate(over="ignore", invalid="ignore"):
        fval = np.abs(spec.value(pts)).reshape(len(radii), -1).max(axis=1)
        gval = np.linalg.norm(spec.gradient(pts), axis=1).reshape(len(radii), -1).max(axis=1)
    best = 0.0
    for prof in (fval, gval):
        if not np.all(np.isfinite(prof)):
            return math.inf
        logs = np.log(np.maximum(prof, 1e-300))
        best = max(best, float((logs[1] - logs[0]) / (radii[1] ** 2 - radii[0] ** 2)))
    # the fit is a heuristic; trailing round-off digits carry no meaning
    return round(best, 10)


def diagonal_coefficient(spec: KernelSpec, quad: QuadratureConfig | None = None) -> float:
    """Identity part hidden by the symmetric principal value.

    Equals ``-psi_m(0)/2 * int F(-w) exp(-|w|**2) log|w|**2 dw``; it vanishes
    for odd ``F``.  The full operator is ``p.v. int K f + D f(x)``.
    """
    quad = quad or QuadratureConfig()
    d = spec.dim
    dirs, w = sphere_rule(d, max(quad.angular_nodes, 16))
    mom = _radial_moment(spec, -dirs, d - 1, True, quad)
    return float(-0.5 * psi_m0(spec.m) * (mom @ w))


def kernel_dump(spec: KernelSpec, xs, ys, path, quad: QuadratureConfig | None = None, kind: str = "alt") -> int:
    """Evaluate the kernel on all pairs of ``xs`` x ``ys`` and write a CSV; returns the row count.

    Header ``x_coords,y_coords,kernel,err_est``; coordinates inside a cell are
    separated by semicolons.  Diagonal pairs are skipped.
    """
    d = spec.dim
    xs = _as_points(xs, d)
    ys = _as_points(ys, d)
    X = np.repeat(xs, len(ys), axis=0)
    Y = np.tile(ys, (len(xs), 1))
    keep = ~np.all(X == Y, axis=1)
    X, Y = X[keep], Y[keep]
    vals, errs, _ = kernel_values(spec, X, Y - X, quad, kind)
    fmt = lambda p: ";".join(repr(float(c)) for c in p)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["x_coords", "y_coords", "kernel", "err_est"])
        for x, y, v, e in zip(X, Y, vals, errs):
            w.writerow([fmt(x), fmt(y), repr(float(v)), repr(float(e))])
    return len(X)
