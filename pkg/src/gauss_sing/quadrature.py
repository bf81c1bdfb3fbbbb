"""Numerical integration: adaptive Gauss-Kronrod, Gauss-Hermite, principal values.

All adaptive routines accept vectorized integrands: ``f(points)`` receives a
1-d array of abscissae and returns either an array of the same length or a
``(len(points), k)`` array for vector-valued integrands.  Error control for
vector integrands uses the largest component.
"""
from __future__ import annotations

import heapq
import math
from dataclasses import dataclass, field, replace
from functools import lru_cache
from typing import Callable, Sequence

import numpy as np

__all__ = [
    "QuadratureConfig",
    "IntegrationResult",
    "QuadratureError",
    "BudgetExceededError",
    "DivergentPrincipalValue",
    "GK15_NODES",
    "GK15_WEIGHTS",
    "G7_WEIGHTS",
    "gk15",
    "integrate_interval",
    "integrate_halfline",
    "integrate_unit",
    "gauss_hermite",
    "gauss_hermite_rule",
    "sphere_rule",
    "radial_profile",
    "radial_integrate",
    "pv_integrate",
]

EPS = np.finfo(float).eps


class QuadratureError(RuntimeError):
    """Adaptive integration failed to meet its tolerance."""


class BudgetExceededError(QuadratureError):
    """Integrand evaluation budget exhausted."""


class DivergentPrincipalValue(QuadratureError):
    """Truncated integrals do not settle as the excised ball shrinks."""


@dataclass(frozen=True)
class QuadratureConfig:
    """Tolerances and node counts shared by every integrator.

    Attributes
    ----------
    abs_tol, rel_tol
        Adaptive stopping rule ``err <= max(abs_tol, rel_tol * |value|)``.
    max_refinements
        Maximum number of interval bisections per adaptive integral.
    gh_nodes_per_axis
        Gauss-Hermite nodes per coordinate for integrals against gamma_d.
    pv_epsilons
        Strictly decreasing radii of the excised balls for principal values.
    eval_budget
        Hard cap on integrand evaluations per top-level integral.
    angular_nodes
        Trapezoid nodes on the circle (d=2); azimuthal count on the sphere.
    pv_tol
        Agreement required between successive epsilon-extrapolants.
    """

    abs_tol: float = 1e-12
    rel_tol: float = 1e-10
    max_refinements: int = 400
    gh_nodes_per_axis: int = 40
    pv_epsilons: tuple[float, ...] = (1e-6, 5e-7, 2.5e-7, 1.25e-7)
    eval_budget: int = 10_000_000
    angular_nodes: int = 64
    pv_tol: float = 1e-7

    def __post_init__(self):
        if not (self.abs_tol > 0 and self.rel_tol > 0):
            raise ValueError("tolerances must be positive")
        if self.max_refinements < 1:
            raise ValueError("max_refinements must be >= 1")
        if self.gh_nodes_per_axis < 1:
            raise ValueError("gh_nodes_per_axis must be >= 1")
        eps = tuple(float(e) for e in self.pv_epsilons)
        if len(eps) < 3:
            raise ValueError("pv_epsilons needs at least 3 radii")
        if any(e <= 0 for e in eps) or any(b >= a for a, b in zip(eps, eps[1:])):
            raise ValueError("pv_epsilons must be positive and strictly decreasing")
        object.__setattr__(self, "pv_epsilons", eps)
        if self.angular_nodes < 4:
            raise ValueError("angular_nodes must be >= 4")
        if self.eval_budget < 1:
            raise ValueError("eval_budget must be positive")

    def with_(self, **changes) -> "QuadratureConfig":
        return replace(self, **changes)

    def tightened(self, factor: float = 0.5) -> "QuadratureConfig":
        return replace(self, abs_tol=self.abs_tol * factor, rel_tol=self.rel_tol * factor)


@dataclass
class IntegrationResult:
    value: float | np.ndarray
    error_estimate: float
    evaluations: int
    converged: bool
    extras: dict = field(default_factory=dict)

    def __post_init__(self):
        if not self.error_estimate >= 0:
            raise ValueError("error estimate must be non-negative")

    def __iter__(self):
        # allows ``value, err = result`` unpacking
        yield self.value
        yield self.error_estimate


# -- Gauss-Kronrod 7/15 ---------------------------------------------------

_XGK = np.array([
    0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
    0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
    0.586087235467691130294144845693013, 0.405845151377397166906606412076961,
    0.207784955007898467600689403773245, 0.0,
])
_WGK = np.array([
    0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
    0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
    0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
    0.204432940075298892414161999234649, 0.209482141084727828012999174891714,
])
_WG = np.array([
    0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
    0.381830050505118944950369775488975, 0.417959183673469387755102040816327,
])

GK15_NODES = np.concatenate([-_XGK[:-1], _XGK[::-1]])
GK15_WEIGHTS = np.concatenate([_WGK[:-1], _WGK[::-1]])
# Gauss weights aligned with GK15_NODES (zero on Kronrod-only nodes)
G7_WEIGHTS = np.zeros(15)
G7_WEIGHTS[[1, 3, 5]] = _WG[:3]
G7_WEIGHTS[[9, 11, 13]] = _WG[2::-1]
G7_WEIGHTS[7] = _WG[3]


def _qk_error(fv: np.ndarray, half: float, kron: np.ndarray, gauss: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """QUADPACK-style error estimate; returns (err, resabs) per component."""
    mean = 0.5 * kron / half
    resabs = half * (GK15_WEIGHTS @ np.abs(fv))
    resasc = half * (GK15_WEIGHTS @ np.abs(fv - mean))
    diff = np.abs(kron - gauss)
    err = diff.copy()
    pos = resasc > 0
    err[pos] = resasc[pos] * np.minimum(1.0, (200.0 * diff[pos] / resasc[pos]) ** 1.5)
    err = np.maximum(err, 50.0 * EPS * resabs)
    return err, resabs


def gk15(f: Callable, a: float, b: float):
    """One Kronrod/Gauss pass on ``[a, b]``: (value, err, resabs)."""
    half = 0.5 * (b - a)
    center = 0.5 * (a + b)
    fv = np.asarray(f(center + half * GK15_NODES), dtype=float)
    scalar = fv.ndim == 1
    fv = fv.reshape(15, -1)
    kron = half * (GK15_WEIGHTS @ fv)
    gauss = half * (G7_WEIGHTS @ fv)
    err, resabs = _qk_error(fv, abs(half), kron, gauss)
    return (float(kron[0]) if scalar else kron), err, resabs


def integrate_interval(f: Callable, a: float, b: float, cfg: QuadratureConfig | None = None,
                       breakpoints: Sequence[float] = (), budget: int | None = None) -> IntegrationResult:
    """Globally adaptive GK15 on ``[a, b]`` with optional interior breakpoints."""
    cfg = cfg or QuadratureConfig()
    budget = cfg.eval_budget if budget is None else budget
    if not (math.isfinite(a) and math.isfinite(b)):
        raise ValueError("finite limits required; use integrate_halfline")
    edges = [a] + sorted({float(p) for p in breakpoints if min(a, b) < p < max(a, b)}) + [b]
    if b < a:
        edges = [a] + sorted({float(p) for p in breakpoints if b < p < a}, reverse=True) + [b]
    heap: list = []
    evals = 0
    counter = 0
    for lo, hi in zip(edges, edges[1:]):
        val, err, resabs = gk15(f, lo, hi)
        evals += 15
        heapq.heappush(heap, (-float(np.max(err)), counter, lo, hi, val, err, resabs))
        counter += 1
    refinements = 0

    def status():
        vals = sum(item[4] for item in heap)
        errs = sum(item[5] for item in heap)
        absr = sum(item[6] for item in heap)
        return vals, errs, absr

    value, err, resabs = status()
    while True:
        scale = np.abs(np.atleast_1d(value))
        target = np.maximum(cfg.abs_tol, cfg.rel_tol * scale)
        floor = 100.0 * EPS * np.atleast_1d(resabs)
        if np.all((err <= target) | (err <= floor)):
            converged = True
            break
        if refinements >= cfg.max_refinements:
            converged = False
            break
        if evals + 30 > budget:
            raise BudgetExceededError(f"evaluation budget {budget} exhausted")
        _, _, lo, hi, val, e, ra = heapq.heappop(heap)
        mid = 0.5 * (lo + hi)
        if mid in (lo, hi):
            converged = False
            heapq.heappush(heap, (0.0, counter, lo, hi, val, e, ra))
            break
        for x0, x1 in ((lo, mid), (mid, hi)):
            v, e2, r2 = gk15(f, x0, x1)
            evals += 15
            counter += 1
            heapq.heappush(heap, (-float(np.max(e2)), counter, x0, x1, v, e2, r2))
        refinements += 1
        value, err, resabs = status()
    if not np.all(np.isfinite(err)):
        raise QuadratureError("integrand returned non-finite values inside the interval")
    out_val = float(value) if np.ndim(value) == 0 else value
    return IntegrationResult(out_val, float(np.max(err)), evals, converged,
                             {"refinements": refinements, "resabs": float(np.max(resabs))})


def _combine(results: Sequence[IntegrationResult]) -> IntegrationResult:
    value = sum(r.value for r in results)
    return IntegrationResult(value, float(sum(r.error_estimate for r in results)),
                             sum(r.evaluations for r in results), all(r.converged for r in results))


def _scaled(fv, jac):
    """``fv * jac`` with zero wherever the Jacobian underflowed."""
    fv = np.asarray(fv, dtype=float)
    j = jac if fv.ndim == 1 else jac[:, None]
    with np.errstate(invalid="ignore", over="ignore"):
        out = fv * j
    return np.where(j == 0, 0.0, out)


def integrate_halfline(f: Callable, a: float, cfg: QuadratureConfig | None = None) -> IntegrationResult:
    """``int_a^inf f`` through ``x = a + v/(1-v)``, ``v`` in ``[0, 1)``."""

    def g(v):
        v = np.asarray(v)
        x = a + v / (1.0 - v)
        jac = 1.0 / (1.0 - v) ** 2
        jac = np.where(np.isfinite(x), jac, 0.0)
        return _scaled(f(x), jac)

    return integrate_interval(g, 0.0, 1.0, cfg)


def integrate_unit(f: Callable, cfg: QuadratureConfig | None = None,
                   breakpoints: Sequence[float] = (), complement: Callable | None = None) -> IntegrationResult:
    """``int_0^1 f(t) dt`` for integrands with integrable endpoint singularities.

    The first and last pieces (split at ``breakpoints``, or at ``1/2``) are
    mapped by ``t = c * exp(-v/(1-v))`` and its mirror image, which turns
    power and logarithmic endpoint behaviour into rapid decay in ``v``.
    Interior pieces use plain adaptive Gauss-Kronrod.  ``complement(s)``,
    if given, must equal ``f(1 - s)``; it is used near ``t = 1`` where
    forming ``1 - s`` would discard the digits of ``s``.
    """
    cfg = cfg or QuadratureConfig()
    if complement is None:
        def fc(s):
            # below s ~ eps the point 1 - s is the endpoint itself; those
            # slivers carry no representable mass
            t = 1.0 - s
            inside = t < 1.0
            vals = np.asarray(f(np.where(inside, t, 0.5)), dtype=float)
            return np.where(inside if vals.ndim == 1 else inside[:, None], vals, 0.0)
    else:
        fc = complement
    pts = sorted(p for p in breakpoints if 0.0 < p < 1.0) or [0.5]
    lo_c, hi_c = pts[0], 1.0 - pts[-1]

    def left(v):
        v = np.asarray(v)
        t = lo_c * np.exp(-v / (1.0 - v))
        jac = t / (1.0 - v) ** 2
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            return _scaled(f(t), jac)

    def right(v):
        v = np.asarray(v)
        s = hi_c * np.exp(-v / (1.0 - v))
        jac = s / (1.0 - v) ** 2
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            return _scaled(fc(s), jac)

    npieces = len(pts) + 1
    sub = cfg.with_(abs_tol=cfg.abs_tol / npieces)
    parts = [integrate_interval(left, 0.0, 1.0, sub)]
    for a, b in zip(pts, pts[1:]):
        parts.append(integrate_interval(f, a, b, sub))
    parts.append(integrate_interval(right, 0.0, 1.0, sub))
    out = _combine(parts)
    if complement is None:
        # mass in the unresolvable sliver next to t = 1, bounded as for s**(-1/2)
        s0 = 2.0 ** -53
        f0 = float(np.max(np.abs(np.asarray(f(np.array([1.0 - s0])), dtype=float))))
        sliver = 2.0 * s0 * f0
        if sliver > 0:
            out.error_estimate += sliver
            scale = float(np.max(np.abs(out.value)))
            out.converged = out.converged and out.error_estimate <= max(cfg.abs_tol, cfg.rel_tol * scale)
    return out


# -- Gauss-Hermite --------------------------------------------------------


@lru_cache(maxsize=64)
def _gh_1d(n: int) -> tuple[np.ndarray, np.ndarray]:
    x, w = np.polynomial.hermite.hermgauss(n)
    return x, w / math.sqrt(math.pi)


def gauss_hermite_rule(n: int, dim: int, budget: int | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Tensor nodes ``(n**dim, dim)`` and weights summing to one (probability γ_d)."""
    if n < 1 or dim < 1:
        raise ValueError("need n >= 1 and dim >= 1")
    if budget is not None and n ** dim > budget:
        raise BudgetExceededError(f"{n}**{dim} nodes exceed the evaluation budget {budget}")
    x, w = _gh_1d(n)
    grids = np.meshgrid(*([x] * dim), indexing="ij")
    wgrids = np.meshgrid(*([w] * dim), indexing="ij")
    nodes = np.stack([g.ravel() for g in grids], axis=-1)
    weights = np.prod(np.stack([g.ravel() for g in wgrids], axis=-1), axis=-1)
    return nodes, weights


def gauss_hermite(g: Callable, cfg: QuadratureConfig | None = None, dim: int = 1,
                  nodes: int | None = None) -> IntegrationResult:
    """``int g d gamma_d`` by a tensor Gauss-Hermite rule.

    ``g`` receives an ``(N, dim)`` array.  The error estimate is the
    difference to the rule with two fewer nodes per axis, so it vanishes
    for polynomials of degree ``<= 2n - 5`` per axis.
    """
    cfg = cfg or QuadratureConfig()
    n = nodes or cfg.gh_nodes_per_axis
    pts, wts = gauss_hermite_rule(n, dim, cfg.eval_budget)
    vals = np.asarray(g(pts), dtype=float)
    value = np.tensordot(wts, vals, axes=(0, 0))
    evals = len(wts)
    if n > 2:
        pts2, wts2 = gauss_hermite_rule(n - 2, dim, cfg.eval_budget)
        low = np.tensordot(wts2, np.asarray(g(pts2), dtype=float), axes=(0, 0))
        evals += len(wts2)
        err = float(np.max(np.abs(value - low)))
    else:
        err = float("inf")
    scale = float(np.max(np.abs(value))) if np.size(value) else 0.0
    err = max(err, 10 * EPS * scale)
    converged = err <= max(cfg.abs_tol, cfg.rel_tol * scale) or err <= 1e3 * EPS * scale
    value = float(value) if np.ndim(value) == 0 else value
    return IntegrationResult(value, float(err), evals, bool(converged))


# -- principal values -----------------------------------------------------


@lru_cache(maxsize=16)
def sphere_rule(dim: int, n: int) -> tuple[np.ndarray, np.ndarray]:
    """Directions on ``S^{dim-1}`` with weights summing to the surface area."""
    if dim == 1:
        return np.array([[1.0], [-1.0]]), np.array([1.0, 1.0])
    if dim == 2:
        th = 2 * np.pi * np.arange(n) / n
        return np.stack([np.cos(th), np.sin(th)], axis=-1), np.full(n, 2 * np.pi / n)
    if dim == 3:
        nz = max(n // 2, 2)
        z, wz = np.polynomial.legendre.leggauss(nz)
        ph = 2 * np.pi * np.arange(n) / n
        zz, pp = np.meshgrid(z, ph, indexing="ij")
        rr = np.sqrt(1 - zz ** 2)
        dirs = np.stack([rr * np.cos(pp), rr * np.sin(pp), zz], axis=-1).reshape(-1, 3)
        w = (wz[:, None] * np.full(n, 2 * np.pi / n)[None, :]).ravel()
        return dirs, w
    raise ValueError("principal values are implemented for d <= 3")


def radial_profile(h: Callable, x0, cfg: QuadratureConfig) -> Callable:
    """``g(rho) = rho**(d-1) * int_{S^{d-1}} h(x0 + rho*theta) dsigma``.

    ``h`` maps ``(N, d)`` points to ``(N,)`` or ``(N, k)`` values; the
    returned callable is vectorized over ``rho``.
    """
    x0 = np.atleast_1d(np.asarray(x0, dtype=float))
    d = x0.size
    dirs, w = sphere_rule(d, cfg.angular_nodes)

    def g(rho):
        rho = np.atleast_1d(np.asarray(rho, dtype=float))
        disp = rho[:, None, None] * dirs[None, :, :]
        vals = np.asarray(h(x0, disp.reshape(-1, d)), dtype=float)
        vals = vals.reshape((len(rho), len(w)) + vals.shape[1:])
        out = np.tensordot(vals, w, axes=(1, 0)) if vals.ndim == 2 else np.einsum("rak,a->rk", vals, w)
        fac = rho ** (d - 1)
        return out * (fac if out.ndim == 1 else fac[:, None])

    return g


def _log_radial(g: Callable, a: float, b: float, cfg: QuadratureConfig) -> IntegrationResult:
    """``int_a^b g(rho) d rho`` in the variable ``log rho``."""

    def gl(v):
        rho = np.exp(v)
        gv = np.asarray(g(rho))
        return gv * (rho if gv.ndim == 1 else rho[:, None])

    return integrate_interval(gl, math.log(a), math.log(b), cfg)


def radial_integrate(h: Callable, x0, cfg: QuadratureConfig | None = None, inner: float = 0.0,
                     outer: float = math.inf) -> IntegrationResult:
    """``int_{inner <= |y - x0| < outer} h``, with ``h(x0, displacements)``.

    ``inner`` must be positive (no principal value is taken here).
    """
    cfg = cfg or QuadratureConfig()
    if inner <= 0:
        raise ValueError("inner radius must be positive")
    if outer <= inner:
        x0 = np.atleast_1d(x0)
        return IntegrationResult(0.0, 0.0, 0, True)
    g = radial_profile(h, x0, cfg)
    parts = []
    split = min(max(1.0, inner), outer)
    if split > inner:
        parts.append(_log_radial(g, inner, split, cfg))
    if math.isinf(outer):
        parts.append(integrate_halfline(g, split, cfg))
    elif outer > split:
        parts.append(integrate_interval(g, split, outer, cfg))
    return _combine(parts)


def pv_integrate(h: Callable, x0, cfg: QuadratureConfig | None = None,
                 outer: float = math.inf) -> IntegrationResult:
    """Principal value ``lim_{eps->0} int_{eps < |y-x0| < outer} h``.

    ``h(x0, z)`` is evaluated at displacements ``z = y - x0`` (passing the
    displacement keeps ``y - x0`` exact for tiny radii).  Truncations at the
    radii ``cfg.pv_epsilons`` are extrapolated to zero radius with a
    quadratic in ``eps``; successive extrapolants must agree within
    ``cfg.pv_tol`` (relative to the value).
    """
    cfg = cfg or QuadratureConfig()
    eps = cfg.pv_epsilons
    if outer <= eps[0]:
        raise ValueError("outer radius must exceed the largest excision radius")
    g = radial_profile(h, x0, cfg)
    tail = radial_integrate(h, x0, cfg, inner=eps[0], outer=outer)
    shells = [_log_radial(g, eps[k + 1], eps[k], cfg) for k in range(len(eps) - 1)]
    truncs = [np.asarray(tail.value, dtype=float)]
    for s in shells:
        truncs.append(truncs[-1] + np.asarray(s.value))
    e = np.asarray(eps)
    extraps = []
    for k in range(len(eps) - 2):
        ee = e[k:k + 3]
        # Lagrange weights at zero for the quadratic through three radii
        w0 = ee[1] * ee[2] / ((ee[0] - ee[1]) * (ee[0] - ee[2]))
        w1 = ee[0] * ee[2] / ((ee[1] - ee[0]) * (ee[1] - ee[2]))
        w2 = ee[0] * ee[1] / ((ee[2] - ee[0]) * (ee[2] - ee[1]))
        extraps.append(w0 * truncs[k] + w1 * truncs[k + 1] + w2 * truncs[k + 2])
    value = extraps[-1]
    scale = max(float(np.max(np.abs(value))), cfg.abs_tol)
    change = float(np.max(np.abs(extraps[-1] - extraps[-2]))) if len(extraps) > 1 else 0.0
    s_last = float(np.max(np.abs(shells[-1].value)))
    s_prev = float(np.max(np.abs(shells[-2].value))) if len(shells) > 1 else 2 * s_last
    ratio_eps = eps[-1] / eps[-2]
    if s_last > 0.75 * s_prev and s_last > max(cfg.pv_tol * scale, 1e3 * cfg.abs_tol) and ratio_eps <= 0.75:
        raise DivergentPrincipalValue(
            f"shell contributions are not shrinking ({s_prev:.3e} -> {s_last:.3e}); "
            "the integrand lacks the cancellation a principal value needs")
    quad_err = tail.error_estimate + sum(s.error_estimate for s in shells)
    err = change + quad_err
    converged = change <= cfg.pv_tol * scale + quad_err and tail.converged and all(s.converged for s in shells)
    evals = tail.evaluations + sum(s.evaluations for s in shells)
    if evals > cfg.eval_budget:
        raise BudgetExceededError(f"{evals} evaluations exceed the budget {cfg.eval_budget}")
    out = float(value) if np.ndim(value) == 0 else value
    return IntegrationResult(out, err, evals, converged,
                             {"truncations": [np.asarray(t).tolist() for t in truncs],
                              "extrapolants": [np.asarray(x).tolist() for x in extraps]})
