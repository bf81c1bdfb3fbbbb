"""Riesz-type operators: spectral actions, integral representations, splits.

Spectral actions on ``H_nu`` (exact, coefficientwise):

* ``riesz`` (``beta = e_i``):  ``sqrt(2/|nu|) nu_i H_{nu - e_i}``
* ``higher_riesz``:  ``(2/|nu|)**(|beta|/2) prod_i nu_i!/(nu_i - beta_i)! H_{nu - beta}``
  (zero unless ``beta <= nu``)
* ``alt_riesz``:  ``2**(-|beta|/2) (|nu| + d)**(-|beta|/2) H_{nu + beta}``

The integral route evaluates ``p.v. int K(x, y) f(y) dy`` with the kernel
from :mod:`gauss_sing.kernels` and adds the identity part ``D f(x)`` that a
symmetric principal value drops when ``F`` has an even component
(:func:`gauss_sing.kernels.diagonal_coefficient`).  The iterated route
(:func:`apply_mehler`, :func:`apply_bump`) integrates in ``y`` first, which is
absolutely convergent and needs no principal value.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

import numpy as np

from . import _backend
from .hermite import (HermiteExpansion, MultiIndex, gauss_derivative_adjoint, hermite_norm_sq)
from .kernels import (KernelSpec, diagonal_coefficient, kernel_values, psi_m, psi_m0)
from .quadrature import (IntegrationResult, QuadratureConfig, QuadratureError, gauss_hermite_rule,
                         integrate_unit, pv_integrate, radial_integrate)

__all__ = [
    "SpectralOperator",
    "RegionSplit",
    "GaussianBump",
    "CalibrationResult",
    "CalibrationError",
    "apply_spectral",
    "alt_riesz_potential",
    "ou_riesz_potential",
    "alt_riesz_factorized",
    "normalized_alt_riesz_factor",
    "printed_normalized_factor",
    "expansions_callable",
    "apply_integral",
    "apply_integral_general",
    "apply_mehler",
    "apply_bump",
    "region_split",
    "admissibility_radius",
    "apply_local_global",
    "apply_global",
    "calibrate_cbeta",
    "cbeta_closed_form",
    "default_probes",
]

KINDS = ("riesz", "higher_riesz", "alt_riesz")


@dataclass(frozen=True)
class SpectralOperator:
    kind: str
    beta: MultiIndex
    dim: int

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"kind must be one of {KINDS}")
        beta = MultiIndex(self.beta)
        object.__setattr__(self, "beta", beta)
        if beta.dim != self.dim:
            raise ValueError("beta dimension differs from the operator dimension")
        if beta.order < 1:
            raise ValueError("beta must have order >= 1")
        if self.kind == "riesz" and beta.order != 1:
            raise ValueError("first-order riesz needs a unit multi-index")

    @classmethod
    def riesz(cls, axis: int, dim: int) -> "SpectralOperator":
        return cls("riesz", MultiIndex.unit(dim, axis), dim)


def apply_spectral(op: SpectralOperator, f: HermiteExpansion) -> HermiteExpansion:
    if f.dim != op.dim:
        raise ValueError(f"dimension mismatch: operator {op.dim}, expansion {f.dim}")
    beta = op.beta
    k = beta.order
    out: dict[MultiIndex, float] = {}
    if op.kind == "alt_riesz":
        for nu, c in f.terms.items():
            out[nu + beta] = out.get(nu + beta, 0.0) + c * (2.0 * (nu.order + op.dim)) ** (-k / 2)
        return HermiteExpansion(f.dim, out, max(f.max_degree, f.degree + k))
    for nu, c in f.terms.items():
        n = nu.order
        if n == 0 or not nu.dominates(beta):
            continue
        key = nu - beta
        out[key] = out.get(key, 0.0) + c * (2.0 / n) ** (k / 2) * nu.falling(beta)
    return HermiteExpansion(f.dim, out, f.max_degree)


def alt_riesz_potential(f: HermiteExpansion, power: float) -> HermiteExpansion:
    """``(-Lbar)**(-power)``: ``c_nu -> (|nu| + d)**(-power) c_nu``."""
    d = f.dim
    return f.map_coefficients(lambda nu, c: c * (nu.order + d) ** (-power))


def ou_riesz_potential(f: HermiteExpansion, power: float) -> HermiteExpansion:
    """``(-L)**(-power)`` on the orthogonal complement of constants (constants map to zero)."""
    return f.map_coefficients(lambda nu, c: c * nu.order ** (-power) if nu.order else 0.0)


def alt_riesz_factorized(axis: int, f: HermiteExpansion) -> HermiteExpansion:
    """First-order alternative Riesz transform as adjoint derivative after the potential."""
    return gauss_derivative_adjoint(axis, alt_riesz_potential(f, 0.5))


def normalized_alt_riesz_factor(beta: Iterable[int], nu: Iterable[int]) -> float:
    """Coefficient of ``h_{nu+beta}`` in the image of ``h_nu``, from the ``H_nu`` action.

    Equals ``(|nu| + d)**(-|beta|/2) * prod_i sqrt((nu_i + beta_i)!/nu_i!)``.
    """
    beta, nu = MultiIndex(beta), MultiIndex(nu)
    coef = (2.0 * (nu.order + nu.dim)) ** (-beta.order / 2)
    return coef * math.sqrt(hermite_norm_sq(nu + beta) / hermite_norm_sq(nu))


def printed_normalized_factor(beta: Iterable[int], nu: Iterable[int]) -> float:
    """The variant whose falling product stops at ``nu_i + d`` instead of ``nu_i + 1``.

    Kept for comparison only; it coincides with
    :func:`normalized_alt_riesz_factor` when ``d = 1``.
    """
    beta, nu = MultiIndex(beta), MultiIndex(nu)
    d = nu.dim
    prod = 1.0
    for n, b in zip(nu, beta):
        for j in range(n + d, n + b + 1):
            prod *= j
    return (nu.order + d) ** (-beta.order / 2) * math.sqrt(prod)


# -- integral representation ---------------------------------------------


def expansions_callable(fs: Sequence[HermiteExpansion]) -> Callable:
    """Stack several expansions into one ``(N, d) -> (N, k)`` callable."""
    fs = list(fs)

    def f(pts):
        return np.stack([np.asarray(g(pts)).reshape(len(pts)) for g in fs], axis=-1)

    return f


def _integrand(spec: KernelSpec, f: Callable, cfg: QuadratureConfig, kind: str, backend, stats: dict):
    def h(x0, Z):
        X = np.broadcast_to(np.asarray(x0, dtype=float), Z.shape)
        vals, errs, conv = kernel_values(spec, np.ascontiguousarray(X), np.ascontiguousarray(Z), cfg, kind, backend)
        stats["kernel_evals"] = stats.get("kernel_evals", 0) + len(vals)
        stats["kernel_failures"] = stats.get("kernel_failures", 0) + int(np.sum(~conv))
        fy = np.asarray(f(X + Z), dtype=float)
        return fy * (vals if fy.ndim == 1 else vals[:, None])

    return h


def apply_integral(spec: KernelSpec, f: Callable, x, cfg: QuadratureConfig | None = None,
                   kind: str = "alt", diagonal: bool = True, backend: str | None = None,
                   kernel_cfg: QuadratureConfig | None = None) -> IntegrationResult:
    """``p.v. int K(x, y) f(y) dy + D f(x)`` at one point ``x``.

    ``f`` maps ``(N, d)`` points to ``(N,)`` or ``(N, k)`` values (several
    functions at once share the kernel evaluations).  ``kernel_cfg`` sets
    the tolerances of the inner kernel integrals (defaults to ``cfg``).
    """
    cfg = cfg or QuadratureConfig()
    if spec.dim > 3:
        raise ValueError("integral application is limited to d <= 3")
    x = np.atleast_1d(np.asarray(x, dtype=float))
    stats: dict = {}
    h = _integrand(spec, f, kernel_cfg or cfg, kind, backend, stats)
    res = pv_integrate(h, x, cfg)
    value = np.asarray(res.value, dtype=float)
    diag = 0.0
    if diagonal:
        diag = diagonal_coefficient(spec, cfg)
        if diag != 0.0:
            fx = np.asarray(f(x[None, :]), dtype=float)[0]
            value = value + diag * fx
    res.extras.update(stats, diagonal=diag)
    res.value = float(value) if value.ndim == 0 else value
    return res


def apply_integral_general(spec: KernelSpec, f: Callable, x, cfg: QuadratureConfig | None = None,
                           **kw) -> IntegrationResult:
    """Twin of :func:`apply_integral` for the non-alternative kernel."""
    return apply_integral(spec, f, x, cfg, kind="general", **kw)


def _orient_weight(spec: KernelSpec, kind: str, t):
    if kind == "alt":
        return psi_m(t, spec.m, spec.dim)
    L = -0.5 * np.log1p(-t)
    ratio = np.where(t > 0, L / np.where(t > 0, t, 1.0), 0.5)
    return ratio ** ((spec.m - 2) / 2) * (1.0 - t) ** ((spec.m - 2) / 2)


def apply_mehler(spec: KernelSpec, f: HermiteExpansion, X, cfg: QuadratureConfig | None = None,
                 kind: str = "alt") -> IntegrationResult:
    """Iterated evaluation of the operator on a polynomial ``f`` at points ``X``.

    Substituting ``y = r x + s z`` turns the ``y`` integral into a Gaussian
    average computed exactly by Gauss-Hermite nodes; the remaining ``t``
    integral is regular after the mean-zero cancellation of ``F``.
    """
    cfg = cfg or QuadratureConfig()
    if spec.hermite is None:
        raise ValueError("apply_mehler needs a Hermite kernel function")
    d = spec.dim
    X = np.asarray(X, dtype=float).reshape(-1, d)
    n = (spec.hermite.degree + max(f.degree, 0)) // 2 + 1
    Zn, Wn = gauss_hermite_rule(n, d)

    def integrand(t):
        t = np.asarray(t, dtype=float)
        r = np.sqrt(1.0 - t)
        s = np.sqrt(t)
        out = np.empty((len(t), len(X)))
        for j, (tj, rj, sj) in enumerate(zip(t, r, s)):
            if kind == "alt":
                argF = sj * X[:, None, :] - rj * Zn[None, :, :]
            else:
                argF = np.broadcast_to(Zn[None, :, :], (len(X),) + Zn.shape)
            argf = rj * X[:, None, :] + sj * Zn[None, :, :]
            Fv = spec.value(argF.reshape(-1, d)).reshape(len(X), -1)
            fv = np.asarray(f(argf.reshape(-1, d))).reshape(len(X), -1)
            out[j] = (Fv * fv) @ Wn
        w = 0.5 * math.pi ** (d / 2) * _orient_weight(spec, kind, t) / t
        return out * w[:, None]

    res = integrate_unit(integrand, cfg)
    return res


@dataclass(frozen=True)
class GaussianBump:
    """``f(y) = amplitude * exp(-|y - center|**2 / sigma**2)``."""

    center: np.ndarray
    sigma: float
    amplitude: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "center", np.atleast_1d(np.asarray(self.center, dtype=float)))
        if not self.sigma > 0:
            raise ValueError("sigma must be positive")

    @classmethod
    def normalized(cls, center, sigma: float) -> "GaussianBump":
        """Bump with unit ``L^1(gamma_d)`` norm."""
        c = np.atleast_1d(np.asarray(center, dtype=float))
        d = c.size
        P = 1.0 + 1.0 / sigma ** 2
        amp = P ** (d / 2) * math.exp(float(c @ c) / (1.0 + sigma ** 2))
        return cls(c, sigma, amp)

    @property
    def dim(self) -> int:
        return self.center.size

    def __call__(self, Y) -> np.ndarray:
        Y = np.asarray(Y, dtype=float).reshape(-1, self.dim)
        return self.amplitude * np.exp(-np.sum((Y - self.center) ** 2, axis=1) / self.sigma ** 2)

    def l1_gamma(self) -> float:
        d = self.dim
        P = 1.0 + 1.0 / self.sigma ** 2
        return self.amplitude * P ** (-d / 2) * math.exp(-float(self.center @ self.center) / (1.0 + self.sigma ** 2))


def apply_bump(spec: KernelSpec, bump: GaussianBump, X, cfg: QuadratureConfig | None = None,
               kind: str = "alt", backend: str | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Operator applied to a Gaussian bump at the rows of ``X``; returns (values, errors)."""
    cfg = cfg or QuadratureConfig()
    d = spec.dim
    if bump.dim != d:
        raise ValueError("bump dimension differs from the kernel dimension")
    X = np.ascontiguousarray(np.asarray(X, dtype=float).reshape(-1, d))
    kcode, ocode = {"alt": (0, 0), "general": (1, 1)}[kind]
    if spec.hermite is not None:
        n = spec.hermite.degree // 2 + 1
        be = _backend.get(backend)
        idx, coef = spec.hermite.as_arrays()
        extra = {}
    else:
        n = min(cfg.gh_nodes_per_axis, 64)
        be = _backend.python_backend
        idx, coef = None, None
        extra = {"F": spec.value}
    ghx, ghw = np.polynomial.hermite.hermgauss(n)
    ghw = ghw / math.sqrt(math.pi)
    vals, errs, _, conv = be.bump_batch(kcode, ocode, spec.m, X, bump.center, bump.sigma,
                                        None if idx is None else np.ascontiguousarray(idx),
                                        None if coef is None else np.ascontiguousarray(coef),
                                        np.ascontiguousarray(ghx), np.ascontiguousarray(ghw),
                                        cfg.abs_tol, cfg.rel_tol, cfg.max_refinements, **extra)
    const = bump.amplitude * math.pi ** (d / 2) * bump.sigma ** d
    return vals * const, errs * const


# -- local / global ------------------------------------------------------


def admissibility_radius(x) -> float:
    """``m(x) = min(1, 1/|x|)``."""
    nx = float(np.linalg.norm(np.atleast_1d(x)))
    return 1.0 if nx <= 1.0 else 1.0 / nx


@dataclass(frozen=True)
class RegionSplit:
    center: np.ndarray
    radius: float

    def __post_init__(self):
        if not self.radius > 0:
            raise ValueError("radius must be positive")

    def local_indicator(self, y) -> np.ndarray:
        y = np.asarray(y, dtype=float).reshape(-1, self.center.size)
        return np.linalg.norm(y - self.center, axis=1) < self.radius

    def is_local(self, y) -> bool:
        return bool(self.local_indicator(y)[0])


def region_split(x, C_d: float = 1.0) -> RegionSplit:
    if not C_d > 0:
        raise ValueError("C_d must be positive")
    x = np.atleast_1d(np.asarray(x, dtype=float))
    return RegionSplit(x, C_d * admissibility_radius(x))


def apply_global(spec: KernelSpec, f: Callable, x, C_d: float = 1.0, cfg: QuadratureConfig | None = None,
                 kind: str = "alt", backend: str | None = None) -> IntegrationResult:
    """Operator restricted to the global region ``|y - x| >= C_d m(x)`` (no principal value needed)."""
    cfg = cfg or QuadratureConfig()
    x = np.atleast_1d(np.asarray(x, dtype=float))
    split = region_split(x, C_d)
    stats: dict = {}
    h = _integrand(spec, f, cfg, kind, backend, stats)
    res = radial_integrate(h, x, cfg, inner=split.radius)
    if np.ndim(res.value) == 0:
        res.value = float(res.value)
    res.extras.update(stats, radius=split.radius)
    return res


def apply_local_global(spec: KernelSpec, f: Callable, x, C_d: float = 1.0, cfg: QuadratureConfig | None = None,
                       kind: str = "alt", backend: str | None = None) -> tuple[IntegrationResult, IntegrationResult]:
    """Operator restricted to ``|y - x| < C_d m(x)`` and to its complement."""
    cfg = cfg or QuadratureConfig()
    x = np.atleast_1d(np.asarray(x, dtype=float))
    split = region_split(x, C_d)
    stats: dict = {}
    h = _integrand(spec, f, cfg, kind, backend, stats)
    local = pv_integrate(h, x, cfg, outer=split.radius)
    diag = diagonal_coefficient(spec, cfg)
    if diag != 0.0:
        local.value = local.value + diag * np.asarray(f(x[None, :]), dtype=float)[0]
    if np.ndim(local.value) == 0:
        local.value = float(local.value)
    local.extras["radius"] = split.radius
    return local, apply_global(spec, f, x, C_d, cfg, kind, backend)


# -- calibration ---------------------------------------------------------


class CalibrationError(QuadratureError):
    """Calibration residual too large (a transcription bug in the kernel)."""


@dataclass
class CalibrationResult:
    beta: MultiIndex
    dim: int
    c_beta: float
    residual: float
    closed_form: float
    probes: np.ndarray
    integral_values: np.ndarray
    spectral_values: np.ndarray
    details: dict = field(default_factory=dict)


def cbeta_closed_form(beta: Iterable[int], d: int) -> float:
    """``2**(-|beta|/2) pi**(-d/2) / Gamma(|beta|/2)``."""
    k = MultiIndex(beta).order
    return 2.0 ** (-k / 2) * math.pi ** (-d / 2) / math.gamma(k / 2)


def default_probes(d: int, which: int = 0) -> np.ndarray:
    """Five fixed probe points; ``which`` selects one of two disjoint sets."""
    if d == 1:
        sets = [[-1.1, -0.4, 0.3, 0.8, 1.5], [-1.3, -0.7, 0.1, 0.55, 1.2]]
        return np.array(sets[which]).reshape(-1, 1)
    rng = np.random.default_rng(1000 + 17 * d + which)
    return np.round(rng.normal(scale=0.8, size=(5, d)), 3)


def calibrate_cbeta(beta: Iterable[int], d: int | None = None, cfg: QuadratureConfig | None = None,
                    probes=None, residual_tol: float = 1e-6, threads: int = 1,
                    extra_functions: Sequence[HermiteExpansion] = ()) -> CalibrationResult:
    """Least-squares constant matching the integral route to the spectral action on ``h_0``.

    ``extra_functions`` are pushed through the same kernel evaluations and
    returned (uncalibrated) in ``details["extra"]`` with shape
    ``(n_probes, len(extra_functions))``.
    """
    beta = MultiIndex(beta)
    d = beta.dim if d is None else d
    if beta.dim != d:
        raise ValueError("beta dimension differs from d")
    if beta.order < 1:
        raise ValueError("|beta| must be >= 1")
    cfg = cfg or QuadratureConfig()
    probes = default_probes(d) if probes is None else np.asarray(probes, dtype=float).reshape(-1, d)
    spec = KernelSpec.from_hermite(beta)
    fs = [HermiteExpansion.constant(d)] + list(extra_functions)
    fcall = expansions_callable(fs)

    def one(x):
        return apply_integral(spec, fcall, x, cfg)

    if threads > 1:
        with ThreadPoolExecutor(threads) as pool:
            results = list(pool.map(one, probes))
    else:
        results = [one(x) for x in probes]
    vals = np.array([np.atleast_1d(r.value) for r in results])
    v = vals[:, 0]
    target = apply_spectral(SpectralOperator("alt_riesz", beta, d), HermiteExpansion.constant(d))(probes)
    target = np.atleast_1d(target)
    denom = float(v @ v)
    if denom == 0:
        raise CalibrationError("integral route vanishes at every probe")
    c = float(v @ target) / denom
    resid = float(np.linalg.norm(c * v - target) / max(np.linalg.norm(target), 1e-300))
    out = CalibrationResult(beta, d, c, resid, cbeta_closed_form(beta, d), probes, v, target,
                            {"extra": vals[:, 1:], "errors": [r.error_estimate for r in results],
                             "converged": [r.converged for r in results],
                             "diagonal": results[0].extras.get("diagonal", 0.0),
                             "kernel_failures": sum(r.extras.get("kernel_failures", 0) for r in results)})
    if resid > residual_tol:
        raise CalibrationError(f"calibration residual {resid:.3e} exceeds {residual_tol:.1e}")
    return out
