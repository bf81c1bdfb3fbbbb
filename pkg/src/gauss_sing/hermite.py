"""Gaussian measure, Hermite polynomials and the Ornstein-Uhlenbeck calculus.

Symbol map
----------
Hermite polynomials are the physicists' family (weight ``exp(-x**2)``)::

    H_0 = 1,  H_1 = 2x,  H_{n+1} = 2x H_n - 2n H_{n-1}

and ``H_nu(x) = prod_i H_{nu_i}(x_i)`` for a multi-index ``nu``.  The
Gaussian measure is the probability measure ``pi**(-d/2) exp(-|x|**2) dx``,
under which ``<H_nu, H_mu> = 2**|nu| nu! delta_{nu,mu}``.

Operators on expansions (all exact on polynomials):

======================  ==========================================
``ou_apply``            ``L  = 1/2 Laplacian - <x, grad>``
``alt_ou_apply``        ``Lbar = L - d I``
``gauss_derivative``    ``(1/sqrt 2) d/dx_i``
``..._adjoint``         ``sqrt 2 x_i - (1/sqrt 2) d/dx_i``
======================  ==========================================

Products with ``x_i`` and derivatives are carried out with the three-term
recurrences ``x H_n = H_{n+1}/2 + n H_{n-1}`` and ``H_n' = 2n H_{n-1}``,
never through monomials.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Callable, Iterable, Iterator, Mapping

import numpy as np

__all__ = [
    "DEGREE_CAP",
    "MultiIndex",
    "HermiteExpansion",
    "GaussianMeasure",
    "hermite_1d",
    "hermite_table",
    "hermite_eval",
    "rodrigues_oracle",
    "hermite_norm_sq",
    "multi_indices",
    "partial",
    "multiply_x",
    "ou_apply",
    "ou_apply_calculus",
    "alt_ou_apply",
    "gauss_derivative",
    "gauss_derivative_adjoint",
    "inner_product",
    "lp_norm",
]

DEGREE_CAP = 16
RODRIGUES_MAX = 12


class MultiIndex(tuple):
    """Element of ``N_0^d``; an immutable tuple of non-negative ints."""

    def __new__(cls, entries: Iterable[int]) -> "MultiIndex":
        vals = tuple(int(v) for v in entries)
        if any(v < 0 for v in vals):
            raise ValueError(f"multi-index entries must be >= 0, got {vals}")
        return super().__new__(cls, vals)

    @classmethod
    def zero(cls, dim: int) -> "MultiIndex":
        return cls((0,) * dim)

    @classmethod
    def unit(cls, dim: int, axis: int) -> "MultiIndex":
        """``e_i`` with a one at ``axis`` (zero-based)."""
        return cls(1 if k == axis else 0 for k in range(dim))

    @property
    def dim(self) -> int:
        return len(self)

    @property
    def order(self) -> int:
        return sum(self)

    def dominates(self, other: Iterable[int]) -> bool:
        """Componentwise ``self >= other``."""
        other = tuple(other)
        if len(other) != len(self):
            raise ValueError("dimension mismatch")
        return all(a >= b for a, b in zip(self, other))

    def __add__(self, other):  # type: ignore[override]
        other = tuple(other)
        if len(other) != len(self):
            raise ValueError("dimension mismatch")
        return MultiIndex(a + b for a, b in zip(self, other))

    def __sub__(self, other) -> "MultiIndex":
        other = tuple(other)
        if len(other) != len(self):
            raise ValueError("dimension mismatch")
        return MultiIndex(a - b for a, b in zip(self, other))

    def factorial(self) -> int:
        return math.prod(math.factorial(v) for v in self)

    def falling(self, beta: Iterable[int]) -> int:
        """``prod_i nu_i (nu_i - 1) ... (nu_i - beta_i + 1)``."""
        return math.prod(math.perm(n, b) for n, b in zip(self, beta))

    def __repr__(self) -> str:
        return f"MultiIndex{tuple(self)}"


def multi_indices(dim: int, max_order: int, min_order: int = 0) -> Iterator[MultiIndex]:
    """All multi-indices with ``min_order <= |nu| <= max_order``, graded."""
    for order in range(min_order, max_order + 1):
        for combo in itertools.product(range(order + 1), repeat=dim):
            if sum(combo) == order:
                yield MultiIndex(combo)


def hermite_norm_sq(nu: Iterable[int]) -> float:
    """``||H_nu||_{2,gamma}**2 = 2**|nu| nu!``."""
    nu = MultiIndex(nu)
    return float(2 ** nu.order * nu.factorial())


def hermite_table(nmax: int, x) -> np.ndarray:
    """Stack ``[H_0(x), ..., H_nmax(x)]`` along a new leading axis."""
    x = np.asarray(x, dtype=float)
    out = np.empty((nmax + 1,) + x.shape)
    out[0] = 1.0
    if nmax >= 1:
        out[1] = 2.0 * x
    for n in range(1, nmax):
        out[n + 1] = 2.0 * x * out[n] - 2.0 * n * out[n - 1]
    return out


def hermite_1d(n: int, x):
    if n < 0:
        raise ValueError("degree must be non-negative")
    return hermite_table(n, x)[n]


def hermite_eval(nu: Iterable[int], x) -> np.ndarray | float:
    """Evaluate ``H_nu`` at ``x`` of shape ``(d,)`` or ``(..., d)``."""
    nu = MultiIndex(nu)
    x = np.asarray(x, dtype=float)
    if x.ndim == 0:
        x = x.reshape(1)
    if x.shape[-1] != nu.dim:
        raise ValueError(f"point dimension {x.shape[-1]} != multi-index dimension {nu.dim}")
    val = np.ones(x.shape[:-1])
    for i, n in enumerate(nu):
        if n:
            val = val * hermite_1d(n, x[..., i])
    return float(val) if val.ndim == 0 else val


def rodrigues_oracle(n: int, x: float) -> float:
    """``H_n(x) = (-1)**n exp(x**2) d^n/dx^n exp(-x**2)``, by brute force.

    The n-th derivative of ``exp(-x**2)`` is ``p_n(x) exp(-x**2)`` with
    ``p_{k+1} = p_k' - 2x p_k``; integer monomial coefficients are carried
    exactly.  Test oracle only.
    """
    if not 0 <= n <= RODRIGUES_MAX:
        raise ValueError(f"rodrigues_oracle supports 0 <= n <= {RODRIGUES_MAX}")
    coeffs = [1]  # p_0 = 1, lowest degree first
    for _ in range(n):
        deriv = [k * c for k, c in enumerate(coeffs)][1:] + [0, 0]
        shifted = [0] + [-2 * c for c in coeffs]
        coeffs = [a + b for a, b in itertools.zip_longest(deriv, shifted, fillvalue=0)]
    value = sum(c * x ** k for k, c in enumerate(coeffs))
    return float((-1) ** n * value)


@dataclass(frozen=True)
class HermiteExpansion:
    """Finite sum ``sum_nu c_nu H_nu`` on ``R^d``, stored sparsely."""

    dim: int
    terms: Mapping[MultiIndex, float] = field(default_factory=dict)
    max_degree: int = DEGREE_CAP

    def __post_init__(self):
        if self.dim < 1:
            raise ValueError("dimension must be positive")
        clean: dict[MultiIndex, float] = {}
        for nu, c in dict(self.terms).items():
            nu = MultiIndex(nu)
            if nu.dim != self.dim:
                raise ValueError(f"term {tuple(nu)} does not have dimension {self.dim}")
            if nu.order > self.max_degree:
                raise ValueError(f"degree {nu.order} exceeds cap {self.max_degree}")
            c = float(c)
            if c != 0.0:
                clean[nu] = clean.get(nu, 0.0) + c
        object.__setattr__(self, "terms", clean)

    # construction -------------------------------------------------------

    @classmethod
    def zero(cls, dim: int) -> "HermiteExpansion":
        return cls(dim, {})

    @classmethod
    def basis(cls, nu: Iterable[int], coeff: float = 1.0) -> "HermiteExpansion":
        nu = MultiIndex(nu)
        return cls(nu.dim, {nu: coeff})

    @classmethod
    def normalized(cls, nu: Iterable[int]) -> "HermiteExpansion":
        """``h_nu = H_nu / (2**|nu| nu!)**(1/2)``."""
        nu = MultiIndex(nu)
        return cls(nu.dim, {nu: 1.0 / math.sqrt(hermite_norm_sq(nu))})

    @classmethod
    def constant(cls, dim: int, value: float = 1.0) -> "HermiteExpansion":
        return cls(dim, {MultiIndex.zero(dim): value})

    # algebra ------------------------------------------------------------

    def _check(self, other: "HermiteExpansion") -> None:
        if not isinstance(other, HermiteExpansion):
            raise TypeError("expected a HermiteExpansion")
        if other.dim != self.dim:
            raise ValueError(f"dimension mismatch: {self.dim} vs {other.dim}")

    def __add__(self, other: "HermiteExpansion") -> "HermiteExpansion":
        self._check(other)
        out = dict(self.terms)
        for nu, c in other.terms.items():
            out[nu] = out.get(nu, 0.0) + c
        return HermiteExpansion(self.dim, out, max(self.max_degree, other.max_degree))

    def __neg__(self) -> "HermiteExpansion":
        return self * -1.0

    def __sub__(self, other: "HermiteExpansion") -> "HermiteExpansion":
        return self + (-other)

    def __mul__(self, scalar: float) -> "HermiteExpansion":
        s = float(scalar)
        return HermiteExpansion(self.dim, {nu: s * c for nu, c in self.terms.items()}, self.max_degree)

    __rmul__ = __mul__

    def __truediv__(self, scalar: float) -> "HermiteExpansion":
        return self * (1.0 / float(scalar))

    def map_coefficients(self, fn: Callable[[MultiIndex, float], float]) -> "HermiteExpansion":
        return HermiteExpansion(self.dim, {nu: fn(nu, c) for nu, c in self.terms.items()}, self.max_degree)

    # inspection ---------------------------------------------------------

    @property
    def degree(self) -> int:
        """Maximal ``|nu|``; ``-1`` for the zero expansion."""
        return max((nu.order for nu in self.terms), default=-1)

    def axis_degrees(self) -> tuple[int, ...]:
        return tuple(max((nu[i] for nu in self.terms), default=0) for i in range(self.dim))

    def coefficient(self, nu: Iterable[int]) -> float:
        return self.terms.get(MultiIndex(nu), 0.0)

    def is_zero(self) -> bool:
        return not self.terms

    def max_abs_difference(self, other: "HermiteExpansion") -> float:
        self._check(other)
        keys = set(self.terms) | set(other.terms)
        return max((abs(self.coefficient(k) - other.coefficient(k)) for k in keys), default=0.0)

    def as_arrays(self) -> tuple[np.ndarray, np.ndarray]:
        """``(indices[n_terms, d] int64, coefficients[n_terms])``, sorted."""
        items = sorted(self.terms.items())
        if not items:
            return np.zeros((0, self.dim), dtype=np.int64), np.zeros(0)
        idx = np.array([nu for nu, _ in items], dtype=np.int64).reshape(len(items), self.dim)
        return idx, np.array([c for _, c in items])

    def __iter__(self):
        return iter(sorted(self.terms.items()))

    # evaluation ---------------------------------------------------------

    def __call__(self, x) -> np.ndarray | float:
        """Evaluate at ``x`` of shape ``(d,)`` or ``(..., d)``."""
        x = np.asarray(x, dtype=float)
        if self.dim == 1 and (x.ndim == 0 or x.shape[-1] != 1):
            x = x[..., None]
        if x.shape[-1] != self.dim:
            raise ValueError(f"point dimension {x.shape[-1]} != expansion dimension {self.dim}")
        out = np.zeros(x.shape[:-1])
        if self.terms:
            degs = self.axis_degrees()
            tables = [hermite_table(degs[i], x[..., i]) for i in range(self.dim)]
            for nu, c in self.terms.items():
                term = np.full(x.shape[:-1], c)
                for i, n in enumerate(nu):
                    if n:
                        term = term * tables[i][n]
                out = out + term
        return float(out) if out.ndim == 0 else out

    def gradient(self, x) -> np.ndarray:
        """``grad f`` at ``x``; shape ``x.shape`` (``(..., d)``)."""
        x = np.asarray(x, dtype=float)
        if self.dim == 1 and (x.ndim == 0 or x.shape[-1] != 1):
            x = x[..., None]
        comps = [np.asarray(partial(i, self)(x)) for i in range(self.dim)]
        return np.stack(comps, axis=-1)


@dataclass(frozen=True)
class GaussianMeasure:
    """``gamma_d(dx) = pi**(-d/2) exp(-|x|**2) dx``."""

    dim: int

    def density(self, x) -> np.ndarray | float:
        x = np.asarray(x, dtype=float)
        if self.dim == 1 and (x.ndim == 0 or x.shape[-1] != 1):
            x = x[..., None]
        out = math.pi ** (-self.dim / 2) * np.exp(-np.sum(x * x, axis=-1))
        return float(out) if np.ndim(out) == 0 else out

    def integrate(self, g: Callable, quad=None):
        from .quadrature import QuadratureConfig, gauss_hermite

        return gauss_hermite(g, quad or QuadratureConfig(), self.dim)

    def total_mass(self, quad=None) -> float:
        return self.integrate(lambda x: np.ones(x.shape[0]), quad).value


# -- exact calculus on expansions ---------------------------------------


def _axis(i: int, dim: int) -> None:
    if not 0 <= i < dim:
        raise ValueError(f"axis {i} out of range for dimension {dim} (axes are zero-based)")


def partial(i: int, f: HermiteExpansion) -> HermiteExpansion:
    """``d f / d x_i`` via ``H_n' = 2n H_{n-1}``."""
    _axis(i, f.dim)
    e = MultiIndex.unit(f.dim, i)
    out: dict[MultiIndex, float] = {}
    for nu, c in f.terms.items():
        n = nu[i]
        if n:
            key = nu - e
            out[key] = out.get(key, 0.0) + 2.0 * n * c
    return HermiteExpansion(f.dim, out, f.max_degree)


def multiply_x(i: int, f: HermiteExpansion) -> HermiteExpansion:
    """``x_i f`` via ``x H_n = H_{n+1}/2 + n H_{n-1}``."""
    _axis(i, f.dim)
    e = MultiIndex.unit(f.dim, i)
    out: dict[MultiIndex, float] = {}
    for nu, c in f.terms.items():
        up = nu + e
        out[up] = out.get(up, 0.0) + 0.5 * c
        n = nu[i]
        if n:
            down = nu - e
            out[down] = out.get(down, 0.0) + n * c
    return HermiteExpansion(f.dim, out, max(f.max_degree, f.degree + 1))


def ou_apply(f: HermiteExpansion) -> HermiteExpansion:
    """``L f`` spectrally: ``c_nu -> -|nu| c_nu``."""
    return f.map_coefficients(lambda nu, c: -nu.order * c)


def ou_apply_calculus(f: HermiteExpansion) -> HermiteExpansion:
    """``1/2 Laplacian f - <x, grad f>`` by exact polynomial calculus."""
    out = HermiteExpansion.zero(f.dim)
    for i in range(f.dim):
        d1 = partial(i, f)
        out = out + 0.5 * partial(i, d1) - multiply_x(i, d1)
    return out


def alt_ou_apply(f: HermiteExpansion) -> HermiteExpansion:
    """``Lbar f``: ``c_nu -> -(|nu| + d) c_nu``."""
    d = f.dim
    return f.map_coefficients(lambda nu, c: -(nu.order + d) * c)


def gauss_derivative(i: int, f: HermiteExpansion) -> HermiteExpansion:
    return partial(i, f) * (1.0 / math.sqrt(2.0))


def gauss_derivative_adjoint(i: int, f: HermiteExpansion) -> HermiteExpansion:
    """``sqrt(2) x_i f - (1/sqrt 2) d f/d x_i``."""
    return multiply_x(i, f) * math.sqrt(2.0) - partial(i, f) * (1.0 / math.sqrt(2.0))


def inner_product(f: HermiteExpansion, g: HermiteExpansion) -> float:
    """``<f, g>_gamma`` from orthogonality bookkeeping (no quadrature)."""
    f._check(g)
    return float(sum(c * g.coefficient(nu) * hermite_norm_sq(nu) for nu, c in f.terms.items()))


def lp_norm(f, p: float, quad=None, dim: int | None = None) -> float:
    """``(int |f|**p d gamma_d)**(1/p)`` by tensor Gauss-Hermite quadrature.

    Exact (to rounding) when ``p`` is an even integer and
    ``quad.gh_nodes_per_axis > p * deg(f) / 2``.
    """
    from .quadrature import QuadratureConfig, gauss_hermite

    if p < 1:
        raise ValueError("p must be >= 1")
    quad = quad or QuadratureConfig()
    if isinstance(f, HermiteExpansion):
        dim = f.dim
        if f.is_zero():
            return 0.0
    elif dim is None:
        raise ValueError("dim is required for a plain callable")
    res = gauss_hermite(lambda x: np.abs(f(x)) ** p, quad, dim)
    return float(res.value) ** (1.0 / p)
