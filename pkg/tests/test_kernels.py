import csv
import math

import mpmath as mp
import numpy as np
import pytest

from gauss_sing.hermite import HermiteExpansion
from gauss_sing.kernels import (KernelEvaluationError, KernelSpec, cz_approx_kernel, diagnostic_kernels,
                                diagonal_coefficient, geometry, growth_probe, kernel_dump, kernel_general,
                                kernel_general_alt, kernel_k1, kernel_values, orthogonality_check, psi_m, psi_m0,
                                varphi_m)
from gauss_sing.quadrature import QuadratureConfig


def mp_kernel(F, m, d, x, y, kind):
    """Reference kernel in 1-d by mpmath, straight from the r-integral."""
    mp.mp.dps = 30
    x, y = mp.mpf(x), mp.mpf(y)

    def g(r):
        s = mp.sqrt(1 - r * r)
        if kind == "k1":
            w, arg = 2 * r, (x - r * y) / s
        else:
            w = (-mp.log(r) / s ** 2) ** (mp.mpf(m - 2) / 2)
            if kind == "alt":
                w, arg = w * r ** (d - 1), (x - r * y) / s
            else:
                w, arg = w * r ** (m - 1), (y - r * x) / s
        return w * F(arg) * mp.exp(-(y - r * x) ** 2 / s ** 2) / s ** (d + 2)

    return float(mp.quad(g, [0, 0.5, 1]))


H = {1: lambda z: 2 * z, 2: lambda z: 4 * z * z - 2, 3: lambda z: 8 * z ** 3 - 12 * z}


class TestWeights:
    def test_psi_at_zero(self):
        for m in range(1, 7):
            assert psi_m(0.0, m, 2) == psi_m0(m) == 2.0 ** (-(m - 2) / 2)

    def test_psi_examples(self):
        assert psi_m(0.5, 2, 2) == 1.0
        assert psi_m(0.5, 4, 2) == pytest.approx(math.log(2), rel=1e-15)
        assert psi_m(0.75, 2, 4) == pytest.approx(0.25)

    def test_psi_domain(self):
        with pytest.raises(ValueError):
            psi_m(1.0, 2, 2)
        with pytest.raises(ValueError):
            psi_m(-0.1, 2, 2)

    def test_varphi_matches_psi(self):
        r = np.linspace(0.05, 0.95, 19)
        for m, d in [(1, 1), (2, 2), (3, 2), (4, 3)]:
            lhs = varphi_m(r, m, d)
            rhs = psi_m(1 - r * r, m, d) * r
            np.testing.assert_allclose(lhs, rhs, rtol=1e-13)

    def test_varphi_endpoints(self):
        with pytest.raises(ValueError):
            varphi_m(1.0, 2, 2)
        assert varphi_m(1.0, 3, 2, extend=True) == psi_m0(3)
        assert varphi_m(0.0, 3, 2, extend=True) == 0.0
        assert varphi_m(0.0, 2, 1, extend=True) == 1.0
        assert math.isinf(varphi_m(0.0, 4, 1, extend=True))


class TestGeometry:
    def test_example(self):
        g = geometry([1.0], [2.0])
        assert g.t0 == pytest.approx(0.75, abs=1e-15)
        assert g.u0 == pytest.approx(3.0, abs=1e-15)

    def test_u_at_t0_equals_u0(self, rng):
        for d in (1, 2, 3):
            for _ in range(50):
                x, y = rng.normal(size=d), rng.normal(size=d)
                g = geometry(x, y)
                if g.b > 0:
                    assert g.u(g.t0) == pytest.approx(g.u0, rel=1e-10, abs=1e-12)

    def test_t0_minimizes_u(self, rng):
        x, y = rng.normal(size=2), rng.normal(size=2)
        g = geometry(x, y)
        t = np.linspace(1e-3, 1 - 1e-3, 2001)
        assert np.min(g.u(t)) >= g.u0 - 1e-9

    def test_shape_mismatch(self):
        with pytest.raises(ValueError):
            geometry([1.0], [1.0, 2.0])


class TestKernels:
    def test_alt_mpmath(self):
        spec = KernelSpec.from_hermite((1,))
        assert kernel_general_alt(spec, [1.0], [2.0]).value == pytest.approx(-0.0365137521932835, rel=1e-12)

    def test_general_mpmath(self):
        spec = KernelSpec.from_hermite((1,))
        assert kernel_general(spec, [1.0], [2.0]).value == pytest.approx(0.218039715368712, rel=1e-12)

    @pytest.mark.parametrize("n", [1, 2, 3])
    @pytest.mark.parametrize("kind", ["alt", "general", "k1"])
    def test_random_pairs_against_mpmath(self, n, kind, rng):
        spec = KernelSpec.from_hermite((n,))
        fn = {"alt": kernel_general_alt, "general": kernel_general, "k1": kernel_k1}[kind]
        for _ in range(3):
            x, y = rng.normal(size=2)
            ref = mp_kernel(H[n], n, 1, x, y, kind)
            assert fn(spec, [x], [y]).value == pytest.approx(ref, rel=1e-9, abs=1e-12)

    def test_callable_path_matches_hermite_path(self, rng):
        spec = KernelSpec.from_hermite((1, 1))
        plain = KernelSpec(2, 2, spec.F)
        X, Z = rng.normal(size=(6, 2)), rng.normal(size=(6, 2))
        a = kernel_values(spec, X, Z)[0]
        b = kernel_values(plain, X, Z)[0]
        np.testing.assert_allclose(a, b, rtol=1e-9, atol=1e-12)

    def test_diagonal_rejected(self):
        spec = KernelSpec.from_hermite((1, 0))
        with pytest.raises(KernelEvaluationError):
            kernel_general_alt(spec, [0.3, 0.1], [0.3, 0.1])
        with pytest.raises(KernelEvaluationError):
            kernel_values(spec, [[0.0, 0.0]], [[0.0, 0.0]])

    def test_bad_points(self):
        spec = KernelSpec.from_hermite((1,))
        with pytest.raises(ValueError):
            kernel_general_alt(spec, [1.0, 2.0], [0.0, 1.0])

    def test_tolerance_halving_converges(self):
        spec = KernelSpec.from_hermite((2,))
        ref = mp_kernel(H[2], 2, 1, 0.4, -0.3, "alt")
        errs = []
        for tol in (1e-4, 1e-6, 1e-8, 1e-10):
            cfg = QuadratureConfig(rel_tol=tol, abs_tol=tol * 1e-2)
            errs.append(abs(kernel_general_alt(spec, [0.4], [-0.3], cfg).value - ref))
        assert errs[-1] <= 1e-10 * abs(ref) + 1e-13
        assert errs[-1] <= errs[0]

    def test_near_diagonal_singularity(self):
        spec = KernelSpec.from_hermite((1,))
        z = np.array([1e-3, 1e-4])
        vals = kernel_values(spec, np.zeros((2, 1)), z[:, None])[0]
        # first-order kernels blow up like |x - y|^(-d-... ) ~ 1/z in 1-d
        assert abs(vals[1]) > 5 * abs(vals[0])

    def test_spec_validation(self):
        with pytest.raises(ValueError):
            KernelSpec(0, 1, lambda p: p[:, 0])
        with pytest.raises(ValueError):
            KernelSpec.from_hermite(HermiteExpansion.basis((1, 1)))
        with pytest.raises(ValueError):
            KernelSpec(1, 1, lambda p: p[:, 0], hermite=HermiteExpansion.basis((1, 0)))

    def test_numeric_gradient(self):
        spec = KernelSpec(2, 2, lambda p: p[:, 0] ** 2 * p[:, 1])
        assert spec.gradient_is_numeric
        np.testing.assert_allclose(spec.gradient([[1.0, 2.0]]), [[4.0, 1.0]], rtol=1e-8)


class TestCZ:
    def test_example(self):
        spec = KernelSpec.from_hermite((1,))
        assert cz_approx_kernel(spec, 1.0) == pytest.approx(-2.0, rel=1e-12)

    def test_homogeneity(self, rng):
        spec = KernelSpec.from_hermite((2, 1))
        z = rng.normal(size=2)
        for lam in (0.5, 3.0):
            assert cz_approx_kernel(spec, lam * z) == pytest.approx(lam ** -2 * cz_approx_kernel(spec, z), rel=1e-12)

    def test_mean_zero_on_circle(self):
        for beta in [(1, 0), (0, 2), (1, 1)]:
            spec = KernelSpec.from_hermite(beta)
            th = 2 * np.pi * np.arange(256) / 256
            vals = cz_approx_kernel(spec, np.stack([np.cos(th), np.sin(th)], -1))
            assert abs(vals.mean()) < 1e-12

    def test_zero_rejected(self):
        with pytest.raises(KernelEvaluationError):
            cz_approx_kernel(KernelSpec.from_hermite((1,)), 0.0)

    @pytest.mark.parametrize("h", [1e-3, 1e-4])
    def test_near_diagonal_behaviour(self, h):
        # K1 approaches K(y - x) as y -> x; the alternative kernel carries psi_m(0)/2 on top
        spec = KernelSpec.from_hermite((1,))
        x = 0.3
        k1 = kernel_k1(spec, [x], [x + h]).value
        alt = kernel_general_alt(spec, [x], [x + h]).value
        cz = cz_approx_kernel(spec, h)
        assert k1 == pytest.approx(cz, rel=10 * h)
        assert alt == pytest.approx(psi_m0(1) / 2 * cz, rel=10 * h)


class TestDiagnostics:
    def test_k3_closed_form(self):
        _, k3 = diagnostic_kernels([4.0], [3.0], 0.5)
        assert k3 == pytest.approx(3.0)
        _, k3 = diagnostic_kernels([1.0, 0.0], [0.0, 0.0], 0.5)
        assert k3 == pytest.approx(2.0)

    def test_k2_monotone_in_distance(self):
        vals = [diagnostic_kernels([0.0, 0.0], [r, 0.0], 0.5)[0] for r in (0.2, 0.5, 1.0, 2.0)]
        assert all(a > b for a, b in zip(vals, vals[1:]))

    def test_bad_delta(self):
        with pytest.raises(ValueError):
            diagnostic_kernels([0.0], [1.0], 0.0)


class TestAdmissibility:
    def test_orthogonality(self):
        assert orthogonality_check(KernelSpec.from_hermite((3,))) == pytest.approx(0.0, abs=1e-14)
        assert orthogonality_check(KernelSpec.from_hermite((1, 2))) == pytest.approx(0.0, abs=1e-14)
        assert orthogonality_check(KernelSpec(1, 2, lambda p: p[:, 0] ** 2)) == pytest.approx(0.5, rel=1e-12)

    def test_growth(self):
        assert growth_probe(KernelSpec.from_hermite((3,)), 6.0) < 0.05
        assert growth_probe(KernelSpec(1, 1, lambda p: np.exp(np.sum(p * p, 1))), 6.0) >= 1.0
        with pytest.raises(ValueError):
            growth_probe(KernelSpec.from_hermite((1,)), 0.0)

    def test_diagonal_coefficient(self):
        assert diagonal_coefficient(KernelSpec.from_hermite((2,))) == pytest.approx(-2 * math.sqrt(math.pi), rel=1e-10)
        assert diagonal_coefficient(KernelSpec.from_hermite((1,))) == pytest.approx(0.0, abs=1e-13)
        assert diagonal_coefficient(KernelSpec.from_hermite((1, 0))) == pytest.approx(0.0, abs=1e-13)


def test_kernel_dump(tmp_path):
    spec = KernelSpec.from_hermite((1,))
    path = tmp_path / "k.csv"
    n = kernel_dump(spec, [[0.0], [1.0]], [[1.0], [2.0]], path)
    assert n == 3
    with open(path) as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["x_coords", "y_coords", "kernel", "err_est"]
    assert len(rows) == 4
    first = {(r[0], r[1]): float(r[2]) for r in rows[1:]}
    assert first[("1.0", "2.0")] == pytest.approx(-0.0365137521932835, rel=1e-12)
