import math

import numpy as np
import pytest
from scipy.special import dawsn

from gauss_sing.hermite import hermite_eval, hermite_norm_sq, multi_indices
from gauss_sing.kernels import psi_m
from gauss_sing.quadrature import (BudgetExceededError, DivergentPrincipalValue, IntegrationResult, QuadratureConfig,
                                   QuadratureError, gauss_hermite, gauss_hermite_rule, integrate_halfline,
                                   integrate_interval, integrate_unit, pv_integrate, radial_integrate, sphere_rule)

from quad_corpus import CORPUS, honesty


class TestConfig:
    def test_defaults_valid(self):
        cfg = QuadratureConfig()
        assert cfg.eval_budget == 10_000_000
        assert len(cfg.pv_epsilons) >= 3

    @pytest.mark.parametrize("kw", [
        {"abs_tol": 0.0}, {"rel_tol": -1.0}, {"max_refinements": 0}, {"gh_nodes_per_axis": 0},
        {"pv_epsilons": (1e-3, 1e-4)}, {"pv_epsilons": (1e-3, 1e-3, 1e-4)}, {"pv_epsilons": (1e-3, 1e-4, 0.0)},
        {"angular_nodes": 2}, {"eval_budget": 0},
    ])
    def test_invalid(self, kw):
        with pytest.raises(ValueError):
            QuadratureConfig(**kw)

    def test_tightened(self):
        cfg = QuadratureConfig().tightened()
        assert cfg.rel_tol == 0.5e-10 and cfg.abs_tol == 0.5e-12

    def test_result_rejects_negative_error(self):
        with pytest.raises(ValueError):
            IntegrationResult(1.0, -1e-3, 1, True)


class TestAdaptive:
    def test_constant(self):
        res = integrate_unit(lambda t: np.ones_like(t))
        assert res.value == pytest.approx(1.0, abs=1e-14)
        assert res.converged

    def test_inverse_sqrt(self):
        cfg = QuadratureConfig()
        res = integrate_unit(lambda t: t ** -0.5, cfg)
        assert abs(res.value - 2.0) <= max(cfg.abs_tol, cfg.rel_tol * 2)
        assert res.converged

    def test_psi4_against_composite_oracle(self):
        # midpoint rule after t = 1 - u**2, which tames the log at t = 1 (10**6 nodes)
        n = 10 ** 6
        u = (np.arange(n) + 0.5) / n
        ref = np.sum(psi_m(1 - u * u, 4, 2) * 2 * u) / n
        res = integrate_unit(lambda t: psi_m(t, 4, 2))
        assert res.value == pytest.approx(ref, rel=1e-9)
        assert res.value == pytest.approx(math.pi ** 2 / 12, rel=1e-12)

    def test_complement_recovers_digits(self):
        f = lambda t: (1 - t) ** -0.5
        plain = integrate_unit(f)
        exact = integrate_unit(f, complement=lambda s: s ** -0.5)
        assert abs(exact.value - 2.0) < 1e-12
        # the plain run loses the sliver next to t = 1 but says so
        assert abs(plain.value - 2.0) <= 3 * plain.error_estimate

    def test_breakpoints(self):
        f = lambda t: np.abs(t - 0.3) ** 1.5
        res = integrate_interval(f, 0.0, 1.0, breakpoints=[0.3, 0.3])
        assert res.value == pytest.approx((0.3 ** 2.5 + 0.7 ** 2.5) / 2.5, rel=1e-13)

    def test_interval_vector_valued(self):
        res = integrate_interval(lambda x: np.stack([x, x * x], axis=-1), 0.0, 1.0)
        np.testing.assert_allclose(res.value, [0.5, 1 / 3], rtol=1e-13)

    def test_interval_reversed(self):
        assert integrate_interval(np.exp, 1.0, 0.0).value == pytest.approx(1 - math.e, rel=1e-13)

    def test_interval_requires_finite(self):
        with pytest.raises(ValueError):
            integrate_interval(np.exp, 0.0, math.inf)

    def test_halfline(self):
        assert integrate_halfline(lambda x: np.exp(-x), 2.0).value == pytest.approx(math.exp(-2), rel=1e-12)

    def test_nonconvergence_flagged(self):
        cfg = QuadratureConfig(max_refinements=2, rel_tol=1e-14, abs_tol=1e-16)
        res = integrate_interval(lambda x: np.sin(50 * x) ** 2, 0.0, 10.0, cfg)
        assert not res.converged
        assert np.isfinite(res.value)

    def test_budget(self):
        cfg = QuadratureConfig(eval_budget=100, rel_tol=1e-14, abs_tol=1e-16)
        with pytest.raises(BudgetExceededError):
            integrate_interval(lambda x: np.abs(x - 0.1234), 0.0, 1.0, cfg)

    def test_nonfinite_integrand(self):
        with np.errstate(all="ignore"), pytest.raises(QuadratureError):
            integrate_interval(lambda x: 1 / (x - 0.5) ** 2, 0.0, 1.0)

    @pytest.mark.parametrize("name,run,truth", CORPUS, ids=[c[0] for c in CORPUS])
    def test_corpus_value(self, name, run, truth):
        res = run(None)
        assert abs(res.value - truth) <= max(1e-7, 1e-7 * abs(truth))

    @pytest.mark.parametrize("cfg", [None, QuadratureConfig(rel_tol=1e-6, abs_tol=1e-8),
                                     QuadratureConfig(rel_tol=1e-4, abs_tol=1e-6)])
    def test_honesty(self, cfg):
        frac, rows = honesty(cfg)
        assert len(rows) == 20
        assert frac >= 0.95, [r for r in rows if not r[3]]

    def test_converged_implies_within_tolerance(self):
        cfg = QuadratureConfig(rel_tol=1e-8, abs_tol=1e-10)
        for _, run, _ in CORPUS:
            res = run(cfg)
            if res.converged:
                scale = abs(res.value)
                # tolerance plus the round-off floor the stopping rule allows
                assert res.error_estimate <= max(cfg.abs_tol, cfg.rel_tol * scale) * 3 + 1e-13 * max(1, scale)


class TestGaussHermite:
    def test_examples(self):
        assert gauss_hermite(lambda x: np.ones(len(x))).value == pytest.approx(1.0, abs=1e-14)
        assert gauss_hermite(lambda x: x[:, 0] ** 2).value == pytest.approx(0.5, abs=1e-14)
        assert gauss_hermite(lambda x: hermite_eval((2,), x) ** 2).value == pytest.approx(8.0, rel=1e-13)

    def test_rule_shape_and_mass(self):
        nodes, w = gauss_hermite_rule(5, 3)
        assert nodes.shape == (125, 3)
        assert w.sum() == pytest.approx(1.0, abs=1e-14)

    def test_budget(self):
        with pytest.raises(BudgetExceededError):
            gauss_hermite(lambda x: x[:, 0], QuadratureConfig(gh_nodes_per_axis=40, eval_budget=1000), dim=2)

    @pytest.mark.parametrize("n,d", [(3, 1), (8, 1), (4, 2), (3, 3)])
    def test_exactness_random_polynomials(self, n, d):
        rng = np.random.default_rng(n * 10 + d)
        idx = [nu for nu in multi_indices(d, d * (2 * n - 1)) if max(nu) <= 2 * n - 1]
        for _ in range(5):
            c = rng.normal(size=len(idx))
            poly = lambda x: sum(ci * hermite_eval(nu, x) for ci, nu in zip(c, idx))
            got = gauss_hermite(poly, dim=d, nodes=n).value
            scale = math.sqrt(sum(ci * ci * hermite_norm_sq(nu) for ci, nu in zip(c, idx)))
            assert abs(got - c[0]) <= 1e-12 * scale

    def test_orthogonality_bookkeeping(self):
        n = 6
        for a in range(n):
            for b in range(2 * n - a):
                got = gauss_hermite(lambda x: hermite_eval((a,), x) * hermite_eval((b,), x), nodes=n).value
                ref = hermite_norm_sq((a,)) if a == b else 0.0
                assert abs(got - ref) <= 1e-12 * math.sqrt(hermite_norm_sq((a,)) * hermite_norm_sq((b,)))

    def test_error_estimate_zero_for_low_degree(self):
        res = gauss_hermite(lambda x: x[:, 0] ** 4, nodes=10)
        assert res.error_estimate < 1e-14 and res.converged


def _pv_hilbert(x, Z):
    return np.exp(-(x[0] + Z[:, 0]) ** 2) / Z[:, 0]


class TestPrincipalValue:
    def test_odd_integrand_truncations_constant(self):
        res = pv_integrate(lambda x, Z: np.sign(Z[:, 0]) * np.exp(-Z[:, 0] ** 2) / np.abs(Z[:, 0]) ** 1.5, [0.0],
                           outer=5.0)
        assert res.value == 0.0
        assert np.ptp(res.extras["truncations"]) == 0.0

    def test_reciprocal_symmetric_window(self):
        res = pv_integrate(lambda x, Z: 1 / Z[:, 0], [0.3], outer=2.0)
        assert res.value == pytest.approx(0.0, abs=1e-12)
        assert res.converged

    @pytest.mark.parametrize("x0", [-1.1, 0.0, 0.4, 2.0])
    def test_hilbert_of_gaussian(self, x0):
        res = pv_integrate(_pv_hilbert, [x0])
        assert res.value == pytest.approx(-2 * math.sqrt(math.pi) * dawsn(x0), abs=1e-9)
        assert res.converged

    def test_taylor_subtraction_oracle(self):
        # bump g, window of half-width W around x0: pv = int (g(y)-g(x0))/(y-x0) dy
        x0, W = 0.3, 1.5
        g = lambda y: np.exp(-(y - 0.7) ** 2 / 0.18)
        ref = integrate_interval(lambda y: np.where(y == x0, 0.0, (g(y) - g(x0)) / (y - x0)), x0 - W, x0 + W,
                                 breakpoints=[x0]).value
        res = pv_integrate(lambda x, Z: g(x[0] + Z[:, 0]) / Z[:, 0], [x0], outer=W)
        assert res.value == pytest.approx(ref, abs=1e-9)

    def test_divergent(self):
        with pytest.raises(DivergentPrincipalValue):
            pv_integrate(lambda x, Z: 1 / np.abs(Z[:, 0]), [0.3], outer=1.0)

    def test_outer_too_small(self):
        with pytest.raises(ValueError):
            pv_integrate(_pv_hilbert, [0.0], outer=1e-7)

    def test_halved_epsilons_consistency(self):
        h = lambda x, Z: Z[:, 0] / np.sum(Z ** 2, 1) ** 1.5 * np.exp(-np.sum((x + Z) ** 2, 1))
        cfg = QuadratureConfig()
        a = pv_integrate(h, [0.3, 0.1], cfg)
        b = pv_integrate(h, [0.3, 0.1], cfg.with_(pv_epsilons=tuple(e / 2 for e in cfg.pv_epsilons)))
        assert a.converged and b.converged
        assert abs(a.value - b.value) <= max(a.error_estimate, b.error_estimate)

    def test_radial_integrate_ball_volume(self):
        for d, vol in [(1, 2.0), (2, math.pi), (3, 4 * math.pi / 3)]:
            res = radial_integrate(lambda x, Z: np.ones(len(Z)), np.zeros(d), inner=1e-9, outer=1.0)
            assert res.value == pytest.approx(vol, rel=1e-8)
        with pytest.raises(ValueError):
            radial_integrate(lambda x, Z: np.ones(len(Z)), [0.0], inner=0.0)

    def test_sphere_rule_area(self):
        assert sphere_rule(2, 64)[1].sum() == pytest.approx(2 * math.pi)
        assert sphere_rule(3, 16)[1].sum() == pytest.approx(4 * math.pi)
        with pytest.raises(ValueError):
            sphere_rule(4, 8)
