import csv
import json
import math

import numpy as np
import pytest
from scipy import integrate
from scipy.special import erf

from gauss_sing.analysis import (ExperimentReport, MaximalFunctionSpec, ball_measure, chebyshev_r_grid,
                                 closed_form_ratio, estimate_operator_norm, estimate_weak11, maximal_function,
                                 sample_gaussian, verify_global_domination, verify_lemma21, verify_lemma22,
                                 verify_local_claim, verify_spectral_identities, write_details_csv)
from gauss_sing.analysis import _weak_statistic
from gauss_sing.hermite import HermiteExpansion
from gauss_sing.kernels import KernelSpec
from gauss_sing.operators import GaussianBump, cbeta_closed_form


def riesz1(d=1):
    beta = (1,) + (0,) * (d - 1)
    return KernelSpec.from_hermite(beta, scale=cbeta_closed_form(beta, d))


class TestReport:
    def test_pass_flag_derived(self):
        rep = ExperimentReport("x", {}, 3, 0.5, 1.0)
        assert rep.passed
        assert not ExperimentReport("x", {}, 3, 1.5, 1.0).passed
        assert ExperimentReport("x", {}, 3, 99.0, None).passed
        with pytest.raises(TypeError):
            ExperimentReport("x", {}, 3, 0.5, 1.0, passed=False)

    def test_round_trip(self, tmp_path):
        rep = verify_spectral_identities(dims=(1,), max_order=3, riesz_order=2, riesz_nu_order=2)
        text = rep.to_json(tmp_path / "r.json")
        back = ExperimentReport.from_json(text)
        assert back.to_dict() == rep.to_dict()
        assert json.loads((tmp_path / "r.json").read_text())["name"] == "spectral_identities"

    def test_tampered_flag_rejected(self):
        data = ExperimentReport("x", {}, 1, 2.0, 1.0).to_dict()
        data["passed"] = True
        with pytest.raises(ValueError):
            ExperimentReport.from_dict(data)

    def test_details_csv(self, tmp_path):
        rep = ExperimentReport("a", {}, 2, 0.1, 1.0, details=[{"x": 1, "y": [1.0, 2.0]}, {"x": 2, "z": "q"}])
        assert rep.details_csv(tmp_path / "d.csv") == 2
        rows = list(csv.reader(open(tmp_path / "d.csv")))
        assert rows[0] == ["x", "y", "z"]
        other = ExperimentReport("b", {}, 1, 0.1, 1.0, details=[{"x": 3}])
        assert write_details_csv([rep, other], tmp_path / "all.csv") == 3
        rows = list(csv.reader(open(tmp_path / "all.csv")))
        assert rows[0][0] == "report" and rows[-1][0] == "b"


class TestSmallExperiments:
    def test_spectral_identities(self):
        rep = verify_spectral_identities(dims=(1, 2), max_order=4, riesz_order=2, riesz_nu_order=3)
        assert rep.passed
        assert all(v <= 1e-12 for v in rep.values["max_error"].values())

    def test_weight_bounds(self):
        rep = verify_lemma21(m_range=(1, 3, 6), d_range=(1, 2), grid=200)
        assert rep.passed
        rows = [r for r in rep.details if r["d"] == 2]
        for r in rows:
            assert r["B_0"] == pytest.approx(r["B_0_target"], abs=1e-6)
        assert any(not r["in_hypothesis"] for r in rep.details)

    def test_global_region_ratio(self):
        rep = verify_lemma22(eta_range=(0.0, 1.0), nu_range=(1.0,), samples=60, seed=3)
        assert math.isfinite(rep.statistic)
        assert len(rep.details) == 120

    def test_local_claim(self):
        rep = verify_local_claim(KernelSpec.from_hermite((1, 0)), samples=30, far_samples=4, seed=1)
        assert math.isfinite(rep.statistic)
        assert {r["region"] for r in rep.details} == {"local", "global"}

    def test_operator_norm(self):
        rep = estimate_operator_norm(riesz1(), p=[2.0, 4.0], degree=3, trials=8, seed=2)
        assert rep.passed
        # R1bar is an isometry of L^2(gamma_1) up to its missing constant term
        assert max(r["ratio"] for r in rep.details if r["p"] == 2.0) <= 1.0 + 1e-12

    def test_operator_norm_validation(self):
        with pytest.raises(ValueError):
            estimate_operator_norm(riesz1(), p=1.0, degree=2, trials=2)

    def test_closed_form_ratio(self):
        assert closed_form_ratio((1,), (0,), 2.0) == pytest.approx(1.0)
        assert closed_form_ratio((1,), (3,), 2.0) == pytest.approx(1.0)
        # p = 4 on H0: ||H1||_4 / sqrt(2) with ||H1||_4^4 = 16 * 3/4
        assert closed_form_ratio((1,), (0,), 4.0) == pytest.approx(12 ** 0.25 / math.sqrt(2))

    def test_weak11_d1(self):
        rep = estimate_weak11(riesz1(), bump_scales=(0.5, 0.25))
        assert rep.passed

    def test_weak_statistic(self):
        vals = np.array([4.0, 2.0, 1.0, 0.5])
        masses = np.full(4, 0.25)
        stat, lam = _weak_statistic(vals, masses)
        # lambda * mass above lambda over the sorted values: 1, 1, 0.75, 0.5
        assert stat == pytest.approx(1.0)
        stat_grid, _ = _weak_statistic(vals, masses, lambdas=[0.5, 1.9, 3.9])
        assert stat_grid <= stat + 1e-15

    def test_sample_gaussian_variance(self, rng):
        pts = sample_gaussian(rng, 200_000, 2)
        np.testing.assert_allclose(pts.var(axis=0), 0.5, rtol=0.02)

    def test_global_domination_small(self):
        rep = verify_global_domination(riesz1(), samples=4, r_nodes=32)
        assert math.isfinite(rep.values["sup"][1])
        assert len(rep.details) == 16


class TestMaximal:
    def test_chebyshev_grid(self):
        r = chebyshev_r_grid(8)
        assert np.all(np.diff(r) > 0) and r[0] > 0 and r[-1] < 1

    def test_spec_validation(self):
        with pytest.raises(ValueError):
            MaximalFunctionSpec(c=0.0)
        with pytest.raises(ValueError):
            MaximalFunctionSpec(dim=3)
        with pytest.raises(ValueError):
            MaximalFunctionSpec(r_grid=(0.5, 0.2))

    @pytest.mark.parametrize("center,radius", [(0.3, 0.5), (-2.0, 1.5), (4.0, 0.1)])
    def test_ball_measure_1d(self, center, radius):
        ref = 0.5 * (erf(center + radius) - erf(center - radius))
        assert ball_measure([center], radius) == pytest.approx(ref, rel=1e-14)

    @pytest.mark.parametrize("center,radius", [((0.3, -0.2), 0.7), ((2.0, 1.0), 1.5), ((0.0, 0.0), 50.0)])
    def test_ball_measure_2d(self, center, radius):
        c1, c2 = center
        dens = lambda y, x: math.exp(-x * x - y * y) / math.pi
        lo, hi = max(c1 - radius, -9), min(c1 + radius, 9)
        ref, _ = integrate.dblquad(dens, lo, hi,
                                   lambda x: c2 - math.sqrt(max(radius ** 2 - (x - c1) ** 2, 0)),
                                   lambda x: c2 + math.sqrt(max(radius ** 2 - (x - c1) ** 2, 0)),
                                   epsabs=1e-14, epsrel=1e-12)
        assert ball_measure(center, radius) == pytest.approx(ref, rel=1e-9)

    def test_ball_measure_degenerate(self):
        assert ball_measure([0.0], 0.0) == 0.0
        with pytest.raises(ValueError):
            ball_measure([0.0, 0.0, 0.0], 1.0)

    def test_closed_form_average_matches_quadrature(self):
        spec = MaximalFunctionSpec(0.5, tuple(chebyshev_r_grid(16)), 1)
        bump = GaussianBump([0.4], 0.7, 2.0)
        plain = lambda p: bump(p)
        a = maximal_function(spec, bump, [0.9], endpoints=False)
        b = maximal_function(spec, plain, [0.9], endpoints=False)
        assert a == pytest.approx(b, rel=1e-10)

    def test_constant_bounds(self):
        # for f = 1 the average is at most 1 and the ball mass at most 1, the ratio is positive
        spec = MaximalFunctionSpec()
        one = lambda p: np.ones(len(p))
        for x in (0.0, 0.5, 2.0):
            val, r = maximal_function(spec, one, [x], return_argmax=True)
            assert val > 0 and 0 <= r <= 1

    def test_dominates_bump_value(self):
        # near r = 1 the ratio tends to a positive multiple of f(x)
        bump = GaussianBump.normalized([0.5], 0.5)
        spec = MaximalFunctionSpec()
        for x in (0.2, 0.5, 1.5):
            assert maximal_function(spec, bump, [x]) >= math.sqrt(2 * math.pi / 0.5) * bump([[x]])[0] / 2 * (1 - 1e-12)

    def test_dimension_check(self):
        with pytest.raises(ValueError):
            maximal_function(MaximalFunctionSpec(), lambda p: np.ones(len(p)), [0.0, 1.0])
