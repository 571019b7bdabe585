import math

import numpy as np
import pytest
import sympy as sp

from smallnoise.errors import ConfigError
from smallnoise.estimators import EstimatorConfig, Explicit, RateK, RateRho
from smallnoise.gp_cov import CovarianceModel, GridSpec
from smallnoise.kernels import build_higher_order, builtin
from smallnoise.mc_harness import (CLT, CONSISTENCY, LEMMA21, RATE_J, RATE_THETA,
                                   ExperimentPlan, clt_mean, run_experiment, write_report)
from smallnoise.sde_sim import SdeConfig
from smallnoise.trends import constant, sine

EPAN = builtin("epanechnikov")
GRID = GridSpec(1.0, 1024)


def sde(trend=None, hurst=0.5, x0=1.0, grid=GRID):
    return SdeConfig(x0, 0.1, trend or constant(0.5), CovarianceModel("FractionalBM", hurst), grid)


def test_clt_mean_symbolic_oracle():
    t = sp.symbols("t")
    J = sp.Rational(1, 2) * sp.exp(t / 2)
    m_expected = float(sp.diff(J, t, 2).subs(t, sp.Rational(1, 2)) / 2
                       * sp.integrate(sp.Rational(3, 4) * (1 - t ** 2) * t ** 2, (t, -1, 1)))
    m = clt_mean(sde(), EPAN, 1, 0.5)
    assert m == pytest.approx(m_expected, rel=1e-10)
    assert m == pytest.approx(0.01605, abs=1e-5)


def test_clt_requires_nonzero_moment():
    plan = ExperimentPlan(sde(), [0.05], 100, CLT,
                          EstimatorConfig(build_higher_order(2), 0.05, RateK(2)), eval_points=[0.5])
    with pytest.raises(ConfigError, match="moment 3"):
        run_experiment(plan)


class TestPlanValidation:
    @pytest.mark.parametrize("eps", [[0.1, 0.2], [0.1, 0.1], [1.0], []])
    def test_epsilons(self, eps):
        with pytest.raises(ConfigError):
            ExperimentPlan(sde(), eps, 10, LEMMA21)

    def test_clt_reps(self):
        with pytest.raises(ConfigError):
            ExperimentPlan(sde(), [0.1], 50, CLT, EstimatorConfig(EPAN, 0.1, RateK(1)))

    def test_rule_must_match(self):
        plan = ExperimentPlan(sde(), [0.1], 10, RATE_J, EstimatorConfig(EPAN, 0.1, RateRho(2)))
        with pytest.raises(ConfigError):
            run_experiment(plan)


class TestRate:
    def test_single_eps_row(self):
        plan = ExperimentPlan(sde(), [0.1], 20, RATE_J, EstimatorConfig(EPAN, 0.1, RateK(1)),
                              n_eval=5)
        rep = run_experiment(plan)
        sup_rows = [r for r in rep.rows if r["t"] == "sup"]
        assert len(sup_rows) == 1 and len(rep.rows) == 6
        assert rep.gates == []

    def test_unreliable_ratio_flag(self):
        plan = ExperimentPlan(sde(grid=GridSpec(1.0, 2048)), [1e-4], 10, RATE_J,
                              EstimatorConfig(EPAN, 0.1, RateK(1)), n_eval=3)
        row = [r for r in run_experiment(plan).rows if r["t"] == "sup"][0]
        assert row["ratio_reliable"] is False

    def test_theta_rate_reports_event(self):
        plan = ExperimentPlan(sde(sine(0.3, 0.2), x0=0.5), [0.2, 0.1], 100, RATE_THETA,
                              EstimatorConfig(EPAN, 0.1, RateRho(2)), n_eval=5)
        rep = run_experiment(plan)
        sup = [r for r in rep.rows if r["t"] == "sup"]
        assert all(0 <= r["p_A_complement"] <= 1 for r in sup)
        assert {g.name for g in rep.gates} == {"bounded error/eps ratio",
                                               "P(A^c) non-increasing in eps"}

    def test_resolution_guard(self):
        plan = ExperimentPlan(sde(grid=GridSpec(1.0, 64)), [0.01], 10, RATE_J,
                              EstimatorConfig(EPAN, 0.1, RateK(1)))
        with pytest.raises(Exception, match="phi/20"):
            run_experiment(plan)


class TestConsistency:
    def plan(self, n_reps=60, **kw):
        return ExperimentPlan(sde(sine(0.3, 0.2), hurst=0.6), [0.2, 0.1], n_reps, CONSISTENCY,
                              EstimatorConfig(EPAN, 0.1, RateK(1)), n_eval=7, seed_base=5, **kw)

    def test_deterministic(self):
        a = run_experiment(self.plan()).report_csv()
        b = run_experiment(self.plan()).report_csv()
        assert a == b

    def test_threads_and_chunks_do_not_matter(self):
        a = run_experiment(self.plan(chunk_size=16), n_workers=1).report_csv()
        b = run_experiment(self.plan(chunk_size=16), n_workers=4).report_csv()
        assert a == b

    def test_single_rep_marks_se_unavailable(self):
        rep = run_experiment(self.plan(n_reps=1))
        assert all(math.isnan(r["stderr"]) for r in rep.rows)
        assert ",nan," in rep.report_csv()

    def test_seed_changes_results(self):
        a = run_experiment(self.plan()).report_csv()
        b = run_experiment(ExperimentPlan(**{**self.plan().__dict__, "seed_base": 6})).report_csv()
        assert a != b


class TestClt:
    def test_pre_asymptotic_flag(self):
        plan = ExperimentPlan(sde(), [0.2], 200, CLT, EstimatorConfig(EPAN, 0.2, RateK(1)),
                              eval_points=[0.5])
        rep = run_experiment(plan)
        row = rep.rows[0]
        assert row["R_tt"] == pytest.approx(0.5)
        assert row["pre_asymptotic"] is True
        assert len(rep.clt_samples) == 200 and np.all(np.isfinite(rep.clt_samples))

    def test_grid_noise_variance_matches_brownian_formula(self):
        # Var((1/phi) sum K_i dW_i) = (1/phi^2) sum K_i^2 dt -> int K^2 / phi
        plan = ExperimentPlan(sde(grid=GridSpec(1.0, 2048)), [0.05], 100, CLT,
                              EstimatorConfig(EPAN, 0.05, RateK(1)), eval_points=[0.5])
        row = run_experiment(plan).rows[0]
        assert row["noise_variance_grid"] == pytest.approx(0.6 / math.sqrt(0.05), rel=1e-3)


class TestLemma21:
    def test_zero_trend(self):
        plan = ExperimentPlan(sde(constant(0.0, bound_L=1e-9)), [0.2, 0.1], 200, LEMMA21)
        rep = run_experiment(plan)
        assert rep.passed
        assert all(r["mean_sup_gap"] < r["bound"] for r in rep.rows)

    def test_scaling(self):
        plan = ExperimentPlan(sde(sine(0.3, 0.2)), [0.02, 0.01], 200, LEMMA21)
        r1, r2 = run_experiment(plan).rows
        assert 1.5 <= r1["mean_sup_gap"] / r2["mean_sup_gap"] <= 2.5
        assert 1.5 <= r1["bound"] / r2["bound"] <= 2.5

    def test_understated_bound_fails(self):
        # theta = 2 while declaring L ~ 0: the envelope is too small
        plan = ExperimentPlan(sde(constant(2.0, bound_L=1e-9)), [0.1], 500, LEMMA21)
        rep = run_experiment(plan)
        assert not rep.passed


def test_write_report(tmp_path):
    plan = ExperimentPlan(sde(), [0.1], 100, CLT, EstimatorConfig(EPAN, 0.1, RateK(1)),
                          eval_points=[0.5])
    files = write_report(run_experiment(plan), tmp_path)
    assert [f.name for f in files] == ["report.csv", "clt_samples.csv", "manifest.json"]
    assert len((tmp_path / "clt_samples.csv").read_text().splitlines()) == 101
    assert not list(tmp_path.glob("*.tmp"))
