import json
import math
import os

import numpy as np
import pytest

import _oracles as orc
from statrg import AdmissionError, ConfigError, ProblemInstance, RuleConfig, Scheme, Spectrum
from statrg.harness import (
    DetRule,
    ExperimentConfig,
    concentration_study,
    fit_slope,
    selfsim_constant,
    lemma_suite,
    oracle_ratio,
    power_solution,
    rate_study,
    run_experiment,
    run_rmse,
    source_norm,
    source_solution,
    step_growth_study,
    theory_rate,
    worst_direction_run,
)
from statrg.noise import sample_zeta
from statrg.report import CSV_COLUMNS, MCReport, export_report, load_report
from statrg.rules import Grid
from statrg.selfsim import KnConfig


def bench(J=2000, **kw):
    sp = Spectrum.power(1.0, J)
    args = dict(spectrum=sp, x_dag=power_solution(sp, 1.5), x0=np.zeros(J), scheme=Scheme("tikhonov"),
                rule=RuleConfig(1.2, 1.0, "auto"), delta_ladder=[1e-2], replicates=50, seed=2024)
    args.update(kw)
    return ExperimentConfig(**args)


class TestConfig:
    def test_replicates(self):
        with pytest.raises(ConfigError):
            bench(replicates=1)

    def test_ladder_decreasing(self):
        with pytest.raises(ConfigError):
            bench(delta_ladder=[1e-3, 1e-2])

    def test_default_alpha0_is_norm(self):
        sp = Spectrum([4.0, 1.0])
        cfg = ExperimentConfig(sp, [1, 1], [0, 0], Scheme("tikhonov"), RuleConfig(1.2, 1.0))
        assert cfg.grid.alpha0 == 4.0


class TestRecipes:
    def test_source_solution_in_set(self):
        sp = Spectrum.power(1.0, 500)
        x = source_solution(sp, 0.5)
        assert source_norm(sp, x, 0.5) == pytest.approx(1.0, rel=1e-12)

    def test_power_solution(self):
        np.testing.assert_allclose(power_solution(Spectrum.power(1.0, 3), 1.0, 2.0), [2, 1, 2 / 3])


class TestRunRmse:
    def test_exact_start(self):
        sp = Spectrum.power(1.0, 100)
        x = power_solution(sp, 1.0)
        zero = run_rmse(bench(spectrum=sp, x_dag=x, x0=np.zeros(100), replicates=10), 1e-3)
        exact = run_rmse(bench(spectrum=sp, x_dag=x, x0=x, replicates=10), 1e-3)
        # only filtered noise is left, and it is the same noise
        assert exact.rmse < zero.rmse
        for a, e, r in zip(exact.alphas, exact.errors, range(10)):
            zeta = sample_zeta(sp, 2024, r)
            g = (1 - a / (sp.t + a)) / sp.t
            assert e == pytest.approx(np.linalg.norm(g * 1e-3 * zeta), rel=1e-10)

    def test_replay(self):
        sp = Spectrum([1.0])
        cfg = ExperimentConfig(sp, [1.0], [0.0], Scheme("tikhonov"), RuleConfig(1.2, 1.0, "auto"), q=0.7,
                               delta_ladder=[0.05], replicates=4, seed=99)
        res = run_rmse(cfg, 0.05)
        t = [orc.mp.mpf(1)]
        delta = orc.mp.mpf(0.05)
        kappa = orc.kappa_auto(delta, orc.N(t, 1))
        zetas = [orc.mpf_list(sample_zeta(sp, 99, r)) for r in range(4)]
        sels = [orc.scan_statistical(t, [1], [0], z, delta, "tikhonov", orc.mp.mpf(1.2), 1, kappa, 1,
                                     orc.mp.mpf(0.7), 200) for z in zetas]
        ref = orc.mp.sqrt(orc.mp.fsum(orc.error(t, [1], [0], orc.data(t, [1], delta, z), "tikhonov", s[0]) ** 2
                                      for z, s in zip(zetas, sels)) / 4)
        assert res.rmse == pytest.approx(float(ref), rel=1e-12)
        np.testing.assert_allclose(res.alphas, [float(s[0]) for s in sels], rtol=1e-12)

    def test_stderr_delta_method(self):
        res = run_rmse(bench(replicates=40), 1e-2)
        sq = res.errors**2
        expected = math.sqrt(np.var(sq, ddof=1) / sq.size) / (2 * res.rmse)
        assert res.stderr == pytest.approx(expected, rel=1e-12)

    def test_doubling_replicates(self):
        a = run_rmse(bench(replicates=100), 1e-2)
        b = run_rmse(bench(replicates=200), 1e-2)
        assert abs(a.rmse - b.rmse) < 3 * b.stderr
        # common random numbers: the first 100 replicates coincide
        np.testing.assert_array_equal(a.errors, b.errors[:100])

    def test_worker_count_irrelevant(self):
        a = run_experiment(bench(replicates=60, workers=1))
        b = run_experiment(bench(replicates=60, workers=4))
        assert a.to_csv() == b.to_csv()

    def test_error_chains_hold(self):
        res = run_rmse(bench(replicates=100), 1e-3)
        assert res.chain_violations == 0
        assert res.z_bound_violations == 0
        assert res.exhausted == 0

    def test_admission_refused(self):
        sp = Spectrum.power(1.0, 50)
        v = np.zeros(50)
        v[-1] = 1.0
        cfg = bench(spectrum=sp, x_dag=v, x0=np.zeros(50), scheme=Scheme("tsvd"),
                    kn=KnConfig(4.0, 0.25, 0.1))
        with pytest.raises(AdmissionError, match="witness alpha"):
            run_rmse(cfg, 1e-2)


class TestOracleRatio:
    def test_exact_start_below_one(self):
        sp = Spectrum.power(1.0, 50)
        x = power_solution(sp, 1.0)
        assert 0 < oracle_ratio(bench(spectrum=sp, x_dag=x, x0=x, replicates=10), 1e-3) < 10

    def test_finite_and_reasonable(self):
        r = oracle_ratio(bench(replicates=50), 1e-2)
        assert 0.1 < r < 10


class TestRate:
    def test_needs_nu(self):
        with pytest.raises(ConfigError):
            rate_study(bench(delta_ladder=[1e-2, 1e-3, 1e-4]))

    def test_short_ladder(self):
        with pytest.raises(ConfigError):
            rate_study(bench(delta_ladder=[1e-2, 1e-3], nu=0.5))

    def test_outside_source_set(self):
        with pytest.raises(AdmissionError):
            rate_study(bench(delta_ladder=[1e-2, 1e-3, 1e-4], nu=0.5))

    def test_saturation_refused(self):
        sp = Spectrum.power(1.0, 200)
        cfg = bench(spectrum=sp, x_dag=source_solution(sp, 2.0), x0=np.zeros(200),
                    delta_ladder=[1e-2, 1e-3, 1e-4], nu=2.0)
        with pytest.raises(AdmissionError, match="saturates"):
            rate_study(cfg)

    def test_scalar_noise_dominated_slope(self):
        cfg = ExperimentConfig(Spectrum([1.0]), [1e-12], [0.0], Scheme("tikhonov"), RuleConfig(1.2, 1.0, "auto"),
                               delta_ladder=[1e-3, 1e-4, 1e-5, 1e-6], replicates=200, seed=5, nu=0.5)
        slope, _, _ = rate_study(cfg)
        assert slope == pytest.approx(1.0, abs=0.1)

    def test_scalar_theory_slope_limit(self):
        # single atom: Theta(t) ~ sqrt(t), so psi(Theta_psi^{-1}(d)) ~ d**(nu / (nu + 1/2))
        sp = Spectrum([1.0])
        for nu in (0.5, 1.0):
            d = np.array([1e-14, 1e-16])
            r = [theory_rate(sp, nu, x) for x in d]
            from statrg.harness import effective_delta
            slope = fit_slope([effective_delta(x) for x in d], r)
            assert slope == pytest.approx(nu / (nu + 0.5), rel=1e-3)


class TestConcentration:
    sp = Spectrum.power(1.0, 1000)
    g = Grid(1.0, 0.7, 200)

    def test_large_kappa(self):
        res = concentration_study(self.sp, self.g, 10.0, 1e-2, 10_000, seed=1)
        assert res.violations == 0
        assert res.bound_value < 1e-20

    def test_zero_kappa(self):
        assert concentration_study(self.sp, self.g, 0.0, 1e-2, 10_000, seed=1).violations > 0

    def test_bound_decreasing_in_kappa(self):
        b = [concentration_study(self.sp, self.g, k, 1e-2, 10, seed=1).bound_value for k in (0.5, 1, 2, 4)]
        assert np.all(np.diff(b) < 0)


class TestSteps:
    def test_rows(self):
        rows = step_growth_study(bench(replicates=20, delta_ladder=[1e-1, 1e-3]))
        assert [r[0] for r in rows] == [1e-1, 1e-3]
        for delta, steps, n_hat, c_fit, bound in rows:
            assert 1 <= steps <= n_hat + 1 <= bound + 1


class TestLemmaSuite:
    sp = Spectrum.power(1.0, 800)
    kn = KnConfig(4.0, 0.25, 0.1)

    def test_zero_noise_battery(self):
        x = power_solution(self.sp, 1.5)
        inst = ProblemInstance(self.sp, x, x, 1e-2)
        rep = lemma_suite([inst], [Scheme("tikhonov")], [DetRule(1.2, 1.0)], deltas=(1e-2, 1e-3), kn=self.kn)
        assert rep.passed

    @pytest.mark.parametrize("scheme", [Scheme("tikhonov"), Scheme("showalter")], ids=lambda s: s.label)
    def test_power_battery(self, scheme):
        inst = ProblemInstance(self.sp, power_solution(self.sp, 1.5), np.zeros(800), 1e-2)
        rep = lemma_suite([inst], [scheme], [DetRule(1.2, 1.0), DetRule(1.2, 0.1)], kn=self.kn)
        assert all(rep.admitted)
        assert rep.passed, rep.rows()
        assert rep.checks["forced_emergency"].checks > 0
        for name, checks, failures, worst, passed in rep.rows():
            assert checks > 0 and failures == 0

    def test_planted_violation_is_reported_only(self):
        v = np.zeros(800)
        v[-1] = 1.0
        inst = ProblemInstance(self.sp, v, np.zeros(800), 1e-2)
        rep = lemma_suite([inst], [Scheme("tsvd")], [DetRule(1.2, 1.0)], deltas=(1e-2,), kn=self.kn)
        assert rep.admitted == [False]
        assert rep.checks["selfsim_interpolation"].checks == 0
        assert rep.reported_only["selfsim_interpolation"].checks > 0

    def test_selfsim_constant(self):
        # c1 = 2, c2 = 1/2, t0 = 1, alpha0 = 1: 2 + 4*2.25/0.25 + 2 + 4*9 = 76
        assert selfsim_constant(2.0, 0.5, 1.0, 1.0) == pytest.approx(math.sqrt(76.0), rel=1e-15)

    def test_worst_direction_is_admissible(self):
        inst = ProblemInstance(self.sp, power_solution(self.sp, 1.5), np.zeros(800), 1e-3)
        for mu in (0.0, 0.25, 0.5):
            run = worst_direction_run(inst, Scheme("tikhonov"), Grid(1.0, 0.7, 200), 1.2, 1.0, mu)
            assert np.linalg.norm(run.zeta / self.sp.t**mu) <= 1 + 1e-12
            assert np.isfinite(run.ratio) and run.ratio > 0


class TestExport:
    def test_header_only(self, tmp_path):
        p = tmp_path / "r.csv"
        export_report(MCReport(), p, "csv")
        assert p.read_text() == ",".join(CSV_COLUMNS) + "\n"

    def test_row_count_and_round_trip(self, tmp_path):
        cfg = bench(replicates=10, delta_ladder=[1e-1, 1e-2, 1e-3], echo={"note": "x"})
        rep = run_experiment(cfg)
        p = tmp_path / "r.csv"
        export_report(rep, p, "csv")
        assert len(p.read_text().splitlines()) == 1 + 3
        j = tmp_path / "r.json"
        export_report(rep, j, "json")
        back = load_report(j)
        assert back.to_dict() == rep.to_dict()
        assert "created" in json.loads(j.read_text())["metadata"]
        assert "created" not in p.read_text()

    def test_ratio_is_rmse_over_inf(self):
        rep = run_experiment(bench(replicates=10, delta_ladder=[1e-2, 1e-3]))
        for r in rep.rows:
            assert r.ratio == r.rmse / r.oracle_inf and r.rmse >= 0

    def test_unwritable(self, tmp_path):
        with pytest.raises(OSError):
            export_report(MCReport(), tmp_path / "missing" / "r.csv")
        assert os.listdir(tmp_path) == []

    def test_unknown_format(self, tmp_path):
        with pytest.raises(ValueError):
            export_report(MCReport(), tmp_path / "r.x", "xml")
