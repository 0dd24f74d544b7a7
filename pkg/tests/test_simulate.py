import math

import numpy as np
import pytest
from scipy import stats

from hawkespop.errors import SimulationExplosion
from hawkespop.model import ExponentialMark, HawkesModel, ZeroMark
from hawkespop.moments import (
    MomentIndex,
    assemble_system,
    factorial_to_raw,
    stationary_moments,
    transient_moments,
)
from hawkespop.simulate import (
    estimate_cross_moments,
    estimate_moments,
    simulate_path,
)

from conftest import make_poisson


def idx(nl, nq):
    return MomentIndex(tuple(nl), tuple(nq))


class TestPaths:
    def test_deterministic(self, bivariate):
        a = simulate_path(bivariate, 5.0, seed=123)
        b = simulate_path(bivariate, 5.0, seed=123)
        assert np.array_equal(a.times, b.times)
        assert np.array_equal(a.components, b.components)
        assert np.array_equal(a.lifetimes, b.lifetimes)
        assert np.array_equal(a.marks, b.marks)

    def test_different_replications_differ(self, bivariate):
        a = simulate_path(bivariate, 5.0, seed=123, replication=0)
        b = simulate_path(bivariate, 5.0, seed=123, replication=1)
        assert len(a.times) != len(b.times) or not np.array_equal(a.times, b.times)

    def test_times_strictly_increasing(self, bivariate):
        log = simulate_path(bivariate, 20.0, seed=3)
        assert np.all(np.diff(log.times) > 0)
        assert np.all(log.marks >= 0)
        assert np.all(log.lifetimes > 0)

    def test_intensity_decays_between_events(self, bivariate):
        log = simulate_path(bivariate, 10.0, seed=4)
        assert len(log.times) >= 3
        lo, hi = log.times[1], log.times[2]
        grid = np.linspace(lo + 1e-9, hi - 1e-9, 20)
        values = np.array([log.intensity_at(bivariate, u) for u in grid])
        assert np.all(values >= bivariate.lambda_bar - 1e-12)
        assert np.all(np.diff(values, axis=0) <= 1e-12)  # nonincreasing toward base

    def test_population_two_ways_agree(self, bivariate):
        log = simulate_path(bivariate, 15.0, seed=5)
        for t in (0.5, 3.7, 11.0, 15.0):
            assert np.array_equal(log.population_at(t), log.population_by_sweep(t))

    def test_poisson_interarrivals_pass_ks(self):
        model = HawkesModel([1.0], [1.0], [1.0], [[ZeroMark()]])
        log = simulate_path(model, 1.0e5, seed=6)
        gaps = np.diff(np.concatenate([[0.0], log.times]))
        assert len(gaps) > 90_000
        stat = stats.kstest(gaps, "expon", args=(0.0, 1.0))
        assert stat.pvalue > 0.01

    def test_poisson_rate(self, poisson):
        horizon = 2000.0
        log = simulate_path(poisson, horizon, seed=7)
        rates = log.counts_at(horizon) / horizon
        for i, lb in enumerate([0.7, 1.2]):
            se = math.sqrt(lb / horizon)
            assert abs(rates[i] - lb) <= 3 * se

    def test_stationary_window_mean_intensity(self, bivariate):
        # time-average over a post-burn-in window against the engine value
        want = stationary_moments(assemble_system(bivariate, 1)).mean_intensity()
        grid = np.linspace(100.0, 200.0, 101)
        path_means = []
        for r in range(30):
            log = simulate_path(bivariate, 200.0, seed=88, replication=r)
            vals = np.array([log.intensity_at(bivariate, u) for u in grid])
            path_means.append(vals.mean(axis=0))
        path_means = np.array(path_means)
        mean = path_means.mean(axis=0)
        se = path_means.std(axis=0, ddof=1) / math.sqrt(len(path_means))
        assert np.all(np.abs(mean - want) <= 3 * se)

    def test_explosion_guard(self):
        unstable = HawkesModel(
            [1.0], [1.0], [1.0], [[ExponentialMark(3.0)]], allow_unstable=True
        )
        with pytest.raises(SimulationExplosion):
            simulate_path(unstable, 50.0, seed=8, max_events=2000)

    def test_zero_mu_never_departs(self):
        model = HawkesModel([1.0], [1.0], [0.0], [[ZeroMark()]])
        log = simulate_path(model, 50.0, seed=9)
        assert np.all(np.isinf(log.lifetimes))
        assert np.array_equal(log.population_at(50.0), log.counts_at(50.0))

    def test_bad_horizon(self, bivariate):
        with pytest.raises(ValueError):
            simulate_path(bivariate, 0.0, seed=1)


class TestMomentEstimates:
    def test_zero_time_exact(self, bivariate):
        est = estimate_moments(bivariate, 0.0, 2, replications=10, master_seed=1)
        assert est[idx((1, 0), (0, 0))].value == 0.5
        assert est[idx((2, 0), (0, 0))].value == 0.25
        assert est[idx((0, 0), (1, 0))].value == 0.0
        assert all(e.stderr == 0.0 for e in est.values())

    def test_unbiased_against_engine(self, bivariate):
        est = estimate_moments(bivariate, 5.0, 2, replications=2000, master_seed=42)
        exact = transient_moments(assemble_system(bivariate, 2), 5.0, "closed_form")
        for i, e in est.items():
            assert abs(e.value - exact[i]) <= 4 * e.stderr

    def test_third_moments_within_error(self, bivariate):
        est = estimate_moments(bivariate, 3.0, 3, replications=6000, master_seed=55)
        exact = transient_moments(assemble_system(bivariate, 3), 3.0, "closed_form")
        worst = max(
            abs(e.value - exact[i]) / e.stderr
            for i, e in est.items()
            if i.order == 3
        )
        assert worst <= 4.0

    def test_parallel_matches_serial(self, bivariate):
        serial = estimate_moments(bivariate, 2.0, 1, replications=40, master_seed=11)
        parallel = estimate_moments(
            bivariate, 2.0, 1, replications=40, master_seed=11, n_jobs=2
        )
        for i in serial:
            assert serial[i].value == parallel[i].value
            assert serial[i].stderr == parallel[i].stderr

    def test_confidence_interval_coverage(self):
        # 95% intervals for E[Q(1)] should cover the truth about 95 times
        # out of 100 (Poisson model keeps paths cheap)
        model = make_poisson()
        want = transient_moments(
            assemble_system(model, 1), 1.0, "closed_form"
        ).mean_population()[0]
        target = idx((0, 0), (1, 0))
        hits = 0
        for rep in range(100):
            est = estimate_moments(model, 1.0, 1, replications=200,
                                   master_seed=1000 + rep)[target]
            if abs(est.value - want) <= 1.96 * est.stderr:
                hits += 1
        assert 87 <= hits <= 100

    def test_needs_replications(self, bivariate):
        with pytest.raises(ValueError):
            estimate_moments(bivariate, 1.0, 1, replications=1, master_seed=0)


class TestCrossEstimates:
    def test_zero_lag_reduces_to_second_moments(self, bivariate):
        est = estimate_cross_moments(
            bivariate, 3.0, 1e-9, replications=3000, master_seed=21
        )
        raw = factorial_to_raw(
            transient_moments(assemble_system(bivariate, 2), 3.0, "closed_form")
        )
        want = raw[idx((0, 0), (2, 0))]
        got = est["QQ"][0][0]
        assert abs(got.value - want) <= 4 * got.stderr

    def test_mm_infty_autocovariance(self, poisson):
        t, tau = 1.5, 0.8
        est = estimate_cross_moments(poisson, t, tau, replications=4000, master_seed=22)
        m_t = 0.7 * (1 - math.exp(-0.5 * t)) / 0.5
        m_tau = 0.7 * (1 - math.exp(-0.5 * (t + tau))) / 0.5
        want = m_t * m_tau + m_t * math.exp(-0.5 * tau)
        got = est["QQ"][0][0]
        assert abs(got.value - want) <= 4 * got.stderr

    def test_intensity_cross_consistency(self, bivariate):
        from hawkespop.fd import fd_cross_moment

        t, tau = 1.5, 1.0
        est = estimate_cross_moments(bivariate, t, tau, replications=4000, master_seed=23)
        for (i, j) in ((0, 0), (1, 0)):
            want = fd_cross_moment(bivariate, t, tau, i, j, "LL")
            got = est["LL"][i][j]
            assert abs(got.value - want) <= 4 * got.stderr
