import itertools
import warnings

import numpy as np
import pytest

from hawkespop.errors import StabilityError
from hawkespop.model import ExponentialMark, HawkesModel
from hawkespop.moments import (
    MomentIndex,
    assemble_system,
    dimension,
    enumerate_indices,
    factorial_to_raw,
    hawkes_count_moments,
    index_label,
    indices_of_order,
    stationary_moments,
    stationary_second_order,
    transient_moments,
)
from hawkespop.numerics import OdeConfig, integrate_ode



def idx(nl, nq):
    return MomentIndex(tuple(nl), tuple(nq))


class TestDimension:
    @pytest.mark.parametrize("n,want", [(1, 4), (2, 10), (3, 20)])
    def test_bivariate_fixed_values(self, n, want):
        assert dimension(2, n) == want

    @pytest.mark.parametrize("d,n", list(itertools.product(range(1, 5), range(1, 5))))
    def test_matches_enumeration(self, d, n):
        assert dimension(d, n) == len(indices_of_order(d, n))
        total = sum(dimension(d, m) for m in range(1, n + 1))
        assert total == len(enumerate_indices(d, n))

    @pytest.mark.parametrize("d,n", list(itertools.product(range(1, 5), range(1, 5))))
    def test_system_row_count(self, d, n):
        model = HawkesModel(
            [0.5] * d, [2.0] * d, [1.0] * d,
            [[ExponentialMark(0.2) for _ in range(d)] for _ in range(d)],
        )
        system = assemble_system(model, n)
        assert system.F.shape[0] == sum(dimension(d, m) for m in range(1, n + 1))


class TestEnumeration:
    def test_first_order_layout(self):
        got = enumerate_indices(2, 1)
        assert got == (
            idx((1, 0), (0, 0)),
            idx((0, 1), (0, 0)),
            idx((0, 0), (1, 0)),
            idx((0, 0), (0, 1)),
        )

    def test_pure_intensity_block_order(self):
        block = [i for i in indices_of_order(2, 2) if i.q_order == 0]
        assert block == [idx((2, 0), (0, 0)), idx((1, 1), (0, 0)), idx((0, 2), (0, 0))]

    def test_mixed_block_population_varies_slowest(self):
        block = [i for i in indices_of_order(2, 2) if i.q_order == 1]
        assert block == [
            idx((1, 0), (1, 0)),
            idx((0, 1), (1, 0)),
            idx((1, 0), (0, 1)),
            idx((0, 1), (0, 1)),
        ]

    def test_labels(self):
        assert index_label(idx((2, 1), (0, 1))) == "L1^2 L2^1 Q2^[1]"


class TestAssembly:
    def test_first_order_full_matrix(self, bivariate):
        system = assemble_system(bivariate, 1)
        want = np.array(
            [
                [-1.5, 0.5, 0.0, 0.0],
                [0.75, -0.75, 0.0, 0.0],
                [1.0, 0.0, -1.0, 0.0],
                [0.0, 1.0, 0.0, -2.0],
            ]
        )
        assert np.array_equal(system.F, want)
        assert np.array_equal(system.b, np.array([1.5, 1.0, 0.0, 0.0]))
        assert np.array_equal(system.x0, np.array([0.5, 0.5, 0.0, 0.0]))

    def test_second_order_full_matrix(self, bivariate):
        # hand-built 14x14 stacked matrix for the benchmark parameters:
        # second mark moments of exponential laws are 2*mean^2
        system = assemble_system(bivariate, 2)
        F = np.zeros((14, 14))
        F[:4, :4] = np.array(
            [
                [-1.5, 0.5, 0.0, 0.0],
                [0.75, -0.75, 0.0, 0.0],
                [1.0, 0.0, -1.0, 0.0],
                [0.0, 1.0, 0.0, -2.0],
            ]
        )
        # intensity-squared block rows
        F[4:7, 4:7] = np.array(
            [[-3.0, 1.0, 0.0], [0.75, -2.25, 0.5], [0.0, 1.5, -1.5]]
        )
        F[4:7, 0:2] = np.array(
            [[2 * 3.0 * 0.5 + 4.5, 0.5], [1.5 * 0.75 + 1.0, 1.25 * 0.5 + 1.5],
             [1.125, 2 * 2.0 * 0.5 + 3.125]]
        )
        # mixed block
        F[7:11, 7:11] = np.array(
            [
                [-2.5, 0.5, 0.0, 0.0],
                [0.75, -1.75, 0.0, 0.0],
                [0.0, 0.0, -3.5, 0.5],
                [0.0, 0.0, 0.75, -2.75],
            ]
        )
        F[7:11, 4:7] = np.array(
            [[1.0, 0, 0], [0, 1.0, 0], [0, 1.0, 0], [0, 0, 1.0]]
        )
        F[7:11, 0:4] = np.array(
            [
                [1.5, 0.0, 1.5, 0.0],
                [0.75, 0.0, 1.0, 0.0],
                [0.0, 0.5, 0.0, 1.5],
                [0.0, 1.25, 0.0, 1.0],
            ]
        )
        # pure population block
        F[11:14, 11:14] = np.diag([-2.0, -3.0, -4.0])
        F[11:14, 7:11] = np.array(
            [[2.0, 0, 0, 0], [0, 1.0, 1.0, 0], [0, 0, 0, 2.0]]
        )
        assert np.array_equal(system.F, F)
        assert np.array_equal(
            system.b, np.concatenate([[1.5, 1.0], np.zeros(12)])
        )

    def test_forcing_only_on_first_order_intensity_rows(self, trivariate):
        system = assemble_system(trivariate, 3)
        for row, i in enumerate(system.indices):
            if system.b[row] != 0.0:
                assert sum(i.n_lambda) == 1 and sum(i.n_q) == 0

    def test_unstable_warns(self):
        m = HawkesModel([1.0], [1.0], [1.0], [[ExponentialMark(2.0)]],
                        allow_unstable=True)
        with pytest.warns(UserWarning, match="unstable"):
            assemble_system(m, 1)


class TestTrivariateMatrixOdes:
    """The d = 3 second-order rows must reproduce the matrix-valued ODE
    system written directly in terms of E[B], D_alpha and D_mu."""

    def matrix_rhs(self, model, lam, q, ll, lq, qq):
        A = model.mark_mean - np.diag(model.alpha)
        D_alpha = np.diag(model.alpha)
        D_mu = np.diag(model.mu)
        forcing = model.alpha * model.lambda_bar
        d = model.d
        second = np.zeros((d, d))
        for i in range(d):
            for l in range(d):
                for k in range(d):
                    if i == l:
                        second[i, l] += model.mark_moment(i, k, 2) * lam[k]
                    else:
                        second[i, l] += (
                            model.mark_mean[i, k] * model.mark_mean[l, k] * lam[k]
                        )
        d_lam = A @ lam + forcing
        d_q = -D_mu @ q + lam
        d_ll = (
            A @ ll + ll @ A.T + second
            + D_alpha @ np.outer(model.lambda_bar, lam)
            + np.outer(lam, model.lambda_bar) @ D_alpha
        )
        d_lq = A @ lq - lq @ D_mu + ll + np.outer(forcing, q) + model.mark_mean @ np.diag(lam)
        d_qq = -D_mu @ qq - qq @ D_mu + lq + lq.T
        return d_lam, d_q, d_ll, d_lq, d_qq

    def test_rows_match_matrix_form(self, trivariate):
        rng = np.random.default_rng(11)
        d = trivariate.d
        lam = rng.uniform(0.5, 2.0, size=d)
        q = rng.uniform(0.5, 2.0, size=d)
        ll_half = rng.uniform(0.5, 2.0, size=(d, d))
        ll = ll_half + ll_half.T  # symmetric like a true moment matrix
        lq = rng.uniform(0.5, 2.0, size=(d, d))
        qq_half = rng.uniform(0.5, 2.0, size=(d, d))
        qq = qq_half + qq_half.T

        system = assemble_system(trivariate, 2)
        x = np.zeros(len(system.indices))

        def unit(i):
            e = [0] * d
            e[i] = 1
            return tuple(e)

        def pair(i, j):
            e = [0] * d
            e[i] += 1
            e[j] += 1
            return tuple(e)

        zero = (0,) * d
        for i in range(d):
            x[system.row(idx(unit(i), zero))] = lam[i]
            x[system.row(idx(zero, unit(i)))] = q[i]
        for i in range(d):
            for j in range(d):
                x[system.row(idx(pair(i, j), zero))] = ll[i, j]
                x[system.row(idx(unit(i), unit(j)))] = lq[i, j]
                x[system.row(idx(zero, pair(i, j)))] = qq[i, j]

        rhs = system.F @ x + system.b
        d_lam, d_q, d_ll, d_lq, d_qq = self.matrix_rhs(trivariate, lam, q, ll, lq, qq)
        for i in range(d):
            assert rhs[system.row(idx(unit(i), zero))] == pytest.approx(d_lam[i], rel=1e-12)
            assert rhs[system.row(idx(zero, unit(i)))] == pytest.approx(d_q[i], rel=1e-12)
        for i in range(d):
            for j in range(d):
                assert rhs[system.row(idx(unit(i), unit(j)))] == pytest.approx(
                    d_lq[i, j], rel=1e-12
                )
                if i == j:
                    assert rhs[system.row(idx(pair(i, i), zero))] == pytest.approx(
                        d_ll[i, i], rel=1e-12
                    )
                    assert rhs[system.row(idx(zero, pair(i, i)))] == pytest.approx(
                        d_qq[i, i], rel=1e-12
                    )
                else:
                    # off-diagonal stacked rows carry one entry per unordered
                    # pair while the matrix form lists (i,j) and (j,i)
                    assert rhs[system.row(idx(pair(i, j), zero))] == pytest.approx(
                        0.5 * (d_ll[i, j] + d_ll[j, i]), rel=1e-12
                    )
                    assert rhs[system.row(idx(zero, pair(i, j)))] == pytest.approx(
                        0.5 * (d_qq[i, j] + d_qq[j, i]), rel=1e-12
                    )


class TestTransient:
    def test_initial_values(self, bivariate):
        system = assemble_system(bivariate, 2)
        table = transient_moments(system, 0.0)
        assert table[idx((1, 0), (0, 0))] == 0.5
        assert table[idx((2, 0), (0, 0))] == 0.25
        assert table[idx((0, 0), (1, 0))] == 0.0

    def test_ode_vs_closed_form_order3(self, bivariate):
        system = assemble_system(bivariate, 3)
        cf = transient_moments(system, 5.0, "closed_form")
        ode = transient_moments(system, 5.0, "ode")
        worst = max(abs(cf[i] - ode[i]) for i in system.indices)
        assert worst <= 1e-6

    def test_positivity_of_pure_moments(self, bivariate):
        system = assemble_system(bivariate, 3)
        for t in (0.25, 1.0, 5.0):
            table = transient_moments(system, t)
            for i in system.indices:
                if max(i.n_lambda) == sum(i.n_lambda) and max(i.n_q) == sum(i.n_q):
                    assert table[i] > 0.0 or (sum(i.n_q) > 0 and t == 0.0)

    def test_cauchy_schwarz(self, bivariate):
        system = assemble_system(bivariate, 2)
        for t in (0.5, 2.0, 10.0):
            table = transient_moments(system, t)
            lhs = table[idx((1, 1), (0, 0))] ** 2
            rhs = table[idx((2, 0), (0, 0))] * table[idx((0, 2), (0, 0))]
            assert lhs <= rhs * (1 + 1e-12)

    def test_closed_form_needs_nonsingular(self, poisson):
        # mu > 0 and stability make F nonsingular here; just exercise both
        system = assemble_system(poisson, 1)
        a = transient_moments(system, 2.0, "closed_form")
        b = transient_moments(system, 2.0, "ode")
        assert a[idx((0, 0), (1, 0))] == pytest.approx(b[idx((0, 0), (1, 0))], abs=1e-9)


class TestStationary:
    def test_benchmark_values(self, bivariate):
        table = stationary_moments(assemble_system(bivariate, 1))
        assert table.mean_intensity() == pytest.approx([13.0 / 6.0, 3.5], rel=1e-12)
        assert table.mean_population() == pytest.approx([13.0 / 6.0, 1.75], rel=1e-12)

    def test_long_horizon_transient_converges(self, bivariate):
        system = assemble_system(bivariate, 2)
        stat = stationary_moments(system)
        trans = transient_moments(system, 200.0, "closed_form")
        worst = max(abs(stat[i] - trans[i]) for i in system.indices)
        assert worst <= 1e-6

    def test_sylvester_route_matches_stack(self, trivariate):
        lam, q, ll, lq, qq = stationary_second_order(trivariate)
        table = stationary_moments(assemble_system(trivariate, 2))
        d = trivariate.d

        def unit(i):
            e = [0] * d
            e[i] = 1
            return tuple(e)

        def pair(i, j):
            e = [0] * d
            e[i] += 1
            e[j] += 1
            return tuple(e)

        zero = (0,) * d
        for i in range(d):
            assert lam[i] == pytest.approx(table[idx(unit(i), zero)], rel=1e-10)
            assert q[i] == pytest.approx(table[idx(zero, unit(i))], rel=1e-10)
            for j in range(d):
                assert lq[i, j] == pytest.approx(table[idx(unit(i), unit(j))], rel=1e-10)
                assert ll[i, j] == pytest.approx(table[idx(pair(i, j), zero)], rel=1e-10)
                assert qq[i, j] == pytest.approx(table[idx(zero, pair(i, j))], rel=1e-10)

    def test_sylvester_route_matches_long_horizon_ode(self, trivariate):
        # independent oracle: integrate the stacked ODE far out and compare
        lam, q, ll, lq, qq = stationary_second_order(trivariate)
        system = assemble_system(trivariate, 2)
        cfg = OdeConfig(rel_tol=1e-10, abs_tol=1e-12)
        x = integrate_ode(
            lambda _, y: system.F @ y + system.b, system.x0, 0.0, 150.0, cfg
        )
        table = dict(zip(system.indices, x))
        assert lam[0] == pytest.approx(table[idx((1, 0, 0), (0, 0, 0))], abs=1e-7)
        assert ll[0, 1] == pytest.approx(table[idx((1, 1, 0), (0, 0, 0))], abs=1e-6)
        assert qq[1, 2] == pytest.approx(table[idx((0, 0, 0), (0, 1, 1))], abs=1e-6)

    def test_unstable_rejected(self):
        m = HawkesModel([1.0], [1.0], [1.0], [[ExponentialMark(2.0)]],
                        allow_unstable=True)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            system = assemble_system(m, 1)
        with pytest.raises(StabilityError):
            stationary_moments(system)

    def test_zero_mu_rejected(self):
        m = HawkesModel([1.0], [2.0], [0.0], [[ExponentialMark(0.5)]])
        system = assemble_system(m, 1)
        with pytest.raises(StabilityError):
            stationary_moments(system)


class TestOrderFour:
    """Order 4 exercises mark-moment sums with several simultaneous jump
    powers, well beyond the hand-listed matrices."""

    def test_three_routes_agree(self, bivariate):
        from hawkespop.bivariate import recursive_stationary, recursive_transient

        system = assemble_system(bivariate, 4)
        idxs = enumerate_indices(2, 4)
        t = 5.0
        cf = transient_moments(system, t, "closed_form").vector(idxs)
        ode = transient_moments(system, t, "ode").vector(idxs)
        rec = recursive_transient(bivariate, 4, t).vector(idxs)
        scale = np.maximum(1.0, np.abs(cf))
        assert np.max(np.abs(cf - ode) / scale) <= 1e-7
        assert np.max(np.abs(cf - rec) / scale) <= 1e-7
        stack = stationary_moments(system).vector(idxs)
        rec_stat = recursive_stationary(bivariate, 4).vector(idxs)
        assert np.max(np.abs(stack - rec_stat) / np.maximum(1.0, np.abs(stack))) <= 1e-10


class TestMixedMarkLaws:
    def make_model(self):
        from hawkespop.model import DeterministicMark, ZeroMark

        return HawkesModel(
            [0.6, 0.4], [2.5, 2.0], [1.0, 0.8],
            [[DeterministicMark(0.8), ExponentialMark(0.3)],
             [ZeroMark(), DeterministicMark(0.5)]],
        )

    def test_recursive_matches_stack(self):
        from hawkespop.bivariate import recursive_stationary

        model = self.make_model()
        rec = recursive_stationary(model, 3)
        stack = stationary_moments(assemble_system(model, 3))
        worst = max(abs(rec[i] - stack[i]) for i in enumerate_indices(2, 3))
        assert worst <= 1e-10

    def test_monte_carlo_agrees(self):
        from hawkespop.simulate import estimate_moments

        model = self.make_model()
        exact = transient_moments(assemble_system(model, 2), 2.5, "closed_form")
        est = estimate_moments(model, 2.5, 2, replications=6000, master_seed=66)
        worst = max(
            abs(e.value - exact[i]) / max(e.stderr, 1e-12) for i, e in est.items()
        )
        assert worst <= 4.0


class TestConversions:
    def test_order_one_passthrough(self, bivariate):
        table = stationary_moments(assemble_system(bivariate, 1))
        raw = factorial_to_raw(table)
        for i in enumerate_indices(2, 1):
            assert raw[i] == table[i]

    def test_square_and_cube_identities(self, bivariate):
        table = stationary_moments(assemble_system(bivariate, 3))
        raw = factorial_to_raw(table)
        i1, i2, i3 = (
            idx((0, 0), (1, 0)),
            idx((0, 0), (2, 0)),
            idx((0, 0), (3, 0)),
        )
        assert raw[i2] == pytest.approx(table[i2] + table[i1], rel=1e-12)
        assert raw[i3] == pytest.approx(
            table[i3] + 3 * table[i2] + table[i1], rel=1e-12
        )


class TestCountMoments:
    def test_zero_time(self, bivariate):
        assert np.array_equal(hawkes_count_moments(bivariate, 0.0), np.zeros(2))

    def test_poisson_linear_growth(self, poisson):
        got = hawkes_count_moments(poisson, 3.0)
        assert got == pytest.approx([0.7 * 3.0, 1.2 * 3.0], rel=1e-12)

    def test_small_mu_continuity(self, bivariate):
        # E[N(t)] is the mu -> 0 limit of E[Q(t)]
        got = hawkes_count_moments(bivariate, 5.0)
        tiny = HawkesModel(
            bivariate.lambda_bar, bivariate.alpha, [1e-6, 1e-6], bivariate.marks
        )
        table = transient_moments(assemble_system(tiny, 1), 5.0, "closed_form")
        assert got == pytest.approx(table.mean_population(), rel=1e-4)
