import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ssumkit.core import RngStream, check_tightness, run_ssum
from ssumkit.errors import InfeasibleStart
from ssumkit.experiments.oracles import l1_quadratic_minimizer
from ssumkit.services.sg_variants import (
    QuadraticSurrogateModel,
    SmoothProblem,
    estimate_lipschitz,
    finite_sampler,
    l1_ssum_sg,
    lipschitz_ratio,
    projected_sg_run,
    projected_ssum_sg,
    sg_run,
    shrink,
    ssum_sg_model,
)


def half_squared_distance(l1=0.0, lipschitz=1.0, alpha=None, projection=None):
    """g1(x, xi) = 0.5||x - xi||^2."""
    return SmoothProblem(
        grad=lambda x, xi: x - xi,
        lipschitz=lipschitz,
        value=lambda x, xi: 0.5 * float(np.sum((x - xi) ** 2)),
        projection=projection,
        l1=l1,
        alpha=alpha,
    )


def gaussian_sampler(dim, mean=1.0):
    return lambda gen: mean + gen.standard_normal(dim)


def constant_sampler(value):
    return lambda gen: np.asarray(value, dtype=float)


class TestShrink:
    def test_cases(self):
        z = np.array([3.0, -3.0, 0.5, -0.5, 0.0])
        np.testing.assert_array_equal(shrink(z, 1.0), [2.0, -2.0, 0.0, 0.0, 0.0])
        np.testing.assert_array_equal(shrink(z, 0.0), z)

    def test_negative_threshold(self):
        with pytest.raises(ValueError):
            shrink(np.ones(2), -0.1)

    @settings(max_examples=100, deadline=None)
    @given(
        z=st.lists(st.floats(-1e3, 1e3), min_size=1, max_size=8),
        tau=st.floats(0.0, 100.0),
    )
    def test_is_the_l1_prox(self, z, tau):
        z = np.array(z)
        expected = l1_quadratic_minimizer(1.0, -z, tau)
        np.testing.assert_allclose(shrink(z, tau), expected, atol=1e-9)


class TestSGRun:
    def test_unit_curvature_gives_the_running_mean(self):
        sampler = gaussian_sampler(3)
        trace = sg_run(
            half_squared_distance(), np.zeros(3), 50, sampler, rng=4, keep_iterates=True
        )
        gen = RngStream(4).generator()
        samples = np.array([sampler(gen) for _ in range(50)])
        means = np.cumsum(samples, axis=0) / np.arange(1, 51)[:, None]
        iterates = np.array(trace.iterates)
        np.testing.assert_allclose(iterates, means, rtol=1e-12, atol=1e-12)

    @pytest.mark.parametrize(
        "alpha", [None, lambda r: 1.0 + 1.0 / r], ids=["constant", "schedule"]
    )
    def test_matches_the_ssum_aggregate_minimizer(self, alpha):
        problem = half_squared_distance(lipschitz=2.0, alpha=alpha)
        sampler = gaussian_sampler(4)
        direct = sg_run(problem, np.zeros(4), 40, sampler, rng=9)
        ssum = run_ssum(ssum_sg_model(problem), sampler, np.zeros(4), 40, rng=9)
        np.testing.assert_allclose(direct.final, ssum.final, rtol=1e-10, atol=1e-12)
        np.testing.assert_allclose(
            direct.step_norms, ssum.step_norms, rtol=1e-8, atol=1e-12
        )

    def test_constant_step(self):
        trace = sg_run(
            half_squared_distance(),
            np.zeros(1),
            3,
            constant_sampler([2.0]),
            step_rule="constant",
            step=0.5,
            keep_iterates=True,
        )
        np.testing.assert_allclose(np.ravel(trace.iterates), [1.0, 1.5, 1.75])

    def test_step_rule_validation(self):
        problem = half_squared_distance()
        sampler = constant_sampler([0.0])
        with pytest.raises(ValueError):
            sg_run(problem, np.zeros(1), 3, sampler, step_rule="constant")
        with pytest.raises(ValueError):
            sg_run(problem, np.zeros(1), 3, sampler, step_rule="armijo")
        with pytest.raises(ValueError):
            sg_run(problem, np.zeros(1), 0, sampler)

    def test_alpha_schedule_must_stay_positive(self):
        problem = half_squared_distance(alpha=lambda r: 1.0 - r)
        with pytest.raises(ValueError):
            sg_run(problem, np.zeros(1), 3, constant_sampler([0.0]))


class TestQuadraticSurrogate:
    @staticmethod
    def quadratic(lipschitz):
        Q = np.diag([4.0, 1.0])
        return SmoothProblem(
            grad=lambda x, xi: Q @ x,
            lipschitz=lipschitz,
            value=lambda x, xi: 0.5 * float(x @ Q @ x),
        )

    def test_true_constant_is_tight(self):
        model = QuadraticSurrogateModel(self.quadratic(4.0))
        report = check_tightness(model, np.array([1.0, 0.0]), np.zeros(2), None)
        assert report.ok

    def test_halved_constant_is_not_an_upper_bound(self):
        model = QuadraticSurrogateModel(self.quadratic(2.0))
        report = check_tightness(model, np.array([1.0, 0.0]), np.zeros(2), None)
        assert report.a1_ok
        assert not report.a2_ok
        assert report.a2_margin == pytest.approx(-1.0)

    def test_surrogate_values_need_a_value_oracle(self):
        problem = SmoothProblem(grad=lambda x, xi: x, lipschitz=1.0)
        model = QuadraticSurrogateModel(problem)
        with pytest.raises(ValueError, match="value set"):
            model.eval_ghat(np.ones(2), np.zeros(2), None)
        model.observe(np.zeros(2), None)
        with pytest.raises(ValueError, match="value set"):
            model.eval_aggregate(np.ones(2))
        np.testing.assert_array_equal(model.minimize_aggregate(), np.zeros(2))

    def test_l1_aggregate_minimizer(self, gen):
        lam = 0.3
        model = QuadraticSurrogateModel(half_squared_distance(l1=lam, lipschitz=2.0))
        y = np.zeros(5)
        for _ in range(6):
            model.observe(y, gen.standard_normal(5))
            y = model.minimize_aggregate()
        r = model.n_observed
        expected = l1_quadratic_minimizer(model.alpha_sum / r, -model.S / r, lam)
        np.testing.assert_allclose(y, expected, atol=1e-12)

    def test_constraint_and_l1_do_not_mix(self):
        problem = half_squared_distance(l1=0.1, projection=lambda x: x)
        with pytest.raises(ValueError):
            QuadraticSurrogateModel(problem)


def unit_box(x):
    return np.clip(x, 0.0, 1.0)


class TestProjectedSSUMSG:
    def test_identity_projection_is_plain_sg(self):
        sampler = gaussian_sampler(3)
        problem = half_squared_distance(projection=lambda x: x)
        projected = projected_ssum_sg(problem, np.zeros(3), 30, sampler, rng=2)
        plain = sg_run(half_squared_distance(), np.zeros(3), 30, sampler, rng=2)
        np.testing.assert_allclose(projected.final, plain.final, rtol=1e-12, atol=1e-12)

    def test_auxiliary_sequence_leaves_the_box(self):
        # g1(x) = -x on [0, 1]
        problem = SmoothProblem(
            grad=lambda x, xi: -np.ones_like(x), lipschitz=1.0, projection=unit_box
        )
        auxiliary = []
        trace = projected_ssum_sg(
            problem,
            np.array([0.5]),
            5,
            constant_sampler(0.0),
            keep_iterates=True,
            auxiliary=auxiliary,
        )
        np.testing.assert_allclose(
            np.ravel(auxiliary), [1.5, 1.75, 11.0 / 6.0, 1.875, 1.9]
        )
        np.testing.assert_array_equal(np.ravel(trace.iterates), np.ones(5))

    def test_infeasible_start(self):
        problem = half_squared_distance(projection=unit_box)
        with pytest.raises(InfeasibleStart):
            projected_ssum_sg(problem, np.array([2.0]), 5, constant_sampler([0.0]))

    def test_classic_projected_sg_stays_feasible(self):
        problem = half_squared_distance(projection=unit_box)
        trace = projected_sg_run(
            problem, np.full(2, 0.5), 40, gaussian_sampler(2, mean=3.0), rng=1
        )
        assert np.all((trace.final >= 0.0) & (trace.final <= 1.0))
        np.testing.assert_allclose(trace.final, 1.0, atol=0.05)


class TestL1SSUMSG:
    def test_zero_weight_is_plain_sg(self):
        sampler = gaussian_sampler(3)
        l1 = l1_ssum_sg(half_squared_distance(l1=0.0), np.zeros(3), 30, sampler, 6)
        plain = sg_run(half_squared_distance(), np.zeros(3), 30, sampler, 6)
        np.testing.assert_allclose(l1.final, plain.final, rtol=1e-10, atol=1e-12)

    def test_large_weight_gives_zero(self):
        problem = half_squared_distance(l1=100.0)
        trace = l1_ssum_sg(problem, np.zeros(4), 20, gaussian_sampler(4), rng=3)
        assert not np.any(trace.final)

    def test_constant_sample_reaches_the_shrunk_point(self):
        problem = half_squared_distance(l1=1.0)
        trace = l1_ssum_sg(
            problem, np.zeros(1), 10, constant_sampler([2.0]), keep_iterates=True
        )
        np.testing.assert_allclose(np.ravel(trace.iterates), np.ones(10))

    def test_matches_the_ssum_aggregate_minimizer(self):
        problem = half_squared_distance(l1=0.2, lipschitz=1.5)
        sampler = gaussian_sampler(4, mean=0.3)
        direct = l1_ssum_sg(problem, np.zeros(4), 25, sampler, rng=8)
        model = QuadraticSurrogateModel(problem)
        ssum = run_ssum(model, sampler, np.zeros(4), 25, rng=8)
        np.testing.assert_allclose(direct.final, ssum.final, rtol=1e-10, atol=1e-12)


class TestHelpers:
    def test_power_iteration(self):
        assert estimate_lipschitz(np.diag([3.0, 1.0]), rng=0) == pytest.approx(
            3.0, rel=1e-6
        )
        assert estimate_lipschitz(np.zeros((2, 2))) == 0.0

    def test_finite_sampler(self):
        corpus = np.arange(6.0).reshape(3, 2)
        sample = finite_sampler(corpus)
        gen = RngStream(0).generator()
        drawn = [sample(gen) for _ in range(30)]
        assert all(any(np.array_equal(d, row) for row in corpus) for d in drawn)
        with pytest.raises(ValueError):
            finite_sampler([])

    def test_problem_validation(self):
        with pytest.raises(ValueError):
            half_squared_distance(lipschitz=0.0)
        with pytest.raises(ValueError):
            half_squared_distance(l1=-1.0)


class TestLipschitzRatio:
    @staticmethod
    def random_pair(dim):
        return lambda gen: (
            gen.standard_normal(dim),
            gen.standard_normal(dim),
            gen.standard_normal(dim),
        )

    def test_true_constant_stays_below_one(self):
        Q = np.diag([4.0, 1.0, 0.5])
        problem = SmoothProblem(grad=lambda x, xi: Q @ x - xi, lipschitz=4.0)
        ratio = lipschitz_ratio(problem, self.random_pair(3), 500, rng=1)
        assert 0.0 < ratio <= 1.0 + 1e-12

    def test_understated_constant_is_caught(self):
        Q = np.diag([4.0, 1.0, 0.5])
        problem = SmoothProblem(grad=lambda x, xi: Q @ x - xi, lipschitz=2.0)

        def along_the_top_axis(gen):
            y = gen.standard_normal(3)
            return y + np.array([1.0, 0.0, 0.0]), y, None

        ratio = lipschitz_ratio(problem, along_the_top_axis, 10, rng=2)
        assert ratio == pytest.approx(2.0)

    def test_coincident_points_are_skipped(self):
        problem = half_squared_distance()
        ratio = lipschitz_ratio(problem, lambda gen: (np.ones(2), np.ones(2), 0), 5)
        assert ratio == 0.0

    def test_needs_pairs(self):
        with pytest.raises(ValueError):
            lipschitz_ratio(half_squared_distance(), self.random_pair(2), 0)
