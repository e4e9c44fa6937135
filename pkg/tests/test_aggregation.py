import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, strategies as st

from scalefree.aggregation import (
    ClippedSquareAggregator,
    aggregate_overhead,
    build_grid,
    clip_response,
    clipped_overhead,
    clipped_square_aggregate_step,
    ew_mix_step,
    grid_aggregator,
    grid_index,
    grid_prior,
    grid_prior_exact,
    log_grid_prior,
    logloss_aggregate_step,
    logloss_mixture,
    new_aggregator,
    project_ball,
)
from scalefree.core import LabeledExample, ScaleState, update_scale


class TestGrid:
    @pytest.mark.parametrize("lo,hi,M", [(1, 8, 3), (1, 5, 3), (0.5, 1, 1)])
    def test_sizes(self, lo, hi, M):
        g = build_grid(lo, hi)
        assert g.M == M
        np.testing.assert_array_equal(g.values, lo * 2.0 ** np.arange(M + 1))

    def test_infinite_upper_uses_cap(self):
        assert build_grid(1e-3).size == 65
        assert build_grid(1e-3, math.inf, cap=10).M == 10

    def test_errors(self):
        with pytest.raises(ValueError):
            build_grid(0.0, 1.0)
        with pytest.raises(ValueError):
            build_grid(2.0, 1.0)

    def test_grid_index(self):
        g = build_grid(1.0, 8.0)
        assert [grid_index(g, a) for a in (0.5, 1.0, 1.5, 2.0, 7.0, 100.0)] == [0, 0, 1, 1, 3, 3]


class TestPrior:
    def test_values(self):
        assert grid_prior(0, 1) == pytest.approx(0.75)
        assert grid_prior(1, 1) == pytest.approx(0.25)
        assert [grid_prior_exact(m, 3) for m in range(4)] == [
            Fraction(5, 8), Fraction(5, 24), Fraction(5, 48), Fraction(1, 16)]

    @pytest.mark.parametrize("M", [0, 1, 7, 40, 64])
    def test_exact_sum(self, M):
        assert sum(grid_prior_exact(m, M) for m in range(M + 1)) == 1

    def test_log_prior_matches(self):
        np.testing.assert_allclose(np.exp(log_grid_prior(10)), [grid_prior(m, 10) for m in range(11)], rtol=1e-14)

    def test_out_of_range(self):
        with pytest.raises(ValueError):
            grid_prior(4, 3)

    def test_overhead_example(self):
        # alpha = alpha_min is the m = 0 expert
        assert aggregate_overhead(1.0, 1.0) == pytest.approx(2 * math.log(3.0))


class TestLogLossMixture:
    def test_posterior_mean(self):
        st = new_aggregator(np.log([0.75, 0.25]))
        mix = logloss_mixture(st, np.array([[0.5, 0.5], [1.0, 0.0]]))
        assert mix[0] == pytest.approx(0.625)

    def test_single_expert_identity(self):
        st = new_aggregator(np.zeros(1))
        P = np.array([[0.3, 0.7]])
        mix, st2 = logloss_aggregate_step(st, P, 2)
        np.testing.assert_allclose(mix, P[0])
        np.testing.assert_allclose(st2.weights, [1.0])

    def test_cumulative_loss_telescopes(self, rng):
        prior = np.log([0.75, 0.25])
        st = new_aggregator(prior)
        L = np.zeros(2)
        total = 0.0
        for _ in range(3):
            p = rng.uniform(0.05, 0.95, size=2)
            P = np.stack([p, 1 - p], axis=1)
            y = int(rng.integers(1, 3))
            mix, st = logloss_aggregate_step(st, P, y)
            total -= math.log(mix[y - 1])
            L -= np.log(P[:, y - 1])
        direct = -math.log(0.75 * math.exp(-L[0]) + 0.25 * math.exp(-L[1]))
        assert total == pytest.approx(direct, abs=1e-12)
        assert st.mixture_loss == pytest.approx(direct, abs=1e-12)

    def test_overhead_vs_each_expert(self, rng):
        g = build_grid(1.0, 2.0 ** 9)
        st = grid_aggregator(g)
        L = np.zeros(g.size)
        for _ in range(100):
            P = rng.dirichlet(np.ones(3), size=g.size)
            y = int(rng.integers(1, 4))
            _, st = logloss_aggregate_step(st, P, y)
            L -= np.log(P[:, y - 1])
        assert np.all(st.mixture_loss - L <= -g.log_prior() + 1e-9)

    def test_rejects_bad_distribution(self):
        st = new_aggregator(np.zeros(2))
        with pytest.raises(ValueError):
            logloss_mixture(st, np.array([[0.5, 0.6], [0.5, 0.5]]))


class TestEwStep:
    def test_equal_losses_keep_weights(self):
        st = new_aggregator(np.log([0.2, 0.8]))
        st2 = ew_mix_step(st, np.array([3.0, 3.0]), 1.0)
        np.testing.assert_allclose(st2.weights, [0.2, 0.8], rtol=1e-12)

    def test_eta_zero_is_prior(self):
        st = new_aggregator(np.log([0.2, 0.8]))
        np.testing.assert_allclose(ew_mix_step(st, np.array([0.0, 50.0]), 0.0).weights, [0.2, 0.8])

    def test_softmax_example(self):
        st = new_aggregator(np.zeros(2))
        w = ew_mix_step(st, np.array([0.0, 1.0]), 1.0).weights
        np.testing.assert_allclose(w, [1 / (1 + math.exp(-1)), math.exp(-1) / (1 + math.exp(-1))], rtol=1e-12)
        assert w[0] == pytest.approx(0.7311, abs=1e-4)

    def test_increasing_eta_rejected(self):
        st = ew_mix_step(new_aggregator(np.zeros(2)), np.zeros(2), 1.0)
        with pytest.raises(ValueError):
            ew_mix_step(st, np.zeros(2), 2.0)


class TestClipping:
    def test_clip_response(self):
        np.testing.assert_allclose(clip_response([3.0], 2.0, 3.0), [2.0])
        np.testing.assert_allclose(clip_response([1.0], 2.0, 2.0), [1.0])
        np.testing.assert_allclose(clip_response([5.0], 0.0, 5.0), [0.0])

    def test_projection(self):
        np.testing.assert_allclose(project_ball(np.array([[5.0]]), 2.0), [[2.0]])
        np.testing.assert_allclose(project_ball(np.array([[3.0, 4.0]]), 1.0), [[0.6, 0.8]])

    def test_first_round_action_zero_and_weights_fixed(self):
        st = new_aggregator(np.zeros(2), "clippedSquareEW")
        scale = update_scale(ScaleState(), LabeledExample([0.0], [4.0]))
        a, st2 = clipped_square_aggregate_step(st, np.array([[1.0], [3.0]]), [4.0], scale)
        np.testing.assert_allclose(a, [0.0])
        np.testing.assert_allclose(st2.weights, st.weights)

    def test_projection_and_mean(self):
        agg = ClippedSquareAggregator(np.zeros(1))
        np.testing.assert_allclose(agg.predict(np.array([[5.0]]), 2.0), [2.0])
        agg = ClippedSquareAggregator(np.zeros(2))
        np.testing.assert_allclose(agg.predict(np.array([[0.0], [2.0]]), 2.0), [1.0])


def _run_clipped(ys, actions_fn, log_prior):
    agg = ClippedSquareAggregator(log_prior)
    scale = ScaleState()
    acts, expert_losses = [], np.zeros(log_prior.size)
    for t, y in enumerate(ys):
        E = actions_fn(t)
        a = agg.predict(E, scale.y_max)
        assert np.linalg.norm(a) <= scale.y_max * (1 + 1e-12)
        acts.append(a)
        expert_losses += 0.5 * np.sum((E - y) ** 2, axis=1)
        scale = update_scale(scale, LabeledExample([0.0], y))
        agg.update(E, y, scale)
    loss = sum(0.5 * float(np.sum((a - y) ** 2)) for a, y in zip(acts, ys))
    return np.array(acts), loss, expert_losses, scale


class TestClippedAggregation:
    @pytest.mark.parametrize("seed", range(10))
    def test_regret_vs_each_expert(self, seed):
        rng = np.random.default_rng(seed)
        T, M = int(rng.integers(20, 500)), 6
        ys = rng.normal(size=(T, 1)) * 10.0 ** rng.uniform(-2, 2, size=(T, 1))
        E = rng.normal(size=(T, M, 1)) * np.abs(ys).max()
        lp = log_grid_prior(M - 1)
        _, loss, eloss, scale = _run_clipped(ys, lambda t: E[t], lp)
        bound = 4 * scale.y_max_prev ** 2 * (-lp) + 2 * scale.y_max ** 2
        assert np.all(loss - eloss <= bound + 1e-9)

    @given(st.floats(1e-3, 1e3), st.integers(0, 2 ** 31))
    def test_scale_equivariance(self, a, seed):
        rng = np.random.default_rng(seed)
        ys = rng.normal(size=(40, 1))
        coef = rng.normal(size=(40, 3, 1))

        def run(f):
            yy = f * ys
            # experts equivariant in y: linear in the observed past
            past = lambda t: coef[t] * (yy[t - 1] if t else 0.0)
            return _run_clipped(yy, past, log_grid_prior(2))[0]

        np.testing.assert_allclose(run(a), a * run(1.0), rtol=1e-9, atol=1e-300)

    def test_overhead_forms(self):
        assert clipped_overhead(1.0, 1.0, 1.0) == pytest.approx(8 * math.log(3) + 2)
        assert clipped_overhead(1.0, 1.0, 1.0, form="proof") == pytest.approx(4 * math.log(2) + 2)
        with pytest.raises(ValueError):
            clipped_overhead(1.0, 1.0, 1.0, form="other")
