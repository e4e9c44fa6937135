import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import integrate

from scalefree.normal_location import (
    AdaptiveNormal,
    NormalLocationModel,
    minimax_regret_value,
    nml_conditional_predict_1d,
    nml_log_marginal,
    nml_normalizer_oracle,
    normal_log_loss,
    residual_term,
    thm2_bound,
)


class TestMinimaxValue:
    def test_d1_closed_form(self):
        m = NormalLocationModel(1.0, 1, 2)
        expect = 0.5 * math.log(4 / math.pi) + math.log1p(math.sqrt(math.pi) / 2)
        assert minimax_regret_value(1.0, m) == pytest.approx(expect, abs=1e-12)
        assert expect == pytest.approx(0.7554, abs=1e-4)

    def test_residual_decay(self):
        assert residual_term(1.0, NormalLocationModel(1.0, 1, 10 ** 8)) < 1.3e-4
        vals = [residual_term(1.0, NormalLocationModel(1.0, 3, T)) for T in (1, 10, 100, 1000)]
        assert all(a > b for a, b in zip(vals, vals[1:]))

    def test_radius_doubling_shifts_by_ln2(self):
        m = NormalLocationModel(1.0, 1, 2)
        diff = minimax_regret_value(2.0, m) - minimax_regret_value(1.0, m)
        vdiff = residual_term(2.0, m) - residual_term(1.0, m)
        assert diff == pytest.approx(math.log(2.0) + vdiff, abs=1e-12)

    @pytest.mark.parametrize("d,U,T,sigma", [(1, 1.0, 2, 1.0), (2, 1.0, 4, 1.0), (3, 0.3, 7, 2.0), (2, 5.0, 50, 0.5)])
    def test_oracle_agreement(self, d, U, T, sigma):
        m = NormalLocationModel(sigma, d, T)
        assert minimax_regret_value(U, m) == pytest.approx(nml_normalizer_oracle(U, m), abs=1e-6)

    def test_tiny_radius_positive(self):
        assert nml_normalizer_oracle(1e-6, NormalLocationModel(1.0, 2, 3)) > 0

    def test_bad_args(self):
        with pytest.raises(ValueError):
            NormalLocationModel(0.0, 1, 1)
        with pytest.raises(ValueError):
            minimax_regret_value(0.0, NormalLocationModel(1.0, 1, 1))


class TestConditional:
    @pytest.mark.parametrize("hist", [[], [0.3], [2.0, -1.0, 5.0]])
    def test_density_normalizes(self, hist):
        m = NormalLocationModel(1.0, 1, 5)
        f = nml_conditional_predict_1d(hist, 1.0, m)
        total, _ = integrate.quad(f, -np.inf, np.inf, epsabs=1e-12, limit=200)
        assert total == pytest.approx(1.0, abs=1e-8)

    def test_empty_history_symmetric(self):
        f = nml_conditional_predict_1d([], 1.5, NormalLocationModel(1.0, 1, 4))
        for y in (0.1, 1.0, 3.7):
            assert f(y) == pytest.approx(f(-y), rel=1e-12)

    def test_marginal_by_quadrature(self):
        # ln m_t must equal ln of the integral of m_{t+1} over the next outcome
        m = NormalLocationModel(1.3, 1, 6)
        hist = np.array([0.4, -2.0, 1.1])
        t, s, q = hist.size, hist.sum(), hist @ hist
        f = lambda y: math.exp(nml_log_marginal(t + 1, s + y, q + y * y, 0.7, m))
        val, _ = integrate.quad(f, -np.inf, np.inf, epsabs=0, epsrel=1e-11, limit=200)
        assert math.log(val) == pytest.approx(nml_log_marginal(t, s, q, 0.7, m), abs=1e-8)

    def test_full_joint_integrates_to_z(self):
        m = NormalLocationModel(1.0, 1, 1)
        f = lambda y: math.exp(nml_log_marginal(1, y, y * y, 1.0, m))
        val, _ = integrate.quad(f, -np.inf, np.inf)
        assert math.log(val) == pytest.approx(minimax_regret_value(1.0, m), abs=1e-8)

    def test_horizon_exhausted(self):
        with pytest.raises(ValueError):
            nml_conditional_predict_1d([1.0, 2.0], 1.0, NormalLocationModel(1.0, 1, 2))


class TestAdaptiveNormal:
    def _run(self, ys, sigma=1.0):
        lr = AdaptiveNormal(sigma, len(ys), n_doublings=20)
        total = 0.0
        for y in ys:
            total -= math.log(lr.predict()(y))
            lr.update(None, y)
        return lr, total

    def test_predictive_loss_matches_mixture_loss(self, rng):
        lr, total = self._run(rng.normal(size=6))
        assert total == pytest.approx(lr.cumulative_loss, rel=1e-9, abs=1e-9)

    def test_overhead_is_exact_prior_mass(self, rng):
        lr, _ = self._run(3.0 + rng.normal(size=8))
        gap = lr.cumulative_loss - lr.state.cum_loss
        assert np.all(gap <= -lr.state.log_prior + 1e-9)

    def test_zero_stream_within_bound(self):
        T = 12
        lr, total = self._run(np.zeros(T))
        regret = total - T * normal_log_loss(0.0, 0.0, 1.0)
        assert regret <= thm2_bound(0.0, NormalLocationModel(1.0, 1, T))

    @given(st.floats(-30, 30), st.floats(0.2, 5))
    def test_bound_above_regret_vs_any_theta(self, theta, sigma):
        rng = np.random.default_rng(1)
        T = 6
        ys = theta + sigma * rng.normal(size=T)
        _, total = self._run(ys, sigma)
        best = ys.mean()
        comp = sum(normal_log_loss(best, y, sigma) for y in ys)
        assert total - comp <= thm2_bound(abs(best), NormalLocationModel(sigma, 1, T)) + 1e-9
