import math
import warnings

import numpy as np
import pytest

from scalefree.adversaries import (
    RegimeError,
    RegimeWarning,
    SignFlipAdversary,
    bayes_optimal_action,
    bayesian_regret_bound,
    bayesian_regret_mc,
    beta_bernoulli_A,
    beta_bernoulli_stream,
    cyclic_basis,
    lower_bound_values,
    rademacher_stream,
    sign_flip_run,
)
from scalefree.regression import AKAAR, KAAR, LinearKernel
from scalefree.square_pred import AggregatedGD


class _Zero:
    def predict(self, x=None):
        return np.zeros(1)

    def update(self, x, y):
        pass


class TestBetaBernoulli:
    def test_A(self):
        # T' = 8 and U' = UX/(2Y sqrt d) = 1/2
        assert beta_bernoulli_A(8, 1, 1.0, 1.0, 1.0) == pytest.approx(16 * math.log(2))

    def test_stream_bounds_and_determinism(self):
        a = beta_bernoulli_stream(40, 4, 1.0, 2.0, 3.0, seed=5)
        b = beta_bernoulli_stream(40, 4, 1.0, 2.0, 3.0, seed=5)
        np.testing.assert_array_equal(a.ys, b.ys)
        np.testing.assert_array_equal(a.p, b.p)
        np.testing.assert_array_equal(np.abs(a.ys), 3.0)
        assert np.all(np.linalg.norm(a.xs, axis=1) <= 2.0)

    def test_regime(self):
        with pytest.raises(RegimeError):
            beta_bernoulli_stream(3, 4, 1, 1, 1, 0)
        with pytest.raises(RegimeError):
            beta_bernoulli_stream(10, 1, 5, 1, 1, 0)

    def test_bayes_action(self):
        assert bayes_optimal_action([], 3.0) == 0.5
        assert bayes_optimal_action([1, 1], 1.0) == 0.75
        assert bayes_optimal_action([1, 1, 1], math.inf) == 0.5

    def test_mc_mean_close_to_exact(self):
        # exact Bayes risk of the posterior mean under a Beta(A, A) prior
        T, A = 30, 2.0
        t = np.arange(T)
        exact = np.sum(A / (2 * (2 * A + 1)) / (t + 2 * A))
        mc = bayesian_regret_mc(T, A, 200_000, seed=1)
        assert mc.mean() == pytest.approx(exact, rel=0.03)
        assert mc.mean() >= bayesian_regret_bound(T, A)


class TestStreams:
    def test_cyclic(self):
        np.testing.assert_array_equal(cyclic_basis(4, 2, 3.0), [[3, 0], [0, 3], [3, 0], [0, 3]])

    def test_rademacher(self):
        s = rademacher_stream(200_000, 1, 1.0, 2.0, seed=0)
        assert set(np.unique(s.ys)) == {-2.0, 2.0}
        assert abs(s.ys.mean()) < 0.02
        T = 64
        sums = [abs(rademacher_stream(T, 1, 1.0, 1.0, seed=k).ys.sum()) for k in range(4000)]
        assert np.mean(sums) == pytest.approx(math.sqrt(2 * T / math.pi), rel=0.05)


class TestSignFlip:
    def test_regret_at_least_prop21(self):
        for lr in (_Zero(), AggregatedGD(4), KAAR(LinearKernel(), 1.0), AKAAR(LinearKernel(), 4, P=8)):
            reg, theta = sign_flip_run(lr, 4, 4, 1.0, 1.0, 1.0)
            assert reg >= 1.0 - 1e-12
            assert np.linalg.norm(theta) == pytest.approx(1.0)

    def test_zero_learner_gap(self):
        T, U, X, Y = 9, 0.7, 1.5, 2.0
        reg, _ = sign_flip_run(_Zero(), T, T, U, X, Y)
        # halved loss: half of 2UXY/sqrt T - (UX)^2/T per round
        gap = 0.5 * (2 * U * X * Y / math.sqrt(T) - (U * X) ** 2 / T)
        assert reg == pytest.approx(T * gap)

    def test_sign_convention(self):
        adv = SignFlipAdversary(2, 2, 1.0, 1.0, 1.0)
        assert adv.respond(0.0) == -1.0
        assert adv.respond(-0.3) == 1.0
        with pytest.raises(RegimeError):
            SignFlipAdversary(3, 2, 1.0, 1.0, 1.0)


class TestLowerBounds:
    def test_examples(self):
        p = dict(T=16, d=16, U=1, X=1, Y=1)
        assert lower_bound_values("prop21", p) == pytest.approx(2.0)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RegimeWarning)
            assert lower_bound_values("prop20", p) == pytest.approx(math.sqrt(2) / 2)

    def test_prop19finite_plugin(self):
        T, d, U, X, Y = 1e4, 1, 0.5, 1.0, 0.5
        Tp = 10_000
        arg = Tp * (U * X / (2 * Y)) ** 2 / (2 * d * math.log(2 * Tp)) + 1
        expect = 0.36 * d * Y * Y * math.log(arg) - 4 * d * Y * Y
        assert lower_bound_values("prop19finite", dict(T=T, d=d, U=U, X=X, Y=Y)) == pytest.approx(expect)

    def test_regime_warning(self):
        with pytest.warns(RegimeWarning):
            v = lower_bound_values("prop21", dict(T=5, d=2, U=1, X=1, Y=1))
        assert math.isfinite(v)

    def test_unknown(self):
        with pytest.raises(ValueError):
            lower_bound_values("nope", {})
