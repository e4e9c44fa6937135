import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from scalefree.core import LabeledExample
from scalefree.logistic import (
    AdaptiveLogistic,
    BayesLogistic,
    EfficientLogisticWrapper,
    EfficientWrapperConfig,
    LogisticDomain,
    ParamFreeLogistic,
    bayes_logistic_predict,
    bernoulli_lower_form,
    bernoulli_stochastic_complexity,
    class_probs,
    double_until,
    logistic_bound_values,
    quadrature_nodes,
)


class TestClassProbs:
    def test_zero_theta_uniform(self):
        np.testing.assert_allclose(class_probs(np.zeros((4, 2)), [1.0, -3.0]), np.full(4, 0.25))

    def test_examples(self):
        th = np.array([[1.0], [0.0]])
        np.testing.assert_allclose(class_probs(th, [0.0]), [0.5, 0.5])
        np.testing.assert_allclose(class_probs(th, [math.log(3)]), [0.75, 0.25], rtol=1e-12)

    @given(st.floats(1e-3, 1e3))
    def test_scale_coupling(self, c):
        rng = np.random.default_rng(0)
        th, x = rng.normal(size=(3, 2)), rng.normal(size=2)
        np.testing.assert_allclose(class_probs(th / c, c * x), class_probs(th, x), rtol=1e-9)


class TestQuadrature:
    def test_nodes_inside_ball(self):
        nodes = quadrature_nodes(LogisticDomain(2, 2, 1.0, 31, binary_embedding=False))
        rows = nodes.reshape(nodes.shape[0], 2, 2)
        assert np.all(np.linalg.norm(rows, axis=2) <= 1.0)

    def test_dimension_cap(self):
        with pytest.raises(ValueError):
            quadrature_nodes(LogisticDomain(3, 3, 1.0))


class TestBayesLogistic:
    def test_empty_history_uniform(self):
        p = bayes_logistic_predict([], [0.7], LogisticDomain(1, 2, 3.0))
        np.testing.assert_allclose(p, [0.5, 0.5], atol=1e-12)
        p = bayes_logistic_predict([], [0.7, -0.2], LogisticDomain(2, 2, 1.0, 15, binary_embedding=False))
        np.testing.assert_allclose(p, [0.5, 0.5], atol=1e-12)

    def test_zero_history_uniform(self):
        hist = [LabeledExample([0.0], 1), LabeledExample([0.0], 1)]
        np.testing.assert_allclose(bayes_logistic_predict(hist, [1.0], LogisticDomain(1, 2, 1.0)), [0.5, 0.5],
                                   atol=1e-12)

    def test_high_resolution_oracle(self):
        n = 100_000
        th = -1.0 + (2.0 * np.arange(n) + 1.0) / n
        sig = 1.0 / (1.0 + np.exp(-th))
        oracle = np.sum(sig * sig) / np.sum(sig)
        p = bayes_logistic_predict([LabeledExample([1.0], 1)], [1.0], LogisticDomain(1, 2, 1.0, 201))
        assert abs(p[0] - oracle) <= 1e-4

    def test_cumulative_loss_below_thm3_bound(self):
        rng = np.random.default_rng(3)
        lr = BayesLogistic(1, 2, 1.0)
        T, total = 100, 0.0
        xs = rng.uniform(-1, 1, size=(T, 1))
        ys = rng.integers(1, 3, size=T)
        for x, y in zip(xs, ys):
            total -= math.log(lr.predict(x)[y - 1])
            lr.update(x, y)
        best = min(sum(-math.log(class_probs([[u], [0.0]], x)[y - 1]) for x, y in zip(xs, ys))
                   for u in np.linspace(-1, 1, 401))
        assert total - best <= logistic_bound_values("thm3", dict(U=1, X=1, T=T, d_theta=1))


class TestAdaptiveLogistic:
    def test_alpha_min(self):
        lr = AdaptiveLogistic(1, 2, 100, eps=1.0)
        assert lr.alpha_min(1.0) == pytest.approx(2 / 100)

    def test_uniform_until_nonzero(self):
        lr = AdaptiveLogistic(1, 2, 10, n_doublings=5)
        np.testing.assert_allclose(lr.predict([0.0]), [0.5, 0.5])
        lr.update([0.0], 1)
        assert lr.x_star is None

    @pytest.mark.parametrize("cls", ["adaptive", "paramfree"])
    @given(st.floats(1e-4, 1e4))
    def test_feature_scale_invariance(self, cls, c):
        rng = np.random.default_rng(7)
        xs, ys = rng.normal(size=(15, 1)), rng.integers(1, 3, size=15)

        def run(f):
            lr = AdaptiveLogistic(1, 2, 15, n_doublings=12, quad_points_per_dim=41) if cls == "adaptive" \
                else ParamFreeLogistic(1, 2, 15, P=6, quad_points_per_dim=41)
            out = []
            for x, y in zip(xs, ys):
                out.append(lr.predict(f * x))
                lr.update(f * x, y)
            return np.array(out)

        np.testing.assert_allclose(run(c), run(1.0), rtol=1e-9)


class TestParamFree:
    def test_cumulative_loss_consistent(self, rng):
        lr = ParamFreeLogistic(1, 2, 20, P=5, quad_points_per_dim=41)
        total = 0.0
        for _ in range(20):
            x = rng.normal(size=1)
            y = int(rng.integers(1, 3))
            total -= math.log(lr.predict(x)[y - 1])
            lr.update(x, y)
        assert total == pytest.approx(lr.cumulative_loss(), rel=1e-10)

    def test_base_weights_sum_to_one(self, rng):
        lr = ParamFreeLogistic(1, 3, 10, P=4, quad_points_per_dim=15, binary_embedding=False)
        lr.predict([1.0])
        lr.update([1.0], 2)
        assert lr.base_weights().sum() == pytest.approx(1.0, abs=1e-12)
        assert lr.n_outer == 5


class TestEfficientWrapper:
    def test_gamma(self):
        assert EfficientWrapperConfig(T=8, d=1, K=2, beta=1.0, c=10.0).gamma == 40.0

    def test_double_until(self):
        assert double_until(1.0, 5.0) == (8.0, 3)
        assert double_until(4.0, 3.0) == (4.0, 0)

    def test_single_rebuild_on_jump(self):
        w = EfficientLogisticWrapper(EfficientWrapperConfig(T=4, d=1, K=2, c=0.5), quad_points_per_dim=21)
        w.predict([1.0])
        w.update([1.0], 1)
        before = [e.rebuilds for e in w.experts]
        w.predict([50.0])
        active = [e for e in w.experts if not e.frozen]
        for e, b in zip(w.experts, before):
            assert e.rebuilds - b <= 1
            if not e.frozen:
                assert e.X >= 50.0

    def test_freeze_gives_uniform(self):
        cfg = EfficientWrapperConfig(T=4, d=1, K=2, c=0.5)
        w = EfficientLogisticWrapper(cfg, quad_points_per_dim=21)
        w.predict([1.0])
        w.update([1.0], 1)
        w.predict([1e3])
        frozen = [e for e in w.experts if e.frozen]
        assert frozen
        limit = 2.0 * cfg.T ** cfg.beta / 1e3
        assert all(e.U > limit for e in frozen)
        idx = [i for i, e in enumerate(w.experts) if e.frozen]
        np.testing.assert_allclose(w._probs[idx], 0.5)

    def test_probabilities_valid(self, rng):
        w = EfficientLogisticWrapper(EfficientWrapperConfig(T=10, d=1, K=3, c=0.05), quad_points_per_dim=9)
        for _ in range(10):
            x = rng.normal(size=1) * 10 ** rng.uniform(-2, 2)
            p = w.predict(x)
            assert p.sum() == pytest.approx(1.0) and np.all(p > 0)
            w.update(x, int(rng.integers(1, 4)))


class TestBernoulliComplexity:
    def test_examples(self):
        assert bernoulli_stochastic_complexity(1, 0, 1) == pytest.approx(math.log(2))
        assert bernoulli_stochastic_complexity(2, 0, 1) == pytest.approx(math.log(2.5))
        for n in (1, 5, 40):
            assert bernoulli_stochastic_complexity(n, 0.5, 0.5) == pytest.approx(0.0, abs=1e-12)

    @given(st.integers(1, 200), st.floats(0, 1), st.floats(0, 1))
    def test_lower_form_below_sum(self, n, a, b):
        a, b = min(a, b), max(a, b)
        assert bernoulli_lower_form(n, a, b) <= math.exp(bernoulli_stochastic_complexity(n, a, b)) + 1e-9

    def test_domain(self):
        with pytest.raises(ValueError):
            bernoulli_stochastic_complexity(3, 0.6, 0.4)


class TestBounds:
    def test_thm3(self):
        v = logistic_bound_values("thm3", dict(U=1, X=1, T=200, d_theta=2))
        assert v == pytest.approx(10 * math.log(100 + math.e))
        assert v == pytest.approx(46.3, abs=0.05)

    def test_thm5lower(self):
        d = 2
        v = logistic_bound_values("thm5lower", dict(U=2 * math.sqrt(d), X=1, T=d + 1, d=d))
        assert v == -math.inf
        assert math.isfinite(logistic_bound_values("thm5lower", dict(U=100, X=1, T=1000, d=d)))

    def test_thm6_tiny_eps_finite(self):
        v = logistic_bound_values("thm6", dict(theta_norm=1, X_T=1, X_star=1, T=100, d=1, K=2, eps=1e-300))
        assert math.isfinite(v)

    def test_thm7_monotone_in_theta(self):
        p = dict(X_T=2, X_star=1, T=100, d=1, K=2)
        vals = [logistic_bound_values("thm7", dict(p, theta_norm=u)) for u in (0.1, 1, 10)]
        assert vals[0] < vals[1] < vals[2]

    def test_unknown(self):
        with pytest.raises(ValueError):
            logistic_bound_values("nope", {})
