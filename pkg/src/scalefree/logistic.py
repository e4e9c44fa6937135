"""Multiclass logistic regression with quadrature Bayes experts.

The Bayes predictor uses the uniform prior on ``{theta : max_k ||theta_k|| <= U}``,
discretized by a midpoint tensor grid with ball rejection. Every learner here
is a mixture over a *bank* of such posteriors that share the same unit-ball
nodes and differ only in their radius, which is what the compiled kernels in
:mod:`scalefree.kernels` evaluate.

Scale-free learners never form ``U`` directly. Features are normalized by the
first nonzero norm, ``xhat = x / X_{t*}``, and each expert is represented by
``kappa = U * X_{t*}``, which depends only on the grid and not on the data
scale.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.special import gammaln, logsumexp, xlogy

from . import kernels
from .aggregation import (
    P_CAP,
    build_grid,
    grid_aggregator,
    log_grid_prior,
    logloss_aggregate_step,
    logloss_update,
)
from .core import DimensionError, LabeledExample, Learner

DEFAULT_EPS = 2.2e-308


def class_probs(theta: np.ndarray, x: np.ndarray) -> np.ndarray:
    theta = np.atleast_2d(np.asarray(theta, dtype=float))
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if theta.shape[1] != x.shape[0]:
        raise DimensionError(f"theta has {theta.shape[1]} columns, x has length {x.shape[0]}")
    s = theta @ x
    s = s - s.max()
    e = np.exp(s)
    return e / e.sum()


@dataclass(frozen=True)
class LogisticDomain:
    d: int
    K: int
    U: float
    quad_points_per_dim: Optional[int] = None
    binary_embedding: Optional[bool] = None

    @property
    def binary(self) -> bool:
        return self.K == 2 if self.binary_embedding is None else bool(self.binary_embedding)

    @property
    def effective_dim(self) -> int:
        return self.d if self.binary else self.d * self.K

    @property
    def points(self) -> int:
        if self.quad_points_per_dim is not None:
            return int(self.quad_points_per_dim)
        return 201 if self.effective_dim <= 2 else 41


def quadrature_nodes(domain: LogisticDomain) -> np.ndarray:
    """Midpoint nodes of the unit ball ``{max_k ||theta_k|| <= 1}``, shape ``(G, D)``.

    Rows of ``theta`` are the consecutive length-``d`` blocks of a node.
    """
    if domain.K < 2:
        raise ValueError("need K >= 2")
    if domain.d * domain.K > 4:
        raise ValueError(f"tensor quadrature limited to d*K <= 4, got {domain.d * domain.K}")
    n = domain.points
    if n < 1:
        raise ValueError("empty quadrature grid")
    D = domain.effective_dim
    axis = -1.0 + (2.0 * np.arange(n) + 1.0) / n
    mesh = np.stack(np.meshgrid(*([axis] * D), indexing="ij"), axis=-1).reshape(-1, D)
    rows = mesh.reshape(mesh.shape[0], -1, domain.d)
    keep = np.all(np.sum(rows * rows, axis=2) <= 1.0, axis=1)
    nodes = mesh[keep]
    if nodes.shape[0] == 0:
        raise ValueError("empty quadrature grid")
    return nodes


class LogisticBank:
    """Quadrature posteriors for several radii sharing one set of unit nodes."""

    def __init__(self, domain: LogisticDomain, radii: np.ndarray, nodes: Optional[np.ndarray] = None):
        self.domain = domain
        self.radii = np.ascontiguousarray(radii, dtype=float)
        self.nodes = quadrature_nodes(domain) if nodes is None else nodes
        G = self.nodes.shape[0]
        self.logw = np.full((self.radii.size, G), -math.log(G))
        self._logsm = np.empty((self.radii.size, G, domain.K))
        self._probs: Optional[np.ndarray] = None

    def node_scores(self, x: np.ndarray) -> np.ndarray:
        d, K = self.domain.d, self.domain.K
        G = self.nodes.shape[0]
        if self.domain.binary:
            z = np.zeros((G, K))
            z[:, 0] = self.nodes @ x
            return z
        return np.ascontiguousarray(self.nodes.reshape(G, K, d) @ x)

    def predict(self, x: np.ndarray) -> np.ndarray:
        """Per-member predictive distributions, shape ``(M, K)``."""
        x = np.asarray(x, dtype=float)
        if x.shape != (self.domain.d,):
            raise DimensionError(f"x has shape {x.shape}, expected ({self.domain.d},)")
        z = self.node_scores(x)
        self._probs = kernels.bank_log_softmax_mix(self.logw, self.radii, z, self._logsm)
        return self._probs

    def update(self, y: int) -> np.ndarray:
        """Bayes update on 1-based class ``y`` after :meth:`predict`.

        Returns each member's log predictive mass at ``y``.
        """
        if self._probs is None:
            raise RuntimeError("update called before predict")
        if not 1 <= int(y) <= self.domain.K:
            raise DimensionError(f"class index {y} outside 1..{self.domain.K}")
        self._probs = None
        return kernels.bank_update(self.logw, self._logsm, int(y) - 1)


class BayesLogistic(Learner):
    """Bayesian predictor with uniform prior on the radius-``U`` ball."""

    task = "log"

    def __init__(self, d: int, K: int, U: float, quad_points_per_dim: Optional[int] = None,
                 binary_embedding: Optional[bool] = None):
        self.domain = LogisticDomain(d, K, U, quad_points_per_dim, binary_embedding)
        self.bank = LogisticBank(self.domain, np.array([float(U)]))

    def predict(self, x=None) -> np.ndarray:
        return self.bank.predict(np.asarray(x, dtype=float))[0]

    def update(self, x, y) -> None:
        if self.bank._probs is None:
            self.predict(x)
        self.bank.update(int(y))


def bayes_logistic_predict(history: Sequence[LabeledExample], x_t, domain: LogisticDomain) -> np.ndarray:
    learner = BayesLogistic(domain.d, domain.K, domain.U, domain.quad_points_per_dim,
                            domain.binary_embedding)
    for ex in history:
        learner.predict(ex.features)
        learner.update(ex.features, ex.response)
    return learner.predict(x_t)


def default_doublings(eps: float, d: int, K: int, T: int, cap: int = P_CAP) -> int:
    """Grid length so the top expert reaches ``kappa = U X_{t*} >= 2^cap``.

    With a tiny ``eps`` the bottom of the grid sits near ``eps``; a fixed cap
    of doublings above it would never reach useful radii.
    """
    # log2(T) - log2(eps dK) stays finite where T / (eps dK) overflows
    return cap + max(0, math.ceil(math.log2(T) - math.log2(eps * d * K)))


class _ScaleNormalized(Learner):
    """Uniform until the first nonzero feature, then features divided by its norm."""

    task = "log"
    invariances = ("x",)

    def __init__(self, d: int, K: int):
        self.d, self.K = d, K
        self.x_star: Optional[float] = None
        self._pending = None

    def _normalize(self, x) -> Optional[np.ndarray]:
        x = np.asarray(x, dtype=float)
        if x.shape != (self.d,):
            raise DimensionError(f"x has shape {x.shape}, expected ({self.d},)")
        if self.x_star is None:
            n = float(np.linalg.norm(x))
            if n == 0.0:
                return None
            self.x_star = n
            self._start()
        return x / self.x_star

    def _start(self) -> None:
        ...

    def predict(self, x=None) -> np.ndarray:
        xhat = self._normalize(x)
        if xhat is None:
            self._pending = None
            return np.full(self.K, 1.0 / self.K)
        p = self._mix(xhat)
        self._pending = True
        return p

    def update(self, x, y) -> None:
        if self._pending is None:
            if self.x_star is None and float(np.linalg.norm(x)) == 0.0:
                return
            self.predict(x)
        self._absorb(int(y))
        self._pending = None


class AdaptiveLogistic(_ScaleNormalized):
    """Grid aggregation over radii ``U_m = alpha_min 2^m``, ``alpha_min = eps dK / (X_{t*} T)``."""

    def __init__(self, d: int, K: int, T: int, eps: float = DEFAULT_EPS,
                 n_doublings: Optional[int] = None, quad_points_per_dim: Optional[int] = None,
                 binary_embedding: Optional[bool] = None):
        super().__init__(d, K)
        if T is None or T < 1:
            raise ValueError("horizon T is required")
        if not eps > 0:
            raise ValueError("eps must be positive")
        self.T, self.eps = int(T), float(eps)
        self.domain = LogisticDomain(d, K, 1.0, quad_points_per_dim, binary_embedding)
        self.n_doublings = default_doublings(eps, d, K, T) if n_doublings is None else int(n_doublings)
        base = self.eps * d * K / self.T
        self.kappas = np.ldexp(base, np.arange(self.n_doublings + 1))
        self.log_prior = log_grid_prior(self.n_doublings)
        self.bank: Optional[LogisticBank] = None
        self.state = None

    @property
    def n_experts(self) -> int:
        return self.kappas.size

    def alpha_min(self, x_star: float) -> float:
        return self.eps * self.d * self.K / (x_star * self.T)

    def _start(self) -> None:
        self.bank = LogisticBank(self.domain, self.kappas)
        self.state = grid_aggregator(build_grid(1.0, math.inf, cap=self.n_doublings))

    def _mix(self, xhat: np.ndarray) -> np.ndarray:
        P = self.bank.predict(xhat)
        return self.state.weights @ P

    def _absorb(self, y: int) -> None:
        self.state = logloss_update(self.state, self.bank.update(y))


class ParamFreeLogistic(_ScaleNormalized):
    """Two-level mixture: outer grid over ``alpha_j = 2^j``, inner grids with ``eps_j = e / alpha_j``.

    Inner expert ``(j, m)`` has ``kappa = e dK 2^(m-j) / T``, so all inner
    grids draw from one bank of ``2P + 1`` base posteriors.
    """

    def __init__(self, d: int, K: int, T: int, P: int = P_CAP,
                 quad_points_per_dim: Optional[int] = None, binary_embedding: Optional[bool] = None):
        super().__init__(d, K)
        if T is None or T < 1:
            raise ValueError("horizon T is required")
        self.T, self.P = int(T), int(P)
        self.domain = LogisticDomain(d, K, 1.0, quad_points_per_dim, binary_embedding)
        ks = np.arange(-self.P, self.P + 1)
        self.kappas = math.e * d * K / self.T * np.exp2(ks.astype(float))
        self.log_prior = log_grid_prior(self.P)
        j = np.arange(self.P + 1)
        # base index of inner expert (j, m) is (m - j) + P
        self._idx = (j[None, :] - j[:, None]) + self.P
        self.base_cum = np.zeros(self.kappas.size)
        self.bank: Optional[LogisticBank] = None

    @property
    def n_outer(self) -> int:
        return self.P + 1

    def _start(self) -> None:
        self.bank = LogisticBank(self.domain, self.kappas)

    def base_weights(self) -> np.ndarray:
        """Total mixture weight on each base posterior, shape ``(2P+1,)``."""
        inner = self.log_prior[None, :] - self.base_cum[self._idx]
        inner_norm = logsumexp(inner, axis=1)
        outer = self.log_prior + inner_norm
        outer -= logsumexp(outer)
        joint = np.exp(outer[:, None] + inner - inner_norm[:, None])
        c = np.zeros(self.kappas.size)
        np.add.at(c, self._idx, joint)
        return c

    def inner_cumulative_losses(self) -> np.ndarray:
        return -logsumexp(self.log_prior[None, :] - self.base_cum[self._idx], axis=1)

    def cumulative_loss(self) -> float:
        return float(-logsumexp(self.log_prior - self.inner_cumulative_losses()))

    def _mix(self, xhat: np.ndarray) -> np.ndarray:
        P = self.bank.predict(xhat)
        return self.base_weights() @ P

    def _absorb(self, y: int) -> None:
        self.base_cum -= self.bank.update(y)


def double_until(X: float, norm: float) -> tuple[float, int]:
    """Double ``X`` until it covers ``norm``; returns the new value and the number of doublings."""
    if norm <= X:
        return X, 0
    k = math.ceil(math.log2(norm / X))
    Xn = math.ldexp(X, k)
    while Xn < norm:
        Xn *= 2.0
        k += 1
    return Xn, k


@dataclass
class EfficientWrapperConfig:
    T: int
    d: int
    K: int
    beta: float = 1.0
    c: float = 10.0

    @property
    def gamma(self) -> float:
        return self.c * self.T ** self.beta / (self.d ** 2 * self.K)


@dataclass
class _WrappedExpert:
    U: float
    X: float
    base: Learner
    frozen: bool = False
    rebuilds: int = 0


def _default_base(d: int, K: int, quad_points_per_dim: Optional[int]) -> Callable:
    def factory(U: float, X: float) -> Learner:
        return BayesLogistic(d, K, U, quad_points_per_dim)

    return factory


class EfficientLogisticWrapper(Learner):
    """Doubling on ``X`` per expert, a finite grid over ``U`` and the freeze rule.

    ``base_factory(U, X)`` builds a base learner for radius ``U`` that is
    valid for feature norms up to ``X``. Experts with ``U > 2 T^beta / X_t``
    are frozen to the uniform prediction for the remaining rounds.
    """

    task = "log"
    invariances = ("x",)

    def __init__(self, config: EfficientWrapperConfig, base_factory: Optional[Callable] = None,
                 quad_points_per_dim: Optional[int] = None):
        if config.T is None:
            raise ValueError("horizon T is required")
        self.config = config
        self.factory = base_factory or _default_base(config.d, config.K, quad_points_per_dim)
        self.experts: list[_WrappedExpert] = []
        self.state = None
        self.x_star: Optional[float] = None
        self.x_max = 0.0
        self._probs = None

    def _build(self, x_star: float) -> None:
        cfg = self.config
        a_min = cfg.T ** (-cfg.gamma) / x_star
        a_max = cfg.T ** cfg.beta / x_star
        grid = build_grid(a_min, a_max)
        for U in grid.values:
            U = float(U)
            X = math.log(cfg.K) / U
            self.experts.append(_WrappedExpert(U, X, self.factory(U, X)))
        self.state = grid_aggregator(grid)

    def predict(self, x=None) -> np.ndarray:
        cfg = self.config
        x = np.asarray(x, dtype=float)
        norm = float(np.linalg.norm(x))
        if self.x_star is None:
            if norm == 0.0:
                self._probs = None
                return np.full(cfg.K, 1.0 / cfg.K)
            self.x_star = norm
            self._build(norm)
        self.x_max = max(self.x_max, norm)
        limit = 2.0 * cfg.T ** cfg.beta / self.x_max
        rows = []
        for e in self.experts:
            if not e.frozen and e.U > limit:
                e.frozen = True
            if e.frozen:
                rows.append(np.full(cfg.K, 1.0 / cfg.K))
                continue
            if norm > e.X:
                e.X, _ = double_until(e.X, norm)
                e.base = self.factory(e.U, e.X)
                e.rebuilds += 1
            rows.append(np.asarray(e.base.predict(x), dtype=float))
        self._probs = np.array(rows)
        self._x = x
        return self.state.weights @ self._probs

    def update(self, x, y) -> None:
        if self._probs is None:
            if self.x_star is None and float(np.linalg.norm(x)) == 0.0:
                return
            self.predict(x)
        _, self.state = logloss_aggregate_step(self.state, self._probs, int(y))
        for e in self.experts:
            if not e.frozen:
                e.base.update(x, y)
        self._probs = None


def bernoulli_stochastic_complexity(n: int, a: float, b: float) -> float:
    """``ln sum_k C(n,k) max_{mu in [a,b]} mu^k (1-mu)^(n-k)``."""
    if a > b:
        raise ValueError("need a <= b")
    if not (0.0 <= a and b <= 1.0):
        raise ValueError("need 0 <= a <= b <= 1")
    if n < 0:
        raise ValueError("n must be nonnegative")
    if n == 0:
        return 0.0
    k = np.arange(n + 1, dtype=float)
    mu = np.clip(k / n, a, b)
    log_binom = gammaln(n + 1.0) - gammaln(k + 1.0) - gammaln(n - k + 1.0)
    terms = log_binom + xlogy(k, mu) + xlogy(n - k, 1.0 - mu)
    return float(logsumexp(terms))


def bernoulli_lower_form(n: int, a: float, b: float) -> float:
    """``(b-a) sqrt(n)/sqrt(pi) - 2/sqrt(pi n)``, a lower bound on the *sum* inside the complexity."""
    return (b - a) * math.sqrt(n) / math.sqrt(math.pi) - 2.0 / math.sqrt(math.pi * n)


def _need(params: dict, *names):
    missing = [n for n in names if n not in params]
    if missing:
        raise KeyError(f"missing parameter(s): {', '.join(missing)}")
    return [float(params[n]) for n in names]


def logistic_bound_values(kind: str, params: dict) -> float:
    """Numeric value of a logistic regret bound.

    ``thm3``: ``5 d_Theta ln(UXT/d_Theta + e)``, ``d_Theta`` defaults to ``dK``.
    ``thm5lower``: minimax lower bound for binary logistic regression; ``-inf``
    when the logarithm's argument is not positive (the bound is vacuous).
    ``thm6``: scale-free adaptive bound with parameter ``eps``.
    ``thm7``: parameter-free bound.
    """
    if kind == "thm3":
        U, X, T = _need(params, "U", "X", "T")
        dth = float(params["d_theta"]) if "d_theta" in params else math.prod(_need(params, "d", "K"))
        return 5.0 * dth * math.log(U * X * T / dth + math.e)
    if kind == "thm5lower":
        U, X, T, d = _need(params, "U", "X", "T", "d")
        arg = U * X * math.sqrt(T - d) / (4.0 * math.sqrt(math.pi) * d) - 2.0 / math.sqrt(math.pi * (T / d - 1.0))
        return d * math.log(arg) if arg > 0 else -math.inf
    if kind == "thm6":
        th, XT, Xs, T, d, K, eps = _need(params, "theta_norm", "X_T", "X_star", "T", "d", "K", "eps")
        dK = d * K
        main = 5.0 * dK * math.log(2.0 * th * XT * T / dK + eps * XT / Xs + math.e)
        # log2 taken termwise: 1/eps alone can overflow
        l2 = math.log2(8.0 * th * Xs * T / dK) - math.log2(eps) if th > 0 else -math.inf
        return main + 2.0 * math.log(max(l2, 2.0))
    if kind == "thm7":
        th, XT, Xs, T, d, K = _need(params, "theta_norm", "X_T", "X_star", "T", "d", "K")
        dK = d * K
        main = 5.0 * dK * math.log(2.0 * th * XT * T / dK + 2.0 * math.e)
        over1 = 2.0 * math.log(math.log2(max(16.0 * th * XT * T / (math.e * dK), 4.0)))
        over2 = 2.0 * math.log(math.log2(8.0 * XT / Xs))
        return main + over1 + over2
    raise ValueError(f"unknown logistic bound kind {kind!r}")
