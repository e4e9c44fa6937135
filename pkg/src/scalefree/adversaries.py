"""Lower-bound adversaries for square-loss regression and their bound values.

Streams respect ``||x_t|| <= X`` and ``|y_t| <= Y`` exactly. Bound values are
stated for the unhalved loss ``(a - y)^2``; :func:`sign_flip_run` reports regret
in the library's halved loss, for which the sign-flip guarantee holds as well
(the per-round gap is half the unhalved one and still at least ``UXY / (2 sqrt T)``).
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .core import Learner


class RegimeWarning(UserWarning):
    """A lower bound was evaluated outside the parameter regime it is proved in."""


class RegimeError(ValueError):
    pass


@dataclass
class AdversaryStream:
    kind: str
    params: dict
    xs: np.ndarray
    ys: np.ndarray
    interactive: bool = False
    p: Optional[np.ndarray] = None
    extra: dict = field(default_factory=dict)

    @property
    def T(self) -> int:
        return int(self.xs.shape[0])

    def __iter__(self):
        return iter(zip(self.xs, self.ys))


def cyclic_basis(T: int, d: int, X: float) -> np.ndarray:
    """``x_t = X e_{(t mod d) + 1}`` with 1-based ``t``, i.e. rows ``X e_1, X e_2, ...``."""
    xs = np.zeros((T, d))
    xs[np.arange(T), np.arange(T) % d] = X
    return xs


def cyclic_basis_stream(T: int, d: int, X: float, Y: float) -> AdversaryStream:
    """Cyclic basis features with the constant response ``Y``."""
    return AdversaryStream("cyclicBasis", dict(T=T, d=d, X=X, Y=Y), cyclic_basis(T, d, X), np.full(T, float(Y)))


def beta_bernoulli_A(T: int, d: int, U: float, X: float, Y: float) -> float:
    """``A = ln(2T') / U'^2`` with ``T' = floor(T/d)`` and ``U' = UX / (2Y sqrt d)``."""
    Tp = T // d
    Up = U * X / (2.0 * Y * math.sqrt(d))
    return math.log(2 * Tp) / (Up * Up)


def beta_sample(rng: np.random.Generator, A: float, size=None) -> np.ndarray:
    """``Beta(A, A)`` from two seeded Gamma draws."""
    g1 = rng.gamma(A, 1.0, size)
    g2 = rng.gamma(A, 1.0, size)
    return g1 / (g1 + g2)


def beta_bernoulli_stream(T: int, d: int, U: float, X: float, Y: float, seed: int) -> AdversaryStream:
    """Each coordinate block ``i`` draws ``p_i ~ Beta(A, A)`` and emits ``y = +-Y`` with ``P(+Y) = p_i``."""
    if T < d:
        raise RegimeError("need T >= d so every block is nonempty")
    if (U * X / Y) ** 2 > d:
        raise RegimeError(f"(UX/Y)^2 = {(U * X / Y) ** 2:.6g} exceeds d = {d}")
    A = beta_bernoulli_A(T, d, U, X, Y)
    rng = np.random.default_rng(seed)
    p = beta_sample(rng, A, d)
    xs = cyclic_basis(T, d, X)
    block = np.arange(T) % d
    bits = rng.random(T) < p[block]
    ys = np.where(bits, float(Y), -float(Y))
    return AdversaryStream("betaBernoulli", dict(T=T, d=d, U=U, X=X, Y=Y, A=A, seed=seed), xs, ys, p=p)


def bayes_optimal_action(history, A: float) -> float:
    """Posterior mean of ``p`` under ``Beta(A, A)`` after binary ``history``."""
    if not A > 0:
        raise ValueError("A must be positive")
    h = np.asarray(history, dtype=float)
    if math.isinf(A):
        return 0.5
    return float((h.sum() + A) / (h.size + 2.0 * A))


def bayesian_regret_bound(T: int, A: float) -> float:
    """``A / (2(4A + 2)) ln(T / (2A) + 1)``, unit-interval unhalved loss."""
    return A / (2.0 * (4.0 * A + 2.0)) * math.log(T / (2.0 * A) + 1.0)


def bayesian_regret_mc(T: int, A: float, n_seeds: int, seed: int = 0) -> np.ndarray:
    """Regret of the Bayes-optimal strategy against ``p`` on ``n_seeds`` Beta-Bernoulli streams.

    Unit-interval outcomes ``y in {0, 1}`` and unhalved loss; vectorized over streams.
    """
    rng = np.random.default_rng(seed)
    p = beta_sample(rng, A, n_seeds)
    y = (rng.random((n_seeds, T)) < p[:, None]).astype(float)
    prior_counts = np.concatenate([np.zeros((n_seeds, 1)), np.cumsum(y, axis=1)[:, :-1]], axis=1)
    a = (prior_counts + A) / (np.arange(T) + 2.0 * A)
    return np.sum((y - a) ** 2 - (y - p[:, None]) ** 2, axis=1)


def rademacher_stream(T: int, d: int, X: float, Y: float, seed: int) -> AdversaryStream:
    rng = np.random.default_rng(seed)
    ys = np.where(rng.random(T) < 0.5, -float(Y), float(Y))
    return AdversaryStream("rademacher", dict(T=T, d=d, X=X, Y=Y, seed=seed), cyclic_basis(T, d, X), ys)


def _sign(a: float) -> float:
    return 1.0 if a >= 0 else -1.0


class SignFlipAdversary:
    """Interactive adversary: ``x_t = X e_t`` and ``y_t = -Y sign(a_t)`` with ``sign(0) = +1``."""

    interactive = True

    def __init__(self, T: int, d: int, U: float, X: float, Y: float):
        if T > d:
            raise RegimeError(f"sign-flip needs T <= d, got T={T}, d={d}")
        self.T, self.d, self.U, self.X, self.Y = T, d, U, X, Y
        self.signs = []

    def features(self, t: int) -> np.ndarray:
        x = np.zeros(self.d)
        x[t] = self.X
        return x

    def respond(self, action: float) -> float:
        s = _sign(action)
        self.signs.append(s)
        return -self.Y * s

    def comparator(self) -> np.ndarray:
        # aligned with the responses: <theta, x_t> = -(UX/sqrt T) sign(a_t)
        theta = np.zeros(self.d)
        theta[: len(self.signs)] = -(self.U / math.sqrt(self.T)) * np.array(self.signs)
        return theta


def sign_flip_run(learner: Learner, T: int, d: int, U: float, X: float, Y: float):
    """Play the sign-flip adversary; returns ``(regret, theta)`` in halved square loss."""
    adv = SignFlipAdversary(T, d, U, X, Y)
    xs, ys, acts = [], [], []
    for t in range(T):
        x = adv.features(t)
        a = float(np.asarray(learner.predict(x)).ravel()[0])
        y = adv.respond(a)
        learner.update(x, np.array([y]))
        xs.append(x)
        ys.append(y)
        acts.append(a)
    theta = adv.comparator()
    xs, ys, acts = np.array(xs), np.array(ys), np.array(acts)
    regret = 0.5 * np.sum((acts - ys) ** 2) - 0.5 * np.sum((xs @ theta - ys) ** 2)
    return float(regret), theta


def _need(params: dict, *names):
    missing = [n for n in names if n not in params]
    if missing:
        raise KeyError(f"missing parameter(s): {', '.join(missing)}")
    return [float(params[n]) for n in names]


def _regime(ok: bool, msg: str) -> None:
    if not ok:
        warnings.warn(msg, RegimeWarning, stacklevel=3)


def lower_bound_values(kind: str, params: dict) -> float:
    """Numeric value of a square-loss lower bound (unhalved loss).

    Regime violations emit :class:`RegimeWarning`; the value is still returned.

    ``prop19finite``: ``0.36 dY^2 ln(floor(T/d)(UX/2Y)^2 / (2d ln(2 floor(T/d))) + 1) - 4dY^2``.
    ``prop19tdep``: ``4dY^2 (A/(2(4A+2)) ln(T'/(2A) + 1) - 1)`` with the
    :func:`beta_bernoulli_A` choice of ``A`` and ``T' = floor(T/d)``.
    ``prop19_009``: unit-interval ``0.09 ln(TU^2 / (2 ln 2T) + 1) - 1``.
    ``prop20``: ``(sqrt2 / 8) min(UX, Y) Y sqrt T``.
    ``prop21``: ``min(UX, Y) Y sqrt T / 2``.
    ``thm14asym``: ``dY^2/2 ln(TU^2X^2 / (d^2 Y^2))``.
    """
    if kind == "prop19finite":
        T, d, U, X, Y = _need(params, "T", "d", "U", "X", "Y")
        _regime((U * X / Y) ** 2 <= d, "prop19 requires (UX/Y)^2 <= d")
        Tp = math.floor(T / d)
        arg = Tp * (U * X / (2 * Y)) ** 2 / (2 * d * math.log(2 * Tp)) + 1.0
        return 0.36 * d * Y * Y * math.log(arg) - 4 * d * Y * Y
    if kind == "prop19tdep":
        T, d, U, X, Y = _need(params, "T", "d", "U", "X", "Y")
        _regime((U * X / Y) ** 2 <= d, "prop19 requires (UX/Y)^2 <= d")
        A = beta_bernoulli_A(int(T), int(d), U, X, Y)
        return 4 * d * Y * Y * (bayesian_regret_bound(math.floor(T / d), A) - 1.0)
    if kind == "prop19_009":
        T, U = _need(params, "T", "U")
        _regime(U <= 0.5, "the 0.09 constant assumes U <= 1/2")
        return 0.09 * math.log(T * U * U / (2 * math.log(2 * T)) + 1.0) - 1.0
    if kind == "prop20":
        T, d, U, X, Y = _need(params, "T", "d", "U", "X", "Y")
        _regime(d <= T <= (d / 8.0) * (Y / (X * U)) ** 2, "prop20 requires d <= T <= (d/8)(Y/(XU))^2")
        return math.sqrt(2.0) / 8.0 * min(U * X, Y) * Y * math.sqrt(T)
    if kind == "prop21":
        T, d, U, X, Y = _need(params, "T", "d", "U", "X", "Y")
        _regime(T <= d, "prop21 requires T <= d")
        return 0.5 * min(U * X, Y) * Y * math.sqrt(T)
    if kind == "thm14asym":
        T, d, U, X, Y = _need(params, "T", "d", "U", "X", "Y")
        return 0.5 * d * Y * Y * math.log(T * U * U * X * X / (d * d * Y * Y))
    raise ValueError(f"unknown lower bound kind {kind!r}")
