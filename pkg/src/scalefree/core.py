"""Shared primitives: examples, running scale, losses, comparators, regret.

Class labels are 1-based everywhere in the public API (``1..K``); arrays are
indexed with ``label - 1`` internally.
"""
from __future__ import annotations

import math
from abc import ABC, abstractmethod
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence, Union

import numpy as np
from scipy.special import logsumexp

# Stand-in for +inf in log loss so that ledgers stay summable.
LOG_LOSS_INF = 1e308

NORM_KINDS = ("rowMaxOfL2", "L2", "rkhsNorm", "twoToInfty")

Response = Union[int, np.ndarray]


class DimensionError(ValueError):
    pass


@dataclass(frozen=True)
class LabeledExample:
    """One round of data: features ``x_t`` and a class label or real response."""

    features: np.ndarray
    response: Response

    def __post_init__(self):
        object.__setattr__(self, "features", np.atleast_1d(np.asarray(self.features, dtype=float)))
        if not isinstance(self.response, (int, np.integer)):
            object.__setattr__(
                self, "response", np.atleast_1d(np.asarray(self.response, dtype=float))
            )

    @property
    def is_class(self) -> bool:
        return isinstance(self.response, (int, np.integer))

    def check(self, d: int, K: Optional[int] = None) -> None:
        if self.features.shape != (d,):
            raise DimensionError(f"features have shape {self.features.shape}, stream has d={d}")
        if self.is_class and K is not None and not 1 <= int(self.response) <= K:
            raise ValueError(f"class index {self.response} outside 1..{K}")


@dataclass(frozen=True)
class ScaleState:
    """Running maxima ``X_t``, ``Y_t`` and the first round with nonzero features."""

    x_max: float = 0.0
    y_max: float = 0.0
    y_max_prev: float = 0.0
    first_nonzero_x: Optional[int] = None
    x_star: float = 0.0  # ||x_{t*}||
    round: int = 0
    d: Optional[int] = None


def update_scale(state: ScaleState, ex: LabeledExample) -> ScaleState:
    if state.d is not None and ex.features.shape != (state.d,):
        raise DimensionError(
            f"features have shape {ex.features.shape}, stream has d={state.d}"
        )
    t = state.round + 1
    xn = float(np.linalg.norm(ex.features))
    y_max = state.y_max
    if not ex.is_class:
        y_max = max(y_max, float(np.linalg.norm(ex.response)))
    first, x_star = state.first_nonzero_x, state.x_star
    if first is None and xn > 0:
        first, x_star = t, xn
    return ScaleState(
        x_max=max(state.x_max, xn),
        y_max=y_max,
        y_max_prev=state.y_max,
        first_nonzero_x=first,
        x_star=x_star,
        round=t,
        d=ex.features.shape[0],
    )


def eval_loss(kind: str, prediction, response) -> float:
    """Loss of one prediction.

    ``square``: ``||a - y||^2 / 2``. ``log``: ``-ln p(y)`` for a probability
    vector ``p`` and 1-based class ``y``; zero mass gives ``LOG_LOSS_INF``.
    ``logistic``: the multiclass logistic loss of a score vector ``theta x``,
    ``ln(1 + sum_{y' != y} exp(s_y' - s_y))``.
    """
    if kind == "square":
        a = np.atleast_1d(np.asarray(prediction, dtype=float))
        y = np.atleast_1d(np.asarray(response, dtype=float))
        if a.shape != y.shape:
            raise DimensionError(f"prediction shape {a.shape} != response shape {y.shape}")
        return 0.5 * float(np.dot(a - y, a - y))
    if kind == "log":
        p = np.asarray(prediction, dtype=float)
        if np.any(p < 0):
            raise ValueError("negative probability mass")
        if abs(p.sum() - 1.0) > 1e-9:
            raise ValueError(f"probabilities sum to {p.sum()!r}")
        y = _class_index(response, p.shape[0])
        return -math.log(p[y]) if p[y] > 0 else LOG_LOSS_INF
    if kind == "logistic":
        s = np.asarray(prediction, dtype=float)
        y = _class_index(response, s.shape[0])
        return float(logsumexp(s) - s[y])
    raise ValueError(f"unknown loss kind {kind!r}")


def _class_index(response, K: int) -> int:
    y = int(response)
    if not 1 <= y <= K:
        raise DimensionError(f"class index {y} outside 1..{K}")
    return y - 1


@dataclass(frozen=True)
class Comparator:
    theta: np.ndarray
    norm_value: float
    norm_kind: str = "L2"


def comparator_norm(theta: np.ndarray, norm_kind: str) -> float:
    theta = np.asarray(theta, dtype=float)
    if norm_kind in ("L2", "rkhsNorm"):
        return float(np.linalg.norm(theta))
    if norm_kind in ("rowMaxOfL2", "twoToInfty"):
        # sup_{||x||_2 <= 1} ||theta x||_inf is the largest row norm.
        return float(np.max(np.linalg.norm(np.atleast_2d(theta), axis=1)))
    raise ValueError(f"unknown norm kind {norm_kind!r}")


def _design(data: Sequence[LabeledExample]):
    if not data:
        raise ValueError("empty data")
    X = np.stack([ex.features for ex in data])
    y = np.array([float(np.asarray(ex.response).ravel()[0]) for ex in data])
    return X, y


def best_square_comparator(data: Sequence[LabeledExample], U: float = math.inf) -> Comparator:
    """Least-squares comparator over the Euclidean ball of radius ``U``."""
    X, y = _design(data)
    G = X.T @ X
    b = X.T @ y
    mu, Q = np.linalg.eigh(G)
    mu = np.clip(mu, 0.0, None)
    c = Q.T @ b
    tol = 1e-12 * max(mu.max(initial=0.0), 1e-300)
    # Minimum-norm solution; directions with zero curvature carry zero weight.
    free = np.where(mu > tol, c / np.where(mu > tol, mu, 1.0), 0.0)
    theta = Q @ free
    norm = float(np.linalg.norm(theta))
    if norm <= U:
        return Comparator(theta, norm, "L2")

    def norm_at(m):
        return float(np.linalg.norm(c / (mu + m)))

    lo, hi = 0.0, max(float(np.linalg.norm(b)) / U, 1e-300)
    while norm_at(hi) > U:
        hi *= 2.0
    while True:
        mid = 0.5 * (lo + hi)
        nm = norm_at(mid)
        if abs(nm - U) <= 1e-12 * U or hi - lo <= 1e-15 * hi:
            break
        if nm > U:
            lo = mid
        else:
            hi = mid
    theta = Q @ (c / (mu + mid))
    theta *= U / np.linalg.norm(theta)
    return Comparator(theta, float(np.linalg.norm(theta)), "L2")


def best_constant_comparator(ys: np.ndarray, U: float = math.inf) -> Comparator:
    """Best constant prediction ``theta`` under ``||theta - y||^2/2``, within radius U."""
    ys = np.atleast_2d(np.asarray(ys, dtype=float))
    if ys.shape[0] == 0:
        raise ValueError("empty data")
    theta = ys.mean(axis=0)
    norm = float(np.linalg.norm(theta))
    if norm > U:
        theta = theta * (U / norm)
        norm = float(np.linalg.norm(theta))
    return Comparator(theta, norm, "L2")


def best_logistic_comparator(
    data: Sequence[LabeledExample],
    U: float,
    norm_kind: str = "rowMaxOfL2",
    K: Optional[int] = None,
    binary_embedding: Optional[bool] = None,
    iterations: int = 2000,
    theta0: Optional[np.ndarray] = None,
) -> Comparator:
    """Projected gradient descent on the cumulative logistic loss.

    The feasible set is ``{theta : max_k ||theta_k||_2 <= U}``. For ``K = 2``
    the default is the binary embedding ``theta = (theta'; 0)``.
    """
    if norm_kind not in ("rowMaxOfL2", "twoToInfty", "L2"):
        raise ValueError(f"unsupported norm kind {norm_kind!r} for logistic comparator")
    if not data:
        raise ValueError("empty data")
    X = np.stack([ex.features for ex in data])
    labels = np.array([int(ex.response) for ex in data]) - 1
    K = int(K if K is not None else max(2, labels.max() + 1))
    if labels.min() < 0 or labels.max() >= K:
        raise DimensionError("class index out of range")
    if binary_embedding is None:
        binary_embedding = K == 2
    d = X.shape[1]
    onehot = np.eye(K)[labels]
    sq = float(np.sum(X * X))
    lip = (0.25 if binary_embedding else 0.5) * sq
    step = 1.0 / lip if lip > 0 else 0.0

    theta = np.zeros((K, d)) if theta0 is None else np.array(theta0, dtype=float).reshape(K, d)
    if binary_embedding:
        theta[1] = 0.0

    def project(th):
        norms = np.linalg.norm(th, axis=1)
        scale = np.where(norms > U, U / np.where(norms > 0, norms, 1.0), 1.0)
        return th * scale[:, None]

    theta = project(theta)
    for _ in range(iterations):
        S = X @ theta.T
        P = np.exp(S - logsumexp(S, axis=1, keepdims=True))
        grad = (P - onehot).T @ X
        if binary_embedding:
            grad[1] = 0.0
        theta = project(theta - step * grad)
    return Comparator(theta, comparator_norm(theta, "rowMaxOfL2"), norm_kind)


def logistic_objective(data: Sequence[LabeledExample], theta: np.ndarray) -> float:
    X = np.stack([ex.features for ex in data])
    labels = np.array([int(ex.response) for ex in data]) - 1
    S = X @ np.atleast_2d(theta).T
    return float(np.sum(logsumexp(S, axis=1) - S[np.arange(len(labels)), labels]))


@dataclass
class RegretLedger:
    """Per-round learner and comparator losses with a running regret total."""

    per_round: list = field(default_factory=list)
    cum_regret: float = 0.0
    bound_value: Optional[float] = None

    def record(self, learner_loss: float, comparator_loss: float) -> float:
        self.per_round.append((float(learner_loss), float(comparator_loss)))
        self.cum_regret += learner_loss - comparator_loss
        return self.cum_regret

    def recomputed(self) -> float:
        return math.fsum(a - b for a, b in self.per_round)

    def cumulative(self) -> np.ndarray:
        return np.cumsum([a - b for a, b in self.per_round])

    @property
    def bound_satisfied(self) -> Optional[bool]:
        if self.bound_value is None:
            return None
        return self.cum_regret <= self.bound_value + 1e-6 * abs(self.bound_value)


class Learner(ABC):
    """Online protocol: ``predict`` sees ``x_t`` before ``update`` reveals ``y_t``.

    ``task`` is ``"log"`` (predictions are probability vectors over 1..K) or
    ``"square"`` (real actions). ``invariances`` lists the rescalings the
    learner is exactly invariant/equivariant under: ``"x"``, ``"y"``,
    ``"kernel"``.
    """

    task: str = "square"
    invariances: tuple = ()

    @abstractmethod
    def predict(self, x=None):
        ...

    @abstractmethod
    def update(self, x, y) -> None:
        ...


def evolve(state, **changes):
    """``dataclasses.replace`` that tolerates numpy fields."""
    return replace(state, **changes)
