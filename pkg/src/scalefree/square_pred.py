"""Square-loss prediction without features: OGD experts and their clipped aggregation."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .aggregation import ClippedSquareAggregator, log_grid_prior
from .core import LabeledExample, Learner, ScaleState, update_scale


@dataclass(frozen=True)
class OgdState:
    """Gradient descent on ``||theta - y||^2 / 2`` with step ``1 / (lambda + t)``."""

    lam: float
    theta: np.ndarray
    t: int = 1


def ogd_init(lam: float, dim: int = 1) -> OgdState:
    if not lam > 0:
        raise ValueError("lambda must be positive")
    # zero start is the only choice equivariant under y -> a y
    return OgdState(float(lam), np.zeros(dim), 1)


def ogd_step(state: OgdState, y) -> OgdState:
    y = np.atleast_1d(np.asarray(y, dtype=float))
    if y.shape != state.theta.shape:
        raise ValueError(f"response shape {y.shape} != iterate shape {state.theta.shape}")
    eta = 1.0 / (state.lam + state.t)
    return OgdState(state.lam, (1.0 - eta) * state.theta + eta * y, state.t + 1)


class OnlineGradientDescent(Learner):
    task = "square"
    invariances = ("y",)

    def __init__(self, lam: float, dim: int = 1):
        self.state = ogd_init(lam, dim)

    def predict(self, x=None) -> np.ndarray:
        return self.state.theta.copy()

    def update(self, x, y) -> None:
        self.state = ogd_step(self.state, y)


def gd_grid_size(T: int) -> int:
    """Number of OGD experts, ``ceil(log2 T) + 1``."""
    if T < 1:
        raise ValueError("horizon T is required")
    return math.ceil(math.log2(T)) + 1 if T > 1 else 1


class AggregatedGD(Learner):
    """Clipped EW over OGD experts with ``lambda = 2^m``, ``m = 0..ceil(log2 T)``.

    Expert iterates already lie in the ``Y_{t-1}`` ball, so clipping of the
    actions is a no-op here; it is applied anyway for uniformity.
    """

    task = "square"
    invariances = ("y",)

    def __init__(self, T: int, dim: int = 1):
        if T is None:
            raise ValueError("horizon T is required")
        self.T, self.dim = int(T), int(dim)
        M = gd_grid_size(self.T) - 1
        self.lambdas = np.exp2(np.arange(M + 1))
        # batched iterate matrix, one row per expert
        self.thetas = np.zeros((M + 1, self.dim))
        self.t = 1
        self.agg = ClippedSquareAggregator(log_grid_prior(M))
        self.scale = ScaleState()

    @property
    def n_experts(self) -> int:
        return self.lambdas.size

    def expert_actions(self) -> np.ndarray:
        return self.thetas.copy()

    def predict(self, x=None) -> np.ndarray:
        # before y_t arrives the running maximum is Y_{t-1}
        return self.agg.predict(self.thetas, self.scale.y_max)

    def update(self, x, y) -> None:
        y = np.atleast_1d(np.asarray(y, dtype=float))
        self.scale = update_scale(self.scale, LabeledExample(np.zeros(1), y))
        self.agg.update(self.thetas, y, self.scale)
        eta = 1.0 / (self.lambdas + self.t)
        self.thetas = (1.0 - eta)[:, None] * self.thetas + eta[:, None] * y[None, :]
        self.t += 1


def gd_bound(lam: float, theta_norm: float, Y: float, T: int) -> float:
    """``lambda ||theta||^2 / 2 + 2 Y^2 ln(1 + T / lambda)``."""
    return lam * theta_norm ** 2 / 2.0 + 2.0 * Y * Y * math.log1p(T / lam)


def thm10_bound(theta_norm: float, Y: float, T: int, form: str = "stated") -> float:
    """Regret bound of :class:`AggregatedGD` against a constant ``theta``.

    ``stated`` is ``2Y^2 ln(2 + T(||theta||^2/Y^2 ^ 1)) + 8Y^2 ln log2(8Y^2/||theta||^2 v 8) + 3Y^2``,
    which is ``+inf`` at ``theta = 0``. ``proof`` keeps the cap ``alpha <= T``
    from the grid and stays finite:
    ``Y^2 + 2Y^2 ln(1 + (T||theta||^2/Y^2 v 1)) + 8Y^2 ln log2(8(Y^2/||theta||^2 ^ T) v 4) + 2Y^2``.
    """
    if Y == 0.0:
        return 0.0
    th = min(theta_norm, Y)
    Y2 = Y * Y
    if form == "stated":
        main = 2.0 * Y2 * math.log(2.0 + T * min(th * th / Y2, 1.0))
        if th == 0.0:
            return math.inf
        return main + 8.0 * Y2 * math.log(math.log2(max(8.0 * Y2 / (th * th), 8.0))) + 3.0 * Y2
    if form == "proof":
        alpha = T if th == 0.0 else min(Y2 / (th * th), T)
        main = Y2 + 2.0 * Y2 * math.log1p(max(T * th * th / Y2, 1.0))
        return main + 8.0 * Y2 * math.log(math.log2(max(8.0 * alpha, 4.0))) + 2.0 * Y2
    raise ValueError(f"unknown form {form!r}")
