"""Hyperparameter aggregation over an exponential grid.

Two engines share the grid and prior:

* the exact Bayesian mixture for log loss, whose cumulative loss is
  ``-ln sum_m pi(m) exp(-L_m)``;
* clipped exponential weights for the square loss, with responses and expert
  actions clipped to the previous running maximum ``Y_{t-1}`` and learning
  rate ``1 / (4 Y_{t-1}^2)``.

Weights are always stored as normalized log-weights.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional

import numpy as np
from scipy.special import logsumexp

from .core import DimensionError, ScaleState

P_CAP = 64


@dataclass(frozen=True)
class HyperGrid:
    alpha_min: float
    alpha_max: float
    M: int

    @property
    def values(self) -> np.ndarray:
        return self.alpha_min * np.exp2(np.arange(self.M + 1))

    @property
    def size(self) -> int:
        return self.M + 1

    def log_prior(self) -> np.ndarray:
        return log_grid_prior(self.M)


def build_grid(alpha_min: float, alpha_max: float = math.inf, cap: int = P_CAP) -> HyperGrid:
    """Grid ``alpha_min * 2^m`` for ``m = 0..M`` with ``M = ceil(log2(alpha_max/alpha_min))``.

    An infinite ``alpha_max`` is truncated to ``cap`` doublings.
    """
    if not alpha_min > 0:
        raise ValueError(f"alpha_min must be positive, got {alpha_min!r}")
    if not alpha_max > alpha_min:
        raise ValueError(f"alpha_max ({alpha_max!r}) must exceed alpha_min ({alpha_min!r})")
    if math.isinf(alpha_max):
        return HyperGrid(alpha_min, alpha_max, int(cap))
    ratio = alpha_max / alpha_min
    M = math.ceil(math.log2(ratio))
    # log2 of an exact power of two can land a hair above the integer
    if M > 0 and alpha_min * 2.0 ** (M - 1) >= alpha_max:
        M -= 1
    return HyperGrid(alpha_min, alpha_max, M)


def grid_prior(m: int, M: int) -> float:
    if not 0 <= m <= M:
        raise ValueError(f"grid index {m} outside 0..{M}")
    return (M + 2) / ((M + 1) * (m + 1) * (m + 2))


def grid_prior_exact(m: int, M: int) -> Fraction:
    if not 0 <= m <= M:
        raise ValueError(f"grid index {m} outside 0..{M}")
    return Fraction(M + 2, (M + 1) * (m + 1) * (m + 2))


def log_grid_prior(M: int) -> np.ndarray:
    m = np.arange(M + 1, dtype=float)
    return math.log(M + 2) - math.log(M + 1) - np.log(m + 1) - np.log(m + 2)


def grid_index(grid: HyperGrid, alpha: float) -> int:
    """Smallest ``m`` with ``alpha_m >= alpha`` (clamped to the grid)."""
    if alpha <= grid.alpha_min:
        return 0
    m = math.ceil(math.log2(alpha / grid.alpha_min))
    if m > 0 and grid.alpha_min * 2.0 ** (m - 1) >= alpha:
        m -= 1
    return min(m, grid.M)


def aggregate_overhead(alpha: float, alpha_min: float) -> float:
    """Log-loss grid overhead ``2 ln log2(8 alpha / alpha_min v 4)``."""
    return 2.0 * math.log(math.log2(max(8.0 * alpha / alpha_min, 4.0)))


def clipped_overhead(alpha: float, alpha_min: float, Y: float, Y_prev: Optional[float] = None,
                     form: str = "stated") -> float:
    """Square-loss grid overhead.

    ``stated``: ``8 Y^2 ln log2(8 alpha / alpha_min v 4) + 2 Y^2``.
    ``proof``: ``4 Y_{T-1}^2 (-ln pi(m*)) + 2 Y^2`` with ``m*`` the grid index
    of ``alpha`` on an untruncated grid.
    """
    if form == "stated":
        return 8.0 * Y * Y * math.log(math.log2(max(8.0 * alpha / alpha_min, 4.0))) + 2.0 * Y * Y
    if form == "proof":
        yp = Y if Y_prev is None else Y_prev
        m = max(0, math.ceil(math.log2(max(alpha / alpha_min, 1.0)) - 1e-12))
        # -ln pi(m) on an infinite grid is ln((m+1)(m+2)); finite M only lowers it
        return 4.0 * yp * yp * math.log((m + 1) * (m + 2)) + 2.0 * Y * Y
    raise ValueError(f"unknown overhead form {form!r}")


@dataclass
class AggregatorState:
    """Normalized log-weights and per-expert cumulative losses.

    Leading batch dimensions are allowed: ``log_weights`` has shape
    ``(..., M+1)`` and ``log_prior`` broadcasts against it.
    """

    log_prior: np.ndarray
    log_weights: np.ndarray
    cum_loss: np.ndarray
    kind: str = "logLossExact"
    eta: float = math.inf
    mixture_loss: float = 0.0

    @property
    def weights(self) -> np.ndarray:
        return np.exp(self.log_weights)


def new_aggregator(log_prior: np.ndarray, kind: str = "logLossExact",
                   batch: tuple = ()) -> AggregatorState:
    log_prior = np.asarray(log_prior, dtype=float)
    lw = np.broadcast_to(log_prior - logsumexp(log_prior), batch + log_prior.shape).copy()
    return AggregatorState(log_prior, lw, np.zeros_like(lw), kind)


def grid_aggregator(grid: HyperGrid, kind: str = "logLossExact", batch: tuple = ()) -> AggregatorState:
    return new_aggregator(grid.log_prior(), kind, batch)


def _lse(a: np.ndarray) -> np.ndarray:
    """Log-sum-exp over the last axis, keepdims; lighter than scipy's in tight loops."""
    m = np.max(a, axis=-1, keepdims=True)
    m = np.where(np.isfinite(m), m, 0.0)
    with np.errstate(divide="ignore"):
        return m + np.log(np.sum(np.exp(a - m), axis=-1, keepdims=True))


def _renormalize(logw: np.ndarray) -> np.ndarray:
    return logw - _lse(logw)


def logloss_mixture(state: AggregatorState, expert_probs: np.ndarray) -> np.ndarray:
    """Posterior-weighted mean of the expert distributions, shape ``(K,)``."""
    P = np.asarray(expert_probs, dtype=float)
    if P.shape[0] != state.log_weights.shape[-1]:
        raise DimensionError("one distribution per expert expected")
    sums = P.sum(axis=1)
    if np.any(np.abs(sums - 1.0) > 1e-9):
        raise ValueError("expert distribution does not sum to 1")
    return state.weights @ P


def logloss_update(state: AggregatorState, log_density_at_y: np.ndarray) -> AggregatorState:
    """Bayes update with each expert's log density at the realized outcome."""
    ld = np.asarray(log_density_at_y, dtype=float)
    mix = float(_lse(state.log_weights + ld)[0])
    cum = state.cum_loss - ld
    return AggregatorState(
        state.log_prior,
        _renormalize(state.log_prior - cum),
        cum,
        state.kind,
        state.eta,
        state.mixture_loss - mix,
    )


def logloss_aggregate_step(state: AggregatorState, expert_probs: np.ndarray, y: int):
    """One round of the exact mixture over discrete outcomes (1-based ``y``)."""
    P = np.asarray(expert_probs, dtype=float)
    mixture = logloss_mixture(state, P)
    K = P.shape[1]
    if not 1 <= int(y) <= K:
        raise DimensionError(f"class index {y} outside 1..{K}")
    with np.errstate(divide="ignore"):
        ld = np.log(P[:, int(y) - 1])
    return mixture, logloss_update(state, ld)


def ew_mix_step(state: AggregatorState, expert_losses: np.ndarray, eta: float) -> AggregatorState:
    """FTRL form of exponential weights: ``ln pi - eta * cumLoss``, renormalized."""
    if eta < 0:
        raise ValueError("learning rate must be nonnegative")
    if eta > state.eta * (1.0 + 1e-12):
        raise ValueError(f"learning rate increased from {state.eta!r} to {eta!r}")
    cum = state.cum_loss + np.asarray(expert_losses, dtype=float)
    logw = np.broadcast_to(state.log_prior, cum.shape) - eta * cum if eta > 0 else \
        np.broadcast_to(state.log_prior, cum.shape).copy()
    return AggregatorState(state.log_prior, _renormalize(logw), cum, state.kind, eta,
                           state.mixture_loss)


def clip_response(y, y_max_prev: float, y_max: float) -> np.ndarray:
    y = np.atleast_1d(np.asarray(y, dtype=float))
    if np.linalg.norm(y) > y_max * (1.0 + 1e-12):
        raise ValueError("scale state out of sync: ||y|| exceeds Y_t")
    if y_max_prev == 0.0:
        return np.zeros_like(y)
    return (y_max_prev / y_max) * y


def project_ball(a: np.ndarray, radius: float) -> np.ndarray:
    """Row-wise projection of ``a[..., n]`` onto the Euclidean ball."""
    a = np.asarray(a, dtype=float)
    if radius == 0.0:
        return np.zeros_like(a)
    norms = np.linalg.norm(a, axis=-1, keepdims=True)
    factor = np.where(norms > radius, radius / np.where(norms > 0, norms, 1.0), 1.0)
    return a * factor


def clipped_mixture(state: AggregatorState, expert_actions: np.ndarray, y_max_prev: float) -> np.ndarray:
    """Weighted mean of the projected expert actions; ``actions[..., M+1, n]``."""
    proj = project_ball(expert_actions, y_max_prev)
    return np.einsum("...m,...mn->...n", state.weights, proj)


def clipped_update(state: AggregatorState, expert_actions: np.ndarray, y,
                   scale: ScaleState) -> AggregatorState:
    """Feed the clipped losses of round ``t`` and reweight for round ``t+1``.

    ``scale`` must already include ``y_t``.
    """
    y_prev, y_max = scale.y_max_prev, scale.y_max
    if y_max == 0.0:
        return state
    yt = clip_response(y, y_prev, y_max)
    proj = project_ball(expert_actions, y_prev)
    losses = 0.5 * np.sum((proj - yt) ** 2, axis=-1)
    return ew_mix_step(state, losses, 1.0 / (4.0 * y_max * y_max))


def clipped_square_aggregate_step(state: AggregatorState, expert_actions: np.ndarray, y,
                                  scale: ScaleState):
    """Emit the clipped mixture action, then update on ``y``.

    Returns ``(action, new_state)``. ``scale`` is the scale state through
    round ``t`` (so ``scale.y_max_prev`` is ``Y_{t-1}``).
    """
    action = clipped_mixture(state, expert_actions, scale.y_max_prev)
    return action, clipped_update(state, expert_actions, y, scale)


@dataclass
class ClippedSquareAggregator:
    """Stateful wrapper around the clipped EW step."""

    log_prior: np.ndarray
    batch: tuple = ()
    state: AggregatorState = field(init=False)

    def __post_init__(self):
        self.state = new_aggregator(self.log_prior, "clippedSquareEW", self.batch)

    def predict(self, expert_actions: np.ndarray, y_max_prev: float) -> np.ndarray:
        return clipped_mixture(self.state, expert_actions, y_max_prev)

    def update(self, expert_actions: np.ndarray, y, scale: ScaleState) -> None:
        self.state = clipped_update(self.state, expert_actions, y, scale)
