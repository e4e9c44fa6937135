"""Normal location family: exact minimax (NML) regret and the grid-adaptive predictor."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import mpmath
import numpy as np
from scipy import integrate
from scipy.special import gammaln, log_ndtr, logsumexp

from .aggregation import P_CAP, aggregate_overhead, build_grid, grid_aggregator, logloss_update
from .core import Learner


@dataclass(frozen=True)
class NormalLocationModel:
    sigma: float
    d: int
    T: int

    def __post_init__(self):
        if not self.sigma > 0:
            raise ValueError("sigma must be positive")
        if self.d < 1 or self.T < 1:
            raise ValueError("need d >= 1 and T >= 1")


def residual_term(U: float, model: NormalLocationModel) -> float:
    """``V(U, T) = ln(1 + d/c * int_0^inf (1 + r/c)^(d-1) e^(-r^2/2) dr)`` with ``c = sqrt(T) U / sigma``."""
    if not U > 0:
        raise ValueError("U must be positive")
    c = math.sqrt(model.T) * U / model.sigma
    d = model.d
    if d == 1:
        integral = math.sqrt(math.pi / 2.0)
    else:
        integral, _ = integrate.quad(
            lambda r: (1.0 + r / c) ** (d - 1) * math.exp(-0.5 * r * r), 0.0, math.inf,
            epsabs=1e-13, epsrel=1e-12, limit=200,
        )
    return math.log1p(d / c * integral)


def minimax_regret_value(U: float, model: NormalLocationModel) -> float:
    """Minimax log-loss regret over the ball of radius ``U`` (the NML value ``ln Z``)."""
    if not U > 0:
        raise ValueError("U must be positive")
    d, T, s = model.d, model.T, model.sigma
    log_gamma_term = (2.0 / d) * gammaln(d / 2.0 + 1.0)
    first = 0.5 * d * (math.log(T * U * U / (s * s)) - math.log(2.0) - log_gamma_term)
    return first + residual_term(U, model)


def nml_normalizer_oracle(U: float, model: NormalLocationModel) -> float:
    """``ln Z`` by direct radial integration of the maximized likelihood, in mpmath.

    Independent of ``minimax_regret_value``: it integrates the reduced radial
    form rather than the simplified closed form.
    """
    if model.d > 3:
        raise ValueError("oracle restricted to d <= 3")
    if not U > 0:
        raise ValueError("U must be positive")
    with mpmath.workdps(30):
        d = model.d
        sig = mpmath.mpf(model.sigma)
        rt = mpmath.sqrt(model.T)
        Um = mpmath.mpf(U)
        h = sig / rt
        radial = mpmath.quad(lambda r: (r * h + Um) ** (d - 1) * mpmath.exp(-r * r / 2), [0, 6, 12, mpmath.inf])
        inner = Um ** d / d + h * radial
        angular = d * mpmath.pi ** (mpmath.mpf(d) / 2) / mpmath.gamma(mpmath.mpf(d) / 2 + 1)
        norm = (2 * mpmath.pi * sig * sig / model.T) ** (mpmath.mpf(d) / 2)
        return float(mpmath.log(inner * angular / norm))


def thm2_bound(theta_norm: float, model: NormalLocationModel) -> float:
    """Regret bound of the grid-adaptive predictor against ``theta``.

    ``V`` is evaluated at ``max(||theta||, sigma/sqrt(T))``: below the lowest
    grid radius the bound of the lowest grid expert applies.
    """
    d, T, s = model.d, model.T, model.sigma
    r2 = theta_norm * theta_norm * T / (s * s)
    log_gamma_term = (2.0 / d) * gammaln(d / 2.0 + 1.0)
    first = 0.5 * d * (math.log(2.0 * r2 + 1.0) - math.log(2.0) - log_gamma_term)
    over = 2.0 * math.log(math.log2(8.0 * r2 + 4.0))
    return first + over + residual_term(max(theta_norm, s / math.sqrt(T)), model)


def _log_dist_sq(u: float, U: float) -> float:
    e = abs(u) - U
    return e * e if e > 0 else 0.0


def nml_log_marginal(t: int, s: float, q: float, U: float, model: NormalLocationModel) -> float:
    """``ln m_t + ln Z`` where ``m_t`` is the NML joint with the future integrated out.

    Sufficient statistics: ``t`` observations with sum ``s`` and sum of squares ``q``.
    """
    T, sig2 = model.T, model.sigma ** 2
    if t == 0:
        return minimax_regret_value(U, model)
    n = T - t
    if n == 0:
        return -0.5 * T * math.log(2 * math.pi * sig2) - (q - s * s / T + T * _log_dist_sq(s / T, U)) / (2 * sig2)

    # exp(phi) is a Gaussian piece on each of the three regions split at
    # s + F = -TU and s + F = TU, so the future integral is a sum of erf terms.
    a_mid = (1.0 / n - 1.0 / T) / (2.0 * sig2)
    a_out = 1.0 / (2.0 * n * sig2)
    lo, hi = -T * U - s, T * U - s
    pieces = [
        # (quadratic coefficient a, linear b, constant c, left, right) of phi = -aF^2 + bF + c
        (a_out, -U / sig2, (-2.0 * U * s - T * U * U) / (2.0 * sig2), -math.inf, lo),
        (a_mid, s / (T * sig2), s * s / (2.0 * T * sig2), lo, hi),
        (a_out, U / sig2, (2.0 * U * s - T * U * U) / (2.0 * sig2), hi, math.inf),
    ]
    log_j = logsumexp([_log_gauss_piece(*pc) for pc in pieces])
    return (
        -0.5 * (t + 1) * math.log(2 * math.pi * sig2)
        - 0.5 * math.log(n)
        - q / (2.0 * sig2)
        + log_j
    )


def _log_gauss_piece(a: float, b: float, c: float, left: float, right: float) -> float:
    """``ln int_left^right exp(-a F^2 + b F + c) dF`` for ``a > 0``."""
    if not right > left:
        return -math.inf
    mu = b / (2.0 * a)
    z = math.sqrt(2.0 * a)
    return c + b * b / (4.0 * a) + 0.5 * math.log(math.pi / a) + _log_ndtr_diff(z * (right - mu), z * (left - mu))


def _log_ndtr_diff(u: float, v: float) -> float:
    """``ln(Phi(u) - Phi(v))`` for ``u > v``, stable in both tails."""
    if v > 0:
        u, v = -v, -u
    lu, lv = log_ndtr(u), log_ndtr(v)
    if lv == -math.inf:
        return lu
    return lu + math.log1p(-math.exp(lv - lu))


def nml_conditional_predict_1d(history: Sequence[float], U: float, model: NormalLocationModel) -> Callable:
    """Conditional NML density ``y -> p_nml(y | history)`` for ``d = 1``."""
    if model.d != 1:
        raise ValueError("conditional NML implemented for d = 1 only")
    h = np.asarray(history, dtype=float)
    t = h.size
    if t >= model.T:
        raise ValueError("history already covers the horizon")
    s, q = float(h.sum()), float(np.dot(h, h))
    base = nml_log_marginal(t, s, q, U, model)

    def density(y):
        y = float(y)
        return math.exp(nml_log_marginal(t + 1, s + y, q + y * y, U, model) - base)

    density.log_density = lambda y: nml_log_marginal(t + 1, s + float(y), q + float(y) ** 2, U, model) - base
    return density


class AdaptiveNormal(Learner):
    """Bayesian mixture of NML experts over radii ``U_m = sqrt(alpha_m)``, ``alpha_min = sigma^2/T``."""

    task = "density"

    def __init__(self, sigma: float, T: int, n_doublings: int = P_CAP):
        self.model = NormalLocationModel(sigma, 1, T)
        self.grid = build_grid(sigma * sigma / T, math.inf, cap=n_doublings)
        self.radii = np.sqrt(self.grid.values)
        self.state = grid_aggregator(self.grid)
        self.t, self.s, self.q = 0, 0.0, 0.0
        self._base = np.array([nml_log_marginal(0, 0.0, 0.0, U, self.model) for U in self.radii])

    @property
    def n_experts(self) -> int:
        return self.radii.size

    def expert_log_densities(self, y: float, _snapshot=None) -> np.ndarray:
        t, s, q, base = _snapshot or (self.t, self.s, self.q, self._base)
        y = float(y)
        nxt = np.array([nml_log_marginal(t + 1, s + y, q + y * y, U, self.model) for U in self.radii])
        return nxt - base

    def predict(self, x=None) -> Callable:
        w = self.state.log_weights.copy()
        snap = (self.t, self.s, self.q, self._base.copy())

        def density(y):
            return float(math.exp(logsumexp(w + self.expert_log_densities(y, snap))))

        return density

    def update(self, x, y) -> None:
        y = float(np.asarray(y).ravel()[0])
        ld = self.expert_log_densities(y)
        self.state = logloss_update(self.state, ld)
        self.t += 1
        self.s += y
        self.q += y * y
        self._base = self._base + ld

    @property
    def cumulative_loss(self) -> float:
        return self.state.mixture_loss


def normal_log_loss(theta: float, y: float, sigma: float) -> float:
    return 0.5 * math.log(2 * math.pi * sigma * sigma) + (y - theta) ** 2 / (2 * sigma * sigma)


__all__ = [
    "NormalLocationModel", "minimax_regret_value", "nml_normalizer_oracle", "residual_term",
    "nml_log_marginal", "nml_conditional_predict_1d", "AdaptiveNormal", "thm2_bound",
    "normal_log_loss", "aggregate_overhead",
]
