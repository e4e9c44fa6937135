"""Kernel least-squares regression: KAAR, its scale-free variant and the doubly aggregated A-KAAR.

All losses are ``(a - y)^2 / 2``. The scale-free regularizer is
``lambda = alpha * k(x_{t*}, x_{t*})`` with ``t*`` the first round whose kernel
self-evaluation is positive; before ``t*`` every prediction is 0.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import List, Optional, Sequence

import numpy as np
from scipy import linalg
from scipy.spatial.distance import cdist
from scipy.special import gamma as gamma_fn, kv

from . import kernels
from .aggregation import (
    log_grid_prior,
    new_aggregator,
    clipped_mixture,
    clipped_update,
    project_ball,
)
from .core import LabeledExample, Learner, ScaleState, update_scale

AKAAR_P = 40


class Kernel:
    """Positive semi-definite kernel; subclasses implement :meth:`gram`."""

    kind = "kernel"
    scale = 1.0

    def gram(self, A: np.ndarray, B: Optional[np.ndarray] = None) -> np.ndarray:
        raise NotImplementedError

    def __call__(self, x, xp) -> float:
        return float(self.gram(np.atleast_2d(np.asarray(x, float)), np.atleast_2d(np.asarray(xp, float)))[0, 0])

    def diag(self, A: np.ndarray) -> np.ndarray:
        A = np.atleast_2d(A)
        return np.array([self(a, a) for a in A])

    def scaled(self, c: float) -> "ScaledKernel":
        if not c > 0:
            raise ValueError("kernel scale must be positive")
        return ScaledKernel(self, c)


@dataclass(frozen=True)
class LinearKernel(Kernel):
    kind = "linearDot"

    def gram(self, A, B=None):
        A = np.atleast_2d(A)
        B = A if B is None else np.atleast_2d(B)
        return A @ B.T

    def diag(self, A):
        A = np.atleast_2d(A)
        return np.einsum("ij,ij->i", A, A)


@dataclass(frozen=True)
class GaussianKernel(Kernel):
    width: float = 1.0
    kind = "gaussianRBF"

    def gram(self, A, B=None):
        A = np.atleast_2d(A)
        B = A if B is None else np.atleast_2d(B)
        return np.exp(-cdist(A, B, "sqeuclidean") / (2.0 * self.width ** 2))

    def diag(self, A):
        return np.ones(np.atleast_2d(A).shape[0])


@dataclass(frozen=True)
class MaternSobolevKernel(Kernel):
    """Matern kernel of order ``nu = s - d/2``, whose RKHS is norm-equivalent to ``W_{s,2}``."""

    s: float
    d: int
    length: float = 1.0
    kind = "maternSobolev"

    def __post_init__(self):
        if not self.s > self.d / 2.0:
            raise ValueError("need s > d/2 for a positive Matern order")

    @property
    def nu(self) -> float:
        return self.s - self.d / 2.0

    def gram(self, A, B=None):
        A = np.atleast_2d(A)
        B = A if B is None else np.atleast_2d(B)
        # direct differences keep r exactly 0 on coincident points
        r = cdist(A, B)
        nu = self.nu
        z = math.sqrt(2.0 * nu) * r / self.length
        out = np.ones_like(z)
        pos = z > 0
        zp = z[pos]
        out[pos] = (2.0 ** (1.0 - nu) / gamma_fn(nu)) * zp ** nu * kv(nu, zp)
        return out

    def diag(self, A):
        return np.ones(np.atleast_2d(A).shape[0])


@dataclass(frozen=True)
class ScaledKernel(Kernel):
    base: Kernel
    c: float

    @property
    def kind(self):
        return self.base.kind

    @property
    def scale(self):
        return self.c * self.base.scale

    def gram(self, A, B=None):
        return self.c * self.base.gram(A, B)

    def diag(self, A):
        return self.c * self.base.diag(A)


def is_linear(kernel: Kernel) -> bool:
    while isinstance(kernel, ScaledKernel):
        kernel = kernel.base
    return isinstance(kernel, LinearKernel)


@dataclass
class KaarState:
    lam: float
    kernel: Kernel
    xs: List[np.ndarray] = field(default_factory=list)
    ys: List[float] = field(default_factory=list)
    first_nonzero_k: Optional[int] = None

    def push(self, x, y) -> None:
        x = np.atleast_1d(np.asarray(x, float))
        self.xs.append(x)
        self.ys.append(float(np.asarray(y).ravel()[0]))
        if self.first_nonzero_k is None and self.kernel(x, x) > 0:
            self.first_nonzero_k = len(self.xs)


def kaar_predict(state: KaarState, x_t) -> float:
    """``(y_1..y_{t-1}, 0)^T (lambda I + K_t)^{-1} (k(x_1,x_t) .. k(x_t,x_t))``."""
    if not state.lam > 0:
        raise ValueError("lambda must be positive")
    if not state.xs:
        return 0.0
    x_t = np.atleast_1d(np.asarray(x_t, float))
    X = np.vstack(state.xs + [x_t])
    Kt = state.kernel.gram(X)
    kvec = Kt[:, -1]
    yv = np.append(np.asarray(state.ys, float), 0.0)
    cf = linalg.cho_factor(state.lam * np.eye(X.shape[0]) + Kt, lower=True)
    return float(yv @ linalg.cho_solve(cf, kvec))


def kaar_sf_predict(state: KaarState, x_t, alpha: float) -> float:
    """KAAR with ``lambda = alpha k(x_{t*}, x_{t*})``; 0 until ``t*``.

    ``state.lam`` is ignored.
    """
    if not alpha > 0:
        raise ValueError("alpha must be positive")
    x_t = np.atleast_1d(np.asarray(x_t, float))
    if state.first_nonzero_k is not None:
        x_star = state.xs[state.first_nonzero_k - 1]
    else:
        kk = state.kernel(x_t, x_t)
        if kk <= 0:
            return 0.0
        x_star = x_t
    lam = alpha * state.kernel(x_star, x_star)
    return kaar_predict(KaarState(lam, state.kernel, state.xs, state.ys), x_t)


class KAAR(Learner):
    task = "square"
    invariances = ("y",)

    def __init__(self, kernel: Kernel, lam: float):
        self.state = KaarState(float(lam), kernel)

    def predict(self, x=None):
        return np.array([kaar_predict(self.state, x)])

    def update(self, x, y) -> None:
        self.state.push(x, y)


class KAARSF(Learner):
    task = "square"
    invariances = ("y", "kernel")

    def __init__(self, kernel: Kernel, alpha: float):
        self.alpha = float(alpha)
        self.state = KaarState(1.0, kernel)

    def predict(self, x=None):
        return np.array([kaar_sf_predict(self.state, x, self.alpha)])

    def update(self, x, y) -> None:
        self.state.push(x, y)


class _PrimalEngine:
    """KAAR for a (scaled) linear kernel in the ``d x d`` primal form, for many ``lambda`` at once."""

    def __init__(self, d: int, c: float):
        self.c = c
        self.A = np.zeros((d, d))
        self.b = np.zeros(d)

    def predict(self, x: np.ndarray, lambdas: np.ndarray) -> np.ndarray:
        A = self.A + self.c * np.outer(x, x)
        mu, Q = np.linalg.eigh(A)
        mu = np.clip(mu, 0.0, None)
        return kernels.spectral_ridge_predict(mu, np.ascontiguousarray(Q.T @ self.b),
                                              np.ascontiguousarray(Q.T @ x), lambdas)

    def push(self, x: np.ndarray, y: float) -> None:
        self.A += self.c * np.outer(x, x)
        self.b += self.c * y * x


class _DualEngine:
    """KAAR through the eigendecomposition of the growing kernel matrix."""

    def __init__(self, kernel: Kernel):
        self.kernel = kernel
        self.xs: List[np.ndarray] = []
        self.ys: List[float] = []
        self.K = np.zeros((0, 0))

    def _grown(self, x: np.ndarray) -> np.ndarray:
        n = len(self.xs)
        Kt = np.empty((n + 1, n + 1))
        Kt[:n, :n] = self.K
        if n:
            col = self.kernel.gram(np.vstack(self.xs), x[None, :])[:, 0]
            Kt[:n, n] = col
            Kt[n, :n] = col
        Kt[n, n] = self.kernel(x, x)
        return Kt

    def predict(self, x: np.ndarray, lambdas: np.ndarray) -> np.ndarray:
        Kt = self._grown(x)
        mu, V = np.linalg.eigh(Kt)
        mu = np.clip(mu, 0.0, None)
        yv = np.append(np.asarray(self.ys, float), 0.0)
        return kernels.spectral_ridge_predict(mu, np.ascontiguousarray(V.T @ yv),
                                              np.ascontiguousarray(V.T @ Kt[:, -1]), lambdas)

    def push(self, x: np.ndarray, y: float) -> None:
        self.K = self._grown(x)
        self.xs.append(x)
        self.ys.append(y)


class AKAAR(Learner):
    """Doubly aggregated KAAR-sf.

    Outer grid ``c = 2^j`` and inner grids ``alpha = 2^m / c`` for
    ``j, m = 0..P``. The inner experts take only ``2P + 1`` distinct values
    ``alpha = 2^e``, ``e = m - j``, which are computed once per round.
    """

    task = "square"
    invariances = ("y", "kernel")

    def __init__(self, kernel: Kernel, d: int, P: int = AKAAR_P):
        if P < 1:
            raise ValueError("grid cap P must be >= 1")
        self.kernel, self.d, self.P = kernel, int(d), int(P)
        self.exponents = np.arange(-self.P, self.P + 1)
        j = np.arange(self.P + 1)
        self._idx = (j[None, :] - j[:, None]) + self.P  # [j, m] -> base index of e = m - j
        self.engine = _PrimalEngine(self.d, kernel.scale) if is_linear(kernel) else _DualEngine(kernel)
        prior = log_grid_prior(self.P)
        self.inner = new_aggregator(prior, "clippedSquareEW", batch=(self.P + 1,))
        self.outer = new_aggregator(prior, "clippedSquareEW")
        self.k_star: Optional[float] = None
        self.scale = ScaleState()
        self._cache = None

    @property
    def n_outer(self) -> int:
        return self.P + 1

    def base_predictions(self, x) -> np.ndarray:
        """KAAR-sf predictions for ``alpha = 2^e``, ``e = -P..P``."""
        x = np.atleast_1d(np.asarray(x, float))
        if self.k_star is None:
            kk = self.kernel(x, x)
            if kk <= 0:
                return np.zeros(self.exponents.size)
            k_star = kk
        else:
            k_star = self.k_star
        lambdas = np.ldexp(k_star, self.exponents)
        return self.engine.predict(x, lambdas)

    def _actions(self, x):
        base = self.base_predictions(x)
        Yp = self.scale.y_max
        inner_actions = project_ball(base[self._idx][..., None], Yp)  # (J, M, 1)
        inner_out = clipped_mixture(self.inner, inner_actions, Yp)  # (J, 1)
        action = clipped_mixture(self.outer, inner_out, Yp)  # (1,)
        return base, inner_actions, inner_out, action

    def predict(self, x=None) -> np.ndarray:
        self._cache = (np.array(x, float, copy=True), self._actions(x))
        return self._cache[1][3].copy()

    def update(self, x, y) -> None:
        x = np.atleast_1d(np.asarray(x, float))
        if self._cache is None or not np.array_equal(self._cache[0], x):
            self.predict(x)
        _, inner_actions, inner_out, _ = self._cache[1]
        y = np.atleast_1d(np.asarray(y, float))
        self.scale = update_scale(self.scale, LabeledExample(x, y))
        self.inner = clipped_update(self.inner, inner_actions, y, self.scale)
        self.outer = clipped_update(self.outer, inner_out, y, self.scale)
        if self.k_star is None:
            kk = self.kernel(x, x)
            if kk > 0:
                self.k_star = kk
        self.engine.push(x, float(y[0]))
        self._cache = None


def _spectrum(K: np.ndarray) -> np.ndarray:
    K = np.asarray(K, float)
    if K.ndim != 2 or K.shape[0] != K.shape[1]:
        raise ValueError("kernel matrix must be square")
    if not np.allclose(K, K.T, rtol=1e-10, atol=1e-12 * max(1.0, np.abs(K).max(initial=0.0))):
        raise ValueError("kernel matrix is not symmetric")
    mu = np.linalg.eigvalsh(0.5 * (K + K.T))
    tr = float(np.trace(K))
    if mu.size and mu.min() < -1e-8 * max(tr, 0.0) - 1e-300:
        raise ValueError(f"kernel matrix not PSD (min eigenvalue {mu.min():.3e})")
    return np.clip(mu, 0.0, None)


def effective_dimension(K: np.ndarray, lam: float) -> float:
    """``Tr(K (K + lambda I)^{-1}) = sum mu / (mu + lambda)``."""
    if not lam > 0:
        raise ValueError("lambda must be positive")
    mu = _spectrum(K)
    return float(np.sum(mu / (mu + lam)))


def log_det_ratio(K: np.ndarray, lam: float) -> float:
    """``ln det(I + K / lambda)``."""
    mu = _spectrum(K)
    return float(np.sum(np.log1p(mu / lam)))


@dataclass
class CapacityReport:
    lambda_grid: np.ndarray
    d_eff: np.ndarray
    log_det: np.ndarray
    rhs: np.ndarray
    inequality_holds: np.ndarray
    gamma: Optional[float] = None
    C_k: Optional[float] = None

    @property
    def all_hold(self) -> bool:
        return bool(np.all(self.inequality_holds))


def capacity_check(K: np.ndarray, lambda_grid: Sequence[float], X_T: Optional[float] = None,
                   T: Optional[int] = None) -> CapacityReport:
    """Check ``ln det(I + K/lambda) <= d_eff(lambda) (1 + ln(1 + T X_T^2 / lambda))`` on a grid.

    ``X_T^2`` defaults to the largest diagonal entry of ``K`` and ``T`` to its size.
    """
    mu = _spectrum(K)
    lam = np.asarray(lambda_grid, float)
    if np.any(lam <= 0):
        raise ValueError("lambda values must be positive")
    T = K.shape[0] if T is None else int(T)
    X2 = float(np.max(np.diag(K), initial=0.0)) if X_T is None else float(X_T) ** 2
    deff = np.array([np.sum(mu / (mu + l)) for l in lam])
    ld = np.array([np.sum(np.log1p(mu / l)) for l in lam])
    rhs = deff * (1.0 + np.log1p(T * X2 / lam))
    return CapacityReport(lam, deff, ld, rhs, ld <= rhs)


def _p(params: dict, *names):
    missing = [n for n in names if n not in params]
    if missing:
        raise KeyError(f"missing parameter(s): {', '.join(missing)}")
    return [params[n] for n in names]


def _loglog_term(Y: float, arg: float, const: float = 1.5 * math.e) -> float:
    """``8 Y^2 ln(const |log2 arg|)``; ``-inf`` where ``arg = 1``."""
    inner = const * abs(math.log2(arg))
    return 8.0 * Y * Y * (math.log(inner) if inner > 0 else -math.inf)


def akaar_grid_bound(lam: float, theta_norm: float, Y: float, log_det_fn, X_star: float,
                     P: int = AKAAR_P) -> float:
    """Tightest bound the two clipped aggregation steps give at grid resolution.

    Minimizes over ``e = m - j`` of
    ``alpha_e X*^2 ||theta||^2/2 + Y^2/2 ln det(I + K/(alpha_e X*^2))
    + 4Y^2(-ln pi(m) - ln pi(j)) + 4Y^2`` with ``alpha_e = 2^e``.
    ``lam`` is unused except to seed the search window around ``log2(lam / X*^2)``.
    """
    lp = log_grid_prior(P)
    best = math.inf
    for j in range(P + 1):
        for m in range(P + 1):
            alpha = 2.0 ** (m - j)
            lam_e = alpha * X_star ** 2
            val = (lam_e * theta_norm ** 2 / 2.0 + 0.5 * Y * Y * log_det_fn(lam_e)
                   + 4.0 * Y * Y * (-lp[m] - lp[j]) + 4.0 * Y * Y)
            best = min(best, val)
    return best


def regression_bound_values(kind: str, params: dict) -> float:
    """Numeric value of a regression upper or lower bound.

    ``X_star`` is ``sqrt(k(x_{t*}, x_{t*}))`` (``||x_{t*}||`` for the linear kernel).
    ``kaarFixed`` is the single-``lambda`` KAAR bound (the first two terms of ``thm11``).
    Lower bounds (``thmLowerAsym``, ``thmLowerDimfree``) are stated for
    the unhalved loss ``(a - y)^2``.
    """
    if kind == "thm11":
        lam, th, Y, Xs = map(float, _p(params, "lam", "theta_norm", "Y", "X_star"))
        ld = float(params["log_det"]) if "log_det" in params else log_det_ratio(_p(params, "K")[0], lam)
        return lam * th * th / 2.0 + 0.5 * Y * Y * ld + _loglog_term(Y, lam / (Xs * Xs))
    if kind == "kaarFixed":
        lam, th, Y = map(float, _p(params, "lam", "theta_norm", "Y"))
        ld = float(params["log_det"]) if "log_det" in params else log_det_ratio(_p(params, "K")[0], lam)
        return lam * th * th / 2.0 + 0.5 * Y * Y * ld
    if kind == "cor12dimfree":
        XT, Y, th, T, Xs = map(float, _p(params, "X_T", "Y", "theta_norm", "T", "X_star"))
        if th <= 0:
            raise ValueError("cor12dimfree requires ||theta|| > 0")
        return XT * Y * th * math.sqrt(T) + _loglog_term(Y, XT * Y * math.sqrt(T) / (th * Xs * Xs))
    if kind == "thm13param":
        d, Y, th, T, XT, Xs = map(float, _p(params, "d", "Y", "theta_norm", "T", "X_T", "X_star"))
        if th <= 0:
            raise ValueError("thm13param requires ||theta|| > 0")
        main = 0.5 * d * Y * Y * math.log1p(T * th * th * XT * XT / (d * d * Y * Y)) + 0.5 * d * Y * Y
        # the regularizer tuned in the derivation is lambda = d Y^2 / ||theta||^2
        return main + _loglog_term(Y, d * Y * Y / (th * th * Xs * Xs))
    if kind == "eq14capacity":
        g, Ck, Y, th, T, X, Xs = map(float, _p(params, "gamma", "C_k", "Y", "theta_norm", "T", "X_T", "X_star"))
        if th <= 0:
            raise ValueError("eq14capacity requires ||theta|| > 0")
        lead = Y ** (2 / (1 + g)) * th ** (2 * g / (1 + g)) * (Ck * T) ** (2 * g / (1 + g))
        inner = 0.5 + 2 ** (g - 1) + math.log1p(X * X * (th * th * T ** g / (Y * Y * Ck ** g)) ** (1 / (1 + g)))
        arg = Y * Y * (T * Ck) ** g / (th * th * Xs ** (2 + 2 * g))
        return lead * inner + _loglog_term(Y, arg, 3 * math.e / (2 * (1 + g)))
    if kind == "thmLowerAsym":
        d, Y, U, X, T = map(float, _p(params, "d", "Y", "U", "X", "T"))
        return 0.5 * d * Y * Y * math.log(T * U * U * X * X / (d * d * Y * Y))
    if kind == "thmLowerDimfree":
        U, X, Y, T = map(float, _p(params, "U", "X", "Y", "T"))
        return math.sqrt(2.0) / 8.0 * U * X * Y * math.sqrt(T)
    raise ValueError(f"unknown regression bound kind {kind!r}")
