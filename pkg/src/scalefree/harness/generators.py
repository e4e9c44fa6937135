"""Seeded data sources for scenarios.

Each ``make(T, d, K, params, seed)`` returns an :class:`AdversaryStream`, or
for interactive adversaries an object with ``features(t)``, ``respond(a)``
and ``comparator()``.
"""
from __future__ import annotations

import numpy as np

from .. import adversaries
from ..adversaries import AdversaryStream
from ..logistic import class_probs


def _get(params: dict, allowed: dict) -> dict:
    extra = set(params) - set(allowed)
    if extra:
        raise ValueError(f"unknown generator parameter(s): {sorted(extra)}")
    return {k: params.get(k, v) for k, v in allowed.items()}


def rademacher(T, d, K, params, seed):
    p = _get(params, {"X": 1.0, "Y": 1.0})
    return adversaries.rademacher_stream(T, d, float(p["X"]), float(p["Y"]), seed)


def beta_bernoulli(T, d, K, params, seed):
    p = _get(params, {"U": 0.5, "X": 1.0, "Y": 0.5})
    return adversaries.beta_bernoulli_stream(T, d, float(p["U"]), float(p["X"]), float(p["Y"]), seed)


def cyclic(T, d, K, params, seed):
    p = _get(params, {"X": 1.0, "Y": 1.0})
    return adversaries.cyclic_basis_stream(T, d, float(p["X"]), float(p["Y"]))


def sign_flip(T, d, K, params, seed):
    p = _get(params, {"U": 1.0, "X": 1.0, "Y": 1.0})
    return adversaries.SignFlipAdversary(T, d, float(p["U"]), float(p["X"]), float(p["Y"]))


def bounded_regression(T, d, K, params, seed):
    """``x`` uniform in the cube of half-width ``X / sqrt d``; ``y`` a clipped noisy linear response."""
    p = _get(params, {"X": 1.0, "Y": 2.0, "noise": 0.3, "theta_scale": 1.0})
    rng = np.random.default_rng(seed)
    X, Y = float(p["X"]), float(p["Y"])
    theta = float(p["theta_scale"]) * rng.normal(size=d)
    xs = rng.uniform(-1.0, 1.0, (T, d)) * (X / np.sqrt(d))
    ys = np.clip(xs @ theta + float(p["noise"]) * rng.normal(size=T), -Y, Y)
    return AdversaryStream("boundedRegression", dict(T=T, d=d, X=X, Y=Y, seed=seed), xs, ys,
                           extra={"theta": theta})


def gaussian_regression(T, d, K, params, seed):
    p = _get(params, {"noise": 1.0, "theta_scale": 1.0})
    rng = np.random.default_rng(seed)
    theta = float(p["theta_scale"]) * rng.normal(size=d)
    xs = rng.normal(size=(T, d))
    ys = xs @ theta + float(p["noise"]) * rng.normal(size=T)
    return AdversaryStream("gaussianRegression", dict(T=T, d=d, seed=seed), xs, ys, extra={"theta": theta})


def logistic_random(T, d, K, params, seed):
    """``x`` uniform in the radius-``X`` ball; labels from a softmax model with random ``theta``."""
    p = _get(params, {"X": 1.0, "theta_scale": 1.0})
    rng = np.random.default_rng(seed)
    X = float(p["X"])
    theta = float(p["theta_scale"]) * rng.normal(size=(K, d))
    direc = rng.normal(size=(T, d))
    direc /= np.maximum(np.linalg.norm(direc, axis=1, keepdims=True), 1e-300)
    xs = direc * (X * rng.random(T) ** (1.0 / d))[:, None]
    u = rng.random(T)
    labels = np.empty(T, dtype=int)
    for t in range(T):
        labels[t] = 1 + min(int(np.searchsorted(np.cumsum(class_probs(theta, xs[t])), u[t])), K - 1)
    return AdversaryStream("logisticRandom", dict(T=T, d=d, K=K, X=X, seed=seed), xs, labels,
                           extra={"theta": theta})
