"""Name -> component tables used by scenario configs and the CLI."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

from .. import adversaries, logistic, regression, square_pred
from ..normal_location import NormalLocationModel, thm2_bound
from . import generators


@dataclass(frozen=True)
class LearnerEntry:
    task: str
    factory: Callable
    featureless: bool = False
    kernelized: bool = False


@dataclass(frozen=True)
class GeneratorEntry:
    task: str
    make: Callable
    interactive: bool = False


@dataclass(frozen=True)
class BoundEntry:
    fn: Callable
    side: str


def make_kernel(spec, d: int, scale: float = 1.0) -> regression.Kernel:
    spec = {"kind": "linear"} if spec is None else dict(spec)
    kind = spec.pop("kind", "linear")
    if kind in ("linear", "linearDot"):
        k = regression.LinearKernel()
    elif kind in ("gaussian", "gaussianRBF"):
        k = regression.GaussianKernel(float(spec.pop("width", 1.0)))
    elif kind in ("matern", "maternSobolev"):
        k = regression.MaternSobolevKernel(float(spec.pop("s")), int(spec.pop("d", d)),
                                           float(spec.pop("length", 1.0)))
    else:
        raise ValueError(f"unknown kernel kind {kind!r}")
    if spec:
        raise ValueError(f"unknown kernel parameter(s): {sorted(spec)}")
    return k if scale == 1.0 else k.scaled(scale)


def _checked(params: dict, allowed: set) -> dict:
    extra = set(params) - allowed
    if extra:
        raise ValueError(f"unknown learner parameter(s): {sorted(extra)}")
    return params


def _ogd(p, T, d, K, kernel_scale=1.0):
    p = _checked(p, {"lam"})
    return square_pred.OnlineGradientDescent(float(p.get("lam", 1.0)))


def _agd(p, T, d, K, kernel_scale=1.0):
    _checked(p, set())
    return square_pred.AggregatedGD(T)


def _kaar(p, T, d, K, kernel_scale=1.0):
    p = _checked(p, {"lam", "kernel"})
    return regression.KAAR(make_kernel(p.get("kernel"), d, kernel_scale), float(p.get("lam", 1.0)))


def _kaar_sf(p, T, d, K, kernel_scale=1.0):
    p = _checked(p, {"alpha", "kernel"})
    return regression.KAARSF(make_kernel(p.get("kernel"), d, kernel_scale), float(p.get("alpha", 1.0)))


def _akaar(p, T, d, K, kernel_scale=1.0):
    p = _checked(p, {"P", "kernel"})
    return regression.AKAAR(make_kernel(p.get("kernel"), d, kernel_scale), d, int(p.get("P", regression.AKAAR_P)))


def _bayes_logistic(p, T, d, K, kernel_scale=1.0):
    p = _checked(p, {"U", "quad_points_per_dim"})
    return logistic.BayesLogistic(d, K, float(p.get("U", 1.0)), p.get("quad_points_per_dim"))


def _adaptive_logistic(p, T, d, K, kernel_scale=1.0):
    p = _checked(p, {"eps", "n_doublings", "quad_points_per_dim"})
    return logistic.AdaptiveLogistic(d, K, T, float(p.get("eps", logistic.DEFAULT_EPS)),
                                     p.get("n_doublings"), p.get("quad_points_per_dim"))


def _paramfree_logistic(p, T, d, K, kernel_scale=1.0):
    p = _checked(p, {"P", "quad_points_per_dim"})
    return logistic.ParamFreeLogistic(d, K, T, int(p.get("P", logistic.P_CAP)),
                                      quad_points_per_dim=p.get("quad_points_per_dim"))


def _efficient_logistic(p, T, d, K, kernel_scale=1.0):
    p = _checked(p, {"beta", "c", "quad_points_per_dim"})
    cfg = logistic.EfficientWrapperConfig(T, d, K, float(p.get("beta", 1.0)), float(p.get("c", 10.0)))
    return logistic.EfficientLogisticWrapper(cfg, quad_points_per_dim=p.get("quad_points_per_dim"))


LEARNERS = {
    "ogd": LearnerEntry("square", _ogd, featureless=True),
    "aggregated_gd": LearnerEntry("square", _agd, featureless=True),
    "kaar": LearnerEntry("square", _kaar, kernelized=True),
    "kaar_sf": LearnerEntry("square", _kaar_sf, kernelized=True),
    "akaar": LearnerEntry("square", _akaar, kernelized=True),
    "bayes_logistic": LearnerEntry("log", _bayes_logistic),
    "adaptive_logistic": LearnerEntry("log", _adaptive_logistic),
    "paramfree_logistic": LearnerEntry("log", _paramfree_logistic),
    "efficient_logistic": LearnerEntry("log", _efficient_logistic),
}

GENERATORS = {
    "rademacher": GeneratorEntry("square", generators.rademacher),
    "beta_bernoulli": GeneratorEntry("square", generators.beta_bernoulli),
    "cyclic_basis": GeneratorEntry("square", generators.cyclic),
    "sign_flip": GeneratorEntry("square", generators.sign_flip, interactive=True),
    "bounded_regression": GeneratorEntry("square", generators.bounded_regression),
    "gaussian_regression": GeneratorEntry("square", generators.gaussian_regression),
    "logistic_random": GeneratorEntry("log", generators.logistic_random),
}


def _thm2(params):
    model = NormalLocationModel(float(params["sigma"]), int(params.get("d", 1)), int(params["T"]))
    return thm2_bound(float(params["theta_norm"]), model)


def _regression(kind):
    return lambda params: regression.regression_bound_values(kind, params)


def _logistic(kind):
    return lambda params: logistic.logistic_bound_values(kind, params)


def _lower(kind):
    return lambda params: adversaries.lower_bound_values(kind, params)


def _need(params, *names):
    missing = [n for n in names if n not in params]
    if missing:
        raise KeyError(f"missing parameter(s): {', '.join(missing)}")
    return [params[n] for n in names]


def _thm10(form):
    def fn(params):
        th, Y, T = _need(params, "theta_norm", "Y", "T")
        return square_pred.thm10_bound(float(th), float(Y), int(T), form)
    return fn


def _gd(params):
    lam, th, Y, T = _need(params, "lam", "theta_norm", "Y", "T")
    return square_pred.gd_bound(float(lam), float(th), float(Y), int(T))


BOUNDS = {
    "thm2": BoundEntry(_thm2, "upper"),
    "thm3": BoundEntry(_logistic("thm3"), "upper"),
    "thm5lower": BoundEntry(_logistic("thm5lower"), "lower"),
    "thm6": BoundEntry(_logistic("thm6"), "upper"),
    "thm7": BoundEntry(_logistic("thm7"), "upper"),
    "gd": BoundEntry(_gd, "upper"),
    "thm10": BoundEntry(_thm10("stated"), "upper"),
    "thm10proof": BoundEntry(_thm10("proof"), "upper"),
    "thm11": BoundEntry(_regression("thm11"), "upper"),
    "kaarFixed": BoundEntry(_regression("kaarFixed"), "upper"),
    "cor12dimfree": BoundEntry(_regression("cor12dimfree"), "upper"),
    "thm13param": BoundEntry(_regression("thm13param"), "upper"),
    "eq14capacity": BoundEntry(_regression("eq14capacity"), "upper"),
    "thmLowerAsym": BoundEntry(_regression("thmLowerAsym"), "lower"),
    "thmLowerDimfree": BoundEntry(_regression("thmLowerDimfree"), "lower"),
    "prop19finite": BoundEntry(_lower("prop19finite"), "lower"),
    "prop19tdep": BoundEntry(_lower("prop19tdep"), "lower"),
    "prop19_009": BoundEntry(_lower("prop19_009"), "lower"),
    "prop20": BoundEntry(_lower("prop20"), "lower"),
    "prop21": BoundEntry(_lower("prop21"), "lower"),
    "thm14asym": BoundEntry(_lower("thm14asym"), "lower"),
}


def bound_value(kind: str, params: dict) -> float:
    if kind not in BOUNDS:
        raise ValueError(f"unknown bound kind {kind!r}")
    return float(BOUNDS[kind].fn(params))


__all__ = ["LEARNERS", "GENERATORS", "BOUNDS", "bound_value", "make_kernel"]
