"""Scenario execution, CSV/JSON reporting, scale-invariance checks and bound tables."""
from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from ..core import (
    Comparator,
    LabeledExample,
    RegretLedger,
    best_constant_comparator,
    best_logistic_comparator,
    best_square_comparator,
    comparator_norm,
    eval_loss,
)
from . import registry
from .config import ConfigError, ScenarioConfig

CSV_HEADER = "round,learner_loss,comparator_loss,cum_regret,bound_value"
JSON_KEYS = ("scenario", "seed", "T", "cum_regret", "bound_value", "bound_satisfied", "max_scale_rel_diff")


@dataclass
class Played:
    xs: np.ndarray
    ys: np.ndarray
    predictions: list
    comparator: Optional[np.ndarray] = None


@dataclass
class SeedResult:
    seed: int
    ledger: RegretLedger
    comparator: Comparator
    bound_params: dict
    lower_bound_value: Optional[float] = None
    max_scale_rel_diff: Optional[float] = None

    @property
    def bound_value(self) -> Optional[float]:
        return self.ledger.bound_value

    @property
    def bound_satisfied(self) -> Optional[bool]:
        return self.ledger.bound_satisfied

    @property
    def lower_satisfied(self) -> Optional[bool]:
        if self.lower_bound_value is None:
            return None
        return self.ledger.cum_regret >= self.lower_bound_value

    def summary(self, scenario: str, T: int) -> dict:
        return {
            "scenario": scenario,
            "seed": self.seed,
            "T": T,
            "cum_regret": _json_num(self.ledger.cum_regret),
            "bound_value": _json_num(self.bound_value),
            "bound_satisfied": self.bound_satisfied,
            "max_scale_rel_diff": _json_num(self.max_scale_rel_diff),
        }


@dataclass
class RunReport:
    scenario: str
    T: int
    seeds: list = field(default_factory=list)

    @property
    def all_bounds_satisfied(self) -> bool:
        return all(s.bound_satisfied is not False for s in self.seeds)

    @property
    def scale_invariance_max_rel_diff(self) -> Optional[float]:
        vals = [s.max_scale_rel_diff for s in self.seeds if s.max_scale_rel_diff is not None]
        return max(vals) if vals else None


def _json_num(v):
    """Floats stay floats; non-finite values become strings so the file is strict JSON."""
    if v is None or isinstance(v, bool):
        return v
    v = float(v)
    return v if math.isfinite(v) else repr(v)


def _fmt(v) -> str:
    return "" if v is None else repr(float(v))


def build_learner(cfg: ScenarioConfig, kernel_scale: float = 1.0):
    entry = registry.LEARNERS[cfg.learner.name]
    try:
        return entry.factory(dict(cfg.learner.params), cfg.T, cfg.d, cfg.K, kernel_scale=kernel_scale)
    except (TypeError, KeyError, ValueError) as exc:
        raise ConfigError(f"learner {cfg.learner.name!r}: {exc}") from exc


def build_source(cfg: ScenarioConfig, seed: int):
    entry = registry.GENERATORS[cfg.generator.name]
    try:
        return entry.make(cfg.T, cfg.d, cfg.K, dict(cfg.generator.params), seed)
    except (TypeError, KeyError, ValueError) as exc:
        raise ConfigError(f"generator {cfg.generator.name!r}: {exc}") from exc


def _scalar_or_vec(pred):
    return np.array(pred, dtype=float, copy=True)


def play(learner, source, T: int, d: int) -> Played:
    """Run the online protocol; interactive sources respond to each action."""
    preds = []
    if getattr(source, "interactive", False):
        xs, ys = [], []
        for t in range(T):
            x = source.features(t)
            a = _scalar_or_vec(learner.predict(x))
            y = source.respond(float(a.ravel()[0]))
            learner.update(x, np.array([y]))
            xs.append(x)
            ys.append(y)
            preds.append(a)
        return Played(np.array(xs), np.array(ys), preds, source.comparator())
    xs, ys = np.asarray(source.xs, float), np.asarray(source.ys)
    if xs.shape != (T, d):
        raise ConfigError(f"generator produced features of shape {xs.shape}, config says ({T}, {d})")
    for x, y in zip(xs, ys):
        preds.append(_scalar_or_vec(learner.predict(x)))
        learner.update(x, y if np.ndim(y) == 0 and isinstance(y, (int, np.integer)) else np.atleast_1d(y))
    return Played(xs, ys, preds)


def replay(learner, xs: np.ndarray, ys: np.ndarray) -> list:
    preds = []
    for x, y in zip(xs, ys):
        preds.append(_scalar_or_vec(learner.predict(x)))
        learner.update(x, y if isinstance(y, (int, np.integer)) else np.atleast_1d(y))
    return preds


def _comparator(cfg: ScenarioConfig, played: Played) -> Comparator:
    entry = registry.LEARNERS[cfg.learner.name]
    spec = cfg.comparator
    if isinstance(spec, dict) and "theta" in spec:
        theta = np.asarray(spec["theta"], dtype=float)
        kind = "rowMaxOfL2" if entry.task == "log" else "L2"
        return Comparator(theta, comparator_norm(theta, kind), kind)
    U = float(spec["U"]) if isinstance(spec, dict) and "U" in spec else None
    if played.comparator is not None:
        th = played.comparator
        return Comparator(th, float(np.linalg.norm(th)), "L2")
    if entry.task == "log":
        data = [LabeledExample(x, int(y)) for x, y in zip(played.xs, played.ys)]
        return best_logistic_comparator(data, 1.0 if U is None else U, K=cfg.K)
    if entry.featureless:
        return best_constant_comparator(played.ys[:, None], math.inf if U is None else U)
    data = [LabeledExample(x, [y]) for x, y in zip(played.xs, played.ys)]
    return best_square_comparator(data, math.inf if U is None else U)


def _comparator_loss(cfg: ScenarioConfig, comp: Comparator, x, y) -> float:
    entry = registry.LEARNERS[cfg.learner.name]
    if entry.task == "log":
        return eval_loss("logistic", np.atleast_2d(comp.theta) @ x, int(y))
    if entry.featureless:
        return eval_loss("square", comp.theta.ravel()[:1], [y])
    return eval_loss("square", [float(comp.theta @ x)], [y])


def _learner_loss(cfg: ScenarioConfig, pred, y) -> float:
    if registry.LEARNERS[cfg.learner.name].task == "log":
        return eval_loss("log", pred, int(y))
    return eval_loss("square", pred.ravel()[:1], [y])


def _auto_params(cfg: ScenarioConfig, played: Played, comp: Comparator, kind: str, explicit: dict) -> dict:
    entry = registry.LEARNERS[cfg.learner.name]
    xs = played.xs
    if entry.kernelized:
        kern = registry.make_kernel(cfg.learner.params.get("kernel"), cfg.d)
        diag = kern.diag(xs)
    else:
        kern = None
        diag = np.einsum("ij,ij->i", xs, xs)
    nz = np.flatnonzero(diag > 0)
    p = {"T": cfg.T, "d": cfg.d}
    if cfg.K is not None:
        p["K"] = cfg.K
    p["X_T"] = float(np.sqrt(diag.max(initial=0.0)))
    p["X"] = p["X_T"]
    p["X_star"] = float(np.sqrt(diag[nz[0]])) if nz.size else 0.0
    if entry.task == "square":
        p["Y"] = float(np.max(np.abs(played.ys), initial=0.0))
    p["theta_norm"] = comp.norm_value
    spec = cfg.comparator
    p["U"] = float(spec["U"]) if isinstance(spec, dict) and "U" in spec else comp.norm_value
    if entry.task == "log" and "eps" not in explicit and "eps" in cfg.learner.params:
        p["eps"] = float(cfg.learner.params["eps"])
    p.update(explicit)
    if kind in ("thm11", "kaarFixed") and "log_det" not in p and "K" not in explicit:
        from ..regression import log_det_ratio

        gram = (kern or registry.make_kernel(None, cfg.d)).gram(xs)
        p["log_det"] = log_det_ratio(gram, float(p["lam"]))
    if kind == "thm10" or kind == "thm10proof":
        p.pop("K", None)
    return p


def _run_seed(cfg: ScenarioConfig, seed: int) -> tuple:
    learner = build_learner(cfg)
    played = play(learner, build_source(cfg, seed), cfg.T, cfg.d)
    comp = _comparator(cfg, played)
    ledger = RegretLedger()
    for a, x, y in zip(played.predictions, played.xs, played.ys):
        ledger.record(_learner_loss(cfg, a, y), _comparator_loss(cfg, comp, x, y))
    params = {}
    if cfg.bound is not None:
        params = _auto_params(cfg, played, comp, cfg.bound.kind, cfg.bound.params)
        ledger.bound_value = registry.bound_value(cfg.bound.kind, params)
    lower = None
    if cfg.lower_bound is not None:
        lp = _auto_params(cfg, played, comp, cfg.lower_bound.kind, cfg.lower_bound.params)
        lower = registry.bound_value(cfg.lower_bound.kind, lp)
    res = SeedResult(seed, ledger, comp, params, lower)
    return res, played


def write_csv(path: Path, ledger: RegretLedger) -> None:
    lines = [CSV_HEADER]
    cum = 0.0
    b = _fmt(ledger.bound_value)
    for t, (ll, cl) in enumerate(ledger.per_round, start=1):
        cum += ll - cl
        lines.append(f"{t},{_fmt(ll)},{_fmt(cl)},{_fmt(cum)},{b}")
    path.write_text("\n".join(lines) + "\n")


def run_scenario(cfg: ScenarioConfig, out_dir=None) -> RunReport:
    """Run every seed; writes ``<scenario>_seed<k>.csv`` / ``.json`` and ``<scenario>_summary.json`` when ``out_dir`` is set."""
    report = RunReport(cfg.scenario, cfg.T)
    out = Path(out_dir or cfg.output) if (out_dir or cfg.output) else None
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
    for seed in cfg.seeds:
        res, played = _run_seed(cfg, seed)
        if cfg.invariance_factors:
            res.max_scale_rel_diff = _invariance_for(cfg, played, cfg.invariance_factors)
        report.seeds.append(res)
        if out is not None:
            stem = f"{cfg.scenario}_seed{seed}"
            write_csv(out / f"{stem}.csv", res.ledger)
            (out / f"{stem}.json").write_text(json.dumps(res.summary(cfg.scenario, cfg.T), indent=2) + "\n")
    if out is not None:
        summaries = [s.summary(cfg.scenario, cfg.T) for s in report.seeds]
        (out / f"{cfg.scenario}_summary.json").write_text(json.dumps(summaries, indent=2) + "\n")
    return report


def rel_diff(a, b) -> float:
    """``||a - b||_inf / max(||a||_inf, ||b||_inf)``, 0 when both vanish."""
    a = np.asarray(a, float).ravel()
    b = np.asarray(b, float).ravel()
    num = np.max(np.abs(a - b), initial=0.0)
    if num == 0.0:
        return 0.0
    return float(num / max(np.max(np.abs(a)), np.max(np.abs(b))))


def run_rel_diff(base: Sequence, other: Sequence) -> float:
    """Largest per-round difference relative to the run's prediction scale.

    A per-round denominator is ill-conditioned on rounds where the prediction
    is a cancellation near 0, so the denominator is the largest prediction
    magnitude seen in either run.
    """
    A = np.array([np.asarray(p, float).ravel() for p in base])
    B = np.array([np.asarray(p, float).ravel() for p in other])
    num = np.max(np.abs(A - B), initial=0.0)
    if num == 0.0:
        return 0.0
    return float(num / max(np.max(np.abs(A)), np.max(np.abs(B))))


def _invariance_for(cfg: ScenarioConfig, played: Played, factors: Sequence[float],
                    kinds: Optional[Sequence[str]] = None) -> float:
    probe = build_learner(cfg)
    declared = tuple(getattr(probe, "invariances", ()))
    if not declared:
        raise ConfigError(f"learner {cfg.learner.name!r} declares no scale invariance")
    kinds = declared if kinds is None else tuple(kinds)
    bad = set(kinds) - set(declared)
    if bad:
        raise ConfigError(f"learner {cfg.learner.name!r} does not declare invariance(s) {sorted(bad)}")
    xs, ys = played.xs, played.ys
    base = replay(build_learner(cfg), xs, ys)
    worst = 0.0
    for kind in kinds:
        for f in factors:
            f = float(f)
            if kind == "x":
                preds = replay(build_learner(cfg), f * xs, ys)
                scaled = preds
            elif kind == "y":
                preds = replay(build_learner(cfg), xs, f * ys)
                scaled = [p / f for p in preds]
            elif kind == "kernel":
                scaled = replay(build_learner(cfg, kernel_scale=f), xs, ys)
            else:
                raise ConfigError(f"unknown invariance kind {kind!r}")
            worst = max(worst, run_rel_diff(base, scaled))
    return worst


def check_scale_invariance(cfg: ScenarioConfig, factors: Sequence[float], kinds: Optional[Sequence[str]] = None) -> float:
    """Max relative prediction difference between base and rescaled runs over all seeds.

    ``x`` rescales features (predictions must not change), ``y`` rescales
    responses (predictions are divided by the factor before comparing) and
    ``kernel`` multiplies the kernel by the factor.
    """
    if not factors:
        raise ValueError("no factors given")
    if any(not f > 0 for f in factors):
        raise ValueError("factors must be positive")
    worst = 0.0
    for seed in cfg.seeds:
        played = play(build_learner(cfg), build_source(cfg, seed), cfg.T, cfg.d)
        worst = max(worst, _invariance_for(cfg, played, factors, kinds))
    return worst


def bound_report(kind: str, params: dict) -> str:
    """Table of bound values over the Cartesian product of list-valued parameters."""
    if kind not in registry.BOUNDS:
        raise ValueError(f"unknown bound kind {kind!r}")
    names = list(params)
    axes = [v if isinstance(v, (list, tuple)) else [v] for v in params.values()]
    rows = [names + ["value"]]
    for combo in itertools.product(*axes):
        p = dict(zip(names, combo))
        try:
            val = repr(registry.bound_value(kind, p))
        except (KeyError, ValueError, ZeroDivisionError) as exc:
            val = f"error: {exc}"
        rows.append([str(c) for c in combo] + [val])
    widths = [max(len(r[i]) for r in rows) for i in range(len(rows[0]))]
    return "\n".join("  ".join(c.ljust(w) for c, w in zip(r, widths)).rstrip() for r in rows)
