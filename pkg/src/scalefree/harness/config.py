"""Scenario configuration.

A scenario is one JSON object::

    {
      "scenario": "gd-vs-rademacher",          # required, used in file names
      "learner": {"name": "aggregated_gd", "params": {}},
      "generator": {"name": "rademacher", "params": {"X": 1, "Y": 1}},
      "T": 100, "d": 1, "K": 2,                # K only for classification
      "seeds": [0, 1, 2],
      "comparator": "auto",                    # or {"U": 1.0} or {"theta": [...]}
      "bound": {"kind": "thm10", "params": {}},
      "lower_bound": {"kind": "prop21", "params": {}},
      "invariance_factors": [1e-3, 1e3]
    }

``adversary`` is accepted as a synonym of ``generator``. Unknown keys are
errors. Bound parameters not given explicitly are filled from the realized
stream (``T``, ``d``, ``K``, ``Y``, ``X``, ``X_T``, ``X_star``, ``theta_norm``, ``U``).
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Union

from . import registry


class ConfigError(ValueError):
    pass


_KEYS = {"scenario", "learner", "generator", "adversary", "T", "d", "K", "seeds", "comparator",
         "bound", "lower_bound", "invariance_factors", "output"}


@dataclass(frozen=True)
class Component:
    name: str
    params: dict = field(default_factory=dict)


@dataclass(frozen=True)
class BoundSpec:
    kind: str
    params: dict = field(default_factory=dict)


@dataclass(frozen=True)
class ScenarioConfig:
    scenario: str
    learner: Component
    generator: Component
    T: int
    d: int
    seeds: tuple
    K: Optional[int] = None
    comparator: Union[str, dict] = "auto"
    bound: Optional[BoundSpec] = None
    lower_bound: Optional[BoundSpec] = None
    invariance_factors: tuple = ()
    output: Optional[str] = None


def _component(raw, what: str) -> Component:
    if isinstance(raw, str):
        return Component(raw, {})
    if not isinstance(raw, dict) or "name" not in raw:
        raise ConfigError(f"{what} must be a name or an object with 'name'")
    extra = set(raw) - {"name", "params"}
    if extra:
        raise ConfigError(f"unknown {what} key(s): {sorted(extra)}")
    params = raw.get("params", {})
    if not isinstance(params, dict):
        raise ConfigError(f"{what} params must be an object")
    return Component(str(raw["name"]), dict(params))


def _bound(raw, what: str) -> Optional[BoundSpec]:
    if raw is None:
        return None
    if isinstance(raw, str):
        raw = {"kind": raw}
    if not isinstance(raw, dict) or "kind" not in raw:
        raise ConfigError(f"{what} must be a kind or an object with 'kind'")
    extra = set(raw) - {"kind", "params"}
    if extra:
        raise ConfigError(f"unknown {what} key(s): {sorted(extra)}")
    if raw["kind"] not in registry.BOUNDS:
        raise ConfigError(f"unknown bound kind {raw['kind']!r}")
    return BoundSpec(raw["kind"], dict(raw.get("params", {})))


def parse_config(raw: dict) -> ScenarioConfig:
    if not isinstance(raw, dict):
        raise ConfigError("config must be a JSON object")
    unknown = set(raw) - _KEYS
    if unknown:
        raise ConfigError(f"unknown config key(s): {sorted(unknown)}")
    if "generator" in raw and "adversary" in raw:
        raise ConfigError("give either 'generator' or 'adversary', not both")
    for key in ("scenario", "learner", "T", "d", "seeds"):
        if key not in raw:
            raise ConfigError(f"missing config key {key!r}")
    gen_raw = raw.get("generator", raw.get("adversary"))
    if gen_raw is None:
        raise ConfigError("missing config key 'generator'")
    learner = _component(raw["learner"], "learner")
    gen = _component(gen_raw, "generator")
    if learner.name not in registry.LEARNERS:
        raise ConfigError(f"unknown learner {learner.name!r}")
    if gen.name not in registry.GENERATORS:
        raise ConfigError(f"unknown generator {gen.name!r}")
    seeds = raw["seeds"]
    if not isinstance(seeds, list) or not seeds:
        raise ConfigError("seeds must be a nonempty list")
    if not all(isinstance(s, int) and not isinstance(s, bool) for s in seeds):
        raise ConfigError("seeds must be integers")
    T, d = raw["T"], raw["d"]
    if not (isinstance(T, int) and T >= 1 and isinstance(d, int) and d >= 1):
        raise ConfigError("T and d must be positive integers")
    K = raw.get("K")
    task = registry.LEARNERS[learner.name].task
    if task == "log" and (not isinstance(K, int) or K < 2):
        raise ConfigError(f"learner {learner.name!r} needs an integer K >= 2")
    if registry.GENERATORS[gen.name].task != task:
        raise ConfigError(f"generator {gen.name!r} produces {registry.GENERATORS[gen.name].task} data, "
                          f"learner {learner.name!r} expects {task}")
    comp = raw.get("comparator", "auto")
    if not (comp == "auto" or (isinstance(comp, dict) and set(comp) <= {"U", "theta"} and comp)):
        raise ConfigError("comparator must be 'auto', {'U': radius} or {'theta': [...]}")
    factors = raw.get("invariance_factors", [])
    if not isinstance(factors, list) or not all(isinstance(f, (int, float)) and f > 0 for f in factors):
        raise ConfigError("invariance_factors must be a list of positive numbers")
    return ScenarioConfig(
        scenario=str(raw["scenario"]),
        learner=learner,
        generator=gen,
        T=T,
        d=d,
        K=K,
        seeds=tuple(seeds),
        comparator=comp,
        bound=_bound(raw.get("bound"), "bound"),
        lower_bound=_bound(raw.get("lower_bound"), "lower_bound"),
        invariance_factors=tuple(float(f) for f in factors),
        output=raw.get("output"),
    )


def load_config(path) -> ScenarioConfig:
    text = Path(path).read_text()
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from exc
    return parse_config(raw)
