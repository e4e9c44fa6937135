"""Command-line entry point: ``scalefree {run,bounds,invariance,verify,adversary}``."""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from .config import ConfigError, load_config
from . import registry


def _value(text: str):
    """``1`` -> int, ``0.5`` -> float, ``a,b`` -> list, anything else stays a string."""
    if "," in text:
        return [_value(t) for t in text.split(",") if t]
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def _pairs(items) -> dict:
    out = {}
    for item in items or []:
        if "=" not in item:
            raise SystemExit(f"--set expects key=value, got {item!r}")
        k, v = item.split("=", 1)
        out[k.strip()] = _value(v.strip())
    return out


def cmd_run(args) -> int:
    from .runner import run_scenario

    cfg = load_config(args.config)
    report = run_scenario(cfg, args.out)
    for s in report.seeds:
        extra = "" if s.lower_bound_value is None else f" lower_bound={s.lower_bound_value!r}"
        print(f"{cfg.scenario} seed={s.seed} cum_regret={s.ledger.cum_regret!r} "
              f"bound={s.bound_value!r} satisfied={s.bound_satisfied}{extra}")
    return 0 if report.all_bounds_satisfied else 1


def cmd_bounds(args) -> int:
    from .runner import bound_report

    print(bound_report(args.kind, _pairs(args.set)))
    return 0


def cmd_invariance(args) -> int:
    from .runner import check_scale_invariance

    cfg = load_config(args.config)
    factors = [float(f) for f in args.factors.split(",") if f]
    kinds = args.kinds.split(",") if args.kinds else None
    v = check_scale_invariance(cfg, factors, kinds)
    print(f"max_scale_rel_diff={v!r}")
    return 0


def cmd_verify(args) -> int:
    from .acceptance import run_verify

    results = run_verify(args.out, args.criteria)
    return 0 if all(r.passed for r in results) else 1


def cmd_adversary(args) -> int:
    params = _pairs(args.set)
    name = args.kind
    if name not in registry.GENERATORS:
        raise SystemExit(f"unknown adversary {name!r}; choose from {sorted(registry.GENERATORS)}")
    if registry.GENERATORS[name].interactive:
        raise SystemExit(f"{name!r} reacts to a learner's actions; use `run` with a scenario config")
    try:
        T, d = int(params.pop("T")), int(params.pop("d", 1))
    except KeyError:
        raise SystemExit("--set T=<rounds> is required")
    seed = int(params.pop("seed", 0))
    K = params.pop("K", None)
    stream = registry.GENERATORS[name].make(T, d, K, params, seed)
    header = ",".join(["round"] + [f"x_{i + 1}" for i in range(d)] + ["y"])
    lines = [header]
    for t, (x, y) in enumerate(stream, start=1):
        yv = str(int(y)) if isinstance(y, (int, np.integer)) else repr(float(y))
        lines.append(",".join([str(t)] + [repr(float(v)) for v in x] + [yv]))
    Path(args.out).write_text("\n".join(lines) + "\n")
    print(f"wrote {T} rounds to {args.out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="scalefree", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="run a scenario config and write CSV/JSON per seed")
    r.add_argument("--config", required=True)
    r.add_argument("--out", required=True)
    r.set_defaults(func=cmd_run)

    b = sub.add_parser("bounds", help="tabulate a bound; comma-separated values form a grid")
    b.add_argument("--kind", required=True, choices=sorted(registry.BOUNDS))
    b.add_argument("--set", nargs="*", metavar="key=value")
    b.set_defaults(func=cmd_bounds)

    i = sub.add_parser("invariance", help="paired-run scale-invariance check")
    i.add_argument("--config", required=True)
    i.add_argument("--factors", required=True)
    i.add_argument("--kinds", help="subset of the learner's declared invariances (x, y, kernel)")
    i.set_defaults(func=cmd_invariance)

    v = sub.add_parser("verify", help="run the acceptance suite")
    v.add_argument("--out", default="verify_artifacts")
    v.add_argument("--criteria", help="selection such as 1-11 or 2,5,9 (default: all)")
    v.set_defaults(func=cmd_verify)

    a = sub.add_parser("adversary", help="generate a seeded adversarial stream as CSV")
    a.add_argument("--kind", required=True)
    a.add_argument("--set", nargs="*", metavar="key=value")
    a.add_argument("--out", required=True)
    a.set_defaults(func=cmd_adversary)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
