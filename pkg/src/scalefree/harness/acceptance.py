"""Acceptance suite: one function per criterion, each returning a :class:`CriterionResult`.

Every criterion is deterministic given its fixed seeds; the per-seed tables
written by :func:`run_verify` are byte-reproducible. Wall-clock limits are
checked but never written to the artifacts.
"""
from __future__ import annotations

import filecmp
import itertools
import math
import subprocess
import sys
import tempfile
import time
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Callable, Optional

import numpy as np
from scipy.optimize import minimize_scalar
from scipy.special import logsumexp

from .. import adversaries, regression
from ..aggregation import grid_aggregator, grid_prior_exact, build_grid, logloss_aggregate_step
from ..core import LabeledExample, best_constant_comparator, best_logistic_comparator, best_square_comparator
from ..logistic import AdaptiveLogistic, BayesLogistic, bernoulli_lower_form, bernoulli_stochastic_complexity
from ..logistic import logistic_bound_values
from ..normal_location import NormalLocationModel, minimax_regret_value, nml_normalizer_oracle
from ..square_pred import AggregatedGD, OnlineGradientDescent, thm10_bound
from . import generators
from .config import parse_config
from .runner import check_scale_invariance, run_scenario


@dataclass
class CriterionResult:
    number: int
    name: str
    passed: bool
    statistic: float
    threshold: float
    detail: str = ""
    seconds: float = 0.0
    rows: list = field(default_factory=list)
    row_header: str = ""

    def __post_init__(self):
        self.statistic = float(self.statistic)
        self.threshold = float(self.threshold)
        self.passed = bool(self.passed)

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return (f"criterion {self.number:2d} {status}  {self.name}: statistic={self.statistic!r} "
                f"threshold={self.threshold!r} ({self.seconds:.1f}s){'  ' + self.detail if self.detail else ''}")


def _timed(fn: Callable) -> Callable:
    def wrapper(*args, **kwargs) -> CriterionResult:
        t0 = time.perf_counter()
        res = fn(*args, **kwargs)
        res.seconds = time.perf_counter() - t0
        limit = LIMITS.get(res.number)
        if limit is not None and res.seconds >= limit:
            res.passed = False
            res.detail = (res.detail + f" runtime {res.seconds:.1f}s over {limit}s").strip()
        return res

    wrapper.__name__ = fn.__name__
    wrapper.__doc__ = fn.__doc__
    return wrapper


LIMITS = {1: 30.0, 4: 120.0, 8: 60.0}


@_timed
def criterion_1() -> CriterionResult:
    """Closed-form minimax value vs the radial-integral oracle on the (d, U, T, sigma) grid."""
    rows = []
    worst = 0.0
    for d, U, T, s in itertools.product((1, 2, 3), (0.5, 1.0, 2.0), (2, 8, 32), (0.5, 1.0)):
        m = NormalLocationModel(s, d, T)
        a, b = minimax_regret_value(U, m), nml_normalizer_oracle(U, m)
        worst = max(worst, abs(a - b))
        rows.append(f"{d},{U!r},{T},{s!r},{a!r},{b!r}")
    return CriterionResult(1, "NML value vs oracle", worst <= 1e-6, worst, 1e-6,
                           f"{len(rows)} grid points", rows=rows, row_header="d,U,T,sigma,closed_form,oracle")


@_timed
def criterion_2(n_streams: int = 100, T: int = 200, n_experts: int = 12, K: int = 3) -> CriterionResult:
    """Mixture loss minus expert loss never exceeds ``-ln pi(m)``."""
    grid = build_grid(1.0, 2.0 ** (n_experts - 1))
    lp = grid.log_prior()
    worst = -math.inf
    rows = []
    for seed in range(n_streams):
        rng = np.random.default_rng(seed)
        state = grid_aggregator(grid)
        mix_loss = 0.0
        exp_loss = np.zeros(grid.size)
        for _ in range(T):
            P = rng.dirichlet(np.full(K, 0.5), size=grid.size)
            P = np.maximum(P, 1e-300)
            P /= P.sum(axis=1, keepdims=True)
            y = int(rng.integers(1, K + 1))
            mixture, state = logloss_aggregate_step(state, P, y)
            mix_loss -= math.log(mixture[y - 1])
            exp_loss -= np.log(P[:, y - 1])
        excess = float(np.max(mix_loss - exp_loss + lp))
        worst = max(worst, excess)
        rows.append(f"{seed},{excess!r}")
    return CriterionResult(2, "log-loss aggregation overhead", worst <= 1e-9, worst, 1e-9,
                           f"{n_streams} streams, T={T}", rows=rows,
                           row_header="seed,max_m(mix_loss-expert_loss+ln_pi_m)")


@_timed
def criterion_3() -> CriterionResult:
    """The grid prior telescopes to exactly 1."""
    bad = [M for M in range(0, 65) if sum(grid_prior_exact(m, M) for m in range(M + 1)) != Fraction(1)]
    return CriterionResult(3, "prior sums to 1 exactly", not bad, float(len(bad)), 0.0, "M = 0..64")


@_timed
def criterion_4(n_seeds: int = 50, T: int = 200) -> CriterionResult:
    """Uniform-prior Bayes logistic regret vs the best comparator in the unit ball."""
    d, K, U, X = 1, 2, 1.0, 1.0
    bound = logistic_bound_values("thm3", dict(U=U, X=X, T=T, d=d, K=K))
    rows, worst = [], -math.inf
    for seed in range(n_seeds):
        s = generators.logistic_random(T, d, K, {"X": X, "theta_scale": 2.0}, seed)
        L = BayesLogistic(d, K, U)
        loss = 0.0
        for x, y in s:
            loss -= math.log(max(L.predict(x)[int(y) - 1], 1e-300))
            L.update(x, int(y))
        data = [LabeledExample(x, int(y)) for x, y in s]
        comp = best_logistic_comparator(data, U, K=K)
        S = np.array([comp.theta @ x for x in s.xs])
        comp_loss = float(np.sum(logsumexp(S, axis=1) - S[np.arange(T), s.ys - 1]))
        r = loss - comp_loss
        worst = max(worst, r)
        rows.append(f"{seed},{r!r},{bound!r}")
    return CriterionResult(4, "Bayes logistic regret <= 5 dK ln(UXT/dK + e)", worst <= bound, worst, bound,
                           f"{n_seeds} seeds", rows=rows, row_header="seed,regret,bound")


@_timed
def criterion_5() -> CriterionResult:
    """Paired-run invariance under feature, response and kernel rescaling."""
    factors = [1e-6, 1e-3, 1e3, 1e6]
    configs = [
        ("adaptive_logistic/x", dict(scenario="al", learner="adaptive_logistic", generator="logistic_random",
                                     T=40, d=1, K=2, seeds=[0]), ["x"]),
        ("aggregated_gd/y", dict(scenario="gd", learner="aggregated_gd", generator="rademacher",
                                 T=300, d=1, seeds=[0, 1]), ["y"]),
        ("akaar/kernel", dict(scenario="ak", learner="akaar", generator="bounded_regression",
                              T=150, d=2, seeds=[0]), ["kernel"]),
        ("akaar/y", dict(scenario="ak", learner="akaar", generator="bounded_regression",
                         T=150, d=2, seeds=[0]), ["y"]),
    ]
    rows, worst, unit_ok = [], 0.0, True
    for name, raw, kinds in configs:
        cfg = parse_config(raw)
        v = check_scale_invariance(cfg, factors, kinds)
        one = check_scale_invariance(cfg, [1.0], kinds)
        unit_ok &= one == 0.0
        worst = max(worst, v)
        rows.append(f"{name},{v!r},{one!r}")
    return CriterionResult(5, "scale invariance", worst <= 1e-8 and unit_ok, worst, 1e-8,
                           "factor 1 exact" if unit_ok else "factor 1 NOT exact", rows=rows,
                           row_header="case,max_rel_diff,factor1_rel_diff")


def _vector_stream(T: int, d: int, seed: int) -> np.ndarray:
    rng = np.random.default_rng(seed)
    center = rng.normal(size=d) * rng.uniform(0.0, 2.0)
    ys = center + rng.normal(size=(T, d)) * rng.uniform(0.1, 2.0)
    return ys * 10.0 ** rng.uniform(-3, 3)


@_timed
def criterion_6(n_seeds: int = 100, T: int = 1000) -> CriterionResult:
    """Aggregated GD regret vs the best constant and the OGD iterate bound."""
    rows, worst_ratio, iterate_ok = [], -math.inf, True
    for d in (1, 3):
        for seed in range(n_seeds):
            ys = _vector_stream(T, d, seed)
            L = AggregatedGD(T, d)
            loss = 0.0
            for y in ys:
                if np.max(np.linalg.norm(L.thetas, axis=1)) > L.scale.y_max:
                    iterate_ok = False
                a = L.predict()
                loss += 0.5 * float(np.dot(a - y, a - y))
                L.update(None, y)
            comp = best_constant_comparator(ys)
            Y = float(np.max(np.linalg.norm(ys, axis=1)))
            comp_loss = 0.5 * float(np.sum((ys - comp.theta) ** 2))
            b = thm10_bound(comp.norm_value, Y, T)
            r = loss - comp_loss
            worst_ratio = max(worst_ratio, r / b)
            rows.append(f"{d},{seed},{r!r},{b!r}")
    ok = worst_ratio <= 1.0 and iterate_ok
    return CriterionResult(6, "aggregated GD regret <= thm10 and ||theta_t|| <= Y_{t-1}", ok, worst_ratio, 1.0,
                           "statistic is max regret / bound; iterate bound " + ("held" if iterate_ok else "VIOLATED"),
                           rows=rows, row_header="d,seed,regret,bound")


def square_learners(T: int, d: int) -> dict:
    """Every real-valued (square-loss) learner in the library, freshly constructed."""
    lin = regression.LinearKernel()
    rbf = regression.GaussianKernel(1.0)
    mat = regression.MaternSobolevKernel(d / 2.0 + 1.5, d)
    return {
        "ogd": OnlineGradientDescent(1.0),
        "aggregated_gd": AggregatedGD(T),
        "kaar_linear": regression.KAAR(lin, 1.0),
        "kaar_gaussian": regression.KAAR(rbf, 1.0),
        "kaar_sf_linear": regression.KAARSF(lin, 1.0),
        "kaar_sf_matern": regression.KAARSF(mat, 1.0),
        "akaar_linear": regression.AKAAR(lin, d),
        "akaar_gaussian": regression.AKAAR(rbf, d),
    }


@_timed
def criterion_7() -> CriterionResult:
    """The sign-flip adversary forces regret >= min(UX, Y) Y sqrt(T) / 2 against every learner."""
    T = d = 16
    target = adversaries.lower_bound_values("prop21", dict(T=T, d=d, U=1, X=1, Y=1))
    rows, worst = [], math.inf
    for name, L in square_learners(T, d).items():
        r, _ = adversaries.sign_flip_run(L, T, d, 1.0, 1.0, 1.0)
        worst = min(worst, r)
        rows.append(f"{name},{r!r},{target!r}")
    return CriterionResult(7, "sign-flip lower bound", worst >= target, worst, target,
                           "statistic is min regret over learners", rows=rows, row_header="learner,regret,lower_bound")


@_timed
def criterion_8(n_seeds: int = 10_000, T: int = 128) -> CriterionResult:
    """Bayes-optimal strategy against the Beta-Bernoulli adversary, Monte Carlo."""
    A = adversaries.beta_bernoulli_A(T, 1, 0.5, 1.0, 0.5)
    r = adversaries.bayesian_regret_mc(T, A, n_seeds, seed=0)
    mean, se = float(r.mean()), float(r.std(ddof=1) / math.sqrt(n_seeds))
    bound = adversaries.bayesian_regret_bound(T, A)
    return CriterionResult(8, "Beta-Bernoulli Bayesian regret", mean >= bound - 3 * se, mean, bound - 3 * se,
                           f"A={A!r}, mean={mean!r}, se={se!r}, bound={bound!r}",
                           rows=[f"{A!r},{mean!r},{se!r},{bound!r}"], row_header="A,mean_regret,std_error,bound")


@_timed
def criterion_9(n_seeds: int = 50, T: int = 500) -> CriterionResult:
    """A-KAAR regret vs the parametric bound at the least-squares comparator."""
    rows, worst = [], -math.inf
    for d in (1, 2, 3):
        for seed in range(n_seeds):
            s = generators.bounded_regression(T, d, None, {}, seed)
            L = regression.AKAAR(regression.LinearKernel(), d)
            loss = 0.0
            for x, y in s:
                a = float(L.predict(x)[0])
                loss += 0.5 * (a - y) ** 2
                L.update(x, np.array([y]))
            comp = best_square_comparator([LabeledExample(x, [y]) for x, y in s])
            r = loss - 0.5 * float(np.sum((s.xs @ comp.theta - s.ys) ** 2))
            norms = np.linalg.norm(s.xs, axis=1)
            b = regression.regression_bound_values("thm13param", dict(
                d=d, Y=float(np.max(np.abs(s.ys))), theta_norm=comp.norm_value, T=T,
                X_T=float(norms.max()), X_star=float(norms[np.flatnonzero(norms > 0)[0]])))
            worst = max(worst, r / b)
            rows.append(f"{d},{seed},{r!r},{b!r}")
    return CriterionResult(9, "A-KAAR regret <= thm13param", worst <= 1.0, worst, 1.0,
                           "statistic is max regret / bound", rows=rows, row_header="d,seed,regret,bound")


@_timed
def criterion_10() -> CriterionResult:
    """``ln det(I + K/lambda) <= d_eff (1 + ln(1 + T X^2 / lambda))`` on Wishart and Matern matrices."""
    rows, failures = [], 0
    lambdas = np.logspace(-6, 6, 20)
    for i in range(100):
        rng = np.random.default_rng(i)
        T = int(rng.integers(2, 201))
        r = int(rng.integers(1, T + 1))
        G = rng.normal(size=(T, r)) * 10.0 ** rng.uniform(-2, 2)
        rep = regression.capacity_check(G @ G.T, lambdas)
        failures += int(np.sum(~rep.inequality_holds))
        rows.append(f"wishart,{i},{T},{int(np.sum(rep.inequality_holds))}")
    for d, n, s in ((1, 200, 1.0), (1, 200, 2.0), (2, 14, 1.5), (2, 14, 2.5)):
        axis = np.linspace(-1.0, 1.0, n)
        pts = np.array(list(itertools.product(axis, repeat=d)))
        K = regression.MaternSobolevKernel(s, d).gram(pts)
        rep = regression.capacity_check(K, lambdas)
        failures += int(np.sum(~rep.inequality_holds))
        rows.append(f"matern_d{d}_s{s!r},{pts.shape[0]},{pts.shape[0]},{int(np.sum(rep.inequality_holds))}")
    return CriterionResult(10, "capacity inequality", failures == 0, float(failures), 0.0,
                           "statistic is the number of violated (matrix, lambda) pairs", rows=rows,
                           row_header="family,index,T,holds_out_of_20")


def brute_force_complexity(n: int, a: float, b: float) -> float:
    """``ln`` of the sum over all ``2^n`` sequences of the maximized likelihood on ``[a, b]``."""
    seqs = np.arange(2 ** n, dtype=np.int64)
    ones = np.zeros(seqs.size, dtype=np.int64)
    for j in range(n):
        ones += (seqs >> j) & 1
    best = np.empty(n + 1)
    for k in range(n + 1):
        def nll(mu, k=k):
            return -(k * math.log(mu) if k else 0.0) - ((n - k) * math.log1p(-mu) if n - k else 0.0)

        cands = []
        lo, hi = max(a, 1e-300), min(b, 1.0 - 1e-16)
        if hi > lo:
            opt = minimize_scalar(nll, bounds=(lo, hi), method="bounded", options={"xatol": 1e-13})
            cands.append(-opt.fun)
        for mu in (a, b):
            if (mu == 0.0 and k > 0) or (mu == 1.0 and k < n):
                cands.append(-math.inf)
            else:
                cands.append((k * math.log(mu) if k else 0.0) + ((n - k) * math.log1p(-mu) if n - k else 0.0))
        best[k] = max(cands)
    return float(logsumexp(best[ones]))


@_timed
def criterion_11() -> CriterionResult:
    """Bernoulli stochastic complexity against brute-force enumeration and the lower form."""
    intervals = [(0.0, 1.0), (0.1, 0.9), (0.25, 0.75), (0.4, 0.6), (0.0, 0.3), (0.45, 0.55), (0.5, 0.5)]
    worst, lower_bad, rows = 0.0, 0, []
    for n in range(1, 17):
        for a, b in intervals:
            c = bernoulli_stochastic_complexity(n, a, b)
            bf = brute_force_complexity(n, a, b)
            worst = max(worst, abs(c - bf))
            lf = bernoulli_lower_form(n, a, b)
            if lf > 0 and not math.exp(c) > lf:
                lower_bad += 1
            rows.append(f"{n},{a!r},{b!r},{c!r},{bf!r},{lf!r}")
    ok = worst <= 1e-10 and lower_bad == 0
    return CriterionResult(11, "Bernoulli stochastic complexity", ok, worst, 1e-10,
                           f"lower-form violations: {lower_bad}", rows=rows,
                           row_header="n,a,b,complexity,brute_force,lower_form")


def default_scenarios() -> list:
    """Small end-to-end scenarios whose CSVs are part of the verify artifacts."""
    return [
        dict(scenario="aggregated_gd_rademacher", learner="aggregated_gd", generator="rademacher",
             T=100, d=1, seeds=[0, 1, 2], bound="thm10", invariance_factors=[7.0]),
        dict(scenario="akaar_sign_flip", learner="akaar", generator="sign_flip", T=16, d=16, seeds=[0],
             bound="cor12dimfree", lower_bound="prop21"),
        dict(scenario="akaar_bounded_regression", learner="akaar", generator="bounded_regression",
             T=200, d=2, seeds=[0, 1], bound="thm13param", invariance_factors=[1e-3, 1e3]),
        dict(scenario="kaar_beta_bernoulli", learner="kaar", generator="beta_bernoulli",
             T=128, d=1, seeds=[0, 1], bound={"kind": "kaarFixed", "params": {"lam": 1.0}}),
        dict(scenario="bayes_logistic_random", learner="bayes_logistic", generator="logistic_random",
             T=100, d=1, K=2, seeds=[0], comparator={"U": 1.0},
             bound={"kind": "thm3", "params": {"X": 1.0}}),
    ]


def _compare_trees(a: Path, b: Path) -> list:
    fa = sorted(p.relative_to(a) for p in a.rglob("*.csv"))
    fb = sorted(p.relative_to(b) for p in b.rglob("*.csv"))
    if fa != fb:
        return ["file sets differ"]
    return [str(p) for p in fa if not filecmp.cmp(a / p, b / p, shallow=False)]


@_timed
def criterion_12(criteria: str = "1-11") -> CriterionResult:
    """Two independent ``verify`` processes write byte-identical CSV artifacts."""
    with tempfile.TemporaryDirectory() as tmp:
        dirs = [Path(tmp) / "a", Path(tmp) / "b"]
        for out in dirs:
            subprocess.run([sys.executable, "-m", "scalefree.harness.cli", "verify", "--out", str(out),
                            "--criteria", criteria], check=False, capture_output=True, text=True)
        n_files = len(list(dirs[0].rglob("*.csv")))
        diffs = _compare_trees(*dirs) if n_files else ["no artifacts written"]
    return CriterionResult(12, "verify determinism", not diffs, float(len(diffs)), 0.0,
                           f"{n_files} CSV files compared" + (f"; differing: {diffs}" if diffs else ""))


CRITERIA = {i: globals()[f"criterion_{i}"] for i in range(1, 13)}


def parse_selection(spec: Optional[str]) -> list:
    if not spec:
        return list(CRITERIA)
    out = []
    for part in spec.split(","):
        if "-" in part:
            lo, hi = part.split("-")
            out.extend(range(int(lo), int(hi) + 1))
        else:
            out.append(int(part))
    bad = [i for i in out if i not in CRITERIA]
    if bad:
        raise ValueError(f"unknown criteria {bad}")
    return out


def run_verify(out_dir, criteria: Optional[str] = None, echo: Callable = print) -> list:
    """Run the selected criteria and the default scenarios; write CSV artifacts under ``out_dir``."""
    out = Path(out_dir)
    (out / "criteria").mkdir(parents=True, exist_ok=True)
    results = []
    for i in parse_selection(criteria):
        res = CRITERIA[i]()
        echo(res.line())
        results.append(res)
        if res.rows:
            (out / "criteria" / f"criterion_{i:02d}.csv").write_text(
                "\n".join([res.row_header] + res.rows) + "\n")
    lines = ["criterion,name,passed,statistic,threshold"]
    lines += [f"{r.number},{r.name.replace(',', ';')},{str(r.passed).lower()},{r.statistic!r},{r.threshold!r}"
              for r in results]
    (out / "acceptance.csv").write_text("\n".join(lines) + "\n")
    for raw in default_scenarios():
        run_scenario(parse_config(raw), out / "scenarios")
    return results
