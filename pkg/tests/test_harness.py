import csv
import json
import math

import numpy as np
import pytest

from scalefree.adversaries import lower_bound_values
from scalefree.harness import ConfigError, bound_report, check_scale_invariance, run_scenario
from scalefree.harness.config import parse_config
from scalefree.harness.runner import CSV_HEADER, rel_diff, run_rel_diff
from scalefree.regression import regression_bound_values

GD = dict(scenario="gd", learner="aggregated_gd", generator={"name": "rademacher", "params": {"X": 1, "Y": 1}},
          T=100, d=1, seeds=[0, 1, 2], bound="thm10")


class TestConfig:
    @pytest.mark.parametrize("change", [
        dict(seeds=[]),
        dict(seeds=[1.5]),
        dict(colour="red"),
        dict(learner="nonexistent"),
        dict(T=0),
        dict(bound="no_such_bound"),
        dict(comparator="best"),
    ])
    def test_rejected(self, change):
        with pytest.raises(ConfigError):
            parse_config(dict(GD, **change))

    def test_task_mismatch(self):
        with pytest.raises(ConfigError):
            parse_config(dict(GD, learner="bayes_logistic", K=2))

    def test_adversary_synonym(self):
        raw = {k: v for k, v in GD.items() if k != "generator"}
        cfg = parse_config(dict(raw, adversary="rademacher"))
        assert cfg.generator.name == "rademacher"
        with pytest.raises(ConfigError):
            parse_config(dict(GD, adversary="rademacher"))


class TestRunScenario:
    def test_gd_rademacher(self, tmp_path):
        rep = run_scenario(parse_config(GD), tmp_path)
        assert len(rep.seeds) == 3
        assert rep.all_bounds_satisfied
        for s in rep.seeds:
            assert s.bound_satisfied is True
            got = json.loads((tmp_path / f"gd_seed{s.seed}.json").read_text())
            assert set(got) == {"scenario", "seed", "T", "cum_regret", "bound_value", "bound_satisfied",
                                "max_scale_rel_diff"}
            assert got["cum_regret"] == pytest.approx(s.ledger.cum_regret)
        assert len(json.loads((tmp_path / "gd_summary.json").read_text())) == 3

    def test_csv_layout(self, tmp_path):
        run_scenario(parse_config(dict(GD, seeds=[4])), tmp_path)
        lines = (tmp_path / "gd_seed4.csv").read_text().splitlines()
        assert lines[0] == CSV_HEADER == "round,learner_loss,comparator_loss,cum_regret,bound_value"
        rows = list(csv.DictReader(lines))
        assert len(rows) == 100 and rows[-1]["round"] == "100"
        cum = np.cumsum([float(r["learner_loss"]) - float(r["comparator_loss"]) for r in rows])
        np.testing.assert_allclose([float(r["cum_regret"]) for r in rows], cum, rtol=1e-12, atol=1e-12)

    def test_deterministic(self, tmp_path):
        cfg = parse_config(dict(GD, seeds=[9]))
        run_scenario(cfg, tmp_path / "a")
        run_scenario(cfg, tmp_path / "b")
        assert (tmp_path / "a" / "gd_seed9.csv").read_bytes() == (tmp_path / "b" / "gd_seed9.csv").read_bytes()

    def test_sign_flip_sandwich(self):
        cfg = parse_config(dict(scenario="sf", learner="akaar", generator="sign_flip", T=16, d=16, seeds=[0],
                                bound="cor12dimfree", lower_bound="prop21"))
        rep = run_scenario(cfg)
        s = rep.seeds[0]
        assert s.lower_bound_value == pytest.approx(2.0)
        assert s.lower_bound_value <= s.ledger.cum_regret <= s.bound_value

    def test_logistic_scenario(self):
        cfg = parse_config(dict(scenario="lg", learner="bayes_logistic", generator="logistic_random", T=60, d=1,
                                K=2, seeds=[0], comparator={"U": 1.0}, bound={"kind": "thm3", "params": {"X": 1.0}}))
        assert run_scenario(cfg).all_bounds_satisfied


class TestInvariance:
    def test_factor_one_exact(self):
        assert check_scale_invariance(parse_config(dict(GD, seeds=[0])), [1.0]) == 0.0

    def test_y_factor_seven(self):
        assert check_scale_invariance(parse_config(dict(GD, seeds=[0])), [7.0]) <= 1e-9

    def test_adaptive_logistic_feature_scale(self):
        cfg = parse_config(dict(scenario="al", learner={"name": "adaptive_logistic",
                                                        "params": {"quad_points_per_dim": 41}},
                                generator="logistic_random", T=20, d=1, K=2, seeds=[0]))
        assert check_scale_invariance(cfg, [1e-6, 1e6]) <= 1e-9

    def test_rel_diff(self):
        assert rel_diff([1.0, 2.0], [1.0, 2.0]) == 0.0
        assert rel_diff([0.0], [0.0]) == 0.0
        assert run_rel_diff([np.array([1.0]), np.array([4.0])], [np.array([1.0]), np.array([2.0])]) == 0.5


class TestBoundReport:
    def test_three_rows(self):
        out = bound_report("thm3", dict(U=1, X=1, d=1, K=2, T=[10, 100, 1000])).splitlines()
        assert len(out) == 4

    def test_error_row(self):
        out = bound_report("thm13param", dict(d=2, Y=1, theta_norm=0, T=10, X_T=1, X_star=1))
        assert "error" in out.lower()

    @pytest.mark.parametrize("T", [16, 64, 200])
    def test_lower_below_upper(self, T):
        # d <= T <= (d/8)(Y/(XU))^2 holds for d = 16, U = 0.1
        p = dict(T=T, d=16, U=0.1, X=1.0, Y=1.0)
        lo = lower_bound_values("prop20", p)
        hi = regression_bound_values("cor12dimfree", dict(X_T=1, Y=1, theta_norm=0.1, T=T, X_star=1))
        assert lo <= hi
