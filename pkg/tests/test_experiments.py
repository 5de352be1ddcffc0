import asyncio
import json
import math
from types import SimpleNamespace

import pytest

import nearcrit.experiments.suites as suites
from nearcrit.arms import ArmSpec
from nearcrit.errors import ExperimentError, TooManyHolesError
from nearcrit.experiments import SUITES, ExperimentConfig, run
from nearcrit.experiments.suites import slope_window
from nearcrit.models import RunStatus
from nearcrit.services.cache import list_runs
from nearcrit.services.export import read_csv, read_csv_header

TINY_FROZEN = {"thresholds": [1, 4], "radius": 6.0, "n_runs": 2}


def test_every_suite_is_registered():
    expected = {
        "arm-exponents", "kesten-relation", "net-probability", "hole-crossing",
        "four-arm-stability", "one-arm-stability", "crossing-stability",
        "stretched-exp-decay", "largest-cluster-concentration", "vacant-arm-nonstability",
        "theta-stability", "quasi-multiplicativity", "rho-pi-measurement",
        "exceptional-scale-burning", "boundary-variant", "coupling-domination",
        "frozen-percolation", "recovery-comparison",
    }
    assert expected <= set(SUITES)
    assert all(s.description for s in SUITES.values())


def test_unknown_suite_and_parameter():
    with pytest.raises(ExperimentError):
        ExperimentConfig(name="no-such-suite")
    with pytest.raises(ExperimentError):
        ExperimentConfig(name="frozen-percolation", params={"radius": 4.0, "colour": "red"})


def test_config_hash_follows_parameters(out_dir):
    a = ExperimentConfig(name="frozen-percolation", params=TINY_FROZEN, seed=1, out=out_dir)
    b = ExperimentConfig(name="frozen-percolation", params=TINY_FROZEN, seed=1, out=out_dir / "elsewhere")
    c = ExperimentConfig(name="frozen-percolation", params=TINY_FROZEN, seed=2, out=out_dir)
    assert a.config_hash == b.config_hash
    assert a.config_hash != c.config_hash
    assert a.effective_params()["radius"] == 6.0


def test_run_writes_results(out_dir):
    cfg = ExperimentConfig(name="frozen-percolation", params=TINY_FROZEN, seed=3, out=out_dir, xlsx=True)
    outcome = run(cfg)
    assert outcome.status == RunStatus.PASSED
    assert outcome.csv_path.name == f"frozen-percolation-{cfg.config_hash}.csv"
    assert [row["N"] for row in read_csv(outcome.csv_path)] == ["1", "4", "inf"]
    assert read_csv_header(outcome.csv_path)["config"]["name"] == "frozen-percolation"
    summary = json.loads(outcome.summary_path.read_text())
    assert summary["status"] == "passed"
    assert summary["n_rows"] == 3
    assert outcome.xlsx_path.exists()
    runs = asyncio.run(list_runs("frozen-percolation"))
    assert runs[-1].config_hash == cfg.config_hash


def test_runs_are_reproducible(out_dir):
    first = run(ExperimentConfig(name="frozen-percolation", params=TINY_FROZEN, seed=4, out=out_dir), record=False)
    second = run(ExperimentConfig(name="frozen-percolation", params=TINY_FROZEN, seed=4, out=out_dir), record=False)
    assert first.rows == second.rows


def test_spent_budget_gives_partial_results(out_dir):
    cfg = ExperimentConfig(name="frozen-percolation", params=TINY_FROZEN, out=out_dir, budget=0.0)
    outcome = run(cfg, record=False)
    assert outcome.status == RunStatus.PARTIAL
    assert outcome.rows == []
    assert json.loads(outcome.summary_path.read_text())["partial"] is True


def test_arm_suite_runs_with_small_parameters(out_dir):
    params = {"sigmas": ["o"], "triples": [[1, 2, 4]], "n_samples": 50}
    outcome = run(ExperimentConfig(name="quasi-multiplicativity", params=params, out=out_dir), record=False)
    assert outcome.status in (RunStatus.PASSED, RunStatus.FAILED)
    assert len(outcome.rows) == 1


# =============================================================================
# SUITE EXECUTIONS
# =============================================================================

def _run(name, params, out_dir, seed=0):
    return run(ExperimentConfig(name=name, params=params, seed=seed, out=out_dir), record=False)


def test_slope_windows():
    windows = {"o": [-0.16, -0.06]}
    assert slope_window(ArmSpec.parse("o"), windows, 0.3) == (-0.16, -0.06)
    lo, hi = slope_window(ArmSpec.parse("ov"), windows, 0.2)
    assert (lo, hi) == (pytest.approx(-0.3), pytest.approx(-0.2))
    assert slope_window(ArmSpec.parse("oo"), windows, 0.3) is None


def test_arm_exponents_checks_slope_window(out_dir):
    params = {"radii": [2, 4, 8], "sigmas": ["o"], "monochromatic": [], "n_samples": 200}
    outcome = _run("arm-exponents", params, out_dir)
    assert [row["n"] for row in outcome.rows] == [2, 4, 8]
    slope = outcome.extra["slope_o"]
    assert slope["window"] == [-0.16, -0.06]
    [check] = [c for c in outcome.checks if c.name == "slope o"]
    assert check.passed == (-0.16 <= slope["slope"] <= -0.06)


def test_kesten_relation_uses_critical_four_arm_probability(out_dir, monkeypatch):
    seen = []

    def fake_arm(spec, n1, n2, p, n_samples, seed, threads=None):
        seen.append((spec.word, n2, p))
        return SimpleNamespace(p_hat=0.1, std_err=0.01, n_samples=n_samples)

    monkeypatch.setattr(suites, "estimate_L", lambda p, *args, **kwargs: 4.0)
    monkeypatch.setattr(suites, "estimate_arm", fake_arm)
    outcome = _run("kesten-relation", {"p_grid": [0.55, 0.6], "n_samples": 10}, out_dir)
    assert seen == [("ovov", 4.0, 0.5), ("ovov", 4.0, 0.5)]
    assert [row["product"] for row in outcome.rows] == [pytest.approx(0.08), pytest.approx(0.16)]


def test_net_probability_checks_against_bound(out_dir):
    params = {"p_values": [0.6], "kappas": [4], "n_samples": 20}
    outcome = _run("net-probability", params, out_dir)
    [row] = outcome.rows
    [check] = outcome.checks
    assert check.name == "net bound p=0.6 kappa=4"
    assert check.passed == (row["failure"] <= row["bound"])


def test_hole_crossing_runs_on_its_annulus(out_dir):
    params = {"ms": [16.0], "n1s": [4], "n_samples": 100}
    outcome = _run("hole-crossing", params, out_dir)
    assert [(row["variant"], row["n1"], row["n2"]) for row in outcome.rows] == [("H", 4, 8), ("Hbarbar", 4, 8)]
    assert [c.name for c in outcome.checks] == ["H bound m=16.0 (4,8)", "Hbarbar bound m=16.0 (4,8)"]
    for row, check in zip(outcome.rows, outcome.checks):
        assert 0.0 <= row["p_hat"] <= 1.0
        assert check.passed == (row["p_hat"] <= row["bound"])


def test_four_arm_stability_small(out_dir):
    outcome = _run("four-arm-stability", {"ms": [8], "n_samples": 10}, out_dir)
    [row] = outcome.rows
    assert row["n_samples"] == 10
    assert row["refused"] < row["n_samples"]
    assert row["W4"] >= row["pi4"]


def test_refused_w4_searches_are_not_counted_as_successes(out_dir, monkeypatch):
    def refuse(*args, **kwargs):
        raise TooManyHolesError("too many holes")

    monkeypatch.setattr(suites, "detect_arm_event", lambda *args, **kwargs: False)
    monkeypatch.setattr(suites, "detect_W4", refuse)
    outcome = _run("four-arm-stability", {"ms": [8, 16], "n_samples": 6}, out_dir)
    for row in outcome.rows:
        assert row["refused"] == 6
        assert math.isnan(row["W4"])
        assert row["W4_upper"] == 1.0
    assert outcome.extra["undecided_m"] == [8, 16]
    [check] = outcome.checks
    assert not check.passed
    assert outcome.status == RunStatus.FAILED
