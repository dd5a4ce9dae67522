import csv
import json
import os

import pytest

import main as cli
from config import Config
from modules import harness
from modules.errors import InvalidConfigError, InvalidOverrideError, MetricUnavailableError, UnknownExperimentError
from modules.experiments import (
    PROVENANCE,
    REGISTRY,
    RESULT_SETS,
    Expectation,
    Protocol,
    band,
    get_experiment,
    near,
    parse_overrides,
    settings_from,
)
from modules.perturb import Phase
from modules.results_store import RECORD_COLUMNS, TRACE_COLUMNS, ResultsStore

TINY = {"seeds": 2, "episodes": 600, "workers": 1}

REQUIRED_IDS = {
    "kuhn_zero_contingency", "cac_sweep", "frozen_baseline", "fixed_opponent", "psro", "psro_population",
    "algo_invariance", "dqn_fixed_eps", "cross_game", "liars_dice_boundary", "ipd_boundary", "coordination",
    "negotiation", "timing_sweep", "recovery", "stochastic_masking", "hyperparam_grid", "entropy_reg",
    "reach_sensitivity", "separate_selfplay", "exploitability_trace", "dqn_details",
}


# ==================== Overrides ====================

def test_parse_overrides():
    assert parse_overrides(["seeds=3", "epsilon=0.3"]) == {"seeds": 3, "epsilon": 0.3}
    assert parse_overrides([]) == {}


@pytest.mark.parametrize("pairs", [["seeds"], ["gamma=0.9"], ["seeds=three"], ["alpha=fast"]])
def test_bad_overrides(pairs):
    with pytest.raises(InvalidOverrideError):
        parse_overrides(pairs)


@pytest.mark.parametrize("overrides", [{"seeds": 0}, {"epsilon": 1.5}, {"alpha": -0.1}, {"gamma": 1}])
def test_override_ranges(overrides):
    with pytest.raises(InvalidOverrideError):
        settings_from(overrides)


def test_protocol_scales_with_episodes():
    p = Protocol(settings_from({"episodes": 2_000}), get_experiment("kuhn_zero_contingency"))
    assert p.episodes == 2_000
    assert p.window == 200
    assert p.windows == (100, 200, 500)
    assert p.at(10_000) == 1_000
    assert p.schedule().activate_at == 1_000
    assert p.seeds == tuple(range(Config.DEFAULT_SEEDS))
    pinned = Protocol(settings_from({"episodes": 2_000, "activate_at": 50}), get_experiment("cac_sweep"))
    assert pinned.schedule().activate_at == 50
    assert Protocol(settings_from({}), get_experiment("dqn_fixed_eps")).agent("dqn").epsilon_final == 0.01


# ==================== Registry ====================

def test_registry_covers_every_experiment():
    assert REQUIRED_IDS <= set(REGISTRY)
    with pytest.raises(UnknownExperimentError):
        get_experiment("kuhn_backwards")


def test_every_experiment_carries_tagged_expectations():
    claimed = set()
    for definition in REGISTRY.values():
        assert definition.expectations, definition.id
        assert all(e.provenance in PROVENANCE for e in definition.expectations)
        assert set(definition.result_sets) <= set(RESULT_SETS)
        claimed |= set(definition.result_sets)
    assert claimed == set(RESULT_SETS)


def test_expectation_checks():
    target = near("x", -0.926, 0.02, "collapse")
    assert target.check(-0.93)
    assert not target.check(-0.8)
    assert not target.check(None)
    assert not target.check(float("nan"))
    upper = band("p", "significant", high=1e-4)
    assert upper.check(1e-9) and not upper.check(0.5)
    assert "±" in target.describe() and "<=" in upper.describe()
    with pytest.raises(ValueError):
        Expectation("x", "no target")
    with pytest.raises(ValueError):
        Expectation("x", "bad tag", provenance="rumoured", low=0.0)


# ==================== Runs ====================

def test_trivial_experiment_passes_and_writes(tmp_path):
    outcome = harness.run("dqn_details", out_dir=str(tmp_path), progress=False)
    assert outcome.passed
    folder = tmp_path / "dqn_details"
    for name in ("summary.json", "summary.txt", "verdict.json"):
        assert (folder / name).exists()
    verdict = json.loads((folder / "verdict.json").read_text())
    assert verdict["passed"] is True
    assert {c["provenance"] for c in verdict["checks"]} == {"trivial"}
    assert not [f for f in os.listdir(folder) if f.endswith(".tmp")]


def test_long_runs_are_gated():
    with pytest.raises(InvalidConfigError):
        harness.run("liars_dice_2d_dqn", write=False, long_run=False)


def test_unknown_format_is_rejected():
    with pytest.raises(InvalidOverrideError):
        harness.run("dqn_details", write=False, fmt="parquet")


@pytest.fixture(scope="module")
def tiny_sweep(tmp_path_factory):
    root = tmp_path_factory.mktemp("first")
    return harness.run("cac_sweep", TINY, out_dir=str(root), progress=False), root


def test_records_have_fixed_columns(tiny_sweep):
    outcome, root = tiny_sweep
    with open(root / "cac_sweep" / "records_ql_cac0.csv", newline="") as f:
        rows = list(csv.reader(f))
    assert tuple(rows[0]) == RECORD_COLUMNS
    assert len(rows) == 1 + 2 * 600
    assert {row[4] for row in rows[1:]} == {"pre", "post"}
    assert outcome.result.metrics["cac0_count"] == 0
    assert outcome.result.metrics["cac2_count"] == 2


def test_identical_runs_write_identical_files(tiny_sweep, tmp_path):
    _, first = tiny_sweep
    harness.run("cac_sweep", TINY, out_dir=str(tmp_path), progress=False)
    for name in os.listdir(first / "cac_sweep"):
        assert (first / "cac_sweep" / name).read_bytes() == (tmp_path / "cac_sweep" / name).read_bytes(), name


def test_json_record_format(tmp_path):
    harness.run("separate_selfplay", TINY, out_dir=str(tmp_path), fmt="json", progress=False)
    payload = json.loads((tmp_path / "separate_selfplay" / "records_shared.json").read_text())
    assert payload["columns"] == list(RECORD_COLUMNS)
    assert len(payload["rows"]) == 1_200


# ==================== Traces ====================

def test_reward_trace(tiny_sweep, tmp_path):
    outcome, _ = tiny_sweep
    store = ResultsStore("cac_sweep", str(tmp_path))
    rows = harness.emit_trace(outcome.result, "reward", window=100, store=store)
    assert len(rows) == 6
    assert [r[0] for r in rows] == [0, 100, 200, 300, 400, 500]
    assert all(r[3] <= r[2] <= r[4] and r[5] == 2 for r in rows)
    with open(store.path("trace_reward.csv"), newline="") as f:
        assert tuple(next(csv.reader(f))) == TRACE_COLUMNS


def test_trace_errors(tiny_sweep):
    outcome, _ = tiny_sweep
    with pytest.raises(MetricUnavailableError):
        harness.emit_trace(outcome.result, "entropy")
    with pytest.raises(MetricUnavailableError):
        harness.emit_trace(outcome.result, "loss")
    with pytest.raises(MetricUnavailableError):
        harness.emit_trace(outcome.result, "reward", condition="ql_cac9")


def test_exploitability_trace_with_diagnostics():
    outcome = harness.run("separate_selfplay", TINY, write=False, diagnostics=True, progress=False)
    rows = harness.emit_trace(outcome.result, "exploitability", window=200, condition="shared")
    assert [r[0] for r in rows] == [0, 200, 400]
    entropy = harness.emit_trace(outcome.result, "entropy", window=300)
    assert len(entropy) == 2


def test_reach_sweep():
    rows = harness.reach_sensitivity_sweep([0.15], {"seeds": 2, "episodes": 2_000, "workers": 1}, progress=False)
    assert len(rows) == 1
    assert 0.0 < rows[0]["reach_pb"] < 1.0
    assert rows[0]["epsilon"] == 0.15


# ==================== CLI ====================

def test_cli_list(monkeypatch, capsys):
    monkeypatch.setattr("sys.argv", ["main.py", "list"])
    cli.main()
    assert "kuhn_zero_contingency" in capsys.readouterr().out


def test_cli_exit_codes(monkeypatch, tmp_path):
    monkeypatch.setattr("sys.argv", ["main.py", "--out", str(tmp_path), "--quiet", "run", "dqn_details"])
    with pytest.raises(SystemExit) as ok:
        cli.main()
    assert ok.value.code == 0

    monkeypatch.setattr("sys.argv", ["main.py", "--out", str(tmp_path), "run", "no_such_experiment"])
    with pytest.raises(SystemExit) as bad:
        cli.main()
    assert bad.value.code == 2


def test_cli_accepts_output_options_after_the_subcommand(monkeypatch, tmp_path):
    trailing = tmp_path / "trailing"
    monkeypatch.setattr("sys.argv", ["main.py", "run", "dqn_details", "--out", str(trailing), "--format", "json",
                                     "--quiet"])
    with pytest.raises(SystemExit) as ok:
        cli.main()
    assert ok.value.code == 0
    assert (trailing / "dqn_details" / "verdict.json").exists()

    leading = tmp_path / "leading"
    monkeypatch.setattr("sys.argv", ["main.py", "--out", str(leading), "--quiet", "run", "dqn_details"])
    with pytest.raises(SystemExit) as ok:
        cli.main()
    assert ok.value.code == 0
    assert (leading / "dqn_details" / "verdict.json").exists()


# ==================== Full protocol ====================

@pytest.mark.slow
def test_kuhn_collapse_matches_its_expectations(tmp_path):
    outcome = harness.run("cac_sweep", {"workers": Config.WORKERS}, out_dir=str(tmp_path), progress=False)
    metrics = outcome.result.metrics
    assert metrics["ql_cac0_post"] == pytest.approx(-0.926, abs=0.03)
    assert metrics["jump_0_1"] > 0.8
    assert outcome.result.phase("ql_cac0", Phase.POST) == metrics["ql_cac0_post"]


@pytest.mark.slow
def test_exactness_experiment_passes(tmp_path):
    outcome = harness.run("metrics_exactness", out_dir=str(tmp_path), progress=False)
    verdicts = {v.metric: v.passed for v in outcome.verdicts}
    for metric in ("cac_w_full", "residual_bound_satisfied", "attractor_reached"):
        assert verdicts[metric], metric
