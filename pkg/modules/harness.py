"""
Harness Module
Runs named experiments, checks them against their expected-result blocks and
writes every output (episode logs, summaries, verdicts, traces).
"""
import sys
import os
sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from dataclasses import asdict, dataclass, field
from typing import Any, Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from config import Config
from modules.errors import InvalidConfigError, InvalidOverrideError, MetricUnavailableError
from modules.experiments import (
    REACH_EPSILONS,
    REGISTRY,
    ExperimentDef,
    ExperimentResult,
    Protocol,
    RunSettings,
    get_experiment,
    measure_reach_sensitivity,
    settings_from,
)
from modules.results_store import ResultsStore
from modules.selfplay import MatchResult
from modules.stats import bootstrap_ci, format_table

TRACE_METRICS = ("reward", "exploitability", "entropy", "qgap")
TRACE_RESAMPLES = 2_000
RECORD_FORMATS = ("csv", "json")


@dataclass
class Verdict:
    metric: str
    description: str
    provenance: str
    expected: str
    value: Optional[float]
    passed: bool


@dataclass
class RunOutcome:
    experiment: ExperimentDef
    settings: RunSettings
    result: ExperimentResult
    verdicts: List[Verdict] = field(default_factory=list)
    store: Optional[ResultsStore] = None

    @property
    def passed(self) -> bool:
        return all(v.passed for v in self.verdicts)


def check(definition: ExperimentDef, result: ExperimentResult) -> List[Verdict]:
    """Compare every expectation of the experiment against the measured metrics."""
    verdicts = []
    for exp in definition.expectations:
        value = result.metrics.get(exp.metric)
        verdicts.append(Verdict(exp.metric, exp.description, exp.provenance, exp.describe(),
                                None if value is None else float(value), exp.check(value)))
    return verdicts


def _settings_payload(protocol: Protocol, settings: RunSettings) -> Dict[str, Any]:
    payload = dict(settings.overrides())
    payload.update(episodes=protocol.episodes, seeds=len(protocol.seeds), window=protocol.window,
                   windows=list(protocol.windows))
    return payload


def write_outputs(outcome: RunOutcome, protocol: Protocol, out_dir: Optional[str] = None,
                  fmt: str = Config.DEFAULT_FORMAT) -> ResultsStore:
    """Episode CSVs per condition, summary.json, summary.txt and verdict.json."""
    store = ResultsStore(outcome.experiment.id, out_dir)
    result = outcome.result
    for name, match in result.conditions.items():
        store.write_records(name, match.records, fmt)

    store.write_json("summary.json", {
        "experiment": outcome.experiment.id,
        "title": outcome.experiment.title,
        "result_sets": list(outcome.experiment.result_sets),
        "settings": _settings_payload(protocol, outcome.settings),
        "metrics": result.metrics,
        "summaries": {name: s.to_dict() for name, s in result.summaries.items()},
        "reports": result.reports,
    })

    lines = [f"{outcome.experiment.id}: {outcome.experiment.title}", ""]
    if result.summaries:
        lines += [format_table(list(result.summaries.items())), ""]
    lines += [f"{name:<36} {value:+.4f}" for name, value in sorted(result.metrics.items())]
    store.write_text("summary.txt", "\n".join(lines))

    store.write_json("verdict.json", {
        "experiment": outcome.experiment.id,
        "passed": outcome.passed,
        "checks": [asdict(v) for v in outcome.verdicts],
    })
    return store


def run(experiment_id: str, overrides: Optional[Mapping[str, Any]] = None, out_dir: Optional[str] = None,
        write: bool = True, fmt: str = Config.DEFAULT_FORMAT, **flags) -> RunOutcome:
    """
    Run one named experiment end to end.

    Args:
        experiment_id: Registry id
        overrides: Parsed key=value overrides
        out_dir: Output root (Config.OUTPUT_DIR when omitted)
        write: Write the output files
        fmt: Episode log format, csv or json
        **flags: Non-override RunSettings fields (diagnostics, long_run, progress)

    Returns:
        RunOutcome with the result, verdicts and store
    """
    if fmt not in RECORD_FORMATS:
        raise InvalidOverrideError(f"unknown output format {fmt!r}; choose csv or json")
    definition = get_experiment(experiment_id)
    settings = settings_from(overrides or {}, **flags)
    if definition.long_run and not settings.long_run:
        raise InvalidConfigError(f"{experiment_id} is a long run; enable it with --long-run")

    print(f"\n🧪 {definition.id}: {definition.title}")
    protocol = Protocol(settings, definition)
    result = definition.runner(protocol)
    outcome = RunOutcome(definition, settings, result, check(definition, result))
    if write:
        outcome.store = write_outputs(outcome, protocol, out_dir, fmt)
    for v in outcome.verdicts:
        shown = "n/a" if v.value is None else f"{v.value:+.4f}"
        print(f"   {'✅' if v.passed else '❌'} {v.metric:<32} {shown:>9}  expected {v.expected} ({v.provenance})")
    return outcome


def verify(experiment_ids: Optional[Sequence[str]] = None, overrides: Optional[Mapping[str, Any]] = None,
           out_dir: Optional[str] = None, **flags) -> Dict[str, bool]:
    """Run experiments (all short ones by default) and report PASS/FAIL per id."""
    long_run = flags.get("long_run", Config.LONG_RUN)
    ids = list(experiment_ids) if experiment_ids else [
        d.id for d in REGISTRY.values() if long_run or not d.long_run
    ]
    verdicts = {}
    for experiment_id in ids:
        outcome = run(experiment_id, overrides, out_dir, **flags)
        verdicts[experiment_id] = outcome.passed
        print(f"{'PASS' if outcome.passed else 'FAIL'} {experiment_id}")
    return verdicts


# ==================== Traces ====================

def _series(match: MatchResult, metric: str) -> List[List[Tuple[int, float]]]:
    """Per-seed (episode, value) series of a trace metric."""
    if metric == "exploitability":
        return [list(s.exploitability) for s in match.seeds]
    attribute = {"reward": "reward_p0", "entropy": "policy_entropy", "qgap": "q_gap"}[metric]
    series = []
    for seed in match.seeds:
        points = [(r.episode, getattr(r, attribute)) for r in seed.records]
        series.append([(e, float(v)) for e, v in points if v is not None])
    return series


def trace_rows(match: MatchResult, metric: str, window: int = Config.TRACE_WINDOW) -> List[Tuple]:
    """
    Windowed trace of one condition: seed-averaged means with bootstrap intervals.

    Raises:
        MetricUnavailableError: Unknown metric, or a metric the run did not record
    """
    if metric not in TRACE_METRICS:
        raise MetricUnavailableError(f"unknown trace metric {metric!r}; choose from {', '.join(TRACE_METRICS)}")
    if window < 1:
        raise MetricUnavailableError("trace window must be positive")
    series = _series(match, metric)
    if not any(series):
        hint = "run with diagnostics on an enumerable zero-sum game" if metric == "exploitability" else "run with --diagnostics"
        raise MetricUnavailableError(f"{metric} was not recorded for this run; {hint}")

    # snapshots are stamped with the episode count they follow
    shift = 1 if metric == "exploitability" else 0
    buckets: List[Dict[int, List[float]]] = []
    for points in series:
        bucket: Dict[int, List[float]] = {}
        for episode, value in points:
            bucket.setdefault((episode - shift) // window, []).append(value)
        buckets.append(bucket)

    rows = []
    for index in range(-(-match.config.episodes // window)):
        means = [float(np.mean(b[index])) for b in buckets if index in b]
        if not means:
            continue
        mean = float(np.mean(means))
        low, high = bootstrap_ci(means, resamples=TRACE_RESAMPLES) if len(means) >= 2 else (mean, mean)
        rows.append((index * window, (index + 1) * window, mean, low, high, len(means)))
    return rows


def emit_trace(result: ExperimentResult, metric: str, window: int = Config.TRACE_WINDOW,
               condition: Optional[str] = None, store: Optional[ResultsStore] = None) -> List[Tuple]:
    """Trace of one condition (the first by default), written to trace_<metric>.csv."""
    if not result.conditions:
        raise MetricUnavailableError(f"{result.experiment_id} has no self-play conditions to trace")
    name = condition or next(iter(result.conditions))
    if name not in result.conditions:
        raise MetricUnavailableError(f"no condition {name!r} in {result.experiment_id}")
    rows = trace_rows(result.conditions[name], metric, window)
    if store is not None:
        store.write_trace(metric if condition is None else f"{name}_{metric}", rows)
    return rows


def reach_sensitivity_sweep(epsilons: Sequence[float] = REACH_EPSILONS,
                            overrides: Optional[Mapping[str, Any]] = None, **flags) -> List[Dict[str, float]]:
    """Reach of the retained root-only point and the post mean for each exploration rate."""
    definition = get_experiment("reach_sensitivity")
    protocol = Protocol(settings_from(overrides or {}, **flags), definition)
    return measure_reach_sensitivity(protocol, epsilons)


if __name__ == "__main__":
    outcome = run("dqn_details", write=False)
    print(f"passed: {outcome.passed}")
