import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from modules.errors import StatsInputError
from modules.stats import (
    StatsSummary,
    bootstrap_ci,
    format_p,
    format_table,
    paired_t,
    summarize,
    variance_decomposition,
)

finite = st.floats(-2.0, 2.0, allow_nan=False, allow_infinity=False, allow_subnormal=False)


def test_paired_t_is_antisymmetric():
    rng = np.random.default_rng(0)
    pre = rng.normal(-0.05, 0.02, 20)
    post = rng.normal(-0.9, 0.03, 20)
    forward = paired_t(pre, post)
    backward = paired_t(post, pre)
    assert forward.cohens_d == pytest.approx(-backward.cohens_d)
    assert forward.p_value == pytest.approx(backward.p_value)
    assert forward.cohens_d < -10
    assert forward.p_value < 1e-4
    assert forward.n_seeds == 20
    assert forward.mean == pytest.approx(post.mean())


def test_zero_variance_differences():
    pre = [0.0, 0.5, 1.0]
    same = paired_t(pre, pre)
    assert same.cohens_d == 0.0 and same.p_value == 1.0
    shifted = paired_t(pre, [-1.0, -0.5, 0.0])
    assert shifted.cohens_d == -math.inf
    assert shifted.p_value == 0.0
    assert shifted.note


def test_bad_samples():
    with pytest.raises(StatsInputError):
        paired_t([0.0, 1.0], [0.0, 1.0, 2.0])
    with pytest.raises(StatsInputError):
        summarize([1.0])
    with pytest.raises(StatsInputError):
        bootstrap_ci([0.0, float("nan")])


def test_bootstrap_is_reproducible():
    values = [-0.93, -0.92, -0.925, -0.91, -0.94]
    assert bootstrap_ci(values) == bootstrap_ci(values)
    assert bootstrap_ci([0.5, 0.5, 0.5]) == (0.5, 0.5)


@given(values=st.lists(finite, min_size=2, max_size=30))
def test_bootstrap_interval_contains_the_mean(values):
    low, high = bootstrap_ci(values, resamples=500)
    mean = float(np.mean(values))
    assert low <= mean <= high


@given(groups=st.lists(st.lists(finite, min_size=2, max_size=10), min_size=1, max_size=6))
def test_variance_components_add_up(groups):
    result = variance_decomposition(dict(enumerate(groups)))
    assert result.v_env + result.v_policy == pytest.approx(result.v_total, abs=1e-9)
    assert result.v_env <= result.v_total + 1e-9
    assert result.v_policy <= result.v_total + 1e-9
    assert result.groups == len(groups)


def test_variance_decomposition_on_known_groups():
    result = variance_decomposition({"a": [0.0, 0.0], "b": [2.0, 2.0]})
    assert result.v_total == pytest.approx(1.0)
    assert result.v_env == pytest.approx(1.0)
    assert result.v_policy == 0.0
    with pytest.raises(StatsInputError):
        variance_decomposition({"a": [1.0]})
    with pytest.raises(StatsInputError):
        variance_decomposition({})


def test_table_formatting():
    assert format_p(None) == "-"
    assert format_p(1e-9) == "<0.0001"
    assert format_p(0.0421) == "0.0421"
    table = format_table([("ql", StatsSummary(-0.926, -0.93, -0.92, 1e-9, -math.inf, 20))])
    header, rule, row = table.splitlines()
    for column in ("Condition", "Mean", "95% CI", "p", "d", "n"):
        assert column in header
    assert row.startswith("ql")
    assert "-inf" in row and "<0.0001" in row and "-0.926" in row
