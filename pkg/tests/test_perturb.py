import numpy as np
import pytest
from hypothesis import assume, given, strategies as st

from modules.errors import EmptyActionSetError, IllegalActionError, InvalidConfigError
from modules.game_core import InfoKey, get_game
from modules.perturb import (
    MaskMode,
    MaskRule,
    Phase,
    PublicHistoryScope,
    RuleSet,
    Schedule,
    Scope,
    as_ruleset,
    effective_actions,
    phase_of,
    schedule_active,
    validate_rules,
)

KUHN = get_game("kuhn")
ROOT = InfoKey(0, "K", "")
FACING_BET = InfoKey(0, "K", "pb")
P1_KEY = InfoKey(1, "J", "p")


def test_remove_everywhere():
    rule = MaskRule.remove(KUHN, ["bet"])
    assert effective_actions(ROOT, (0, 1), [rule]) == (0,)
    assert effective_actions(FACING_BET, (0, 1), [rule]) == (0,)
    assert effective_actions(P1_KEY, (0, 1), [rule]) == (0, 1)


def test_scopes():
    root_only = MaskRule.remove(KUHN, ["bet"], scope="root")
    assert effective_actions(ROOT, (0, 1), [root_only]) == (0,)
    assert effective_actions(FACING_BET, (0, 1), [root_only]) == (0, 1)

    non_root = MaskRule.remove(KUHN, ["bet"], scope=Scope.NON_ROOT)
    assert effective_actions(ROOT, (0, 1), [non_root]) == (0, 1)
    assert effective_actions(FACING_BET, (0, 1), [non_root]) == (0,)

    one_point = MaskRule.remove(KUHN, ["pass"], scope=PublicHistoryScope("pb"))
    assert effective_actions(FACING_BET, (0, 1), [one_point]) == (1,)
    assert effective_actions(ROOT, (0, 1), [one_point]) == (0, 1)


def test_force_lowest_keeps_first_legal_action():
    rule = MaskRule.force_lowest("all", player=1)
    assert rule.mode is MaskMode.FORCE_POLICY
    assert effective_actions(P1_KEY, (0, 1), [rule]) == (0,)
    assert effective_actions(InfoKey(1, "", "3"), (11, 12), [rule]) == (11,)
    assert effective_actions(ROOT, (0, 1), [rule]) == (0, 1)


def test_removing_everything_is_rejected():
    rule = MaskRule.remove(KUHN, ["pass", "bet"])
    with pytest.raises(EmptyActionSetError):
        effective_actions(ROOT, (0, 1), [rule])
    with pytest.raises(EmptyActionSetError):
        validate_rules(KUHN, [rule])


def test_leduc_raise_removal_leaves_a_choice_when_facing_a_bet():
    leduc = get_game("leduc")
    rule = MaskRule.remove(leduc, ["raise"])
    assert effective_actions(InfoKey(0, "J", ""), (1, 2), [rule]) == (1,)
    assert effective_actions(InfoKey(0, "J", "cr"), (0, 1, 2), [rule]) == (0, 1)
    validate_rules(leduc, [rule])


def test_bad_labels_and_scopes():
    with pytest.raises(IllegalActionError):
        MaskRule.remove(KUHN, ["raise"])
    with pytest.raises(InvalidConfigError):
        MaskRule.remove(KUHN, ["bet"], scope="leaves")
    with pytest.raises(InvalidConfigError):
        validate_rules(KUHN, [MaskRule(target_player=2, removed_actions=frozenset({1}))])


def test_from_config():
    rule = MaskRule.from_config(KUHN, {"player": 0, "mode": "remove", "actions": ["bet"], "scope": "root"})
    assert rule == MaskRule.remove(KUHN, ["bet"], scope="root")
    forced = MaskRule.from_config(KUHN, {"player": 1, "mode": "force"})
    assert forced.mode is MaskMode.FORCE_POLICY and forced.target_player == 1


def test_ruleset_is_hashable_filter():
    rules = as_ruleset([MaskRule.remove(KUHN, ["bet"])])
    assert isinstance(rules, RuleSet)
    assert hash(rules) == hash(as_ruleset([MaskRule.remove(KUHN, ["bet"])]))
    assert rules(ROOT, (0, 1)) == (0,)
    assert rules.target_players == frozenset({0})
    assert as_ruleset([]) is None
    assert as_ruleset(None) is None


def test_schedule_validation():
    with pytest.raises(InvalidConfigError):
        Schedule(activate_at=100, deactivate_at=50)
    with pytest.raises(InvalidConfigError):
        Schedule(activate_at=0, per_episode_probability=1.5)


def test_phases():
    schedule = Schedule(activate_at=10, deactivate_at=20)
    assert phase_of(9, schedule) is Phase.PRE
    assert phase_of(10, schedule) is Phase.POST
    assert phase_of(19, schedule) is Phase.POST
    assert phase_of(20, schedule) is Phase.RESTORED
    assert phase_of(10 ** 6, Schedule(activate_at=10)) is Phase.POST


def test_deterministic_schedule_draws_nothing():
    schedule = Schedule(activate_at=10, deactivate_at=20)
    rng = np.random.default_rng(3)
    flags = [schedule_active(ep, schedule, rng) for ep in range(30)]
    assert flags == [False] * 10 + [True] * 10 + [False] * 10
    assert rng.random() == np.random.default_rng(3).random()


def test_stochastic_schedule_frequency():
    schedule = Schedule(activate_at=0, per_episode_probability=0.5)
    rng = np.random.default_rng(11)
    share = np.mean([schedule_active(ep, schedule, rng) for ep in range(20_000)])
    assert abs(share - 0.5) < 0.02


@given(base=st.lists(st.integers(0, 12), min_size=1, max_size=13, unique=True),
       removed=st.sets(st.integers(0, 12)))
def test_effective_actions_is_an_ordered_subset(base, removed):
    base = tuple(sorted(base))
    assume(set(base) - removed)
    rule = MaskRule(target_player=0, removed_actions=frozenset(removed))
    actions = effective_actions(ROOT, base, [rule])
    assert actions == tuple(a for a in base if a not in removed)
    assert actions and list(actions) == sorted(actions)
