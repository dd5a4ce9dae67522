import numpy as np
import pytest

from modules.agent_zoo import nash_profile
from modules.errors import InvalidConfigError, MissingPolicyError
from modules.game_core import enumerate_info_sets, get_game
from modules.learner import AgentConfig
from modules.perturb import MaskRule, Phase, Schedule
from modules.selfplay import (
    MatchConfig,
    Sharing,
    episodes_to_attractor,
    phase_means,
    played_profile,
    build_seats,
    episodes_to_recovery,
    run_match,
    run_seed,
    seed_streams,
    window_sensitivity,
)

KUHN = get_game("kuhn")
FULL = (MaskRule.remove(KUHN, ["bet"]),)
ROOT = (MaskRule.remove(KUHN, ["bet"], scope="root"),)


def short(**changes) -> MatchConfig:
    base = dict(game="kuhn", rules=FULL, schedule=Schedule(activate_at=300), episodes=600,
                seeds=(0, 1), window=100, windows=(50, 100), workers=1)
    base.update(changes)
    return MatchConfig(**base)


def rewards(result):
    return [(r.seed, r.episode, r.reward_p0, r.reward_p1, r.history) for r in result.records]


def test_seed_streams_are_reproducible():
    a, b = seed_streams(7), seed_streams(7)
    assert a.chance.random() == b.chance.random()
    assert a.policy.random() == b.policy.random()
    assert seed_streams(7).chance.random() != seed_streams(8).chance.random()
    assert seed_streams(3, 3).chance.random() == seed_streams(3).chance.random()
    assert seed_streams(3, 99).policy.random() == seed_streams(3).policy.random()


def test_match_config_validation():
    with pytest.raises(InvalidConfigError):
        short(episodes=0)
    with pytest.raises(InvalidConfigError):
        short(seeds=())
    with pytest.raises(InvalidConfigError):
        short(chance_seeds=(1,))
    with pytest.raises(MissingPolicyError):
        short(sharing=Sharing.FIXED_OPPONENT)
    with pytest.raises(MissingPolicyError):
        short(sharing=Sharing.FIXED_OPPONENT, opponent_profile={})


def test_runs_are_deterministic():
    assert rewards(run_match(short())) == rewards(run_match(short()))


def test_records_follow_the_schedule():
    result = run_match(short(schedule=Schedule(activate_at=200, deactivate_at=400)))
    for record in result.records:
        expected = Phase.POST if 200 <= record.episode < 400 else (Phase.PRE if record.episode < 200 else Phase.RESTORED)
        assert record.phase is expected
        assert record.mask_active == (expected is Phase.POST)
        if record.mask_active:
            assert record.history[0] == "p"
        assert record.reward_p0 + record.reward_p1 == 0.0
    assert set(result.seeds[0].phase_means) == {"pre", "post", "restored"}


def test_shared_and_separate_tables_play_identically():
    # a seat's keys carry its index, so one shared table never mixes the seats
    shared = run_match(short())
    separate = run_match(short(sharing=Sharing.SEPARATE))
    assert rewards(shared) == rewards(separate)


def test_shared_seats_are_one_learner():
    seats = build_seats(short(), KUHN, seed_streams(0).init)
    assert seats[0] is seats[1]
    seats = build_seats(short(sharing=Sharing.SEPARATE), KUHN, seed_streams(0).init)
    assert seats[0] is not seats[1]


def test_nfsp_eta_one_and_zero_temperature_reduce_to_q_learning():
    ql = rewards(run_match(short()))
    assert rewards(run_match(short(agent=AgentConfig("nfsp", eta=1.0)))) == ql
    assert rewards(run_match(short(agent=AgentConfig("entropy_ql", tau=0.0)))) == ql


def test_phase_means_use_the_final_window():
    result = run_match(short())
    seed = result.seeds[0]
    post = [r.reward_p0 for r in seed.records if r.phase is Phase.POST]
    assert seed.phase_means["post"] == pytest.approx(np.mean(post[-100:]))
    assert phase_means(seed.records, 50)["post"] == pytest.approx(np.mean(post[-50:]))
    assert result.per_seed(Phase.POST).shape == (2,)
    assert result.per_seed(Phase.POST, window=50)[0] == pytest.approx(np.mean(post[-50:]))
    assert set(window_sensitivity(result)) == {50, 100}


def test_fixed_opponent_and_population_play():
    fixed = run_match(short(sharing=Sharing.FIXED_OPPONENT, opponent_profile=nash_profile("kuhn")))
    assert len(fixed.records) == 1_200
    population = run_match(short(sharing=Sharing.POPULATION, population_size=3, oracle_episodes=100))
    assert len(population.records) == 1_200


@pytest.mark.parametrize("algorithm", ["sarsa", "reinforce", "ppo", "nfsp", "dqn", "cfr"])
def test_every_algorithm_plays_kuhn(algorithm):
    config = short(agent=AgentConfig(algorithm, batch_size=8), episodes=200, seeds=(0,),
                   schedule=Schedule(activate_at=100))
    result = run_match(config)
    assert all(-2.0 <= r.reward_p0 <= 2.0 for r in result.records)


def test_non_enumerable_games_play():
    for game, rules in (("ipd", (MaskRule.remove(get_game("ipd"), ["cooperate"]),)),
                        ("coordination", (MaskRule.force_lowest("all"),)),
                        ("liars_dice", ())):
        result = run_match(MatchConfig(game=game, rules=rules, schedule=Schedule(activate_at=50),
                                       episodes=100, seeds=(0,), window=20, windows=(20,), workers=1))
        low, high = get_game(game).reward_bounds
        assert all(low <= r.reward_p0 <= high for r in result.records)


def test_stochastic_schedule_masks_about_half_of_the_post_episodes():
    result = run_match(short(rules=ROOT, schedule=Schedule(activate_at=0, per_episode_probability=0.5),
                             episodes=4_000, seeds=(0,)))
    share = np.mean([r.mask_active for r in result.records])
    assert abs(share - 0.5) < 0.03


def test_diagnostics_record_entropy_and_exploitability():
    result = run_match(short(diagnostics=True, trace_window=200))
    seed = result.seeds[0]
    assert [e for e, _ in seed.exploitability] == [200, 400, 600]
    assert all(v >= -1e-12 for _, v in seed.exploitability)
    assert any(r.policy_entropy is not None for r in seed.records)
    assert any(r.q_gap is not None for r in seed.records)


def test_played_profile_covers_the_tree():
    config = short(capture_profile=True, schedule=Schedule(activate_at=600))
    profile = run_match(config).seeds[0].final_profile
    assert set(profile) == enumerate_info_sets(KUHN)
    assert all(sum(dist.values()) == pytest.approx(1.0) for dist in profile.values())


def test_chance_seeds_share_deals():
    config = short(seeds=(0, 1), chance_seeds=(5, 5))
    result = run_match(config)
    deals = [[r.chance for r in s.records] for s in result.seeds]
    assert deals[0] == deals[1]
    assert [s.chance_seed for s in result.seeds] == [5, 5]


def test_zero_contingency_collapse_reaches_the_floor():
    config = short(episodes=6_000, schedule=Schedule(activate_at=2_000), seeds=(0, 1, 2), window=1_000,
                   windows=(1_000,), track_attractor=True)
    result = run_match(config)
    post = result.per_seed(Phase.POST)
    assert np.mean(post) == pytest.approx(-0.925, abs=0.05)
    assert np.mean(result.per_seed(Phase.PRE)) > -0.5
    assert all(e is not None and e >= 1 for e in episodes_to_attractor(result))


def test_restoration_lifts_the_reward():
    config = short(episodes=6_000, schedule=Schedule(activate_at=2_000, deactivate_at=4_000), seeds=(0, 1),
                   window=1_000, windows=(1_000,), track_recovery=True)
    result = run_match(config)
    assert np.mean(result.per_seed(Phase.RESTORED)) > np.mean(result.per_seed(Phase.POST)) + 0.5
    assert all(e is None or 1 <= e <= 2_000 for e in episodes_to_recovery(result))


@pytest.mark.parametrize("changes", [{"agent": AgentConfig("cfr")}, {"freeze_at_activation": True}])
def test_recovery_is_immediate_when_play_never_changed(changes):
    # fixed or frozen seats play the same profile before and after the mask
    config = short(schedule=Schedule(activate_at=200, deactivate_at=400), track_recovery=True, **changes)
    assert run_seed(config, 0).recovery_episodes == 1


def test_recovery_is_not_tracked_without_a_restore():
    assert run_seed(short(track_recovery=True), 0).recovery_episodes is None


@pytest.mark.slow
def test_root_only_removal_stays_near_equilibrium():
    config = MatchConfig(game="kuhn", rules=ROOT, seeds=tuple(range(5)), workers=1)
    assert np.mean(run_match(config).per_seed(Phase.POST)) > -0.2
