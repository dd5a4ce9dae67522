import numpy as np
import pytest
import torch
from hypothesis import given, strategies as st
from scipy.special import softmax

from modules.agent_zoo import build_agent, nash_profile
from modules.cfr_solver import CFRSolver, cfr_solve, regret_matching
from modules.dqn_agent import MLP, ObservationEncoder, ReplayBuffer, Transition, td_loss
from modules.errors import InvalidConfigError, InvalidStateError
from modules.game_core import InfoKey, expected_values, get_game
from modules.learner import AgentConfig, ProfileAgent, Step, freeze
from modules.metrics import exploitability
from modules.nfsp_agent import AverageStrategyTable, NFSPAgent, nfsp_step
from modules.policy_gradient import (
    PPOAgent,
    PPOSample,
    PreferenceTable,
    clipped_surrogate,
    log_softmax_gradient,
    ppo_tabular_update,
    reinforce_update,
)
from modules.psro import PopulationOpponent
from modules.tabular_agents import (
    QLearningAgent,
    SarsaAgent,
    ValueTable,
    egreedy_probabilities,
    entropy_ql_update,
    mc_terminal_update,
    sarsa_transitions,
    sarsa_update,
    select_action_egreedy,
)

KUHN = get_game("kuhn")
KEY = InfoKey(0, "K", "")


# ==================== Tabular ====================

def test_egreedy_singleton_and_greedy_ties():
    table = ValueTable()
    rng = np.random.default_rng(0)
    assert select_action_egreedy(table, KEY, (1,), 1.0, rng) == 1
    assert select_action_egreedy(table, KEY, (0, 1), 0.0, rng) == 0
    table.set(KEY, 1, 0.5)
    assert select_action_egreedy(table, KEY, (0, 1), 0.0, rng) == 1


def test_egreedy_frequencies():
    table = ValueTable()
    table.set(KEY, 1, 1.0)
    rng = np.random.default_rng(1)
    picks = [select_action_egreedy(table, KEY, (0, 1), 0.15, rng) for _ in range(20_000)]
    assert abs(np.mean(np.array(picks) == 0) - 0.075) < 0.01
    assert egreedy_probabilities(table, KEY, (0, 1), 0.15) == pytest.approx([0.075, 0.925])


def test_mc_terminal_update():
    table = mc_terminal_update(ValueTable(), [(KEY, 1)], 1.0, 0.1)
    assert table.get(KEY, 1) == pytest.approx(0.1)
    mc_terminal_update(table, [(KEY, 1)], 1.0, 0.1)
    assert table.get(KEY, 1) == pytest.approx(0.19)
    with pytest.raises(ValueError):
        table.set(KEY, 0, float("nan"))


def test_value_table_dump_and_load():
    table = ValueTable()
    table.set(KEY, 1, 0.1 + 0.2)
    table.set(InfoKey(1, "J", "p"), 0, -1.0 / 3.0)
    assert ValueTable.load(KUHN, table.dump(KUHN)) == table


def test_sarsa_chain():
    first = Step(InfoKey(0, "Q", ""), 0, (0, 1), 0.5)
    second = Step(InfoKey(0, "Q", "pb"), 1, (0, 1), 0.5)
    transitions = sarsa_transitions([first, second], -2.0)
    assert transitions[0].reward == 0.0 and transitions[0].next_key == second.key
    assert transitions[1].reward == -2.0 and transitions[1].next_key is None

    table = ValueTable()
    table.set(second.key, 1, 1.0)
    sarsa_update(table, transitions, 0.5)
    assert table.get(first.key, 0) == pytest.approx(0.5)
    assert table.get(second.key, 1) == pytest.approx(-0.5)


def test_entropy_bonus_zero_matches_mc_update():
    steps = [Step(KEY, 1, (0, 1), 0.9)]
    plain = mc_terminal_update(ValueTable(), steps, 1.0, 0.1)
    regularised = entropy_ql_update(ValueTable(), steps, 1.0, 0.1, tau=0.0)
    assert plain == regularised
    bonus = entropy_ql_update(ValueTable(), steps, 1.0, 0.1, tau=0.2)
    assert bonus.get(KEY, 1) > plain.get(KEY, 1)
    with pytest.raises(InvalidConfigError):
        entropy_ql_update(ValueTable(), steps, 1.0, 0.1, tau=-1.0)


def test_sarsa_agent_learns_from_own_chain():
    agent = SarsaAgent(AgentConfig(algorithm="sarsa"))
    agent.end_episode(0, [Step(KEY, 1, (0, 1), 0.925)], 2.0, 0)
    assert agent.table.get(KEY, 1) == pytest.approx(0.2)


# ==================== Config ====================

def test_agent_config_validation():
    with pytest.raises(InvalidConfigError):
        AgentConfig(algorithm="alphazero")
    with pytest.raises(InvalidConfigError):
        AgentConfig(epsilon=1.5)
    with pytest.raises(InvalidConfigError):
        AgentConfig(eta=-0.1)
    with pytest.raises(InvalidConfigError):
        AgentConfig(tau=-0.1)


def test_epsilon_decay():
    config = AgentConfig(epsilon=0.15, epsilon_final=0.01, epsilon_decay_episodes=100)
    assert config.epsilon_at(0) == pytest.approx(0.15)
    assert config.epsilon_at(50) == pytest.approx(0.08)
    assert config.epsilon_at(500) == pytest.approx(0.01)
    assert AgentConfig().epsilon_at(10 ** 6) == 0.15
    assert config.with_updates(alpha=0.3).alpha == 0.3


def test_frozen_learner_stops_updating():
    agent = freeze(QLearningAgent(AgentConfig()))
    agent.end_episode(0, [Step(KEY, 1, (0, 1), 1.0)], 1.0, 0)
    assert len(agent.table) == 0


def test_build_agent():
    assert isinstance(build_agent(KUHN, AgentConfig("ql")), QLearningAgent)
    assert isinstance(build_agent(KUHN, AgentConfig("nfsp")), NFSPAgent)
    with pytest.raises(InvalidConfigError):
        build_agent(KUHN, AgentConfig("profile"))
    agent = build_agent(KUHN, AgentConfig("profile"), profile={KEY: {0: 0.25, 1: 0.75}})
    assert isinstance(agent, ProfileAgent)
    assert agent.action_probabilities(KEY, (0,)) == pytest.approx([1.0])
    assert agent.action_probabilities(KEY, (0, 1)) == pytest.approx([0.25, 0.75])


# ==================== Policy Gradient ====================

@given(logits=st.lists(st.floats(-5, 5), min_size=2, max_size=6), data=st.data())
def test_log_softmax_gradient_matches_finite_differences(logits, data):
    theta = np.array(logits)
    index = data.draw(st.integers(0, len(logits) - 1))
    analytic = log_softmax_gradient(theta, index)
    h = 1e-6
    numeric = np.zeros_like(theta)
    for j in range(len(theta)):
        up, down = theta.copy(), theta.copy()
        up[j] += h
        down[j] -= h
        numeric[j] = (np.log(softmax(up)[index]) - np.log(softmax(down)[index])) / (2 * h)
    assert np.allclose(analytic, numeric, atol=1e-6)


def test_reinforce_moves_toward_positive_advantage():
    prefs = PreferenceTable()
    before = prefs.probabilities(KEY, (0, 1))[1]
    reinforce_update(prefs, [Step(KEY, 1, (0, 1), 0.5)], ret=1.0, baseline=0.0, lr=0.1)
    assert prefs.probabilities(KEY, (0, 1))[1] > before
    unchanged = reinforce_update(PreferenceTable(), [Step(KEY, 1, (0, 1), 0.5)], 0.3, 0.3, 0.1)
    assert len(unchanged) == 0


def test_clipped_surrogate():
    assert clipped_surrogate(1.5, 1.0, 0.2) == pytest.approx(1.2)
    assert clipped_surrogate(0.5, -1.0, 0.2) == pytest.approx(-0.8)
    assert clipped_surrogate(1.0, 0.7, 0.2) == pytest.approx(0.7)


def test_ppo_gradient_matches_finite_differences():
    legal = (0, 1, 2)
    theta0 = np.array([0.3, -0.2, 0.5])
    prefs = PreferenceTable()
    prefs.add(KEY, legal, theta0)
    old = prefs.probabilities(KEY, legal)[1]
    advantage, coef, lr = 0.7, 0.01, 1e-3

    def objective(theta):
        p = softmax(theta)
        return p[1] / old * advantage + coef * -np.sum(p * np.log(p))

    ppo_tabular_update(prefs, [PPOSample(KEY, 1, legal, advantage)], [old], lr=lr, clip=0.2, entropy_coef=coef)
    analytic = (prefs.logits(KEY, legal) - theta0) / lr

    h = 1e-6
    numeric = np.zeros(3)
    for j in range(3):
        up, down = theta0.copy(), theta0.copy()
        up[j] += h
        down[j] -= h
        numeric[j] = (objective(up) - objective(down)) / (2 * h)
    assert np.allclose(analytic, numeric, rtol=1e-4, atol=1e-8)


def test_ppo_clip_zeroes_the_surrogate_gradient():
    legal = (0, 1)
    prefs = PreferenceTable()
    prefs.add(KEY, legal, np.array([0.0, 2.0]))
    # ratio is far above 1 + clip with a positive advantage
    ppo_tabular_update(prefs, [PPOSample(KEY, 1, legal, 1.0)], [0.1], lr=0.1, entropy_coef=0.0)
    assert prefs.logits(KEY, legal) == pytest.approx([0.0, 2.0])


def test_ppo_batch_mixes_masked_and_unmasked_legal_sets():
    # the same key once with its full set and once under a mask
    prefs = ppo_tabular_update(PreferenceTable(), [PPOSample(KEY, 1, (0, 1, 2), 1.0), PPOSample(KEY, 1, (0, 1), 1.0)],
                               [1 / 3, 1 / 2], lr=0.1, entropy_coef=0.0)
    # (onehot - uniform) summed per action: [-1/3 - 1/2, 2/3 + 1/2, -1/3]
    assert prefs.logits(KEY, (0, 1, 2)) == pytest.approx([-0.5 / 6, 0.7 / 6, -0.1 / 3])

    prefs = ppo_tabular_update(PreferenceTable(), [PPOSample(KEY, 0, (0,), 1.0), PPOSample(KEY, 1, (0, 1), 1.0)],
                               [1.0, 0.5], lr=0.1, entropy_coef=0.0)
    assert prefs.logits(KEY, (0, 1)) == pytest.approx([-0.05, 0.05])


def test_ppo_trains_on_a_partial_batch_at_match_end():
    agent = PPOAgent(AgentConfig("ppo"))
    agent.end_episode(0, [Step(KEY, 1, (0, 1), 0.5)], 1.0, 0)
    assert len(agent.prefs) == 0
    agent.end_match()
    assert agent.prefs.get(KEY, 1) > 0.0
    assert agent.samples == []


def test_ppo_freeze_trains_on_the_pending_batch_first():
    agent = PPOAgent(AgentConfig("ppo"))
    agent.end_episode(0, [Step(KEY, 1, (0, 1), 0.5)], 1.0, 0)
    freeze(agent)
    learned = agent.prefs.get(KEY, 1)
    assert learned > 0.0
    agent.end_episode(0, [Step(KEY, 1, (0, 1), 0.5)], 1.0, 1)
    agent.end_match()
    assert agent.prefs.get(KEY, 1) == learned


# ==================== NFSP ====================

def test_nfsp_with_eta_one_follows_q_learning_stream():
    agent = QLearningAgent(AgentConfig())
    agent.table.set(KEY, 1, 0.4)
    average = AverageStrategyTable()
    rng_nfsp, rng_ql = np.random.default_rng(5), np.random.default_rng(5)
    for _ in range(200):
        choice = nfsp_step(agent, average, KEY, (0, 1), 1.0, rng_nfsp)
        assert choice.best_response
        assert choice.action == select_action_egreedy(agent.table, KEY, (0, 1), agent.epsilon, rng_ql)


def test_average_strategy_table():
    table = AverageStrategyTable()
    assert table.probabilities(KEY, (0, 1)) == pytest.approx([0.5, 0.5])
    for action in (1, 1, 1, 0):
        table.record(KEY, action)
    assert table.probabilities(KEY, (0, 1)) == pytest.approx([0.25, 0.75])


# ==================== PSRO ====================

def test_population_grows_to_its_cap():
    opponent = PopulationOpponent(AgentConfig(), population_size=3, oracle_episodes=10, seed=0)
    assert len(opponent.members) == 1
    for episode in range(45):
        opponent.begin_episode(episode)
    assert len(opponent.snapshots) == 2
    assert all(m.frozen for m in opponent.snapshots)
    assert not opponent.oracle.frozen

    single = PopulationOpponent(AgentConfig(), population_size=1, oracle_episodes=10)
    for episode in range(45):
        single.begin_episode(episode)
    assert single.members == [single.oracle]
    with pytest.raises(InvalidConfigError):
        PopulationOpponent(AgentConfig(), population_size=0)


# ==================== DQN ====================

def test_observation_encoder_layout():
    encoder = ObservationEncoder(KUHN)
    assert encoder.width == 11
    vec = encoder.encode(InfoKey(1, "Q", "p"))
    assert vec.sum() == 4.0
    assert vec[1] == 1.0 and vec[3] == 1.0 and vec[6] == 1.0 and vec[8] == 1.0
    with pytest.raises(InvalidStateError):
        encoder.encode(InfoKey(0, "A", ""))


def test_replay_buffer_evicts_oldest():
    buffer = ReplayBuffer(capacity=3)
    obs = np.zeros(2, dtype=np.float32)
    for action in range(5):
        buffer.push(Transition(obs, action, 0.0, obs, np.ones(2, dtype=bool), False))
    assert len(buffer) == 3
    assert [t.action for t in buffer.memory] == [2, 3, 4]
    assert len(buffer.sample(2, np.random.default_rng(0))) == 2


def test_td_loss_gradient_matches_finite_differences():
    torch.manual_seed(0)
    net = MLP(5, 3, hidden=8).double()
    target = MLP(5, 3, hidden=8).double()
    rng = np.random.default_rng(0)
    batch = []
    for i in range(6):
        done = i % 2 == 0
        mask = np.zeros(3, dtype=bool) if done else np.array([True, False, True])
        batch.append(Transition(rng.normal(size=5), int(rng.integers(3)), float(rng.normal()),
                                rng.normal(size=5), mask, done))

    net.zero_grad()
    td_loss(net, target, batch).backward()
    analytic = net.hidden.weight.grad.clone()

    h = 1e-6
    weight = net.hidden.weight
    with torch.no_grad():
        for i in range(2):
            for j in range(5):
                original = weight[i, j].item()
                weight[i, j] = original + h
                up = td_loss(net, target, batch).item()
                weight[i, j] = original - h
                down = td_loss(net, target, batch).item()
                weight[i, j] = original
                assert (up - down) / (2 * h) == pytest.approx(analytic[i, j].item(), rel=1e-4, abs=1e-8)


def test_dqn_agent_acts_inside_the_legal_set():
    agent = build_agent(KUHN, AgentConfig("dqn", batch_size=2), init_seed=3)
    rng = np.random.default_rng(0)
    assert agent.act(KEY, (1,), rng).action == 1
    decision = agent.act(KEY, (0, 1), rng)
    assert decision.action in (0, 1)
    assert agent.action_probabilities(KEY, (0, 1)).sum() == pytest.approx(1.0)
    agent.end_episode(0, [Step(KEY, decision.action, (0, 1), decision.prob)], 1.0, 0)
    agent.end_episode(0, [Step(KEY, decision.action, (0, 1), decision.prob)], 1.0, 1)
    assert len(agent.losses) == 1


# ==================== CFR ====================

def test_regret_matching():
    assert regret_matching(np.array([1.0, -1.0, 3.0])) == pytest.approx([0.25, 0.0, 0.75])
    assert regret_matching(np.array([-1.0, -2.0])) == pytest.approx([0.5, 0.5])


def test_cfr_kuhn_converges():
    solver = CFRSolver("kuhn", checkpoint_every=2_000)
    profile = solver.solve(10_000)
    assert expected_values("kuhn", profile)[0] == pytest.approx(-1.0 / 18.0, abs=0.005)
    assert exploitability("kuhn", profile) < 0.01
    assert [it for it, _ in solver.checkpoints] == [2_000, 4_000, 6_000, 8_000, 10_000]
    assert solver.checkpoints[-1][1] < solver.checkpoints[0][1]
    assert nash_profile("kuhn") == cfr_solve("kuhn")


@pytest.mark.slow
def test_cfr_leduc_value():
    profile = cfr_solve("leduc", checkpoint_every=0)
    value = expected_values("leduc", profile)[0]
    assert value == pytest.approx(get_game("leduc").nash_reference_value, abs=0.01)
    # and of the rounded -0.087 used by the cfr_values expectation
    assert value == pytest.approx(-0.087, abs=0.01)


@pytest.mark.slow
def test_cfr_liars_dice_profile_covers_every_decision():
    profile = cfr_solve("liars_dice", iterations=20, checkpoint_every=0)
    assert len(profile) == 24_576
    assert all(sum(dist.values()) == pytest.approx(1.0) for dist in profile.values())
    assert -1.0 <= expected_values("liars_dice", profile)[0] <= 1.0
