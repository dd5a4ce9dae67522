"""
NFSP Module
Neural-fictitious-style self-play in tabular form: an ε-greedy best-response
learner plus an exact frequency-count average strategy.
"""
import sys
import os
sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from typing import Dict, NamedTuple, Tuple

import numpy as np

from modules.game_core import InfoKey
from modules.learner import AgentConfig, Decision, Learner
from modules.tabular_agents import QLearningAgent, select_action_egreedy


class AverageStrategyTable:
    """Counts of best-response actions per key; normalized counts are the average strategy."""

    def __init__(self):
        self.counts: Dict[Tuple[InfoKey, int], float] = {}

    def record(self, key: InfoKey, action: int) -> None:
        self.counts[(key, action)] = self.counts.get((key, action), 0.0) + 1.0

    def probabilities(self, key: InfoKey, legal: Tuple[int, ...]) -> np.ndarray:
        counts = np.array([self.counts.get((key, a), 0.0) for a in legal])
        total = counts.sum()
        if total <= 0.0:
            return np.full(len(legal), 1.0 / len(legal))
        return counts / total


class NFSPChoice(NamedTuple):
    action: int
    best_response: bool


def nfsp_step(br_learner: QLearningAgent, avg_policy: AverageStrategyTable, key: InfoKey,
              legal: Tuple[int, ...], eta: float, rng: np.random.Generator) -> NFSPChoice:
    """
    Pick an action in NFSP fashion.

    With probability η act ε-greedily from the best-response learner and record
    the choice in the average strategy; otherwise sample the average strategy.
    At η = 1 no mixing draw is made, so the rng stream matches plain Q-Learning.
    """
    if eta >= 1.0 or rng.random() < eta:
        action = select_action_egreedy(br_learner.table, key, legal, br_learner.epsilon, rng)
        avg_policy.record(key, action)
        return NFSPChoice(action, True)
    probs = avg_policy.probabilities(key, legal)
    return NFSPChoice(legal[int(rng.choice(len(legal), p=probs))], False)


class NFSPAgent(Learner):
    """Best-response learner trained on every decision; average strategy fed by best-response moves."""

    exposes_values = True

    def __init__(self, config: AgentConfig):
        self.config = config
        self.best_response = QLearningAgent(config)
        self.average = AverageStrategyTable()

    def begin_episode(self, episode: int) -> None:
        self.best_response.begin_episode(episode)

    def act(self, key, legal, rng) -> Decision:
        choice = nfsp_step(self.best_response, self.average, key, legal, self.config.eta, rng)
        return Decision(choice.action, float(self.action_probabilities(key, legal)[legal.index(choice.action)]))

    def learn(self, player, steps, ret, episode) -> None:
        self.best_response.learn(player, steps, ret, episode)

    def action_probabilities(self, key, legal) -> np.ndarray:
        eta = self.config.eta
        return eta * self.best_response.action_probabilities(key, legal) + (1.0 - eta) * self.average.probabilities(key, legal)

    def greedy_action(self, key, legal) -> int:
        return self.best_response.greedy_action(key, legal)

    def q_gap(self, key, legal):
        return self.best_response.q_gap(key, legal)

    def freeze(self):
        self.best_response.freeze()
        return super().freeze()
