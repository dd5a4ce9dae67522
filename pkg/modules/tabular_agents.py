"""
Tabular Agents Module
Action-value tables and the value-based tabular learners: Q-Learning with
Monte-Carlo terminal updates, SARSA and entropy-regularised Q-Learning.
"""
import sys
import os
sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

import copy
import math
from typing import Dict, Iterable, List, NamedTuple, Optional, Sequence, Tuple

import numpy as np
from scipy.stats import entropy

from modules.errors import InvalidConfigError
from modules.game_core import GameSpec, InfoKey
from modules.learner import AgentConfig, Decision, Learner, Step


class ValueTable:
    """Q(s, a) keyed by (InfoKey, action id); unseen pairs read as 0."""

    def __init__(self):
        self.values: Dict[Tuple[InfoKey, int], float] = {}

    def __len__(self) -> int:
        return len(self.values)

    def __eq__(self, other) -> bool:
        return isinstance(other, ValueTable) and self.values == other.values

    def get(self, key: InfoKey, action: int) -> float:
        return self.values.get((key, action), 0.0)

    def set(self, key: InfoKey, action: int, value: float) -> None:
        if not math.isfinite(value):
            raise ValueError(f"non-finite value for {key}/{action}")
        self.values[(key, action)] = value

    def row(self, key: InfoKey, legal: Sequence[int]) -> List[float]:
        return [self.values.get((key, a), 0.0) for a in legal]

    def greedy(self, key: InfoKey, legal: Sequence[int]) -> int:
        """Argmax over legal actions; ties go to the lowest action id."""
        best_action, best_value = legal[0], self.values.get((key, legal[0]), 0.0)
        for action in legal[1:]:
            value = self.values.get((key, action), 0.0)
            if value > best_value:
                best_action, best_value = action, value
        return best_action

    def copy(self) -> "ValueTable":
        return copy.deepcopy(self)

    def dump(self, game: GameSpec) -> str:
        """Sorted text form: one "key<TAB>label<TAB>value" line per entry."""
        rows = sorted(
            (str(key), game.action_labels[action], value) for (key, action), value in self.values.items()
        )
        return "\n".join(f"{key}\t{label}\t{value!r}" for key, label, value in rows)

    @classmethod
    def load(cls, game: GameSpec, text: str) -> "ValueTable":
        table = cls()
        for line in text.splitlines():
            if not line.strip():
                continue
            key, label, value = line.split("\t")
            table.set(InfoKey.parse(key), game.action_id(label), float(value))
        return table


def select_action_egreedy(table: ValueTable, key: InfoKey, legal: Tuple[int, ...],
                          epsilon: float, rng: np.random.Generator) -> int:
    """
    ε-greedy choice over the effective legal set.

    Args:
        table: Action values
        key: Information key of the acting player
        legal: Effective legal actions (ascending)
        epsilon: Exploration rate
        rng: Policy stream

    Returns:
        Chosen action id
    """
    if len(legal) == 1:
        return legal[0]
    if epsilon > 0.0 and rng.random() < epsilon:
        return legal[int(rng.integers(len(legal)))]
    return table.greedy(key, legal)


def egreedy_probabilities(table: ValueTable, key: InfoKey, legal: Tuple[int, ...], epsilon: float) -> np.ndarray:
    n = len(legal)
    if n == 1:
        return np.ones(1)
    probs = np.full(n, epsilon / n)
    probs[legal.index(table.greedy(key, legal))] += 1.0 - epsilon
    return probs


def mc_terminal_update(table: ValueTable, trajectory: Iterable, ret: float, alpha: float) -> ValueTable:
    """Q <- Q + α(G - Q) for every (key, action) visited, in visit order."""
    for step in trajectory:
        key, action = step[0], step[1]
        q = table.get(key, action)
        table.set(key, action, q + alpha * (ret - q))
    return table


class SarsaTransition(NamedTuple):
    key: InfoKey
    action: int
    reward: float
    next_key: Optional[InfoKey]
    next_action: Optional[int]


def sarsa_transitions(steps: Sequence[Step], ret: float) -> List[SarsaTransition]:
    """Chain one player's decisions into on-policy transitions; only the last carries the return."""
    transitions = []
    for i, step in enumerate(steps):
        if i + 1 < len(steps):
            nxt = steps[i + 1]
            transitions.append(SarsaTransition(step.key, step.action, 0.0, nxt.key, nxt.action))
        else:
            transitions.append(SarsaTransition(step.key, step.action, ret, None, None))
    return transitions


def sarsa_update(table: ValueTable, transitions: Sequence[SarsaTransition], alpha: float) -> ValueTable:
    """Undiscounted SARSA backup, in visit order."""
    for t in transitions:
        bootstrap = table.get(t.next_key, t.next_action) if t.next_key is not None else 0.0
        q = table.get(t.key, t.action)
        table.set(t.key, t.action, q + alpha * (t.reward + bootstrap - q))
    return table


def entropy_ql_update(table: ValueTable, trajectory: Sequence[Step], ret: float, alpha: float,
                      tau: float, epsilon: float = 0.15) -> ValueTable:
    """Monte-Carlo update toward G + τ·H(π_s), π_s being the current ε-greedy policy at s."""
    if tau < 0:
        raise InvalidConfigError("entropy temperature tau must be non-negative")
    for step in trajectory:
        bonus = 0.0
        if tau > 0.0:
            bonus = tau * float(entropy(egreedy_probabilities(table, step.key, step.legal, epsilon)))
        q = table.get(step.key, step.action)
        table.set(step.key, step.action, q + alpha * (ret + bonus - q))
    return table


class QLearningAgent(Learner):
    """ε-greedy tabular Q-Learning with Monte-Carlo terminal updates."""

    exposes_values = True

    def __init__(self, config: AgentConfig):
        self.config = config
        self.table = ValueTable()
        self.epsilon = config.epsilon

    def begin_episode(self, episode: int) -> None:
        if not self.frozen:
            self.epsilon = self.config.epsilon_at(episode)

    def act(self, key: InfoKey, legal: Tuple[int, ...], rng: np.random.Generator) -> Decision:
        if len(legal) == 1:
            return Decision(legal[0], 1.0)
        action = select_action_egreedy(self.table, key, legal, self.epsilon, rng)
        share = self.epsilon / len(legal)
        greedy = action == self.table.greedy(key, legal)
        return Decision(action, share + (1.0 - self.epsilon if greedy else 0.0))

    def learn(self, player, steps, ret, episode) -> None:
        mc_terminal_update(self.table, steps, ret, self.config.alpha)

    def action_probabilities(self, key, legal) -> np.ndarray:
        return egreedy_probabilities(self.table, key, legal, self.epsilon)

    def greedy_action(self, key, legal) -> int:
        return self.table.greedy(key, legal)

    def q_gap(self, key, legal) -> Optional[float]:
        if len(legal) < 2:
            return None
        top = sorted(self.table.row(key, legal), reverse=True)
        return top[0] - top[1]


class SarsaAgent(QLearningAgent):
    """On-policy tabular SARSA over each player's own decision chain."""

    def learn(self, player, steps, ret, episode) -> None:
        sarsa_update(self.table, sarsa_transitions(steps, ret), self.config.alpha)


class EntropyQLAgent(QLearningAgent):
    """Q-Learning whose target adds an entropy bonus τ·H(π_s)."""

    def learn(self, player, steps, ret, episode) -> None:
        entropy_ql_update(self.table, steps, ret, self.config.alpha, self.config.tau, self.epsilon)


if __name__ == "__main__":
    table = ValueTable()
    key = InfoKey(0, "K", "")
    mc_terminal_update(table, [(key, 1)], 1.0, 0.1)
    print(f"🧮 Q after one update: {table.get(key, 1)}")
    rng = np.random.default_rng(0)
    print(f"🎯 ε-greedy pick: {select_action_egreedy(table, key, (0, 1), 0.15, rng)}")
