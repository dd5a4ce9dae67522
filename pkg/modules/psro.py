"""
PSRO Module
Population-based opponent for P1: frozen Q-Learning snapshots plus one oracle
in training, sampled uniformly each episode.
"""
import sys
import os
sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

import copy
from collections import deque
from typing import List

import numpy as np

from config import Config
from modules.errors import InvalidConfigError
from modules.learner import AgentConfig, Decision, Learner
from modules.tabular_agents import QLearningAgent


class PopulationOpponent(Learner):
    """
    Seat-1 learner backed by a population.

    The oracle is an approximate best response (tabular QL) trained only on the
    episodes it plays. Every `oracle_episodes` episodes a frozen copy of the
    oracle joins the population (oldest snapshot dropped beyond the size cap) and
    training continues from that copy. With population size 1 the oracle plays
    every episode, which is separate-table self-play.
    """

    def __init__(self, config: AgentConfig, population_size: int = Config.PSRO_POPULATION,
                 oracle_episodes: int = Config.PSRO_ORACLE_EPISODES, seed=0):
        if population_size < 1:
            raise InvalidConfigError("population_size must be at least 1")
        if oracle_episodes < 1:
            raise InvalidConfigError("oracle_episodes must be at least 1")
        self.config = config
        self.population_size = population_size
        self.oracle_episodes = oracle_episodes
        self.oracle = QLearningAgent(config)
        self.snapshots = deque(maxlen=population_size - 1) if population_size > 1 else deque(maxlen=0)
        self.rng = np.random.default_rng(seed)
        self.current: Learner = self.oracle

    @property
    def members(self) -> List[Learner]:
        return list(self.snapshots) + [self.oracle]

    def begin_episode(self, episode: int) -> None:
        if episode > 0 and episode % self.oracle_episodes == 0 and self.snapshots.maxlen:
            self.snapshots.append(copy.deepcopy(self.oracle).freeze())
        self.oracle.begin_episode(episode)
        members = self.members
        self.current = members[int(self.rng.integers(len(members)))] if len(members) > 1 else self.oracle

    def act(self, key, legal, rng) -> Decision:
        return self.current.act(key, legal, rng)

    def learn(self, player, steps, ret, episode) -> None:
        if self.current is self.oracle:
            self.oracle.end_episode(player, steps, ret, episode)

    def action_probabilities(self, key, legal) -> np.ndarray:
        """Uniform mixture of the members' behaviour policies."""
        members = self.members
        return sum(m.action_probabilities(key, legal) for m in members) / len(members)

    def greedy_action(self, key, legal) -> int:
        return self.oracle.greedy_action(key, legal)

    def q_gap(self, key, legal):
        return self.oracle.q_gap(key, legal)

    def freeze(self):
        self.oracle.freeze()
        return super().freeze()


def psro_run(game, rules, population_size: int = Config.PSRO_POPULATION,
             inner_episodes: int = Config.PSRO_ORACLE_EPISODES, **match_options) -> float:
    """
    P0's post-perturbation mean reward against a population opponent.

    Args:
        game: Registered game name
        rules: Mask rules on P0
        population_size: Population cap, oracle included
        inner_episodes: Oracle training budget per added policy
        **match_options: Further MatchConfig fields (seeds, episodes, schedule, ...)

    Returns:
        Mean over seeds of P0's post-phase window mean
    """
    from modules.selfplay import MatchConfig, Sharing, run_match
    from modules.perturb import Phase

    config = MatchConfig(game=game, rules=tuple(rules), sharing=Sharing.POPULATION,
                         population_size=population_size, oracle_episodes=inner_episodes, **match_options)
    result = run_match(config)
    return float(np.mean(result.per_seed(Phase.POST)))
