"""
Agent Zoo Module
Builds learners from an AgentConfig, and caches the CFR equilibrium profiles
used by the frozen-solver and fixed-opponent conditions.
"""
import sys
import os
sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from functools import lru_cache
from typing import Optional

import numpy as np

from config import Config
from modules.cfr_solver import cfr_solve
from modules.dqn_agent import DQNAgent
from modules.errors import InvalidConfigError
from modules.game_core import GameSpec, PolicyProfile
from modules.learner import AgentConfig, Learner, ProfileAgent
from modules.nfsp_agent import NFSPAgent
from modules.policy_gradient import PPOAgent, ReinforceAgent
from modules.tabular_agents import EntropyQLAgent, QLearningAgent, SarsaAgent

TABULAR = {
    "ql": QLearningAgent,
    "sarsa": SarsaAgent,
    "entropy_ql": EntropyQLAgent,
    "reinforce": ReinforceAgent,
    "ppo": PPOAgent,
    "nfsp": NFSPAgent,
}


@lru_cache(maxsize=None)
def nash_profile(game_name: str, iterations: Optional[int] = None) -> PolicyProfile:
    """CFR average profile of a game, solved once per process."""
    return cfr_solve(game_name, iterations or Config.cfr_iterations(game_name))


def build_agent(game: GameSpec, config: AgentConfig, init_seed: int = 0,
                profile: Optional[PolicyProfile] = None) -> Learner:
    """
    Create a fresh learner.

    Args:
        game: The game the learner will play
        config: Algorithm id and hyperparameters
        init_seed: Seed for parameter initialization (DQN)
        profile: Fixed profile for the "profile" algorithm

    Returns:
        A Learner instance
    """
    if config.algorithm in TABULAR:
        return TABULAR[config.algorithm](config)
    if config.algorithm == "dqn":
        return DQNAgent(config, game, init_seed)
    if config.algorithm == "cfr":
        return ProfileAgent(nash_profile(game.name, config.cfr_iterations))
    if config.algorithm == "profile":
        if profile is None:
            raise InvalidConfigError("the profile algorithm needs a profile")
        return ProfileAgent(profile)
    raise InvalidConfigError(f"no builder for algorithm {config.algorithm!r}")


def init_seed_from(seed_sequence: np.random.SeedSequence) -> int:
    return int(seed_sequence.generate_state(1)[0])
