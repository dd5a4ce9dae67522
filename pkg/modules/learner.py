"""
Learner Module
Common interface every self-play learner implements, plus the agent configuration.
"""
import sys
import os
sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from abc import ABC, abstractmethod
from dataclasses import dataclass, replace
from typing import Dict, NamedTuple, Optional, Sequence, Tuple

import numpy as np
from scipy.stats import entropy

from config import Config
from modules.errors import InvalidConfigError
from modules.game_core import InfoKey, PolicyProfile, restrict_distribution

ALGORITHMS = ("ql", "sarsa", "entropy_ql", "reinforce", "ppo", "nfsp", "dqn", "cfr", "profile")


class Step(NamedTuple):
    """One decision of one player: key, chosen action, the legal set it was chosen from, its probability."""

    key: InfoKey
    action: int
    legal: Tuple[int, ...]
    prob: float


@dataclass(frozen=True)
class AgentConfig:
    """Hyperparameters of one learner."""

    algorithm: str = "ql"
    alpha: float = Config.ALPHA
    epsilon: float = Config.EPSILON
    epsilon_final: Optional[float] = None
    epsilon_decay_episodes: int = 0
    tau: float = 0.0
    lr: float = Config.PG_LEARNING_RATE
    baseline_rate: float = 0.01
    clip: float = Config.PPO_CLIP
    entropy_coef: float = Config.PPO_ENTROPY_COEF
    ppo_epochs: int = 4
    ppo_batch_episodes: int = 8
    eta: float = Config.NFSP_ETA
    hidden: int = Config.DQN_HIDDEN
    dqn_lr: float = Config.DQN_LEARNING_RATE
    buffer_capacity: int = Config.DQN_BUFFER
    batch_size: int = Config.DQN_BATCH
    target_update: int = Config.DQN_TARGET_UPDATE
    cfr_iterations: Optional[int] = None

    def __post_init__(self):
        if self.algorithm not in ALGORITHMS:
            raise InvalidConfigError(f"unknown algorithm {self.algorithm!r}")
        if self.alpha < 0:
            raise InvalidConfigError("alpha must be non-negative")
        if not 0.0 <= self.epsilon <= 1.0:
            raise InvalidConfigError("epsilon must lie in [0, 1]")
        if self.epsilon_final is not None and not 0.0 <= self.epsilon_final <= 1.0:
            raise InvalidConfigError("epsilon_final must lie in [0, 1]")
        if self.tau < 0:
            raise InvalidConfigError("tau must be non-negative")
        if not 0.0 <= self.eta <= 1.0:
            raise InvalidConfigError("eta must lie in [0, 1]")

    def epsilon_at(self, episode: int) -> float:
        """Linear decay from epsilon to epsilon_final over epsilon_decay_episodes; constant otherwise."""
        if self.epsilon_final is None or self.epsilon_decay_episodes <= 0:
            return self.epsilon
        frac = min(1.0, episode / self.epsilon_decay_episodes)
        return self.epsilon + frac * (self.epsilon_final - self.epsilon)

    def with_updates(self, **changes) -> "AgentConfig":
        return replace(self, **changes)


class Decision(NamedTuple):
    action: int
    prob: float


class Learner(ABC):
    """
    A policy that acts at information keys and learns from finished episodes.

    One instance may control both seats (shared self-play); the player index
    passed to `end_episode` tells it which seat the trajectory belongs to.
    """

    frozen: bool = False
    exposes_values: bool = False

    def begin_episode(self, episode: int) -> None:
        """Hook called before every episode."""

    def end_match(self) -> None:
        """Hook called once after the last episode of a run."""

    @abstractmethod
    def act(self, key: InfoKey, legal: Tuple[int, ...], rng: np.random.Generator) -> Decision:
        """Choose an action from the (already masked) legal set."""

    def end_episode(self, player: int, steps: Sequence[Step], ret: float, episode: int) -> None:
        """Learn from one player's decisions and terminal return. No-op once frozen."""
        if not self.frozen and steps:
            self.learn(player, steps, ret, episode)

    def learn(self, player: int, steps: Sequence[Step], ret: float, episode: int) -> None:
        """Update rule; learners that never learn keep the default."""

    @abstractmethod
    def action_probabilities(self, key: InfoKey, legal: Tuple[int, ...]) -> np.ndarray:
        """Current behaviour distribution over `legal`."""

    def greedy_action(self, key: InfoKey, legal: Tuple[int, ...]) -> int:
        probs = self.action_probabilities(key, legal)
        return legal[int(np.argmax(probs))]

    def q_gap(self, key: InfoKey, legal: Tuple[int, ...]) -> Optional[float]:
        """Gap between the two best action values, for value-based learners."""
        return None

    def policy_entropy(self, key: InfoKey, legal: Tuple[int, ...]) -> float:
        return float(entropy(self.action_probabilities(key, legal)))

    def freeze(self) -> "Learner":
        self.frozen = True
        return self

    def to_profile(self, keys: Dict[InfoKey, Tuple[int, ...]]) -> PolicyProfile:
        """Behaviour profile at the given keys (key -> legal actions)."""
        return {
            key: dict(zip(legal, map(float, self.action_probabilities(key, legal))))
            for key, legal in keys.items()
        }


class ProfileAgent(Learner):
    """Plays a fixed profile; masked actions are renormalized away. Never learns."""

    frozen = True

    def __init__(self, profile: PolicyProfile):
        self.profile = profile

    def action_probabilities(self, key: InfoKey, legal: Tuple[int, ...]) -> np.ndarray:
        dist = self.profile.get(key, {})
        return np.asarray(restrict_distribution(dist, legal))

    def act(self, key: InfoKey, legal: Tuple[int, ...], rng: np.random.Generator) -> Decision:
        if len(legal) == 1:
            return Decision(legal[0], 1.0)
        probs = self.action_probabilities(key, legal)
        index = int(rng.choice(len(legal), p=probs))
        return Decision(legal[index], float(probs[index]))


def freeze(agent: Learner) -> Learner:
    """Stop all further learning; action selection is unchanged."""
    return agent.freeze()
