"""
Policy Gradient Module
Softmax preference tables with REINFORCE (running baseline) and tabular PPO
(clipped surrogate with an entropy bonus).
"""
import sys
import os
sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from typing import Dict, List, NamedTuple, Sequence, Tuple

import numpy as np
from scipy.special import softmax

from modules.game_core import GameSpec, InfoKey
from modules.learner import AgentConfig, Decision, Learner, Step


class PreferenceTable:
    """θ(s, a) keyed by (InfoKey, action id); the policy is a softmax over the legal set."""

    def __init__(self):
        self.prefs: Dict[Tuple[InfoKey, int], float] = {}

    def __len__(self) -> int:
        return len(self.prefs)

    def get(self, key: InfoKey, action: int) -> float:
        return self.prefs.get((key, action), 0.0)

    def logits(self, key: InfoKey, legal: Sequence[int]) -> np.ndarray:
        return np.array([self.prefs.get((key, a), 0.0) for a in legal])

    def probabilities(self, key: InfoKey, legal: Sequence[int]) -> np.ndarray:
        """Softmax over the legal set only; masked actions never enter the normalization."""
        return softmax(self.logits(key, legal))

    def add(self, key: InfoKey, legal: Sequence[int], delta: np.ndarray) -> None:
        for action, d in zip(legal, delta):
            self.prefs[(key, action)] = self.prefs.get((key, action), 0.0) + float(d)

    def dump(self, game: GameSpec) -> str:
        rows = sorted((str(key), game.action_labels[a], v) for (key, a), v in self.prefs.items())
        return "\n".join(f"{key}\t{label}\t{value!r}" for key, label, value in rows)


def log_softmax_gradient(logits: np.ndarray, index: int) -> np.ndarray:
    """∂ log softmax(θ)[index] / ∂θ = onehot(index) - softmax(θ)."""
    grad = -softmax(logits)
    grad[index] += 1.0
    return grad


def reinforce_update(prefs: PreferenceTable, trajectory: Sequence[Step], ret: float,
                     baseline: float, lr: float) -> PreferenceTable:
    """
    One REINFORCE step per decision.

    Args:
        prefs: Preference table to update in place
        trajectory: One player's decisions in the episode
        ret: Terminal return G
        baseline: Running baseline b
        lr: Step size

    Returns:
        The updated table
    """
    advantage = ret - baseline
    if advantage == 0.0:
        return prefs
    for step in trajectory:
        grad = log_softmax_gradient(prefs.logits(step.key, step.legal), step.legal.index(step.action))
        prefs.add(step.key, step.legal, lr * advantage * grad)
    return prefs


def clipped_surrogate(ratio: float, advantage: float, clip: float = 0.2) -> float:
    """min(r·A, clip(r, 1-ε, 1+ε)·A)."""
    return min(ratio * advantage, float(np.clip(ratio, 1.0 - clip, 1.0 + clip)) * advantage)


class PPOSample(NamedTuple):
    key: InfoKey
    action: int
    legal: Tuple[int, ...]
    advantage: float


def ppo_tabular_update(prefs: PreferenceTable, batch: Sequence[PPOSample], old_probs: Sequence[float],
                       lr: float = 0.01, clip: float = 0.2, entropy_coef: float = 0.01) -> PreferenceTable:
    """
    One ascent step on the clipped surrogate plus entropy bonus, summed over the batch.

    The gradient of a sample vanishes where the clip is active
    (A > 0 and r > 1+ε, or A < 0 and r < 1-ε).
    """
    # a key seen under different legal sets (mask on and off) keeps one sum per set
    grads: Dict[Tuple[InfoKey, Tuple[int, ...]], np.ndarray] = {}
    for sample, old in zip(batch, old_probs):
        probs = prefs.probabilities(sample.key, sample.legal)
        index = sample.legal.index(sample.action)
        ratio = probs[index] / old
        adv = sample.advantage
        grad = np.zeros(len(sample.legal))
        if not ((adv > 0 and ratio > 1.0 + clip) or (adv < 0 and ratio < 1.0 - clip)):
            onehot = np.zeros(len(sample.legal))
            onehot[index] = 1.0
            grad += adv * ratio * (onehot - probs)
        if entropy_coef:
            log_probs = np.log(probs)
            h = -float(np.dot(probs, log_probs))
            grad += entropy_coef * (-probs * (log_probs + h))
        slot = (sample.key, sample.legal)
        grads[slot] = grads.get(slot, 0.0) + grad

    for (key, legal), total in grads.items():
        prefs.add(key, legal, lr * total)
    return prefs


class _SoftmaxLearner(Learner):
    def __init__(self, config: AgentConfig):
        self.config = config
        self.prefs = PreferenceTable()
        self.baselines = {0: 0.0, 1: 0.0}

    def act(self, key, legal, rng: np.random.Generator) -> Decision:
        if len(legal) == 1:
            return Decision(legal[0], 1.0)
        probs = self.prefs.probabilities(key, legal)
        index = int(rng.choice(len(legal), p=probs))
        return Decision(legal[index], float(probs[index]))

    def action_probabilities(self, key, legal) -> np.ndarray:
        return self.prefs.probabilities(key, legal)

    def _advantage(self, player: int, ret: float) -> float:
        b = self.baselines[player]
        self.baselines[player] = b + self.config.baseline_rate * (ret - b)
        return ret - b


class ReinforceAgent(_SoftmaxLearner):
    """REINFORCE with a per-seat running baseline."""

    def learn(self, player, steps, ret, episode) -> None:
        baseline = self.baselines[player]
        reinforce_update(self.prefs, steps, ret, baseline, self.config.lr)
        self._advantage(player, ret)


class PPOAgent(_SoftmaxLearner):
    """Tabular PPO: rollouts are buffered, then several clipped epochs run per batch."""

    def __init__(self, config: AgentConfig):
        super().__init__(config)
        self.samples: List[PPOSample] = []
        self.old_probs: List[float] = []
        self.batch_episodes = set()

    def begin_episode(self, episode: int) -> None:
        if len(self.batch_episodes) >= self.config.ppo_batch_episodes:
            self.flush()

    def learn(self, player, steps, ret, episode) -> None:
        advantage = self._advantage(player, ret)
        for step in steps:
            if len(step.legal) > 1:
                self.samples.append(PPOSample(step.key, step.action, step.legal, advantage))
                self.old_probs.append(step.prob)
        self.batch_episodes.add(episode)

    def flush(self) -> None:
        """Run the PPO epochs over the buffered batch and clear it."""
        if not self.samples:
            self.batch_episodes = set()
            return
        for _ in range(self.config.ppo_epochs):
            ppo_tabular_update(self.prefs, self.samples, self.old_probs, self.config.lr,
                               self.config.clip, self.config.entropy_coef)
        self.samples, self.old_probs = [], []
        self.batch_episodes = set()

    def end_match(self) -> None:
        self.flush()

    def freeze(self):
        # trailing episodes train before learning stops
        if not self.frozen:
            self.flush()
        return super().freeze()
