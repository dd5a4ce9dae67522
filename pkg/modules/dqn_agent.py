"""
DQN Module
Two-layer Q-network over one-hot information keys, with experience replay,
a periodically synced target network and a linearly decaying ε schedule.
"""
import sys
import os
sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from collections import deque
from typing import List, NamedTuple, Optional, Sequence, Tuple

import numpy as np
import torch
import torch.nn as nn
import torch.nn.functional as F

from modules.errors import InvalidStateError
from modules.game_core import GameSpec, InfoKey
from modules.learner import AgentConfig, Decision, Learner, Step


class ObservationEncoder:
    """
    Fixed-length one-hot encoding of an information key.

    Layout: player (2) | private outcome | one slot group per public position,
    where slot 0 of a group marks "no symbol here".
    """

    def __init__(self, game: GameSpec):
        self.game = game
        self.private_index = {label: i for i, label in enumerate(game.private_labels)}
        self.alphabet = {ch: i + 1 for i, ch in enumerate(game.public_alphabet)}
        self.group = len(game.public_alphabet) + 1
        self.public_offset = 2 + len(game.private_labels)
        self.width = self.public_offset + game.max_public_length * self.group

    def encode(self, key: InfoKey) -> np.ndarray:
        vec = np.zeros(self.width, dtype=np.float32)
        vec[key.player] = 1.0
        try:
            vec[2 + self.private_index[key.private]] = 1.0
            for pos in range(self.game.max_public_length):
                slot = self.alphabet[key.public[pos]] if pos < len(key.public) else 0
                vec[self.public_offset + pos * self.group + slot] = 1.0
        except KeyError as exc:
            raise InvalidStateError(f"{key} does not fit the {self.game.name} encoding") from exc
        return vec


class MLP(nn.Module):
    """Linear -> ReLU -> Linear, one output per global action."""

    def __init__(self, in_features: int, n_actions: int, hidden: int = 64):
        super().__init__()
        self.hidden = nn.Linear(in_features, hidden)
        self.out = nn.Linear(hidden, n_actions)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return self.out(F.relu(self.hidden(x)))


class Transition(NamedTuple):
    obs: np.ndarray
    action: int
    reward: float
    next_obs: np.ndarray
    next_mask: np.ndarray  # legal actions at the next own decision
    done: bool


class ReplayBuffer:
    """Bounded FIFO of transitions with uniform sampling."""

    def __init__(self, capacity: int = 10_000):
        self.capacity = capacity
        self.memory = deque(maxlen=capacity)

    def __len__(self) -> int:
        return len(self.memory)

    def push(self, transition: Transition) -> None:
        self.memory.append(transition)

    def sample(self, batch_size: int, rng: np.random.Generator) -> List[Transition]:
        picks = rng.choice(len(self.memory), size=batch_size, replace=False)
        return [self.memory[i] for i in picks]


def td_loss(net: MLP, target_net: MLP, batch: Sequence[Transition]) -> torch.Tensor:
    """Mean squared TD error toward r + max over legal next actions of the target net (γ = 1)."""
    dtype = next(net.parameters()).dtype
    obs = torch.as_tensor(np.stack([t.obs for t in batch]), dtype=dtype)
    next_obs = torch.as_tensor(np.stack([t.next_obs for t in batch]), dtype=dtype)
    actions = torch.as_tensor([t.action for t in batch], dtype=torch.long)
    rewards = torch.as_tensor([t.reward for t in batch], dtype=dtype)
    done = torch.as_tensor([t.done for t in batch], dtype=torch.bool)
    mask = torch.as_tensor(np.stack([t.next_mask for t in batch]), dtype=torch.bool)

    q = net(obs).gather(1, actions.unsqueeze(1)).squeeze(1)
    with torch.no_grad():
        next_q = target_net(next_obs).masked_fill(~mask, float("-inf")).max(dim=1).values
        next_q = torch.where(done, torch.zeros_like(next_q), next_q)
    return F.mse_loss(q, rewards + next_q)


def dqn_step(net: MLP, target_net: MLP, buffer: ReplayBuffer, optimizer: torch.optim.Optimizer,
             batch_size: int, rng: np.random.Generator) -> Optional[float]:
    """
    One Adam step on a uniformly sampled batch.

    Returns:
        The loss before the step, or None while the buffer is smaller than a batch
    """
    if len(buffer) < batch_size:
        return None
    loss = td_loss(net, target_net, buffer.sample(batch_size, rng))
    optimizer.zero_grad()
    loss.backward()
    optimizer.step()
    return float(loss.item())


class DQNAgent(Learner):
    """ε-greedy DQN learner; one gradient step per finished trajectory."""

    exposes_values = True

    def __init__(self, config: AgentConfig, game: GameSpec, init_seed: int = 0):
        self.config = config
        self.game = game
        self.encoder = ObservationEncoder(game)
        torch.manual_seed(init_seed)
        self.net = MLP(self.encoder.width, game.num_actions, config.hidden)
        self.target_net = MLP(self.encoder.width, game.num_actions, config.hidden)
        self.target_net.load_state_dict(self.net.state_dict())
        self.optimizer = torch.optim.Adam(self.net.parameters(), lr=config.dqn_lr)
        self.buffer = ReplayBuffer(config.buffer_capacity)
        self.sample_rng = np.random.default_rng(init_seed)
        self.epsilon = config.epsilon
        self.losses: List[float] = []

    def begin_episode(self, episode: int) -> None:
        if self.frozen:
            return
        self.epsilon = self.config.epsilon_at(episode)
        if episode > 0 and episode % self.config.target_update == 0:
            self.target_net.load_state_dict(self.net.state_dict())

    def q_values(self, key: InfoKey, legal: Tuple[int, ...]) -> np.ndarray:
        with torch.no_grad():
            q = self.net(torch.as_tensor(self.encoder.encode(key)))
        return q.numpy()[list(legal)].astype(float)

    def act(self, key, legal, rng) -> Decision:
        if len(legal) == 1:
            return Decision(legal[0], 1.0)
        q = self.q_values(key, legal)
        greedy = int(np.argmax(q))
        share = self.epsilon / len(legal)
        if self.epsilon > 0.0 and rng.random() < self.epsilon:
            index = int(rng.integers(len(legal)))
        else:
            index = greedy
        return Decision(legal[index], share + (1.0 - self.epsilon if index == greedy else 0.0))

    def _mask(self, legal: Tuple[int, ...]) -> np.ndarray:
        mask = np.zeros(self.game.num_actions, dtype=bool)
        mask[list(legal)] = True
        return mask

    def learn(self, player, steps: Sequence[Step], ret, episode) -> None:
        for i, step in enumerate(steps):
            obs = self.encoder.encode(step.key)
            if i + 1 < len(steps):
                nxt = steps[i + 1]
                self.buffer.push(Transition(obs, step.action, 0.0, self.encoder.encode(nxt.key),
                                            self._mask(nxt.legal), False))
            else:
                self.buffer.push(Transition(obs, step.action, float(ret), obs,
                                            np.zeros(self.game.num_actions, dtype=bool), True))
        loss = dqn_step(self.net, self.target_net, self.buffer, self.optimizer,
                        self.config.batch_size, self.sample_rng)
        if loss is not None:
            self.losses.append(loss)

    def action_probabilities(self, key, legal) -> np.ndarray:
        n = len(legal)
        if n == 1:
            return np.ones(1)
        probs = np.full(n, self.epsilon / n)
        probs[int(np.argmax(self.q_values(key, legal)))] += 1.0 - self.epsilon
        return probs

    def greedy_action(self, key, legal) -> int:
        return legal[int(np.argmax(self.q_values(key, legal)))]

    def q_gap(self, key, legal) -> Optional[float]:
        if len(legal) < 2:
            return None
        top = np.sort(self.q_values(key, legal))[::-1]
        return float(top[0] - top[1])


if __name__ == "__main__":
    from modules.game_core import get_game

    kuhn = get_game("kuhn")
    agent = DQNAgent(AgentConfig(algorithm="dqn"), kuhn, init_seed=0)
    key = InfoKey(0, "K", "")
    print(f"🧠 encoder width {agent.encoder.width}, Q(K, root) = {agent.q_values(key, (0, 1))}")
