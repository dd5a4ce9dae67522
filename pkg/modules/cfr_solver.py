"""
CFR Solver Module
Vanilla counterfactual regret minimization over the full game tree, with regret
matching, linearly weighted average strategies and exploitability checkpoints.
"""
import sys
import os
sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from typing import List, Optional, Tuple

import numpy as np
from tqdm import tqdm

from config import Config
from modules.game_core import CHANCE, TERMINAL, PolicyProfile, build_tree, resolve_game
from modules.metrics import exploitability
from modules.perturb import as_ruleset


def regret_matching(regrets: np.ndarray) -> np.ndarray:
    """Positive regrets normalized; uniform when none is positive."""
    positive = np.maximum(regrets, 0.0)
    total = positive.sum()
    if total > 0.0:
        return positive / total
    return np.full(len(regrets), 1.0 / len(regrets))


class CFRSolver:
    """
    Full-tree CFR with simultaneous updates.

    Every iteration fixes the current strategies from the accumulated regrets,
    walks the tree once, and adds the iteration-weighted own-reach strategy to
    the average.
    """

    def __init__(self, game, rules=None, checkpoint_every: int = Config.CFR_CHECKPOINT):
        self.game = resolve_game(game)
        self.rules = as_ruleset(rules)
        self.tree = build_tree(self.game, self.rules)
        self.checkpoint_every = checkpoint_every
        self.regrets = [np.zeros(len(a)) for a in self.tree.infoset_actions]
        self.strategy_sum = [np.zeros(len(a)) for a in self.tree.infoset_actions]
        self.iteration = 0
        self.checkpoints: List[Tuple[int, float]] = []
        self._current: List[np.ndarray] = []

    def _walk(self, node: int, r0: float, r1: float, pc: float) -> Tuple[float, float]:
        tree = self.tree
        kind = tree.kind[node]
        if kind == TERMINAL:
            return tree.utility[node]
        kids = tree.children[node]
        if kind == CHANCE:
            v0 = v1 = 0.0
            for p, child in zip(tree.probs[node], kids):
                c0, c1 = self._walk(child, r0, r1, pc * p)
                v0 += p * c0
                v1 += p * c1
            return v0, v1

        idx = tree.infoset[node]
        sigma = self._current[idx]
        values = np.empty(len(kids))
        v0 = v1 = 0.0
        for k, child in enumerate(kids):
            s = sigma[k]
            if kind == 0:
                c0, c1 = self._walk(child, r0 * s, r1, pc)
            else:
                c0, c1 = self._walk(child, r0, r1 * s, pc)
            values[k] = c0 if kind == 0 else c1
            v0 += s * c0
            v1 += s * c1

        own_reach, other_reach = (r0, r1) if kind == 0 else (r1, r0)
        node_value = v0 if kind == 0 else v1
        self.regrets[idx] += pc * other_reach * (values - node_value)
        self.strategy_sum[idx] += self.iteration * own_reach * sigma
        return v0, v1

    def iterate(self) -> Tuple[float, float]:
        """Run one iteration; returns the root values under the current strategies."""
        self.iteration += 1
        self._current = [regret_matching(r) for r in self.regrets]
        values = self._walk(0, 1.0, 1.0, 1.0)
        if self.checkpoint_every and self.iteration % self.checkpoint_every == 0 and self.game.zero_sum:
            self.checkpoints.append((self.iteration, exploitability(self.game, self.average_profile(), self.rules)))
        return values

    def solve(self, iterations: int, progress: bool = False) -> PolicyProfile:
        for _ in tqdm(range(iterations), desc=f"CFR {self.game.name}", disable=not progress, leave=False):
            self.iterate()
        return self.average_profile()

    def average_profile(self) -> PolicyProfile:
        """Normalized strategy sums; sets never reached with positive own reach are uniform."""
        profile: PolicyProfile = {}
        for key, actions, total in zip(self.tree.infoset_keys, self.tree.infoset_actions, self.strategy_sum):
            mass = total.sum()
            probs = total / mass if mass > 0.0 else np.full(len(actions), 1.0 / len(actions))
            profile[key] = {a: float(p) for a, p in zip(actions, probs)}
        return profile


def cfr_solve(game, iterations: Optional[int] = None, rules=None,
              checkpoint_every: int = Config.CFR_CHECKPOINT, progress: bool = False) -> PolicyProfile:
    """
    Average CFR strategy of an enumerable game.

    Args:
        game: GameSpec or registered name
        iterations: Iteration budget (defaults to the per-game budget in Config)
        rules: Optional mask rules shaping the tree that is solved
        checkpoint_every: Exploitability checkpoint spacing (0 disables)
        progress: Show a tqdm bar

    Returns:
        Average strategy profile over every information set
    """
    game = resolve_game(game)
    if iterations is None:
        iterations = Config.cfr_iterations(game.name)
    return CFRSolver(game, rules, checkpoint_every).solve(iterations, progress)


if __name__ == "__main__":
    from modules.game_core import expected_values

    solver = CFRSolver("kuhn")
    profile = solver.solve(2_000)
    print(f"♠️  Kuhn CFR value for P0: {expected_values('kuhn', profile)[0]:+.4f}")
    for it, expl in solver.checkpoints:
        print(f"   iteration {it}: exploitability {expl:.5f}")
