"""
Liar's Dice Module
Two-player Liar's Dice with one or two dice per player.
"""
import sys
import os
sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from collections import Counter
from itertools import product
from typing import List, Tuple

from modules.game_core import TERMINAL, GameSpec, HistoryState, InfoKey, register_game


class LiarsDice(GameSpec):
    """
    Each player rolls their dice privately. Players alternate making claims
    "at least `count` dice show `face`" that strictly increase in
    (count, face) order, or challenge the standing claim. The opening move
    must be a claim. On a challenge the claim is checked against all dice:
    if it holds the challenger loses, otherwise the claimer loses.
    """

    def __init__(self, dice: int = 1, faces: int = 6):
        self.dice = dice
        self.faces = faces
        self.max_count = 2 * dice
        self.num_claims = self.max_count * faces
        self.challenge = self.num_claims
        self.name = "liars_dice" if dice == 1 else f"liars_dice_{dice}d"
        self.action_labels = tuple(
            f"{count}x{face}" for count in range(1, self.max_count + 1) for face in range(1, faces + 1)
        ) + ("challenge",)
        self.action_codes = "".join(chr(ord("a") + i) for i in range(self.num_claims)) + "!"
        self.reward_bounds = (-1.0, 1.0)
        self.nash_reference_value = -0.076 if dice == 1 else None
        self.enumerable = dice == 1
        self.rolls = self._roll_distribution()
        self.private_labels = tuple(self._label(roll) for roll, _ in self.rolls)
        self.public_alphabet = self.action_codes[:-1]
        self.max_public_length = self.num_claims

    def _roll_distribution(self) -> List[Tuple[Tuple[int, ...], float]]:
        counts = Counter(tuple(sorted(r)) for r in product(range(1, self.faces + 1), repeat=self.dice))
        total = self.faces ** self.dice
        return [(roll, n / total) for roll, n in sorted(counts.items())]

    @staticmethod
    def _label(roll: Tuple[int, ...]) -> str:
        return "".join(str(d) for d in roll)

    def claim(self, action: int) -> Tuple[int, int]:
        """(count, face) of a claim action."""
        count, face = divmod(action, self.faces)
        return count + 1, face + 1

    def count_info_sets(self) -> int:
        """Every strictly increasing claim sequence is one decision, times private rolls."""
        return (2 ** self.num_claims) * len(self.rolls)

    def initial_states(self):
        return [
            (self.make_state((mine, theirs), ()), p0 * p1)
            for (mine, p0), (theirs, p1) in product(self.rolls, repeat=2)
        ]

    def status(self, chance, actions):
        if not actions or actions[-1] != self.challenge:
            return len(actions) % 2, None

        challenger = (len(actions) - 1) % 2
        count, face = self.claim(actions[-2])
        shown = sum(1 for d in chance[0] + chance[1] if d == face)
        loser = challenger if shown >= count else 1 - challenger
        u0 = -1.0 if loser == 0 else 1.0
        return TERMINAL, (u0, -u0)

    def legal_actions(self, state: HistoryState) -> Tuple[int, ...]:
        actions = state.action_sequence
        if not actions:
            return tuple(range(self.num_claims))
        return tuple(range(actions[-1] + 1, self.num_claims)) + (self.challenge,)

    def info_key(self, state: HistoryState) -> InfoKey:
        player = state.to_move
        return InfoKey(player, self._label(state.chance_assignment[player]), self.public_string(state))


register_game("liars_dice")(lambda: LiarsDice(dice=1))
register_game("liars_dice_2d")(lambda: LiarsDice(dice=2))


if __name__ == "__main__":
    for dice in (1, 2):
        game = LiarsDice(dice=dice)
        print(f"🎲 {game.name}: {game.num_claims} claims, {game.count_info_sets():,} information sets")
