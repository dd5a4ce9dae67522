"""
Matrix Games Module
Matching Pennies, repeated Coordination, the Iterated Prisoner's Dilemma and
a single-round ultimatum Negotiation.
"""
import sys
import os
sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from typing import Tuple

from modules.game_core import CHANCE, TERMINAL, GameSpec, HistoryState, InfoKey, register_game

HEADS, TAILS = 0, 1
COOPERATE, DEFECT = 0, 1


@register_game("matching_pennies")
class MatchingPennies(GameSpec):
    """P0 is the matcher and wins on a match. P1 moves without seeing P0's coin."""

    name = "matching_pennies"
    action_labels = ("heads", "tails")
    action_codes = "ht"
    reward_bounds = (-1.0, 1.0)
    nash_reference_value = 0.0

    def initial_states(self):
        return [(self.make_state((), ()), 1.0)]

    def status(self, chance, actions):
        if len(actions) < 2:
            return len(actions), None
        u0 = 1.0 if actions[0] == actions[1] else -1.0
        return TERMINAL, (u0, -u0)

    def legal_actions(self, state: HistoryState) -> Tuple[int, ...]:
        return (HEADS, TAILS)

    def public_string(self, state: HistoryState) -> str:
        return ""

    def info_key(self, state: HistoryState) -> InfoKey:
        return InfoKey(state.to_move, "", "")


class _SimultaneousRounds(GameSpec):
    """Shared bookkeeping for games of repeated simultaneous rounds (P0 moves, then P1 blind)."""

    rounds = 10
    enumerable = False
    perfect_recall = False
    zero_sum = False

    def legal_actions(self, state: HistoryState) -> Tuple[int, ...]:
        return tuple(range(self.num_actions))

    def _round_pairs(self, actions):
        return [(actions[2 * k], actions[2 * k + 1]) for k in range(len(actions) // 2)]


@register_game("coordination")
class Coordination(_SimultaneousRounds):
    """
    Ten rounds; each round a target is revealed to both players, then both
    pick an action. The team scores 1 for every round where both hit the
    target, and both players receive the episode total.
    """

    name = "coordination"
    action_labels = ("red", "green", "blue")
    action_codes = "rgb"
    reward_bounds = (0.0, 10.0)
    private_labels = ("r", "g", "b")

    def initial_states(self):
        return [(self.make_state((target,), ()), 1.0 / 3.0) for target in range(3)]

    def status(self, chance, actions):
        n = len(actions)
        if n % 2 == 1:
            return 1, None
        round_index = n // 2
        if round_index == self.rounds:
            score = float(sum(
                1 for target, (a0, a1) in zip(chance, self._round_pairs(actions)) if a0 == a1 == target
            ))
            return TERMINAL, (score, score)
        if len(chance) == round_index:
            return CHANCE, None
        return 0, None

    def chance_outcomes(self, state: HistoryState):
        return [(target, 1.0 / 3.0) for target in range(3)]

    def public_string(self, state: HistoryState) -> str:
        return ""

    def info_key(self, state: HistoryState) -> InfoKey:
        target = state.chance_assignment[len(state.action_sequence) // 2]
        return InfoKey(state.to_move, self.action_codes[target], "")


@register_game("ipd")
class IteratedPrisonersDilemma(_SimultaneousRounds):
    """Ten rounds with payoffs (T, R, P, S) = (5, 3, 1, 0); reward is the per-round mean."""

    name = "ipd"
    action_labels = ("cooperate", "defect")
    action_codes = "cd"
    reward_bounds = (0.0, 5.0)
    public_alphabet = "cd"
    max_public_length = 2

    PAYOFFS = {
        (COOPERATE, COOPERATE): (3.0, 3.0),
        (COOPERATE, DEFECT): (0.0, 5.0),
        (DEFECT, COOPERATE): (5.0, 0.0),
        (DEFECT, DEFECT): (1.0, 1.0),
    }

    def initial_states(self):
        return [(self.make_state((), ()), 1.0)]

    def status(self, chance, actions):
        n = len(actions)
        if n % 2 == 1:
            return 1, None
        if n // 2 < self.rounds:
            return 0, None
        totals = [0.0, 0.0]
        for pair in self._round_pairs(actions):
            r0, r1 = self.PAYOFFS[pair]
            totals[0] += r0
            totals[1] += r1
        return TERMINAL, (totals[0] / self.rounds, totals[1] / self.rounds)

    def public_string(self, state: HistoryState) -> str:
        # Memory-1: only the previous round's joint action is observed
        n = len(state.action_sequence) // 2 * 2
        return "".join(self.action_codes[a] for a in state.action_sequence[max(0, n - 2):n])

    def info_key(self, state: HistoryState) -> InfoKey:
        return InfoKey(state.to_move, "", self.public_string(state))


@register_game("negotiation")
class Negotiation(GameSpec):
    """Ultimatum over a 10-unit pie: P0 offers 0..10 to P1, who rejects or accepts."""

    name = "negotiation"
    pie = 10
    action_labels = tuple(f"offer_{k}" for k in range(11)) + ("reject", "accept")
    action_codes = "0123456789T" + "ra"
    reward_bounds = (0.0, 10.0)
    zero_sum = False
    public_alphabet = "0123456789T"
    max_public_length = 1

    REJECT, ACCEPT = 11, 12

    def initial_states(self):
        return [(self.make_state((), ()), 1.0)]

    def status(self, chance, actions):
        if len(actions) < 2:
            return len(actions), None
        offer, answer = actions
        if answer == self.ACCEPT:
            return TERMINAL, (float(self.pie - offer), float(offer))
        return TERMINAL, (0.0, 0.0)

    def legal_actions(self, state: HistoryState) -> Tuple[int, ...]:
        if not state.action_sequence:
            return tuple(range(self.pie + 1))
        return (self.REJECT, self.ACCEPT)

    def info_key(self, state: HistoryState) -> InfoKey:
        return InfoKey(state.to_move, "", self.public_string(state))


if __name__ == "__main__":
    from modules.game_core import apply, initial_states

    pennies = MatchingPennies()
    root, _ = initial_states(pennies)[0]
    print(f"🪙 heads/heads → {apply(apply(root, HEADS), HEADS).utilities}")
    ipd = IteratedPrisonersDilemma()
    print(f"🤝 IPD bounds {ipd.reward_bounds}, payoffs {ipd.PAYOFFS}")
