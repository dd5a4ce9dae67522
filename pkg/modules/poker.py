"""
Poker Games Module
Kuhn poker and fixed-limit Leduc hold'em (3-rank and 4-rank decks).
"""
import sys
import os
sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from itertools import permutations
from typing import List, NamedTuple, Optional, Tuple

from modules.game_core import (
    CHANCE,
    TERMINAL,
    GameSpec,
    HistoryState,
    InfoKey,
    register_game,
)

RANK_LABELS = "JQKA"

# Kuhn: facing a bet, pass folds and bet calls
PASS, BET = 0, 1

# Leduc
FOLD, CALL, RAISE = 0, 1, 2


@register_game("kuhn")
class KuhnPoker(GameSpec):
    """Three-card single-bet Kuhn poker with ante 1."""

    name = "kuhn"
    action_labels = ("pass", "bet")
    action_codes = "pb"
    reward_bounds = (-2.0, 2.0)
    nash_reference_value = -1.0 / 18.0
    private_labels = ("J", "Q", "K")
    public_alphabet = "pb"
    max_public_length = 2

    _DECISIONS = {(): 0, (PASS,): 1, (BET,): 1, (PASS, BET): 0}

    def initial_states(self) -> List[Tuple[HistoryState, float]]:
        deals = list(permutations(range(3), 2))
        return [(self.make_state(deal, ()), 1.0 / len(deals)) for deal in deals]

    def status(self, chance, actions):
        to_move = self._DECISIONS.get(actions)
        if to_move is not None:
            return to_move, None

        if actions == (BET, PASS):
            u0 = 1.0
        elif actions == (PASS, BET, PASS):
            u0 = -1.0
        else:
            stake = 1.0 if actions == (PASS, PASS) else 2.0
            u0 = stake if chance[0] > chance[1] else -stake
        return TERMINAL, (u0, -u0)

    def legal_actions(self, state: HistoryState) -> Tuple[int, ...]:
        return (PASS, BET)

    def info_key(self, state: HistoryState) -> InfoKey:
        player = state.to_move
        return InfoKey(player, RANK_LABELS[state.chance_assignment[player]], self.public_string(state))


class _Betting(NamedTuple):
    rounds: Tuple[Tuple[int, ...], Tuple[int, ...]]
    round_index: int
    raises: int
    contributions: Tuple[int, int]
    player: int
    folder: Optional[int]


class LeducPoker(GameSpec):
    """
    Fixed-limit Leduc hold'em.

    Each player antes 1 and receives one private card; a public board card is
    dealt after the first betting round. Raises are 2 in round one and 4 in
    round two, with at most two raises per round. A pair with the board wins,
    otherwise the higher rank wins, equal ranks split.
    """

    action_labels = ("fold", "call", "raise")
    action_codes = "fcr"

    def __init__(self, ranks: int = 3, suits: Optional[int] = None):
        self.ranks = ranks
        self.suits = suits or (2 if ranks == 3 else 3)
        self.name = "leduc" if ranks == 3 else f"leduc{ranks}"
        self.deck = tuple(range(self.ranks * self.suits))
        self.ante = 1
        self.raise_sizes = (2, 4)
        self.max_raises = 2
        bound = float(self.ante + self.max_raises * sum(self.raise_sizes))
        self.reward_bounds = (-bound, bound)
        # exact game value of this rule set (OpenSpiel leduc_poker: -0.085606)
        self.nash_reference_value = -0.0856 if ranks == 3 else None
        self.private_labels = tuple(RANK_LABELS[:ranks])
        self.public_alphabet = self.action_codes + "/" + RANK_LABELS[:ranks]
        # "crrc" + "/" + board + "crr"
        self.max_public_length = 9

    def rank(self, card: int) -> int:
        return card // self.suits

    def initial_states(self) -> List[Tuple[HistoryState, float]]:
        deals = list(permutations(self.deck, 2))
        return [(self.make_state(deal, ()), 1.0 / len(deals)) for deal in deals]

    def _replay(self, actions: Tuple[int, ...]) -> _Betting:
        rounds = ([], [])
        contributions = [self.ante, self.ante]
        round_index, raises, player, folder = 0, 0, 0, None

        for action in actions:
            current = rounds[round_index]
            current.append(action)
            if action == FOLD:
                folder = player
                break
            if action == RAISE:
                contributions[player] = contributions[1 - player] + self.raise_sizes[round_index]
                raises += 1
            else:
                contributions[player] = contributions[1 - player]
            if action == CALL and len(current) > 1:
                round_index, raises, player = round_index + 1, 0, 0
            else:
                player = 1 - player

        return _Betting(
            (tuple(rounds[0]), tuple(rounds[1])), round_index, raises,
            (contributions[0], contributions[1]), player, folder,
        )

    def _showdown(self, chance) -> int:
        mine, theirs, board = (self.rank(c) for c in chance)
        if mine == theirs:
            return 0
        if mine == board:
            return 1
        if theirs == board:
            return -1
        return 1 if mine > theirs else -1

    def status(self, chance, actions):
        betting = self._replay(actions)
        if betting.folder is not None:
            lost = float(betting.contributions[betting.folder])
            u0 = -lost if betting.folder == 0 else lost
            return TERMINAL, (u0, -u0)
        if betting.round_index == 2:
            u0 = float(self._showdown(chance) * betting.contributions[0])
            return TERMINAL, (u0, -u0)
        if betting.round_index == 1 and len(chance) == 2:
            return CHANCE, None
        return betting.player, None

    def chance_outcomes(self, state: HistoryState):
        remaining = [c for c in self.deck if c not in state.chance_assignment]
        return [(card, 1.0 / len(remaining)) for card in remaining]

    def legal_actions(self, state: HistoryState) -> Tuple[int, ...]:
        betting = self._replay(state.action_sequence)
        facing_bet = betting.contributions[0] != betting.contributions[1]
        actions = (FOLD, CALL) if facing_bet else (CALL,)
        if betting.raises < self.max_raises:
            actions += (RAISE,)
        return actions

    def public_string(self, state: HistoryState) -> str:
        betting = self._replay(state.action_sequence)
        text = "".join(self.action_codes[a] for a in betting.rounds[0])
        if len(state.chance_assignment) == 3:
            board = RANK_LABELS[self.rank(state.chance_assignment[2])]
            text += "/" + board + "".join(self.action_codes[a] for a in betting.rounds[1])
        return text

    def info_key(self, state: HistoryState) -> InfoKey:
        player = state.to_move
        card = RANK_LABELS[self.rank(state.chance_assignment[player])]
        return InfoKey(player, card, self.public_string(state))


register_game("leduc")(lambda: LeducPoker(ranks=3))
register_game("leduc4")(lambda: LeducPoker(ranks=4))


if __name__ == "__main__":
    from modules.game_core import apply, initial_states

    kuhn = KuhnPoker()
    state, prob = initial_states(kuhn)[0]
    print(f"🃏 Kuhn deal {state.chance_assignment} (p={prob:.3f}) → {kuhn.info_key(state)}")
    end = apply(apply(state, PASS), PASS)
    print(f"   pass, pass → utilities {end.utilities}")

    leduc = LeducPoker()
    print(f"🃏 Leduc: {len(initial_states(leduc))} hole-card deals, bounds {leduc.reward_bounds}")
