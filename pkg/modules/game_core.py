"""
Game Core Module
Extensive-form game abstraction: histories, information keys, the game registry
and full-tree enumeration used by the solvers and metrics.
"""
import sys
import os
sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Dict, List, NamedTuple, Optional, Sequence, Set, Tuple, Union

from modules.errors import (
    IllegalActionError,
    InvalidStateError,
    MissingPolicyError,
    TreeTooLargeError,
    UnknownGameError,
)

CHANCE = -1
TERMINAL = -2

Distribution = Dict[int, float]
ActionFilter = Callable[["InfoKey", Tuple[int, ...]], Tuple[int, ...]]


class InfoKey(NamedTuple):
    """Canonical information-set key, printed as "P{idx}|{private}|{public}"."""

    player: int
    private: str
    public: str

    def __str__(self) -> str:
        return f"P{self.player}|{self.private}|{self.public}"

    @property
    def observation(self) -> str:
        return f"{self.private}|{self.public}"

    @property
    def decision_point(self) -> str:
        """Public betting node: the key with the private outcome aggregated away."""
        return f"P{self.player}|{self.public}"

    @classmethod
    def parse(cls, text: str) -> "InfoKey":
        seat, private, public = text.split("|", 2)
        return cls(int(seat[1:]), private, public)


PolicyProfile = Dict[InfoKey, Distribution]


@dataclass(frozen=True)
class HistoryState:
    """One node of a game: chance outcomes so far, actions so far, and who moves."""

    game: "GameSpec" = field(repr=False, compare=False)
    chance_assignment: tuple
    action_sequence: Tuple[int, ...]
    to_move: int
    utilities: Optional[Tuple[float, float]] = None

    @property
    def is_terminal(self) -> bool:
        return self.to_move == TERMINAL

    @property
    def is_chance(self) -> bool:
        return self.to_move == CHANCE


class GameSpec(ABC):
    """Immutable rules of a two-player extensive-form game with chance."""

    name: str = ""
    num_players: int = 2
    action_labels: Tuple[str, ...] = ()
    action_codes: str = ""
    reward_bounds: Tuple[float, float] = (-1.0, 1.0)
    nash_reference_value: Optional[float] = None
    zero_sum: bool = True
    enumerable: bool = True
    perfect_recall: bool = True
    # Observation encoding hints for function approximators
    private_labels: Tuple[str, ...] = ("",)
    public_alphabet: str = ""
    max_public_length: int = 0

    @property
    def num_actions(self) -> int:
        return len(self.action_labels)

    def action_id(self, label: str) -> int:
        """Look up an action id by its label."""
        try:
            return self.action_labels.index(label)
        except ValueError:
            raise IllegalActionError(f"{self.name} has no action labelled {label!r}") from None

    def make_state(self, chance: tuple, actions: Tuple[int, ...]) -> HistoryState:
        to_move, utilities = self.status(chance, actions)
        return HistoryState(self, chance, actions, to_move, utilities)

    def next_state(self, state: HistoryState, action: int) -> HistoryState:
        return self.make_state(state.chance_assignment, state.action_sequence + (action,))

    def apply_chance(self, state: HistoryState, outcome) -> HistoryState:
        return self.make_state(state.chance_assignment + (outcome,), state.action_sequence)

    def chance_outcomes(self, state: HistoryState) -> List[Tuple[object, float]]:
        """Outcomes of an in-tree chance node. Games without one never reach here."""
        raise InvalidStateError(f"{self.name} has no in-tree chance nodes")

    def public_string(self, state: HistoryState) -> str:
        return "".join(self.action_codes[a] for a in state.action_sequence)

    @abstractmethod
    def initial_states(self) -> List[Tuple[HistoryState, float]]:
        """All root chance assignments with their probabilities."""

    @abstractmethod
    def status(self, chance: tuple, actions: Tuple[int, ...]) -> Tuple[int, Optional[Tuple[float, float]]]:
        """Who moves next after this history, and the utilities if it is terminal."""

    @abstractmethod
    def legal_actions(self, state: HistoryState) -> Tuple[int, ...]:
        """Legal action ids in ascending order at a decision node."""

    @abstractmethod
    def info_key(self, state: HistoryState) -> InfoKey:
        """Information key of the player to move."""

    def __repr__(self) -> str:
        return f"<{type(self).__name__} {self.name}>"


# ==================== Registry ====================

_REGISTRY: Dict[str, Callable[[], GameSpec]] = {}


def register_game(name: str):
    """Register a zero-argument game factory under a name."""
    def decorator(factory):
        _REGISTRY[name] = factory
        return factory
    return decorator


def _load_builtin_games():
    # Importing the game modules runs their @register_game decorators
    from modules import poker, liars_dice, matrix_games  # noqa: F401


@lru_cache(maxsize=None)
def get_game(name: str) -> GameSpec:
    """Get the shared instance of a registered game."""
    _load_builtin_games()
    if name not in _REGISTRY:
        raise UnknownGameError(f"unknown game {name!r}; known: {', '.join(sorted(_REGISTRY))}")
    return _REGISTRY[name]()


def available_games() -> List[str]:
    _load_builtin_games()
    return sorted(_REGISTRY)


def resolve_game(game: Union[GameSpec, str]) -> GameSpec:
    return get_game(game) if isinstance(game, str) else game


# ==================== State Operations ====================

def initial_states(game: Union[GameSpec, str]) -> List[Tuple[HistoryState, float]]:
    """
    Enumerate every root chance assignment.

    Args:
        game: A GameSpec or a registered game name

    Returns:
        List of (state, probability) pairs whose probabilities sum to 1
    """
    return resolve_game(game).initial_states()


def legal_actions(state: HistoryState) -> Tuple[int, ...]:
    if state.to_move < 0:
        raise InvalidStateError("legal_actions called on a terminal or chance node")
    return state.game.legal_actions(state)


def apply(state: HistoryState, action: int) -> HistoryState:
    if action not in legal_actions(state):
        raise IllegalActionError(
            f"action {action} is not legal at {state.game.public_string(state)!r} in {state.game.name}"
        )
    return state.game.next_state(state, action)


def info_key(state: HistoryState) -> InfoKey:
    if state.to_move < 0:
        raise InvalidStateError("info_key called on a terminal or chance node")
    return state.game.info_key(state)


# ==================== Full Tree ====================

class GameTree:
    """
    Every history of an enumerable game, flattened into parallel lists.

    Node 0 is a synthetic chance node over the initial states. Node ids are
    assigned in preorder, so a parent always precedes its children.
    """

    def __init__(self, game: GameSpec, action_filter: Optional[ActionFilter] = None):
        if not game.enumerable:
            raise TreeTooLargeError(f"{game.name} is too large for full-tree enumeration")
        self.game = game
        self.action_filter = action_filter
        self.kind: List[int] = []
        self.children: List[Tuple[int, ...]] = []
        self.actions: List[tuple] = []
        self.probs: List[Tuple[float, ...]] = []
        self.infoset: List[int] = []
        self.utility: List[Optional[Tuple[float, float]]] = []
        self.infoset_keys: List[InfoKey] = []
        self.infoset_actions: List[Tuple[int, ...]] = []
        self.infoset_nodes: List[List[int]] = []
        self.index: Dict[InfoKey, int] = {}
        self._build()

    def __len__(self) -> int:
        return len(self.kind)

    def _new_node(self, kind: int) -> int:
        self.kind.append(kind)
        self.children.append(())
        self.actions.append(())
        self.probs.append(())
        self.infoset.append(-1)
        self.utility.append(None)
        return len(self.kind) - 1

    def _build(self):
        root = self._new_node(CHANCE)
        starts = self.game.initial_states()
        self.probs[root] = tuple(p for _, p in starts)
        self.actions[root] = tuple(range(len(starts)))
        self.children[root] = tuple(self._expand(state) for state, _ in starts)

    def _expand(self, state: HistoryState) -> int:
        game = self.game
        node = self._new_node(state.to_move)
        if state.to_move == TERMINAL:
            self.utility[node] = state.utilities
            return node
        if state.to_move == CHANCE:
            outcomes = game.chance_outcomes(state)
            self.actions[node] = tuple(o for o, _ in outcomes)
            self.probs[node] = tuple(p for _, p in outcomes)
            self.children[node] = tuple(self._expand(game.apply_chance(state, o)) for o, _ in outcomes)
            return node

        key = game.info_key(state)
        legal = game.legal_actions(state)
        if self.action_filter is not None:
            legal = self.action_filter(key, legal)
        self.infoset[node] = self._register_infoset(key, legal, node)
        self.actions[node] = legal
        self.children[node] = tuple(self._expand(game.next_state(state, a)) for a in legal)
        return node

    def _register_infoset(self, key: InfoKey, legal: Tuple[int, ...], node: int) -> int:
        idx = self.index.get(key)
        if idx is None:
            idx = len(self.infoset_keys)
            self.index[key] = idx
            self.infoset_keys.append(key)
            self.infoset_actions.append(legal)
            self.infoset_nodes.append([])
        elif self.infoset_actions[idx] != legal:
            raise InvalidStateError(f"histories in {key} disagree on legal actions")
        self.infoset_nodes[idx].append(node)
        return idx

    def infosets_of(self, player: int) -> List[int]:
        return [i for i, key in enumerate(self.infoset_keys) if key.player == player]

    def strategy_from_profile(self, profile: PolicyProfile,
                              players: Sequence[int] = (0, 1)) -> List[Optional[Tuple[float, ...]]]:
        """
        Align a profile with the tree's information sets.

        Distributions are restricted to each set's actions and renormalized;
        sets with no mass left fall back to uniform. Missing keys map to None.
        """
        table: List[Optional[Tuple[float, ...]]] = []
        for key, actions in zip(self.infoset_keys, self.infoset_actions):
            if key.player not in players:
                table.append(None)
                continue
            dist = profile.get(key)
            table.append(None if dist is None else restrict_distribution(dist, actions))
        return table

    def node_reach(self, strategy: Sequence[Optional[Tuple[float, ...]]],
                   free_player: Optional[int] = None) -> List[float]:
        """
        Path probability of every node, chance included.

        Decisions of `free_player` pass their reach to every child unchanged,
        which gives the counterfactual weights a best response needs.
        Raises MissingPolicyError when a node with positive reach has no strategy.
        """
        reach = [0.0] * len(self.kind)
        reach[0] = 1.0
        for node, kind in enumerate(self.kind):
            if kind == TERMINAL:
                continue
            r = reach[node]
            kids = self.children[node]
            if kind == CHANCE:
                probs = self.probs[node]
            elif kind == free_player:
                for child in kids:
                    reach[child] = r
                continue
            else:
                probs = strategy[self.infoset[node]]
                if probs is None:
                    if r > 0.0:
                        raise MissingPolicyError(f"profile has no distribution at {self.infoset_keys[self.infoset[node]]}")
                    continue
            for child, p in zip(kids, probs):
                reach[child] = r * p
        return reach


def restrict_distribution(dist: Distribution, actions: Tuple[int, ...]) -> Tuple[float, ...]:
    """Probabilities over `actions` taken from `dist`, renormalized; uniform if no mass remains."""
    weights = [max(float(dist.get(a, 0.0)), 0.0) for a in actions]
    total = sum(weights)
    if total <= 0.0:
        return tuple(1.0 / len(actions) for _ in actions)
    return tuple(w / total for w in weights)


@lru_cache(maxsize=8)
def build_tree(game: GameSpec, action_filter: Optional[ActionFilter] = None) -> GameTree:
    """Build (and cache) the full tree of a game, optionally with filtered legal sets."""
    return GameTree(game, action_filter)


def enumerate_info_sets(game: Union[GameSpec, str], player: Optional[int] = None) -> Set[InfoKey]:
    """
    Enumerate every reachable information set of the unconstrained game.

    Args:
        game: A GameSpec or a registered game name
        player: Restrict to one player, or None for both

    Returns:
        Set of InfoKey
    """
    tree = build_tree(resolve_game(game))
    return {key for key in tree.infoset_keys if player is None or key.player == player}


def reach_profile(game: Union[GameSpec, str], profile: PolicyProfile,
                  action_filter: Optional[ActionFilter] = None) -> Dict[InfoKey, float]:
    """Reach probability of every information set under a profile, chance included."""
    tree = build_tree(resolve_game(game), action_filter)
    reach = tree.node_reach(tree.strategy_from_profile(profile))
    return {
        key: sum(reach[n] for n in nodes)
        for key, nodes in zip(tree.infoset_keys, tree.infoset_nodes)
    }


def terminal_reach_total(game: Union[GameSpec, str], profile: PolicyProfile,
                         action_filter: Optional[ActionFilter] = None) -> float:
    tree = build_tree(resolve_game(game), action_filter)
    reach = tree.node_reach(tree.strategy_from_profile(profile))
    return sum(r for r, kind in zip(reach, tree.kind) if kind == TERMINAL)


def expected_values(game: Union[GameSpec, str], profile: PolicyProfile,
                    action_filter: Optional[ActionFilter] = None) -> Tuple[float, float]:
    """Exact expected utilities (u0, u1) when both players follow the profile."""
    tree = build_tree(resolve_game(game), action_filter)
    reach = tree.node_reach(tree.strategy_from_profile(profile))
    v0 = v1 = 0.0
    for node, kind in enumerate(tree.kind):
        if kind == TERMINAL and reach[node] > 0.0:
            u0, u1 = tree.utility[node]
            v0 += reach[node] * u0
            v1 += reach[node] * u1
    return v0, v1


def uniform_profile(game: Union[GameSpec, str],
                    action_filter: Optional[ActionFilter] = None) -> PolicyProfile:
    tree = build_tree(resolve_game(game), action_filter)
    return {
        key: {a: 1.0 / len(actions) for a in actions}
        for key, actions in zip(tree.infoset_keys, tree.infoset_actions)
    }


def format_profile(profile: PolicyProfile, game: GameSpec) -> str:
    """Sorted text dump, one line per (key, action label, probability)."""
    lines = []
    for key in sorted(profile, key=str):
        for action, prob in sorted(profile[key].items()):
            lines.append(f"{key}\t{game.action_labels[action]}\t{prob!r}")
    return "\n".join(lines)


if __name__ == "__main__":
    for name in available_games():
        g = get_game(name)
        print(f"🎲 {name}: {g.num_actions} actions, bounds {g.reward_bounds}")
    kuhn = get_game("kuhn")
    print(f"\n📊 Kuhn information sets: {len(enumerate_info_sets(kuhn))}")
