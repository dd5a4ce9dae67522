"""
Perturbation Module
Named-action removal and deterministic forcing for one player, scoped to a set
of decision points and scheduled over an episode window.
"""
import sys
import os
sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from dataclasses import dataclass
from enum import Enum
from typing import Callable, FrozenSet, Mapping, Optional, Sequence, Tuple, Union

import numpy as np

from modules.errors import EmptyActionSetError, InvalidConfigError
from modules.game_core import GameSpec, InfoKey, build_tree


class MaskMode(str, Enum):
    REMOVE_ACTIONS = "remove"
    FORCE_POLICY = "force"


class Forcing(str, Enum):
    LOWEST_LEGAL = "lowest_legal"


class Scope(str, Enum):
    ALL_NODES = "all"
    ROOT_ONLY = "root"
    NON_ROOT = "non_root"

    def matches(self, key: InfoKey) -> bool:
        if self is Scope.ROOT_ONLY:
            return key.public == ""
        if self is Scope.NON_ROOT:
            return key.public != ""
        return True


@dataclass(frozen=True)
class PublicHistoryScope:
    """Matches every key whose public history equals `public` (one decision point)."""

    public: str

    def matches(self, key: InfoKey) -> bool:
        return key.public == self.public


class Phase(str, Enum):
    PRE = "pre"
    POST = "post"
    RESTORED = "restored"


@dataclass(frozen=True)
class MaskRule:
    """One removal or forcing rule for one player."""

    target_player: int = 0
    mode: MaskMode = MaskMode.REMOVE_ACTIONS
    removed_actions: FrozenSet[int] = frozenset()
    forcing: Forcing = Forcing.LOWEST_LEGAL
    scope: Union[Scope, PublicHistoryScope, Callable[[InfoKey], bool]] = Scope.ALL_NODES

    def applies_to(self, key: InfoKey) -> bool:
        if key.player != self.target_player:
            return False
        matches = getattr(self.scope, "matches", None)
        return matches(key) if matches is not None else bool(self.scope(key))

    def restrict(self, actions: Tuple[int, ...]) -> Tuple[int, ...]:
        if self.mode is MaskMode.FORCE_POLICY:
            return actions[:1]
        return tuple(a for a in actions if a not in self.removed_actions)

    @classmethod
    def remove(cls, game: GameSpec, labels: Sequence[str], scope="all", player: int = 0) -> "MaskRule":
        """Remove the labelled actions from `player` at every decision in scope."""
        return cls(
            target_player=player,
            mode=MaskMode.REMOVE_ACTIONS,
            removed_actions=frozenset(game.action_id(label) for label in labels),
            scope=_scope(scope),
        )

    @classmethod
    def force_lowest(cls, scope="all", player: int = 0) -> "MaskRule":
        """Force `player` onto its lowest legal action at every decision in scope."""
        return cls(target_player=player, mode=MaskMode.FORCE_POLICY, scope=_scope(scope))

    @classmethod
    def from_config(cls, game: GameSpec, spec: Mapping) -> "MaskRule":
        """
        Build a rule from an experiment config entry.

        Args:
            game: Game whose action labels are referenced
            spec: Mapping with keys player, mode ("remove"/"force"), actions (labels),
                  forcing and scope ("all"/"root"/"non_root")

        Returns:
            The MaskRule
        """
        mode = MaskMode(spec.get("mode", "remove"))
        player = int(spec.get("player", 0))
        scope = spec.get("scope", "all")
        if mode is MaskMode.FORCE_POLICY:
            return cls(target_player=player, mode=mode, forcing=Forcing(spec.get("forcing", "lowest_legal")),
                       scope=_scope(scope))
        return cls.remove(game, spec.get("actions", ()), scope=scope, player=player)


def _scope(scope) -> Union[Scope, PublicHistoryScope, Callable[[InfoKey], bool]]:
    if isinstance(scope, str):
        try:
            return Scope(scope)
        except ValueError:
            raise InvalidConfigError(f"unknown scope keyword {scope!r}") from None
    return scope


def effective_actions(key: InfoKey, base: Tuple[int, ...], active_rules: Sequence[MaskRule]) -> Tuple[int, ...]:
    """
    Legal actions left to the player at `key` once the active rules apply.

    Args:
        key: Information key of the acting player
        base: Unperturbed legal actions (ascending ids)
        active_rules: Rules currently in force

    Returns:
        Non-empty ascending subset of base
    """
    if not base:
        raise EmptyActionSetError(f"no base actions at {key}")
    actions = base
    for rule in active_rules:
        if rule.applies_to(key):
            actions = rule.restrict(actions)
    if not actions:
        raise EmptyActionSetError(f"mask rules leave no action at {key}")
    return actions


@dataclass(frozen=True)
class RuleSet:
    """A hashable bundle of rules, usable as a tree action filter."""

    rules: Tuple[MaskRule, ...] = ()

    def __call__(self, key: InfoKey, legal: Tuple[int, ...]) -> Tuple[int, ...]:
        return effective_actions(key, legal, self.rules)

    def __bool__(self) -> bool:
        return bool(self.rules)

    @property
    def target_players(self) -> FrozenSet[int]:
        return frozenset(rule.target_player for rule in self.rules)


def as_ruleset(rules) -> Optional[RuleSet]:
    """Normalize rules (RuleSet, sequence, or nothing) to a RuleSet or None."""
    if rules is None:
        return None
    if isinstance(rules, RuleSet):
        return rules if rules else None
    rules = tuple(rules)
    return RuleSet(rules) if rules else None


def validate_rules(game: GameSpec, rules: Sequence[MaskRule]) -> None:
    """Construction-time check of rules against the game's action table (and tree when enumerable)."""
    for rule in rules:
        if rule.target_player not in (0, 1):
            raise InvalidConfigError(f"rule targets unknown player {rule.target_player}")
        unknown = [a for a in rule.removed_actions if not 0 <= a < game.num_actions]
        if unknown:
            raise InvalidConfigError(f"rule removes unknown action ids {unknown} in {game.name}")
        if rule.mode is MaskMode.REMOVE_ACTIONS and len(rule.removed_actions) >= game.num_actions:
            raise EmptyActionSetError(f"rule removes every action of {game.name}")

    if game.enumerable and rules:
        tree = build_tree(game)
        for key, actions in zip(tree.infoset_keys, tree.infoset_actions):
            effective_actions(key, actions, rules)


@dataclass(frozen=True)
class Schedule:
    """Episode window over which the rules are active."""

    activate_at: int
    deactivate_at: Optional[int] = None
    per_episode_probability: float = 1.0

    def __post_init__(self):
        if self.deactivate_at is not None and self.deactivate_at <= self.activate_at:
            raise InvalidConfigError("deactivate_at must come after activate_at")
        if not 0.0 <= self.per_episode_probability <= 1.0:
            raise InvalidConfigError("per_episode_probability must lie in [0, 1]")


NEVER = Schedule(activate_at=10 ** 12)


def schedule_active(episode: int, schedule: Schedule, rng: np.random.Generator) -> bool:
    """
    Whether the mask is on for this episode.

    Draws one Bernoulli from `rng` per episode inside the window, and only
    when the schedule is stochastic.
    """
    if episode < schedule.activate_at:
        return False
    if schedule.deactivate_at is not None and episode >= schedule.deactivate_at:
        return False
    if schedule.per_episode_probability >= 1.0:
        return True
    return bool(rng.random() < schedule.per_episode_probability)


def phase_of(episode: int, schedule: Schedule) -> Phase:
    if episode < schedule.activate_at:
        return Phase.PRE
    if schedule.deactivate_at is not None and episode >= schedule.deactivate_at:
        return Phase.RESTORED
    return Phase.POST


if __name__ == "__main__":
    from modules.game_core import get_game

    kuhn = get_game("kuhn")
    rule = MaskRule.remove(kuhn, ["bet"])
    print(f"✂️  Kuhn root after bet removal: {effective_actions(InfoKey(0, 'K', ''), (0, 1), [rule])}")
    schedule = Schedule(activate_at=10_000, deactivate_at=15_000)
    rng = np.random.default_rng(0)
    print(f"⏱️  episode 16000 active: {schedule_active(16_000, schedule, rng)}")
