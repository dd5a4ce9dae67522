"""
Metrics Module
Contingent action capacity (plain and reach-weighted), exact best response,
exploitability, reward normalization and exploitation-floor diagnostics.
"""
import sys
import os
sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from dataclasses import asdict, dataclass, field
from typing import Dict, List, Optional, Set, Tuple, Union

from config import Config
from modules.errors import InvalidConfigError, NotZeroContingencyError, NotZeroSumError, OutOfBoundsError
from modules.game_core import (
    CHANCE,
    TERMINAL,
    GameSpec,
    GameTree,
    InfoKey,
    PolicyProfile,
    build_tree,
    expected_values,
    resolve_game,
    restrict_distribution,
)
from modules.perturb import MaskRule, RuleSet, as_ruleset

TIE_TOLERANCE = 1e-12


@dataclass
class PointDetail:
    retained_actions: int
    infosets: int
    reach: Optional[float] = None


@dataclass
class CapacityReport:
    cac_decision_points: int
    cac_raw_infosets: int
    cac_weighted: Optional[float] = None
    per_point_detail: Dict[str, PointDetail] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class ValueReport:
    player_value: float
    br_value: float
    improvement_bound: float
    epsilon_floor: float
    retained_point: Optional[str] = None
    retained_reach: float = 0.0
    value_through_point: float = 0.0
    forced_value: float = 0.0
    residual_bound: float = 0.0
    bound_satisfied: bool = True

    def to_dict(self) -> dict:
        return asdict(self)


def _masked_tree(game: Union[GameSpec, str], rules) -> GameTree:
    return build_tree(resolve_game(game), as_ruleset(rules))


# ==================== Capacity ====================

def capacity_report(game, rules, player: int, profile: Optional[PolicyProfile] = None) -> CapacityReport:
    """
    Count the decisions where `player` keeps a real choice under the rules.

    Args:
        game: GameSpec or registered name
        rules: Mask rules (sequence or RuleSet), or None
        player: Player whose capacity is measured
        profile: When given, reach under this profile weights each decision point

    Returns:
        CapacityReport with decision-point and raw information-set counts
    """
    tree = _masked_tree(game, rules)
    points: Dict[str, PointDetail] = {}
    raw = 0
    for idx in tree.infosets_of(player):
        key = tree.infoset_keys[idx]
        n = len(tree.infoset_actions[idx])
        raw += n >= 2
        detail = points.setdefault(key.decision_point, PointDetail(retained_actions=0, infosets=0))
        detail.retained_actions = max(detail.retained_actions, n)
        detail.infosets += 1

    weighted = None
    if profile is not None:
        reach = tree.node_reach(tree.strategy_from_profile(profile))
        for detail in points.values():
            detail.reach = 0.0
        for idx in tree.infosets_of(player):
            key = tree.infoset_keys[idx]
            points[key.decision_point].reach += sum(reach[n] for n in tree.infoset_nodes[idx])
        weighted = sum(d.reach for d in points.values() if d.retained_actions >= 2)

    contingent = sum(1 for d in points.values() if d.retained_actions >= 2)
    return CapacityReport(contingent, raw, weighted, dict(sorted(points.items())))


def compute_cac(game, rules, player: int) -> CapacityReport:
    """Counts-only capacity report (no reach weighting)."""
    return capacity_report(game, rules, player)


def compute_cac_weighted(game, rules, profile: PolicyProfile, player: int) -> float:
    """Reach-weighted capacity: aggregate reach of every decision point that keeps a choice."""
    return capacity_report(game, rules, player, profile).cac_weighted


# ==================== Best Response ====================

class _BestResponse:
    """Expectimax over the responder's information sets against a fixed profile."""

    def __init__(self, tree: GameTree, fixed_profile: PolicyProfile, responder: int):
        self.tree = tree
        self.responder = responder
        self.strategy = tree.strategy_from_profile(fixed_profile, players=(1 - responder,))
        self.weight = tree.node_reach(self.strategy, free_player=responder)
        self.memo: List[Optional[float]] = [None] * len(tree)
        self.choice: Dict[int, int] = {}
        self.q_values: Dict[int, List[float]] = {}

    def value(self, node: int) -> float:
        cached = self.memo[node]
        if cached is not None:
            return cached
        tree = self.tree
        kind = tree.kind[node]
        kids = tree.children[node]
        if kind == TERMINAL:
            v = tree.utility[node][self.responder]
        elif kind == CHANCE:
            v = sum(p * self.value(c) for p, c in zip(tree.probs[node], kids))
        elif kind == self.responder:
            v = self.value(kids[self.best_index(tree.infoset[node])])
        else:
            probs = self.strategy[tree.infoset[node]]
            if probs is None:
                # Unreachable under the fixed profile; any completion gives weight zero
                probs = restrict_distribution({}, tree.actions[node])
            v = sum(p * self.value(c) for p, c in zip(probs, kids) if p > 0.0)
        self.memo[node] = v
        return v

    def best_index(self, infoset: int) -> int:
        chosen = self.choice.get(infoset)
        if chosen is not None:
            return chosen
        tree = self.tree
        q = [0.0] * len(tree.infoset_actions[infoset])
        for node in tree.infoset_nodes[infoset]:
            w = self.weight[node]
            if w == 0.0:
                continue
            for k, child in enumerate(tree.children[node]):
                q[k] += w * self.value(child)
        best = max(q)
        chosen = next(k for k, v in enumerate(q) if v >= best - TIE_TOLERANCE)
        self.choice[infoset] = chosen
        self.q_values[infoset] = q
        return chosen

    def infoset_weight(self, infoset: int) -> float:
        return sum(self.weight[n] for n in self.tree.infoset_nodes[infoset])


def best_response(game, rules, fixed_profile: PolicyProfile, responder: int) -> Tuple[Dict[InfoKey, int], float]:
    """
    Exact pure best response of `responder` to the other player's fixed profile.

    Args:
        game: GameSpec or registered name
        rules: Mask rules shaping the game (the fixed player's legal sets)
        fixed_profile: Distributions for the fixed player's information sets
        responder: 0 or 1

    Returns:
        (pure policy as key -> action id, responder's expected value)
    """
    tree = _masked_tree(game, rules)
    br = _BestResponse(tree, fixed_profile, responder)
    value = br.value(0)
    policy = {}
    for idx in tree.infosets_of(responder):
        policy[tree.infoset_keys[idx]] = tree.infoset_actions[idx][br.best_index(idx)]
    return policy, value


def best_response_action_sets(game, rules, fixed_profile: PolicyProfile, responder: int,
                              tolerance: float = 1e-9) -> Dict[InfoKey, Set[int]]:
    """Every maximizing action at each responder set reached with positive weight."""
    tree = _masked_tree(game, rules)
    br = _BestResponse(tree, fixed_profile, responder)
    br.value(0)
    sets = {}
    for idx in tree.infosets_of(responder):
        if br.infoset_weight(idx) <= 0.0:
            continue
        br.best_index(idx)
        q = br.q_values[idx]
        best = max(q)
        sets[tree.infoset_keys[idx]] = {
            a for a, v in zip(tree.infoset_actions[idx], q) if v >= best - tolerance * max(1.0, abs(best))
        }
    return sets


def restrict_profile(game, profile: PolicyProfile, rules) -> PolicyProfile:
    """The profile actually played when the rules are active (masked actions renormalized away)."""
    game = resolve_game(game)
    ruleset = as_ruleset(rules)
    tree = build_tree(game)
    restricted: PolicyProfile = {}
    for key, actions in zip(tree.infoset_keys, tree.infoset_actions):
        dist = profile.get(key)
        if dist is None:
            continue
        allowed = ruleset(key, actions) if ruleset else actions
        restricted[key] = dict(zip(allowed, restrict_distribution(dist, allowed)))
    return restricted


def exploitability(game, profile: PolicyProfile, rules=None) -> float:
    """
    Mean best-response gain against a profile: (BR_0 + BR_1) / 2.

    When rules are given, the profile is first restricted to the actions the
    rules leave, and both best responses are taken in the unperturbed game.
    """
    game = resolve_game(game)
    if not game.zero_sum:
        raise NotZeroSumError(f"exploitability is undefined for general-sum {game.name}")
    played = restrict_profile(game, profile, rules) if rules else profile
    _, br0 = best_response(game, None, played, responder=0)
    _, br1 = best_response(game, None, played, responder=1)
    return (br0 + br1) / 2.0


# ==================== Normalization and Floors ====================

def normalize(r: float, bounds: Tuple[float, float]) -> float:
    """Affine map of a reward onto [0, 1] using the game's reward bounds."""
    low, high = bounds
    if not low < high:
        raise InvalidConfigError(f"invalid reward bounds {bounds}")
    if r < low - TIE_TOLERANCE or r > high + TIE_TOLERANCE:
        raise OutOfBoundsError(f"reward {r} outside bounds {bounds}")
    return min(1.0, max(0.0, (r - low) / (high - low)))


def _forced_player(rules: Optional[RuleSet]) -> int:
    players = rules.target_players if rules else frozenset()
    if len(players) != 1:
        raise NotZeroContingencyError("zero-contingency rules must constrain exactly one player")
    return next(iter(players))


def _forced_profile(tree: GameTree, player: int) -> PolicyProfile:
    profile = {}
    for idx in tree.infosets_of(player):
        actions = tree.infoset_actions[idx]
        if len(actions) != 1:
            raise NotZeroContingencyError(f"{tree.infoset_keys[idx]} keeps {len(actions)} actions")
        profile[tree.infoset_keys[idx]] = {actions[0]: 1.0}
    return profile


def forced_profile(game, rules) -> Tuple[int, PolicyProfile]:
    """The forced player and its unique remaining policy under zero-contingency rules."""
    ruleset = as_ruleset(rules)
    player = _forced_player(ruleset)
    return player, _forced_profile(build_tree(resolve_game(game), ruleset), player)


def epsilon_mixed(policy: Dict[InfoKey, int], tree: GameTree, epsilon: float) -> PolicyProfile:
    """ε-greedy profile around a pure policy: (1-ε) on the policy action plus ε spread uniformly."""
    mixed = {}
    for key, action in policy.items():
        actions = tree.infoset_actions[tree.index[key]]
        share = epsilon / len(actions)
        mixed[key] = {a: share + (1.0 - epsilon if a == action else 0.0) for a in actions}
    return mixed


def dea_floor(epsilon: float, game, rules) -> float:
    """
    Value of the forced player when the opponent plays an ε-greedy exact best response.

    Args:
        epsilon: Opponent exploration rate
        game: GameSpec or registered name
        rules: Zero-contingency rules for one player

    Returns:
        Forced player's expected value
    """
    game = resolve_game(game)
    ruleset = as_ruleset(rules)
    forced = _forced_player(ruleset)
    if compute_cac(game, ruleset, forced).cac_decision_points:
        raise NotZeroContingencyError("rules leave the forced player a contingent decision")
    tree = build_tree(game, ruleset)
    _, fixed = forced_profile(game, ruleset)
    policy, _ = best_response(game, ruleset, fixed, responder=1 - forced)
    profile = dict(fixed)
    profile.update(epsilon_mixed(policy, tree, epsilon))
    return expected_values(game, profile, ruleset)[forced]


def value_report(game, rules, profile: PolicyProfile, player: int = 0,
                 epsilon: float = Config.EPSILON, retained_point: Optional[str] = None) -> ValueReport:
    """
    Split the player's guaranteed value around its retained contingent point.

    The player follows `profile` (restricted by the rules) against an exact best
    response. The value is split into paths through the retained decision point
    and paths around it, and checked against the bound
    v >= reach * v_through + (1 - reach) * v_forced, where v_forced is the value
    once the retained point is forced as well.
    """
    game = resolve_game(game)
    ruleset = as_ruleset(rules)
    tree = build_tree(game, ruleset)
    responder = 1 - player
    report = capacity_report(game, ruleset, player, profile)
    contingent = [(name, d) for name, d in report.per_point_detail.items() if d.retained_actions >= 2]
    if retained_point is None and contingent:
        retained_point = max(contingent, key=lambda item: (item[1].reach, item[0]))[0]

    policy, br_value = best_response(game, ruleset, profile, responder)
    strategy = tree.strategy_from_profile(profile, players=(player,))
    for key, action in policy.items():
        idx = tree.index[key]
        strategy[idx] = tuple(1.0 if a == action else 0.0 for a in tree.infoset_actions[idx])
    reach = tree.node_reach(strategy)

    through = [False] * len(tree)
    for node, kind in enumerate(tree.kind):
        if kind == TERMINAL:
            continue
        flag = through[node] or (
            kind >= 0 and tree.infoset_keys[tree.infoset[node]].decision_point == retained_point
        )
        for child in tree.children[node]:
            through[child] = flag

    point_reach = 0.0
    for idx, key in enumerate(tree.infoset_keys):
        if key.decision_point == retained_point:
            point_reach += sum(reach[n] for n in tree.infoset_nodes[idx])

    player_value = 0.0
    through_value = 0.0
    for node, kind in enumerate(tree.kind):
        if kind == TERMINAL and reach[node] > 0.0:
            contribution = reach[node] * tree.utility[node][player]
            player_value += contribution
            if through[node]:
                through_value += contribution
    v_through = through_value / point_reach if point_reach > 0.0 else 0.0

    forcing = RuleSet((ruleset.rules if ruleset else ()) + (MaskRule.force_lowest("all", player),))
    forced_value = dea_floor(0.0, game, forcing)
    floor = dea_floor(epsilon, game, forcing) - forced_value
    bound = point_reach * v_through + (1.0 - point_reach) * forced_value

    return ValueReport(
        player_value=player_value,
        br_value=br_value,
        improvement_bound=point_reach * (v_through - forced_value),
        epsilon_floor=floor,
        retained_point=retained_point,
        retained_reach=point_reach,
        value_through_point=v_through,
        forced_value=forced_value,
        residual_bound=bound,
        bound_satisfied=player_value >= bound - 1e-12,
    )


if __name__ == "__main__":
    from modules.game_core import get_game

    kuhn = get_game("kuhn")
    full = [MaskRule.remove(kuhn, ["bet"])]
    print(f"📏 Kuhn full removal CAC: {compute_cac(kuhn, full, 0).cac_decision_points}")
    for eps in (0.0, 0.15, 0.30):
        print(f"   ε={eps:.2f} floor → {dea_floor(eps, kuhn, full):+.4f}")
