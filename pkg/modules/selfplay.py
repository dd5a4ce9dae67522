"""
Self-Play Module
Episode engine for shared-table, separate-table, fixed-opponent and population
play, with phase bookkeeping, seeded stream splitting and per-seed summaries.
"""
import sys
import os
sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from enum import Enum
from functools import lru_cache
from typing import Dict, List, NamedTuple, Optional, Sequence, Tuple

import numpy as np
from tqdm import tqdm

from config import Config
from modules.agent_zoo import build_agent, init_seed_from
from modules.errors import InvalidConfigError, MissingPolicyError
from modules.game_core import GameSpec, PolicyProfile, build_tree, enumerate_info_sets, expected_values, get_game
from modules.learner import AgentConfig, Learner, ProfileAgent, Step
from modules.metrics import best_response_action_sets, compute_cac, exploitability, forced_profile
from modules.perturb import MaskRule, Phase, RuleSet, Schedule, as_ruleset, phase_of, schedule_active, validate_rules
from modules.psro import PopulationOpponent


class Sharing(str, Enum):
    SHARED = "shared"
    SEPARATE = "separate"
    FIXED_OPPONENT = "fixed_opponent"
    POPULATION = "population"


@dataclass
class EpisodeRecord:
    episode: int
    seed: int
    reward_p0: float
    reward_p1: float
    phase: Phase
    mask_active: bool
    chance: str = ""
    history: str = ""
    policy_entropy: Optional[float] = None
    q_gap: Optional[float] = None


def _default_schedule() -> Schedule:
    return Schedule(activate_at=Config.EPISODES // 2)


@dataclass(frozen=True)
class MatchConfig:
    """Everything one self-play experiment condition needs."""

    game: str = "kuhn"
    agent: AgentConfig = field(default_factory=AgentConfig)
    opponent_agent: Optional[AgentConfig] = None
    sharing: Sharing = Sharing.SHARED
    opponent_profile: Optional[PolicyProfile] = field(default=None, compare=False, repr=False)
    rules: Tuple[MaskRule, ...] = ()
    schedule: Schedule = field(default_factory=_default_schedule)
    episodes: int = Config.EPISODES
    seeds: Tuple[int, ...] = tuple(range(Config.DEFAULT_SEEDS))
    chance_seeds: Optional[Tuple[int, ...]] = None
    window: int = Config.WINDOW
    windows: Tuple[int, ...] = Config.WINDOW_SENSITIVITY
    freeze_at_activation: bool = False
    population_size: int = Config.PSRO_POPULATION
    oracle_episodes: int = Config.PSRO_ORACLE_EPISODES
    diagnostics: bool = False
    trace_window: int = Config.TRACE_WINDOW
    track_attractor: bool = False
    track_recovery: bool = False
    capture_profile: bool = False
    workers: int = Config.WORKERS
    progress: bool = False

    def __post_init__(self):
        game = get_game(self.game)
        object.__setattr__(self, "sharing", Sharing(self.sharing))
        object.__setattr__(self, "rules", tuple(self.rules))
        object.__setattr__(self, "seeds", tuple(self.seeds))
        if self.episodes < 1:
            raise InvalidConfigError("episodes must be positive")
        if not self.seeds:
            raise InvalidConfigError("at least one seed is required")
        if self.window < 1 or self.trace_window < 1:
            raise InvalidConfigError("windows must be positive")
        if self.chance_seeds is not None and len(self.chance_seeds) != len(self.seeds):
            raise InvalidConfigError("chance_seeds must pair one-to-one with seeds")
        validate_rules(game, self.rules)
        if self.sharing is Sharing.FIXED_OPPONENT:
            if self.opponent_profile is None:
                raise MissingPolicyError("fixed-opponent play needs an opponent profile")
            if game.enumerable:
                missing = enumerate_info_sets(game, 1) - set(self.opponent_profile)
                if missing:
                    raise MissingPolicyError(f"opponent profile misses {len(missing)} information sets")

    @property
    def game_spec(self) -> GameSpec:
        return get_game(self.game)

    def with_updates(self, **changes) -> "MatchConfig":
        return replace(self, **changes)


class Streams(NamedTuple):
    chance: np.random.Generator
    policy: np.random.Generator
    mask: np.random.Generator
    init: np.random.SeedSequence


def seed_streams(seed: int, chance_seed: Optional[int] = None) -> Streams:
    """
    Independent streams for chance, policy draws, stochastic masks and initialization.

    A separate `chance_seed` replaces only the chance stream; with
    chance_seed == seed the streams equal the single-seed ones.
    """
    chance_ss, policy_ss, mask_ss, init_ss = np.random.SeedSequence(seed).spawn(4)
    if chance_seed is not None:
        chance_ss = np.random.SeedSequence(chance_seed).spawn(1)[0]
    return Streams(np.random.default_rng(chance_ss), np.random.default_rng(policy_ss),
                   np.random.default_rng(mask_ss), init_ss)


@lru_cache(maxsize=16)
def _roots(game: GameSpec):
    starts = game.initial_states()
    return [s for s, _ in starts], np.array([p for _, p in starts])


def build_seats(config: MatchConfig, game: GameSpec, init: np.random.SeedSequence) -> Tuple[Learner, Learner]:
    """The learners controlling seat 0 and seat 1 (the same object under shared play)."""
    init0, init1, init_pop = init.spawn(3)
    seat0 = build_agent(game, config.agent, init_seed_from(init0))
    if config.sharing is Sharing.SHARED:
        return seat0, seat0
    opponent = config.opponent_agent or config.agent
    if config.sharing is Sharing.SEPARATE:
        return seat0, build_agent(game, opponent, init_seed_from(init1))
    if config.sharing is Sharing.FIXED_OPPONENT:
        return seat0, ProfileAgent(config.opponent_profile)
    return seat0, PopulationOpponent(opponent, config.population_size, config.oracle_episodes,
                                     seed=init_seed_from(init_pop))


def play_episode(game: GameSpec, seats: Sequence[Learner], episode: int, streams: Streams,
                 rules: Optional[RuleSet] = None, seed: int = 0, phase: Phase = Phase.PRE,
                 diagnostics: bool = False) -> EpisodeRecord:
    """
    Sample one full game and dispatch the terminal returns.

    Args:
        game: The game
        seats: Learner for seat 0 and seat 1
        episode: Episode index (passed to the learners)
        streams: Per-seed rng streams
        rules: Active mask rules, or None when the mask is off
        seed: Seed label for the record
        phase: Phase label for the record
        diagnostics: Also record policy entropy and q-gap at contingent decisions

    Returns:
        EpisodeRecord
    """
    states, probs = _roots(game)
    state = states[int(streams.chance.choice(len(states), p=probs))]
    steps: Tuple[List[Step], List[Step]] = ([], [])
    entropies: List[float] = []
    gaps: List[float] = []

    while not state.is_terminal:
        if state.is_chance:
            outcomes = game.chance_outcomes(state)
            pick = int(streams.chance.choice(len(outcomes), p=[p for _, p in outcomes]))
            state = game.apply_chance(state, outcomes[pick][0])
            continue
        player = state.to_move
        key = game.info_key(state)
        legal = game.legal_actions(state)
        if rules:
            legal = rules(key, legal)
        agent = seats[player]
        if diagnostics and len(legal) > 1:
            entropies.append(agent.policy_entropy(key, legal))
            gap = agent.q_gap(key, legal)
            if gap is not None:
                gaps.append(gap)
        decision = agent.act(key, legal, streams.policy)
        steps[player].append(Step(key, decision.action, legal, decision.prob))
        state = game.next_state(state, decision.action)

    u0, u1 = state.utilities
    seats[0].end_episode(0, steps[0], u0, episode)
    seats[1].end_episode(1, steps[1], u1, episode)
    return EpisodeRecord(
        episode=episode,
        seed=seed,
        reward_p0=u0,
        reward_p1=u1,
        phase=phase,
        mask_active=rules is not None,
        chance=repr(state.chance_assignment),
        history="".join(game.action_codes[a] for a in state.action_sequence),
        policy_entropy=float(np.mean(entropies)) if entropies else None,
        q_gap=float(np.mean(gaps)) if gaps else None,
    )


def played_profile(game: GameSpec, seats: Sequence[Learner]) -> PolicyProfile:
    """Behaviour profile of both seats at every information set of the unperturbed tree."""
    tree = build_tree(game)
    return {
        key: dict(zip(actions, map(float, seats[key.player].action_probabilities(key, actions))))
        for key, actions in zip(tree.infoset_keys, tree.infoset_actions)
    }


def phase_means(records: Sequence[EpisodeRecord], window: int = Config.WINDOW) -> Dict[str, float]:
    """P0 mean reward over the final `window` episodes of each phase present."""
    by_phase: Dict[str, List[float]] = {}
    for rec in records:
        by_phase.setdefault(Phase(rec.phase).value, []).append(rec.reward_p0)
    return {phase: float(np.mean(values[-window:])) for phase, values in by_phase.items()}


class AttractorCheck:
    """Compares the responder's greedy policy with the exact best-response argmax sets."""

    def __init__(self, game: GameSpec, rules: RuleSet):
        forced, profile = forced_profile(game, rules)
        self.responder = 1 - forced
        tree = build_tree(game, rules)
        sets = best_response_action_sets(game, rules, profile, self.responder)
        self.targets = [(key, tree.infoset_actions[tree.index[key]], actions) for key, actions in sets.items()]

    def satisfied(self, agent: Learner) -> bool:
        return all(agent.greedy_action(key, legal) in best for key, legal, best in self.targets)

    @staticmethod
    def applicable(game: GameSpec, rules: Optional[RuleSet]) -> bool:
        if not rules or not game.enumerable or len(rules.target_players) != 1:
            return False
        player = next(iter(rules.target_players))
        return compute_cac(game, rules, player).cac_decision_points == 0


@dataclass
class SeedResult:
    seed: int
    records: List[EpisodeRecord]
    phase_means: Dict[str, float]
    window_means: Dict[int, Dict[str, float]]
    chance_seed: Optional[int] = None
    attractor_episodes: Optional[int] = None
    recovery_episodes: Optional[int] = None
    exploitability: List[Tuple[int, float]] = field(default_factory=list)
    final_profile: Optional[PolicyProfile] = None


def run_seed(config: MatchConfig, seed: int, chance_seed: Optional[int] = None) -> SeedResult:
    """Play every episode of one seed, strictly in order."""
    game = config.game_spec
    streams = seed_streams(seed, chance_seed)
    seats = build_seats(config, game, streams.init)
    learners = [seats[0]] if seats[0] is seats[1] else list(seats)
    rules = as_ruleset(config.rules)
    schedule = config.schedule

    attractor = AttractorCheck(game, rules) if config.track_attractor and AttractorCheck.applicable(game, rules) else None
    recovering = config.track_recovery and game.enumerable and schedule.deactivate_at is not None
    snapshots = config.diagnostics and game.enumerable and game.zero_sum
    pre_value: Optional[float] = None
    attractor_episodes = recovery_episodes = None
    exploit: List[Tuple[int, float]] = []
    frozen = False
    records: List[EpisodeRecord] = []

    for ep in range(config.episodes):
        phase = phase_of(ep, schedule)
        active = bool(rules) and schedule_active(ep, schedule, streams.mask)
        if recovering and ep == schedule.activate_at:
            pre_value = expected_values(game, played_profile(game, seats))[0]
        if active and config.freeze_at_activation and not frozen:
            for learner in learners:
                learner.freeze()
            frozen = True
        for learner in learners:
            learner.begin_episode(ep)

        records.append(play_episode(game, seats, ep, streams, rules if active else None,
                                    seed, phase, config.diagnostics))

        if attractor is not None and attractor_episodes is None and active and attractor.satisfied(seats[attractor.responder]):
            attractor_episodes = ep - schedule.activate_at + 1
        if recovering and pre_value is not None and recovery_episodes is None and phase is Phase.RESTORED:
            # recovered once P0 is back within tolerance of its value at activation, or above it
            value = expected_values(game, played_profile(game, seats))[0]
            if value >= pre_value - Config.TOLERANCES["tabular"]:
                recovery_episodes = ep - schedule.deactivate_at + 1
        if snapshots and (ep + 1) % config.trace_window == 0:
            exploit.append((ep + 1, exploitability(game, played_profile(game, seats), rules if active else None)))

    for learner in learners:
        learner.end_match()

    final_profile = None
    if config.capture_profile and game.enumerable:
        final_profile = played_profile(game, seats)

    return SeedResult(
        seed=seed,
        records=records,
        phase_means=phase_means(records, config.window),
        window_means={w: phase_means(records, w) for w in config.windows},
        chance_seed=chance_seed,
        attractor_episodes=attractor_episodes,
        recovery_episodes=recovery_episodes,
        exploitability=exploit,
        final_profile=final_profile,
    )


def _run_job(args) -> SeedResult:
    config, seed, chance_seed = args
    return run_seed(config, seed, chance_seed)


@dataclass
class MatchResult:
    config: MatchConfig
    seeds: List[SeedResult]

    def per_seed(self, phase: Phase, window: Optional[int] = None) -> np.ndarray:
        """One phase mean per seed, at the configured window or a sensitivity window."""
        key = Phase(phase).value
        if window is None:
            return np.array([s.phase_means[key] for s in self.seeds])
        return np.array([s.window_means[window][key] for s in self.seeds])

    @property
    def records(self) -> List[EpisodeRecord]:
        return [rec for s in self.seeds for rec in s.records]


def run_match(config: MatchConfig) -> MatchResult:
    """
    Run every seed of a condition.

    Seeds are independent; with more than one worker they run in a process
    pool, and results always come back in seed order.
    """
    chance = config.chance_seeds or (None,) * len(config.seeds)
    jobs = [(config, seed, c) for seed, c in zip(config.seeds, chance)]
    desc = f"{config.game} {config.agent.algorithm}"
    if config.workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=config.workers) as pool:
            results = list(tqdm(pool.map(_run_job, jobs), total=len(jobs), desc=desc,
                                disable=not config.progress, leave=False))
    else:
        results = [_run_job(job) for job in tqdm(jobs, desc=desc, disable=not config.progress, leave=False)]
    return MatchResult(config, results)


def episodes_to_attractor(result: MatchResult) -> List[Optional[int]]:
    return [s.attractor_episodes for s in result.seeds]


def episodes_to_recovery(result: MatchResult) -> List[Optional[int]]:
    """Per seed, restored episodes until the played value is back at its activation level (None if never)."""
    return [s.recovery_episodes for s in result.seeds]


def window_sensitivity(result: MatchResult) -> Dict[int, Dict[str, float]]:
    """Seed-averaged phase means for every sensitivity window."""
    table: Dict[int, Dict[str, float]] = {}
    for window in result.config.windows:
        phases = result.seeds[0].window_means[window].keys()
        table[window] = {p: float(np.mean([s.window_means[window][p] for s in result.seeds])) for p in phases}
    return table


if __name__ == "__main__":
    from modules.game_core import get_game as _get

    kuhn = _get("kuhn")
    config = MatchConfig(game="kuhn", rules=(MaskRule.remove(kuhn, ["bet"]),),
                         schedule=Schedule(activate_at=2_000), episodes=4_000, seeds=(0, 1), window=1_000)
    result = run_match(config)
    print(f"📊 pre {result.per_seed(Phase.PRE).mean():+.3f}  post {result.per_seed(Phase.POST).mean():+.3f}")
