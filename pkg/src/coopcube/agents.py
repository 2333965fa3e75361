"""Simulated players, between-game preference models, and hypercube walks.

Within-game policies pick canonical actions from beliefs about the
opposing role's behavior; the session simulator mirrors the staged human
protocol (two fixed games, a choice, then the chosen game) against a
shadow opponent running the same policy.  Walks move through the feature
hypercube one bit at a time under a preference model, which is how the
attractor and lock-in structure of a space is probed.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from typing import Mapping, NamedTuple, Sequence

from .analysis import Estimate, PreferenceRecord, Trial
from .games import ALL_TRANSFORMATIONS, Action, BimatrixGame, Role, Transformation, payoff
from .seeding import child_rng
from .space import (
    FEATURE_NAMES,
    ComparisonPair,
    FeatureVector,
    GameSpace,
    comparison_pairs,
    is_stable,
    pure_nash_equilibria,
)

UNIFORM_RANDOM = "uniform"
MYOPIC_BEST_RESPONSE = "myopic"
FICTITIOUS_PLAY = "fictitious"
EQUILIBRIUM_SEEKER = "equilibrium"

POLICY_KINDS = (UNIFORM_RANDOM, MYOPIC_BEST_RESPONSE, FICTITIOUS_PLAY, EQUILIBRIUM_SEEKER)

LEXICOGRAPHIC = "lexicographic"
EXPERIENCED_PAYOFF = "experienced"
EMPIRICAL_TABLE = "empirical"

MODEL_KINDS = (LEXICOGRAPHIC, EXPERIENCED_PAYOFF, EMPIRICAL_TABLE)


class MissingExperienceError(Exception):
    pass


class MissingPairProbabilityError(Exception):
    pass


@dataclass(frozen=True)
class AgentPolicy:
    kind: str = EQUILIBRIUM_SEEKER
    epsilon: float = 0.05
    pseudocount: float = 1.0
    tie_break: str = "random"  # or "first"

    def __post_init__(self) -> None:
        if self.kind not in POLICY_KINDS:
            raise ValueError(f"unknown policy kind {self.kind}")
        if not 0.0 <= self.epsilon <= 1.0:
            raise ValueError("epsilon must be in [0, 1]")
        if self.pseudocount < 0:
            raise ValueError("pseudocount must be >= 0")


class BeliefState:
    """Per-game counts of observed actions, split by the acting role."""

    def __init__(self) -> None:
        self._counts: dict[tuple[str, Role], list[int]] = {}

    def observe(self, label: str, actor: Role, action: Action) -> None:
        counts = self._counts.setdefault((label, actor), [0, 0])
        counts[action] += 1

    def counts(self, label: str, actor: Role) -> tuple[int, int]:
        c = self._counts.get((label, actor), [0, 0])
        return (c[0], c[1])


class RoundView(NamedTuple):
    """What a player is given for one round."""

    game: BimatrixGame  # canonical orientation
    label: str
    role: Role
    transformation: Transformation
    board: BimatrixGame  # as displayed
    chooses: str


def _own_payoff(game: BimatrixGame, role: Role, own: Action, other: Action) -> int:
    if role is Role.PLAYER1:
        return payoff(game, own, other).u1
    return payoff(game, other, own).u2


def _best_response(
    game: BimatrixGame,
    role: Role,
    p_other_1: float,
    rng: random.Random,
    tie_break: str,
) -> Action:
    eu = [
        (1.0 - p_other_1) * _own_payoff(game, role, a, 0) + p_other_1 * _own_payoff(game, role, a, 1)
        for a in (0, 1)
    ]
    if eu[0] == eu[1]:
        if tie_break == "first":
            return 0
        return rng.randrange(2)
    return 0 if eu[0] > eu[1] else 1


def act(policy: AgentPolicy, view: RoundView, beliefs: BeliefState, rng: random.Random) -> Action:
    """Pick a canonical action for the view's role."""
    if policy.epsilon > 0 and rng.random() < policy.epsilon:
        return rng.randrange(2)
    if policy.kind == UNIFORM_RANDOM:
        return rng.randrange(2)

    opponent = view.role.other
    n0, n1 = beliefs.counts(view.label, opponent)

    if policy.kind == MYOPIC_BEST_RESPONSE:
        pc = policy.pseudocount
        p1 = (n1 + pc) / (n0 + n1 + 2 * pc) if (n0 + n1 + 2 * pc) > 0 else 0.5
        return _best_response(view.game, view.role, p1, rng, policy.tie_break)

    if policy.kind == FICTITIOUS_PLAY:
        total = n0 + n1
        p1 = n1 / total if total else 0.5
        return _best_response(view.game, view.role, p1, rng, policy.tie_break)

    if policy.kind == EQUILIBRIUM_SEEKER:
        if is_stable(view.game):
            (eq,) = pure_nash_equilibria(view.game)
            return eq[0] if view.role is Role.PLAYER1 else eq[1]
        total = n0 + n1
        p1 = n1 / total if total else 0.5
        return _best_response(view.game, view.role, p1, rng, policy.tie_break)

    raise AssertionError(f"unhandled policy {policy.kind}")


def table_entry(p: float, ci_low: float | None = None, ci_high: float | None = None) -> Estimate:
    """An empirical-table cell; a bare probability gets a degenerate CI."""
    if ci_low is None:
        ci_low = p
    if ci_high is None:
        ci_high = p
    return Estimate(p, ci_low, ci_high, 0)


@dataclass(frozen=True)
class PreferenceModel:
    kind: str = LEXICOGRAPHIC
    order: tuple[str, ...] = FEATURE_NAMES[:3]
    table: Mapping[tuple[str, str], Estimate] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.kind not in MODEL_KINDS:
            raise ValueError(f"unknown preference model {self.kind}")
        unknown = set(self.order) - set(FEATURE_NAMES)
        if unknown:
            raise ValueError(f"unknown features in order: {sorted(unknown)}")
        if len(set(self.order)) != len(self.order):
            raise ValueError("order must not repeat features")

    def probability(self, candidate: FeatureVector, incumbent: FeatureVector) -> Estimate:
        """P(choose candidate over incumbent), flipping stored pairs as needed."""
        key = (str(incumbent), str(candidate))
        if key in self.table:
            return self.table[key]
        reverse = (str(candidate), str(incumbent))
        if reverse in self.table:
            e = self.table[reverse]
            return Estimate(1.0 - e.value, 1.0 - e.ci_high, 1.0 - e.ci_low, e.n)
        raise MissingPairProbabilityError(f"no probability for {candidate} vs {incumbent}")


def _lexicographic_winner(
    model: PreferenceModel, a: FeatureVector, b: FeatureVector
) -> FeatureVector | None:
    for name in model.order:
        i = FEATURE_NAMES.index(name)
        if i >= len(a.bits):
            continue
        if a.bits[i] != b.bits[i]:
            return a if a.bits[i] == 1 else b
    return None


def prefer(
    model: PreferenceModel,
    pair: ComparisonPair,
    space: GameSpace,
    experience: Mapping[str, Sequence[float]] | None,
    rng: random.Random,
) -> FeatureVector:
    """Choose one game of a comparison pair under the model."""
    for fv in (pair.low, pair.high):
        if fv not in space.games:
            raise KeyError(f"{fv} not in space")

    if model.kind == LEXICOGRAPHIC:
        winner = _lexicographic_winner(model, pair.low, pair.high)
        if winner is None:  # order did not cover the differing bit
            return pair.high if rng.random() < 0.5 else pair.low
        return winner

    if model.kind == EXPERIENCED_PAYOFF:
        experience = experience or {}
        lo, hi = str(pair.low), str(pair.high)
        for label in (lo, hi):
            if not experience.get(label):
                raise MissingExperienceError(f"no payoff history for {label}")
        mean_lo = sum(experience[lo]) / len(experience[lo])
        mean_hi = sum(experience[hi]) / len(experience[hi])
        if mean_lo == mean_hi:
            return pair.high if rng.random() < 0.5 else pair.low
        return pair.high if mean_hi > mean_lo else pair.low

    if model.kind == EMPIRICAL_TABLE:
        p = model.probability(pair.high, pair.low).value
        return pair.high if rng.random() < p else pair.low

    raise AssertionError(f"unhandled model {model.kind}")


DRAW = "draw"
STRICT_MAJORITY = "strict_majority"


@dataclass
class WalkResult:
    trajectory: list[FeatureVector]
    attractor: FeatureVector
    steps: int
    absorbed: bool


def _walk_accepts(
    model: PreferenceModel,
    current: FeatureVector,
    neighbor: FeatureVector,
    experience: Mapping[str, Sequence[float]] | None,
    rng: random.Random,
    acceptance: str,
    threshold: float,
) -> bool:
    if model.kind == LEXICOGRAPHIC:
        return _lexicographic_winner(model, neighbor, current) == neighbor
    if model.kind == EXPERIENCED_PAYOFF:
        experience = experience or {}
        cur, new = experience.get(str(current)), experience.get(str(neighbor))
        if not cur or not new:
            return False
        return sum(new) / len(new) > sum(cur) / len(cur)
    try:
        estimate = model.probability(neighbor, current)
    except MissingPairProbabilityError:
        return False  # no evidence, no move
    if acceptance == STRICT_MAJORITY:
        return estimate.ci_low > threshold
    return rng.random() < estimate.value


def run_walk(
    space: GameSpace,
    start: FeatureVector,
    model: PreferenceModel,
    max_steps: int,
    rng: random.Random,
    experience: Mapping[str, Sequence[float]] | None = None,
    acceptance: str = DRAW,
    threshold: float = 0.5,
) -> WalkResult:
    """Move to accepted Hamming-1 neighbors until none is accepted.

    Neighbors are scanned in feature-bit order; the walk takes the first
    accepted one.  Strict-majority acceptance requires the whole stored
    confidence interval of "choose neighbor" to clear the threshold, the
    same bar a path step must clear to count as an advance.
    """
    if start not in space.games:
        raise KeyError(f"start vertex {start} not in space")
    trajectory = [start]
    current = start
    absorbed = False
    while len(trajectory) <= max_steps:
        moved = False
        for neighbor in current.neighbors():
            if _walk_accepts(model, current, neighbor, experience, rng, acceptance, threshold):
                current = neighbor
                trajectory.append(current)
                moved = True
                break
        if not moved:
            absorbed = True
            break
    return WalkResult(trajectory, current, len(trajectory) - 1, absorbed)


@dataclass(frozen=True)
class Condition:
    """A comparison pair shown at one of the 8 choice-screen presentations."""

    condition_id: str
    pair: ComparisonPair
    choice_transformation: Transformation


def conditions_for_space(space: GameSpace) -> list[Condition]:
    """Every pair at every presentation: the full condition grid."""
    out = []
    for pair in comparison_pairs(space):
        for t in ALL_TRANSFORMATIONS:
            out.append(Condition(f"{pair.low}-{pair.high}@{t.value}", pair, t))
    return out


@dataclass
class SessionData:
    trials: list[Trial]
    preference: PreferenceRecord


def _round_action(
    space: GameSpace,
    label: FeatureVector,
    role: Role,
    transformation: Transformation,
    policy: AgentPolicy,
    beliefs: BeliefState,
    rng: random.Random,
) -> Action:
    from .games import viewer_presentation

    game = space.games[label]
    shown = viewer_presentation(game, role, transformation)
    view = RoundView(game, str(label), role, transformation, shown.board, shown.chooses)
    return act(policy, view, beliefs, rng)


def simulate_session(
    space: GameSpace,
    condition: Condition,
    policy: AgentPolicy,
    model: PreferenceModel,
    rounds_per_stage: int,
    rng: random.Random,
    session_id: str = "sim",
    pool_size: int = 6,
) -> SessionData:
    """Run the staged protocol for one simulated participant.

    Each round pairs the participant with one of `pool_size` shadow
    opponents running the same policy, mirroring the asynchronous room
    where every table seats a different stranger.  All agents keep their
    own per-game beliefs; the participant's realized payoffs feed the
    experience used by payoff-based preference models.
    """
    if rounds_per_stage < 1:
        raise ValueError("rounds_per_stage must be >= 1")
    if pool_size < 1:
        raise ValueError("pool_size must be >= 1")
    pair = condition.pair
    own_beliefs = BeliefState()
    pool = [BeliefState() for _ in range(pool_size)]
    experience: dict[str, list[float]] = {str(pair.low): [], str(pair.high): []}
    trials: list[Trial] = []
    clock = 0

    def play_stage(stage: str, label: FeatureVector) -> None:
        nonlocal clock
        game = space.games[label]
        for _ in range(rounds_per_stage):
            role = rng.choice((Role.PLAYER1, Role.PLAYER2))
            transformation = rng.choice(ALL_TRANSFORMATIONS)
            partner = pool[rng.randrange(pool_size)]
            own = _round_action(space, label, role, transformation, policy, own_beliefs, rng)
            other = _round_action(
                space, label, role.other, transformation, policy, partner, rng
            )
            a1, a2 = (own, other) if role is Role.PLAYER1 else (other, own)
            own_beliefs.observe(str(label), role.other, other)
            partner.observe(str(label), role, own)
            cell = payoff(game, a1, a2)
            own_points = cell.u1 if role is Role.PLAYER1 else cell.u2
            experience.setdefault(str(label), []).append(float(own_points))
            trials.append(
                Trial(
                    trial_id=f"{session_id}-t{clock:03d}",
                    session_id=session_id,
                    condition_id=condition.condition_id,
                    game_label=str(label),
                    transformation=transformation.value,
                    role_of_session=role.value,
                    a1=a1,
                    a2=a2,
                    u1=cell.u1,
                    u2=cell.u2,
                    p1_source="agent",
                    p2_source="agent",
                    stage=stage,
                    timestamp=float(clock),
                )
            )
            clock += 1

    play_stage("stage1", pair.low)
    play_stage("stage2", pair.high)
    chosen = prefer(model, pair, space, experience, rng)
    preference = PreferenceRecord(
        session_id=session_id,
        condition_id=condition.condition_id,
        low=str(pair.low),
        high=str(pair.high),
        chosen=str(chosen),
        timestamp=float(clock),
    )
    play_stage("stage4", chosen)
    return SessionData(trials, preference)


def simulate_cohort(
    space: GameSpace,
    conditions: Sequence[Condition],
    n_participants: int,
    policy: AgentPolicy,
    model: PreferenceModel,
    rounds_per_stage: int = 6,
    seed: int = 0,
) -> tuple[list[Trial], list[PreferenceRecord]]:
    """Round-robin-balanced cohort over the conditions, one RNG per session.

    Session RNG streams derive from (seed, participant index), so results
    do not depend on execution order and sessions may run in parallel.
    """
    if not conditions:
        raise ValueError("conditions must be nonempty")
    order = list(conditions)
    child_rng(seed, "assignment").shuffle(order)
    trials: list[Trial] = []
    preferences: list[PreferenceRecord] = []
    for i in range(n_participants):
        condition = order[i % len(order)]
        data = simulate_session(
            space,
            condition,
            policy,
            model,
            rounds_per_stage,
            child_rng(seed, "participant", i),
            session_id=f"sim{i:05d}",
        )
        trials.extend(data.trials)
        preferences.append(data.preference)
    return trials, preferences
