"""Institutional feature predicates and the hypercube game space.

Each vertex of the feature hypercube (stability, efficiency, fairness,
and optionally inclusiveness) is realized by the first 2x2 integer
matrix, in a fixed lexicographic enumeration, that satisfies exactly its
own feature bits.  Efficiency is a space-level construction: efficient
games carry a multiplied total payoff relative to the base total shared
by all non-efficient games.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Iterator

from .games import BimatrixGame, Payoff, payoff

FEATURE_NAMES = ("stability", "efficiency", "fairness", "inclusiveness")

STABILITY, EFFICIENCY, FAIRNESS, INCLUSIVENESS = 0, 1, 2, 3


class UnsatisfiableConfigError(Exception):
    """No matrix inside the configured bounds realizes a vertex."""

    def __init__(self, vector: "FeatureVector", message: str):
        self.vector = vector
        super().__init__(f"vertex {vector}: {message}")


class NotInSpaceError(Exception):
    """A game's payoff total matches neither the base nor the efficient target."""


@dataclass(frozen=True, order=True)
class FeatureVector:
    """Ordered feature bits, rendered as a binary string like '110'."""

    bits: tuple[int, ...]

    def __post_init__(self) -> None:
        if not self.bits or any(b not in (0, 1) for b in self.bits):
            raise ValueError(f"feature bits must be 0/1, got {self.bits}")

    @classmethod
    def from_string(cls, s: str) -> "FeatureVector":
        return cls(tuple(int(ch) for ch in s))

    def __str__(self) -> str:
        return "".join(str(b) for b in self.bits)

    def __len__(self) -> int:
        return len(self.bits)

    @property
    def stability(self) -> int:
        return self.bits[STABILITY]

    @property
    def efficiency(self) -> int:
        return self.bits[EFFICIENCY]

    @property
    def fairness(self) -> int:
        return self.bits[FAIRNESS]

    def popcount(self) -> int:
        return sum(self.bits)

    def flipped(self, index: int) -> "FeatureVector":
        bits = list(self.bits)
        bits[index] ^= 1
        return FeatureVector(tuple(bits))

    def neighbors(self) -> list["FeatureVector"]:
        """Hamming-distance-1 vertices, in bit-index order."""
        return [self.flipped(i) for i in range(len(self.bits))]


def layer(fv: FeatureVector) -> int:
    """1-based layer of the hypercube: number of set bits plus one."""
    return fv.popcount() + 1


def all_vectors(feature_count: int) -> list[FeatureVector]:
    """All 2^k vertices in binary ascending order (000, 001, ...)."""
    return [
        FeatureVector.from_string(format(i, f"0{feature_count}b"))
        for i in range(2**feature_count)
    ]


class ComparisonPair:
    """An edge of the hypercube: two games differing in one feature bit."""

    __slots__ = ("low", "high")

    def __init__(self, low: FeatureVector, high: FeatureVector):
        diff = [i for i in range(len(low.bits)) if low.bits[i] != high.bits[i]]
        if len(diff) != 1 or high.bits[diff[0]] != 1:
            raise ValueError(f"not a low/high Hamming-1 pair: {low}, {high}")
        self.low = low
        self.high = high

    @property
    def feature(self) -> int:
        """Index of the bit the pair differs on."""
        return next(i for i in range(len(self.low.bits)) if self.low.bits[i] != self.high.bits[i])

    def __eq__(self, other) -> bool:
        return isinstance(other, ComparisonPair) and (self.low, self.high) == (other.low, other.high)

    def __hash__(self) -> int:
        return hash((self.low, self.high))

    def __repr__(self) -> str:
        return f"ComparisonPair({self.low}, {self.high})"


@dataclass(frozen=True)
class SpaceConfig:
    feature_count: int = 3
    efficiency_multiplier: Fraction = Fraction(2)
    payoff_bound: int = 8
    base_total: int = 16
    rng_seed: int = 0
    search_order: str = "lex-row-major"
    unstable_equilibria: int = 2  # pure equilibria required of non-stable games (0 or 2)

    def __post_init__(self) -> None:
        if self.feature_count not in (3, 4):
            raise ValueError("feature_count must be 3 or 4")
        mult = Fraction(self.efficiency_multiplier)
        object.__setattr__(self, "efficiency_multiplier", mult)
        if mult <= 1:
            raise ValueError("efficiency_multiplier must exceed 1")
        if self.payoff_bound < 4:
            raise ValueError("payoff_bound must be at least 4")
        if not 0 < self.base_total <= 8 * self.payoff_bound:
            raise ValueError("base_total unreachable within payoff_bound")
        if self.unstable_equilibria not in (0, 2):
            raise ValueError("unstable_equilibria must be 0 or 2")

    @property
    def efficient_total(self) -> int:
        return round(self.efficiency_multiplier * self.base_total)

    @property
    def efficient_bound(self) -> int:
        # ceil(multiplier * payoff_bound): efficient entries may exceed the base bound
        m = self.efficiency_multiplier * self.payoff_bound
        return -(-m.numerator // m.denominator)


@dataclass
class GameSpace:
    config: SpaceConfig
    games: dict[FeatureVector, BimatrixGame] = field(default_factory=dict)

    def game(self, fv: FeatureVector | str) -> BimatrixGame:
        if isinstance(fv, str):
            fv = FeatureVector.from_string(fv)
        return self.games[fv]

    def labels(self) -> list[FeatureVector]:
        return sorted(self.games)


def pure_nash_equilibria(game: BimatrixGame) -> frozenset[tuple[int, int]]:
    """All cells where neither player has a strictly better unilateral deviation."""
    cells = game.cells
    found = set()
    for a1 in (0, 1):
        for a2 in (0, 1):
            if cells[a1][a2].u1 >= cells[1 - a1][a2].u1 and cells[a1][a2].u2 >= cells[a1][1 - a2].u2:
                found.add((a1, a2))
    return frozenset(found)


def strict_pure_nash_equilibria(game: BimatrixGame) -> frozenset[tuple[int, int]]:
    cells = game.cells
    found = set()
    for a1 in (0, 1):
        for a2 in (0, 1):
            if cells[a1][a2].u1 > cells[1 - a1][a2].u1 and cells[a1][a2].u2 > cells[a1][1 - a2].u2:
                found.add((a1, a2))
    return frozenset(found)


def is_stable(game: BimatrixGame) -> bool:
    """Stable means a single pure Nash equilibrium."""
    return len(pure_nash_equilibria(game)) == 1


def is_fair(game: BimatrixGame) -> bool:
    """Fair means both players' payoffs sum to the same total over all outcomes."""
    return sum(c.u1 for c in game.flat()) == sum(c.u2 for c in game.flat())


def is_efficient(game: BimatrixGame, config: SpaceConfig) -> bool:
    total = game.total()
    if total == config.base_total:
        return False
    if total == config.efficient_total:
        return True
    raise NotInSpaceError(
        f"total {total} matches neither base {config.base_total} "
        f"nor efficient {config.efficient_total}"
    )


def is_inclusive(game: BimatrixGame) -> bool:
    """Inclusive means only a single outcome leaves both players with nothing."""
    return sum(1 for c in game.flat() if c.u1 == 0 and c.u2 == 0) == 1


def has_zero_cell(game: BimatrixGame) -> bool:
    return any(c.u1 == 0 and c.u2 == 0 for c in game.flat())


def _enumerate_flat(total: int, bound: int) -> Iterator[tuple[int, ...]]:
    """8-tuples with the given sum, entries in [0, bound], lexicographic ascending."""

    def rec(prefix: list[int], remaining: int, slots: int) -> Iterator[tuple[int, ...]]:
        if slots == 1:
            if 0 <= remaining <= bound:
                yield tuple(prefix + [remaining])
            return
        lo = max(0, remaining - bound * (slots - 1))
        hi = min(bound, remaining)
        for v in range(lo, hi + 1):
            yield from rec(prefix + [v], remaining - v, slots - 1)

    yield from rec([], total, 8)


def _game_from_flat(game_id: str, flat: tuple[int, ...]) -> BimatrixGame:
    p = [Payoff(flat[i], flat[i + 1]) for i in range(0, 8, 2)]
    return BimatrixGame(game_id, ((p[0], p[1]), (p[2], p[3])))


def _equilibria_opposed(game: BimatrixGame, eqs: frozenset[tuple[int, int]]) -> bool:
    """Each player strictly prefers a different one of the two equilibria.

    Opposed interests keep miscoordination live: with a commonly preferred
    cell, play in a two-equilibrium game collapses onto it.
    """
    (c1, c2) = sorted(eqs)
    p1a, p1b = payoff(game, *c1).u1, payoff(game, *c2).u1
    p2a, p2b = payoff(game, *c1).u2, payoff(game, *c2).u2
    return (p1a > p1b and p2b > p2a) or (p1b > p1a and p2a > p2b)


def _vertex_ok(game: BimatrixGame, fv: FeatureVector, config: SpaceConfig) -> bool:
    if not has_zero_cell(game):
        return False
    if is_fair(game) != bool(fv.fairness):
        return False
    weak = pure_nash_equilibria(game)
    if weak != strict_pure_nash_equilibria(game):
        return False  # ties at equilibrium-relevant cells keep counts ambiguous
    if fv.stability:
        if len(weak) != 1:
            return False
        cell = next(iter(weak))
        if payoff(game, *cell) == Payoff(0, 0):
            return False
    else:
        if len(weak) != config.unstable_equilibria:
            return False
        if len(weak) == 2:
            if not _equilibria_opposed(game, weak):
                return False
            # Miscoordination pays nothing: non-equilibrium cells are (0,0),
            # unless an inclusiveness bit demands a consolation cell.
            inclusive = len(fv) > INCLUSIVENESS and fv.bits[INCLUSIVENESS] == 1
            if not inclusive:
                for a1 in (0, 1):
                    for a2 in (0, 1):
                        if (a1, a2) not in weak and payoff(game, a1, a2) != Payoff(0, 0):
                            return False
    if len(fv) > INCLUSIVENESS and is_inclusive(game) != bool(fv.bits[INCLUSIVENESS]):
        return False
    return True


def _search_vertex(fv: FeatureVector, config: SpaceConfig, total: int, bound: int) -> BimatrixGame:
    for flat in _enumerate_flat(total, bound):
        game = _game_from_flat(str(fv), flat)
        if _vertex_ok(game, fv, config):
            return game
    raise UnsatisfiableConfigError(
        fv, f"no matrix with total {total} and entries <= {bound} satisfies the features"
    )


def generate_space(config: SpaceConfig) -> GameSpace:
    """Deterministically realize every feature combination as a concrete game.

    Non-efficient vertices are searched at the base total.  Efficient
    vertices reuse the matching base matrix scaled by the multiplier when
    it is integral (scaling preserves equilibria, fairness, and zero
    cells); otherwise they are searched directly at the scaled total.
    """
    space = GameSpace(config)
    mult = config.efficiency_multiplier
    for fv in all_vectors(config.feature_count):
        if not fv.efficiency:
            space.games[fv] = _search_vertex(fv, config, config.base_total, config.payoff_bound)
    for fv in all_vectors(config.feature_count):
        if fv.efficiency:
            if mult.denominator == 1:
                base = space.games[fv.flipped(EFFICIENCY)]
                space.games[fv] = base.scaled(int(mult), game_id=str(fv))
            else:
                space.games[fv] = _search_vertex(
                    fv, config, config.efficient_total, config.efficient_bound
                )
    return space


@dataclass
class VertexReport:
    vector: FeatureVector
    checks: dict[str, bool]

    @property
    def ok(self) -> bool:
        return all(self.checks.values())


@dataclass
class SpaceReport:
    vertices: list[VertexReport]

    @property
    def ok(self) -> bool:
        return all(v.ok for v in self.vertices)

    @property
    def failures(self) -> list[VertexReport]:
        return [v for v in self.vertices if not v.ok]

    def lines(self) -> list[str]:
        out = []
        for v in self.vertices:
            status = "ok" if v.ok else "FAIL " + ",".join(k for k, r in v.checks.items() if not r)
            out.append(f"{v.vector}  {status}")
        return out


def verify_space(space: GameSpace) -> SpaceReport:
    """Re-evaluate every predicate for every vertex; failures are data."""
    config = space.config
    vertices = []
    for fv in sorted(space.games):
        game = space.games[fv]
        checks: dict[str, bool] = {}
        try:
            checks["efficiency"] = is_efficient(game, config) == bool(fv.efficiency)
        except NotInSpaceError:
            checks["efficiency"] = False
        checks["stability"] = is_stable(game) == bool(fv.stability)
        checks["fairness"] = is_fair(game) == bool(fv.fairness)
        checks["zero_cell"] = has_zero_cell(game)
        bound = config.efficient_bound if fv.efficiency else config.payoff_bound
        checks["payoff_bound"] = all(
            0 <= c.u1 <= bound and 0 <= c.u2 <= bound for c in game.flat()
        )
        if fv.stability:
            eqs = pure_nash_equilibria(game)
            checks["equilibrium_nonzero"] = len(eqs) == 1 and payoff(
                game, *next(iter(eqs))
            ) != Payoff(0, 0)
        if len(fv) > INCLUSIVENESS:
            checks["inclusiveness"] = is_inclusive(game) == bool(fv.bits[INCLUSIVENESS])
        vertices.append(VertexReport(fv, checks))
    return SpaceReport(vertices)


def hypercube_pairs(feature_count: int) -> list[ComparisonPair]:
    """All Hamming-1 (low, high) pairs, ordered by low label then flipped bit."""
    pairs = []
    for fv in all_vectors(feature_count):
        for i in range(feature_count):
            if fv.bits[i] == 0:
                pairs.append(ComparisonPair(fv, fv.flipped(i)))
    pairs.sort(key=lambda p: (str(p.low), p.feature))
    return pairs


def comparison_pairs(space: GameSpace) -> list[ComparisonPair]:
    return hypercube_pairs(space.config.feature_count)


def space_to_record(space: GameSpace) -> dict:
    from .games import game_to_record

    cfg = space.config
    return {
        "config": {
            "feature_count": cfg.feature_count,
            "efficiency_multiplier": str(cfg.efficiency_multiplier),
            "payoff_bound": cfg.payoff_bound,
            "base_total": cfg.base_total,
            "rng_seed": cfg.rng_seed,
            "search_order": cfg.search_order,
            "unstable_equilibria": cfg.unstable_equilibria,
        },
        "games": {str(fv): game_to_record(space.games[fv]) for fv in sorted(space.games)},
    }


def space_from_record(record: dict) -> GameSpace:
    from .games import game_from_record

    c = record["config"]
    config = SpaceConfig(
        feature_count=int(c["feature_count"]),
        efficiency_multiplier=Fraction(c["efficiency_multiplier"]),
        payoff_bound=int(c["payoff_bound"]),
        base_total=int(c["base_total"]),
        rng_seed=int(c["rng_seed"]),
        search_order=str(c["search_order"]),
        unstable_equilibria=int(c.get("unstable_equilibria", 2)),
    )
    games = {
        FeatureVector.from_string(label): game_from_record(rec)
        for label, rec in record["games"].items()
    }
    return GameSpace(config, games)


def save_space(space: GameSpace, path: Path | str) -> None:
    Path(path).write_text(json.dumps(space_to_record(space), indent=2, sort_keys=True) + "\n")


def load_space(path: Path | str) -> GameSpace:
    return space_from_record(json.loads(Path(path).read_text()))
