"""Tests for feature predicates, Nash enumeration, and space generation."""

import itertools
import random
from fractions import Fraction

import pytest

from coopcube.games import ALL_TRANSFORMATIONS, BimatrixGame, Payoff, apply_transformation, payoff
from coopcube.space import (
    ComparisonPair,
    FeatureVector,
    NotInSpaceError,
    SpaceConfig,
    UnsatisfiableConfigError,
    all_vectors,
    comparison_pairs,
    generate_space,
    hypercube_pairs,
    is_efficient,
    is_fair,
    is_stable,
    layer,
    load_space,
    pure_nash_equilibria,
    save_space,
    space_from_record,
    space_to_record,
    verify_space,
)

PD = BimatrixGame.from_rows("pd", [[(3, 3), (0, 5)], [(5, 0), (1, 1)]])
PENNIES = BimatrixGame.from_rows("mp", [[(1, 0), (0, 1)], [(0, 1), (1, 0)]])
COORDINATION = BimatrixGame.from_rows("co", [[(2, 2), (0, 0)], [(0, 0), (1, 1)]])


def nash_oracle(game: BimatrixGame) -> set:
    """Literal four-cell deviation check, written independently of the library."""
    out = set()
    for a1 in (0, 1):
        for a2 in (0, 1):
            u1_here = game.cells[a1][a2].u1
            u1_dev = game.cells[1 - a1][a2].u1
            u2_here = game.cells[a1][a2].u2
            u2_dev = game.cells[a1][1 - a2].u2
            if u1_dev > u1_here:
                continue
            if u2_dev > u2_here:
                continue
            out.add((a1, a2))
    return out


def test_nash_prisoners_dilemma():
    assert pure_nash_equilibria(PD) == frozenset({(1, 1)})


def test_nash_matching_pennies_empty():
    assert pure_nash_equilibria(PENNIES) == frozenset()


def test_nash_coordination_two_equilibria():
    assert pure_nash_equilibria(COORDINATION) == frozenset({(0, 0), (1, 1)})


def test_nash_exhaustive_oracle_agreement():
    # All 2x2 bimatrices with payoffs in {0, 1, 2}: 9 cell values ** 4 cells.
    values = list(itertools.product((0, 1, 2), repeat=2))
    count = 0
    for cells in itertools.product(values, repeat=4):
        g = BimatrixGame.from_rows("x", [[cells[0], cells[1]], [cells[2], cells[3]]])
        assert pure_nash_equilibria(g) == frozenset(nash_oracle(g))
        count += 1
    assert count == 6561


def test_is_stable_against_best_response_oracle():
    rng = random.Random(42)
    for _ in range(1000):
        rows = [[(rng.randrange(9), rng.randrange(9)) for _ in range(2)] for _ in range(2)]
        g = BimatrixGame.from_rows("r", rows)
        assert is_stable(g) == (len(nash_oracle(g)) == 1)


def test_is_fair_symmetric_game():
    g = BimatrixGame.from_rows("sym", [[(2, 2), (0, 3)], [(3, 0), (1, 1)]])
    assert is_fair(g)


def test_is_fair_unequal_sums():
    g = BimatrixGame.from_rows("uneq", [[(4, 0), (0, 0)], [(0, 0), (0, 1)]])
    assert not is_fair(g)


def test_is_fair_invariant_under_scaling():
    g = BimatrixGame.from_rows("sym", [[(2, 2), (0, 3)], [(3, 0), (1, 1)]])
    assert is_fair(g.scaled(2)) == is_fair(g)


def test_is_efficient_targets():
    config = SpaceConfig()
    base = BimatrixGame.from_rows("b", [[(0, 0), (1, 4)], [(8, 3), (0, 0)]])
    assert base.total() == 16
    assert not is_efficient(base, config)
    assert is_efficient(base.scaled(2), config)
    with pytest.raises(NotInSpaceError):
        is_efficient(base.scaled(3), config)


def test_efficient_total_with_three_halves_multiplier():
    config = SpaceConfig(efficiency_multiplier=Fraction(3, 2))
    assert config.efficient_total == 24


def test_generate_space_deterministic():
    a = space_to_record(generate_space(SpaceConfig()))
    b = space_to_record(generate_space(SpaceConfig()))
    assert a == b


def test_generated_space_verifies():
    report = verify_space(generate_space(SpaceConfig()))
    assert report.ok
    assert len(report.vertices) == 8


def test_generated_4_feature_space_verifies():
    space = generate_space(SpaceConfig(feature_count=4))
    assert len(space.games) == 16
    assert verify_space(space).ok


def test_fractional_multiplier_space_verifies():
    space = generate_space(SpaceConfig(efficiency_multiplier=Fraction(3, 2)))
    assert verify_space(space).ok
    efficient = space.game("010")
    assert efficient.total() == 24


def test_integral_multiplier_scales_base_game():
    space = generate_space(SpaceConfig())
    base = space.game("000")
    assert space.game("010").cells == base.scaled(2).cells
    assert space.game("011").cells == space.game("001").scaled(2).cells


def test_every_game_has_zero_cell_and_stable_equilibrium_nonzero():
    space = generate_space(SpaceConfig())
    for fv, g in space.games.items():
        assert any(c == Payoff(0, 0) for c in g.flat())
        if fv.stability:
            (eq,) = pure_nash_equilibria(g)
            assert payoff(g, *eq) != Payoff(0, 0)


def test_zero_equilibrium_constraint_unsatisfiable():
    # A best-response cycle would need a strict gain moving into the (0,0)
    # cell, impossible with non-negative payoffs, so 0-equilibrium games
    # cannot coexist with the mandatory zero cell.
    with pytest.raises(UnsatisfiableConfigError):
        generate_space(SpaceConfig(unstable_equilibria=0))


def test_verify_space_flags_corruption():
    space = generate_space(SpaceConfig())
    fv = FeatureVector.from_string("001")
    g = space.games[fv]
    flat = [list(c) for c in g.flat()]
    flat[1][0] += 1  # break the base total and the fairness balance
    space.games[fv] = BimatrixGame.from_rows(str(fv), [flat[:2], flat[2:]])
    report = verify_space(space)
    broken = {str(v.vector): v for v in report.vertices}
    assert not broken["001"].checks["efficiency"]
    assert not broken["001"].checks["fairness"]
    assert all(v.ok for label, v in broken.items() if label != "001")


def test_verify_empty_space():
    from coopcube.space import GameSpace

    assert verify_space(GameSpace(SpaceConfig())).vertices == []


def test_predicates_invariant_under_presentations():
    config = SpaceConfig()
    space = generate_space(config)
    for fv, g in space.games.items():
        stable, fair, total = is_stable(g), is_fair(g), g.total()
        n_eq = len(pure_nash_equilibria(g))
        for t in ALL_TRANSFORMATIONS:
            shown = apply_transformation(g, t)
            assert is_stable(shown) == stable
            assert is_fair(shown) == fair
            assert shown.total() == total
            assert len(pure_nash_equilibria(shown)) == n_eq


def test_stable_games_strict_best_response_converges():
    # From any profile, letting one strictly-improving player move at a time
    # must end at the unique equilibrium.
    space = generate_space(SpaceConfig())
    for fv, g in space.games.items():
        if not fv.stability:
            continue
        (eq,) = pure_nash_equilibria(g)
        for start in itertools.product((0, 1), repeat=2):
            a1, a2 = start
            for _ in range(10):
                if g.cells[1 - a1][a2].u1 > g.cells[a1][a2].u1:
                    a1 = 1 - a1
                elif g.cells[a1][1 - a2].u2 > g.cells[a1][a2].u2:
                    a2 = 1 - a2
                else:
                    break
            assert (a1, a2) == eq


def test_comparison_pairs_counts():
    assert len(hypercube_pairs(3)) == 12
    assert len(hypercube_pairs(4)) == 32
    space = generate_space(SpaceConfig())
    assert len(comparison_pairs(space)) == 12


def test_comparison_pairs_differ_in_one_bit():
    for k in (3, 4):
        for pair in hypercube_pairs(k):
            diffs = [
                i for i in range(k) if pair.low.bits[i] != pair.high.bits[i]
            ]
            assert len(diffs) == 1
            assert pair.high.bits[diffs[0]] == 1


def test_layer_is_popcount_plus_one():
    assert layer(FeatureVector.from_string("000")) == 1
    assert layer(FeatureVector.from_string("110")) == 3
    assert layer(FeatureVector.from_string("111")) == 4
    for fv in all_vectors(4):
        assert layer(fv) == sum(fv.bits) + 1


def test_space_config_validation():
    with pytest.raises(ValueError):
        SpaceConfig(feature_count=5)
    with pytest.raises(ValueError):
        SpaceConfig(efficiency_multiplier=Fraction(1))
    with pytest.raises(ValueError):
        SpaceConfig(payoff_bound=3)
    with pytest.raises(ValueError):
        SpaceConfig(payoff_bound=4, base_total=40)  # 8 entries of 4 cap at 32
    with pytest.raises(ValueError):
        SpaceConfig(unstable_equilibria=1)


def test_verify_space_checks_payoff_bound():
    space = generate_space(SpaceConfig())
    fv = FeatureVector.from_string("100")
    g = space.games[fv]
    flat = [list(c) for c in g.flat()]
    flat[3][0] = 11  # past the base bound of 8
    space.games[fv] = BimatrixGame.from_rows(str(fv), [flat[:2], flat[2:]])
    report = verify_space(space)
    broken = {str(v.vector): v for v in report.vertices}
    assert not broken["100"].checks["payoff_bound"]


def test_comparison_pair_validation():
    with pytest.raises(ValueError):
        ComparisonPair(FeatureVector.from_string("000"), FeatureVector.from_string("011"))
    with pytest.raises(ValueError):
        ComparisonPair(FeatureVector.from_string("100"), FeatureVector.from_string("000"))


def test_space_file_round_trip(tmp_path):
    space = generate_space(SpaceConfig())
    path = tmp_path / "space.json"
    save_space(space, path)
    loaded = load_space(path)
    assert space_to_record(loaded) == space_to_record(space)
    # stable key order: binary ascending
    labels = list(space_to_record(space)["games"])
    assert labels == sorted(labels)


def test_space_record_round_trip_fraction_multiplier():
    space = generate_space(SpaceConfig(efficiency_multiplier=Fraction(3, 2)))
    rec = space_to_record(space)
    assert rec["config"]["efficiency_multiplier"] == "3/2"
    assert space_from_record(rec).config.efficiency_multiplier == Fraction(3, 2)
