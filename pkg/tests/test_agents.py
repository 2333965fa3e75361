"""Tests for policies, preference models, walks, and the cohort simulator."""

import random
from collections import Counter

import pytest

from coopcube.agents import (
    DRAW,
    EMPIRICAL_TABLE,
    EQUILIBRIUM_SEEKER,
    EXPERIENCED_PAYOFF,
    FICTITIOUS_PLAY,
    LEXICOGRAPHIC,
    MYOPIC_BEST_RESPONSE,
    STRICT_MAJORITY,
    UNIFORM_RANDOM,
    AgentPolicy,
    BeliefState,
    MissingExperienceError,
    PreferenceModel,
    RoundView,
    act,
    conditions_for_space,
    prefer,
    run_walk,
    simulate_cohort,
    simulate_session,
    table_entry,
)
from coopcube.analysis import AnalysisConfig, cooperation_rate
from coopcube.games import BimatrixGame, Role, Transformation, viewer_presentation
from coopcube.space import (
    ComparisonPair,
    FeatureVector,
    SpaceConfig,
    all_vectors,
    generate_space,
    pure_nash_equilibria,
)

from reference_values import REFERENCE_PREFERENCES

SPACE = generate_space(SpaceConfig())


def make_view(game: BimatrixGame, role: Role, label: str = "000") -> RoundView:
    shown = viewer_presentation(game, role, Transformation.IDENTITY)
    return RoundView(game, label, role, Transformation.IDENTITY, shown.board, shown.chooses)


def fv(s: str) -> FeatureVector:
    return FeatureVector.from_string(s)


def test_uniform_random_is_balanced():
    policy = AgentPolicy(kind=UNIFORM_RANDOM, epsilon=0.0)
    rng = random.Random(11)
    view = make_view(SPACE.game("000"), Role.PLAYER1)
    beliefs = BeliefState()
    draws = Counter(act(policy, view, beliefs, rng) for _ in range(10_000))
    assert 0.49 <= draws[0] / 10_000 <= 0.51


def test_myopic_best_response_to_certain_belief():
    game = BimatrixGame.from_rows("g", [[(3, 1), (0, 0)], [(0, 0), (1, 3)]])
    policy = AgentPolicy(kind=MYOPIC_BEST_RESPONSE, epsilon=0.0, pseudocount=1.0)
    beliefs = BeliefState()
    for _ in range(1000):  # opponent plays left with (empirical) certainty
        beliefs.observe("000", Role.PLAYER2, 0)
    view = make_view(game, Role.PLAYER1)
    assert act(policy, view, beliefs, random.Random(0)) == 0  # top: 3 > 0


def test_equilibrium_seeker_plays_unique_equilibrium():
    policy = AgentPolicy(kind=EQUILIBRIUM_SEEKER, epsilon=0.0)
    rng = random.Random(5)
    for label in ("100", "101", "110", "111"):
        game = SPACE.game(label)
        (eq,) = pure_nash_equilibria(game)
        for role in Role:
            view = make_view(game, role, label)
            want = eq[0] if role is Role.PLAYER1 else eq[1]
            for _ in range(20):
                assert act(policy, view, BeliefState(), rng) == want


def test_fictitious_play_converges_in_stable_games():
    # Self-play for 100 rounds must sit on the unique equilibrium at the end.
    policy = AgentPolicy(kind=FICTITIOUS_PLAY, epsilon=0.0)
    rng = random.Random(3)
    for label in ("100", "101", "110", "111"):
        game = SPACE.game(label)
        (eq,) = pure_nash_equilibria(game)
        beliefs = {Role.PLAYER1: BeliefState(), Role.PLAYER2: BeliefState()}
        profiles = []
        for _ in range(100):
            a1 = act(policy, make_view(game, Role.PLAYER1, label), beliefs[Role.PLAYER1], rng)
            a2 = act(policy, make_view(game, Role.PLAYER2, label), beliefs[Role.PLAYER2], rng)
            beliefs[Role.PLAYER1].observe(label, Role.PLAYER2, a2)
            beliefs[Role.PLAYER2].observe(label, Role.PLAYER1, a1)
            profiles.append((a1, a2))
        assert all(p == eq for p in profiles[-20:])


def test_epsilon_override_reaches_both_actions():
    policy = AgentPolicy(kind=EQUILIBRIUM_SEEKER, epsilon=1.0)
    game = SPACE.game("100")
    view = make_view(game, Role.PLAYER1, "100")
    rng = random.Random(1)
    seen = {act(policy, view, BeliefState(), rng) for _ in range(100)}
    assert seen == {0, 1}


def test_prefer_lexicographic_decides_at_differing_bit():
    model = PreferenceModel(kind=LEXICOGRAPHIC, order=("stability", "efficiency", "fairness"))
    pair = ComparisonPair(fv("000"), fv("100"))
    assert prefer(model, pair, SPACE, None, random.Random(0)) == fv("100")
    pair = ComparisonPair(fv("010"), fv("011"))
    assert prefer(model, pair, SPACE, None, random.Random(0)) == fv("011")


def test_prefer_empirical_long_run_frequency():
    model = PreferenceModel(
        kind=EMPIRICAL_TABLE, table={("000", "010"): table_entry(0.86)}
    )
    pair = ComparisonPair(fv("000"), fv("010"))
    rng = random.Random(99)
    hits = sum(prefer(model, pair, SPACE, None, rng) == fv("010") for _ in range(10_000))
    assert abs(hits / 10_000 - 0.86) <= 0.02


def test_prefer_experienced_payoff():
    model = PreferenceModel(kind=EXPERIENCED_PAYOFF)
    pair = ComparisonPair(fv("000"), fv("100"))
    experience = {"000": [5.0, 5.0], "100": [2.5, 2.5]}
    assert prefer(model, pair, SPACE, experience, random.Random(0)) == fv("000")
    with pytest.raises(MissingExperienceError):
        prefer(model, pair, SPACE, {"000": [1.0]}, random.Random(0))


def test_empirical_probability_reverses():
    model = PreferenceModel(kind=EMPIRICAL_TABLE, table=dict(REFERENCE_PREFERENCES))
    forward = model.probability(fv("010"), fv("000"))
    backward = model.probability(fv("000"), fv("010"))
    assert backward.value == pytest.approx(1.0 - forward.value)
    assert backward.ci_low == pytest.approx(1.0 - forward.ci_high)
    assert backward.ci_high == pytest.approx(1.0 - forward.ci_low)


def test_walk_lexicographic_monotone_path():
    model = PreferenceModel(kind=LEXICOGRAPHIC, order=("stability", "efficiency", "fairness"))
    result = run_walk(SPACE, fv("000"), model, 10, random.Random(0))
    assert [str(v) for v in result.trajectory] == ["000", "100", "110", "111"]
    assert result.absorbed and result.steps == 3


def test_walk_from_top_absorbs_immediately():
    model = PreferenceModel(kind=LEXICOGRAPHIC)
    result = run_walk(SPACE, fv("111"), model, 10, random.Random(0))
    assert result.absorbed and result.steps == 0 and result.attractor == fv("111")


def test_walk_lexicographic_all_starts_reach_top():
    model = PreferenceModel(kind=LEXICOGRAPHIC)
    for start in all_vectors(3):
        result = run_walk(SPACE, start, model, 10, random.Random(0))
        assert result.absorbed
        assert result.attractor == fv("111")
        assert result.steps <= 3
        assert len(set(result.trajectory)) == len(result.trajectory)  # no revisits


def test_walk_empirical_strict_majority_locks_in():
    # With the reference estimates, the efficiency-first move is the only
    # clear first step, and the walk then stalls short of the full game.
    model = PreferenceModel(kind=EMPIRICAL_TABLE, table=dict(REFERENCE_PREFERENCES))
    result = run_walk(
        SPACE, fv("000"), model, 10, random.Random(0), acceptance=STRICT_MAJORITY
    )
    assert str(result.trajectory[1]) == "010"
    assert result.absorbed
    assert result.attractor != fv("111")
    assert fv("110") not in result.trajectory


def test_walk_empirical_draw_mode_is_seeded():
    model = PreferenceModel(kind=EMPIRICAL_TABLE, table=dict(REFERENCE_PREFERENCES))
    a = run_walk(SPACE, fv("000"), model, 10, random.Random(4), acceptance=DRAW)
    b = run_walk(SPACE, fv("000"), model, 10, random.Random(4), acceptance=DRAW)
    assert a.trajectory == b.trajectory


def test_session_emits_18_trials_with_tags():
    conds = conditions_for_space(SPACE)
    policy = AgentPolicy(kind=EQUILIBRIUM_SEEKER)
    model = PreferenceModel(kind=LEXICOGRAPHIC)
    data = simulate_session(SPACE, conds[0], policy, model, 6, random.Random(1), "s1")
    assert len(data.trials) == 18
    assert all(t.condition_id == conds[0].condition_id for t in data.trials)
    stages = [t.stage for t in data.trials]
    assert stages == ["stage1"] * 6 + ["stage2"] * 6 + ["stage4"] * 6
    assert {t.game_label for t in data.trials[:6]} == {str(conds[0].pair.low)}
    assert {t.game_label for t in data.trials[6:12]} == {str(conds[0].pair.high)}
    assert data.preference.chosen in (data.preference.low, data.preference.high)


def test_session_role_transformation_draws_uniform():
    conds = conditions_for_space(SPACE)
    policy = AgentPolicy(kind=UNIFORM_RANDOM)
    model = PreferenceModel(kind=LEXICOGRAPHIC)
    counts: Counter = Counter()
    rng = random.Random(8)
    n_sessions = 560  # 10,080 rounds
    for i in range(n_sessions):
        data = simulate_session(SPACE, conds[i % len(conds)], policy, model, 6, rng, f"s{i}")
        for t in data.trials:
            counts[(t.role_of_session, t.transformation)] += 1
    total = sum(counts.values())
    assert total == n_sessions * 18
    assert len(counts) == 16
    for combo, n in counts.items():
        assert abs(n / total - 1 / 16) <= 0.01, combo


def test_cohort_balanced_assignment_and_determinism():
    conds = conditions_for_space(SPACE)
    assert len(conds) == 96
    policy = AgentPolicy(kind=UNIFORM_RANDOM)
    model = PreferenceModel(kind=LEXICOGRAPHIC)
    trials, prefs = simulate_cohort(SPACE, conds, 96, policy, model, seed=5)
    per_condition = Counter(p.condition_id for p in prefs)
    assert set(per_condition.values()) == {1}
    assert len(per_condition) == 96
    again = simulate_cohort(SPACE, conds, 96, policy, model, seed=5)
    assert (trials, prefs) == again


def test_cohort_trial_count_arithmetic():
    conds = conditions_for_space(SPACE)[:1]
    policy = AgentPolicy(kind=UNIFORM_RANDOM)
    model = PreferenceModel(kind=LEXICOGRAPHIC)
    trials, prefs = simulate_cohort(SPACE, conds, 300, policy, model, seed=2)
    assert len(trials) == 5400
    assert len(prefs) == 300


def test_cohort_reproduces_empirical_table_probabilities():
    # End-to-end Monte Carlo: 10,000 single-round sessions on one pair.
    conds = [c for c in conditions_for_space(SPACE) if c.condition_id.startswith("000-010@")][:1]
    policy = AgentPolicy(kind=UNIFORM_RANDOM)
    model = PreferenceModel(
        kind=EMPIRICAL_TABLE, table={("000", "010"): table_entry(0.86)}
    )
    _, prefs = simulate_cohort(SPACE, conds, 10_000, policy, model,
                               rounds_per_stage=1, seed=6)
    share = sum(p.chosen == "010" for p in prefs) / len(prefs)
    assert abs(share - 0.86) <= 0.02


def test_cohort_equilibrium_seeker_cooperates_in_stable_games():
    conds = conditions_for_space(SPACE)
    policy = AgentPolicy(kind=EQUILIBRIUM_SEEKER, epsilon=0.05)
    model = PreferenceModel(kind=LEXICOGRAPHIC)
    trials, _ = simulate_cohort(SPACE, conds, 192, policy, model, seed=3)
    cfg = AnalysisConfig(bootstrap_samples=100, seed=0)
    for label in ("100", "101", "110", "111"):
        assert cooperation_rate(trials, label, cfg).value >= 0.9
