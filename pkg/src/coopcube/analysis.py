"""Cooperation and preference statistics over trial datasets.

Trials and preference records are flat rows shared by the simulators and
the session service.  Point statistics are exact count ratios; confidence
intervals come from a seeded percentile bootstrap whose RNG stream is
derived per statistic, so parallel evaluation cannot change results.
"""

from __future__ import annotations

import csv
import io
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .seeding import stat_rng
from .space import ComparisonPair, FeatureVector, GameSpace, all_vectors, comparison_pairs, layer

SEED_SOURCE = "seed"

ANY_NONZERO = "any_nonzero"
BOTH_NONZERO = "both_nonzero"


class EmptySampleError(Exception):
    pass


class EmptyCellError(Exception):
    pass


class MissingLabelError(Exception):
    pass


class MissingPairError(Exception):
    pass


class EmptyDatasetError(Exception):
    pass


@dataclass(frozen=True)
class Trial:
    """One participant's resolved round, in canonical orientation."""

    trial_id: str
    session_id: str
    condition_id: str
    game_label: str
    transformation: str
    role_of_session: str
    a1: int
    a2: int
    u1: int
    u2: int
    p1_source: str
    p2_source: str
    stage: str
    timestamp: float = 0.0


@dataclass(frozen=True)
class PreferenceRecord:
    """One participant's choice between the two games of their pair."""

    session_id: str
    condition_id: str
    low: str
    high: str
    chosen: str
    timestamp: float = 0.0

    def __post_init__(self) -> None:
        if self.chosen not in (self.low, self.high):
            raise ValueError(f"chosen {self.chosen} outside pair ({self.low}, {self.high})")


TRIAL_COLUMNS = [
    "trial_id",
    "session_id",
    "condition_id",
    "game_label",
    "transformation",
    "role_of_session",
    "a1",
    "a2",
    "u1",
    "u2",
    "p1_source",
    "p2_source",
    "stage",
    "timestamp",
]

PREFERENCE_COLUMNS = ["session_id", "condition_id", "low", "high", "chosen", "timestamp"]


@dataclass(frozen=True)
class Estimate:
    """A proportion with percentile-bootstrap confidence bounds."""

    value: float
    ci_low: float
    ci_high: float
    n: int

    def __post_init__(self) -> None:
        if not (0.0 <= self.ci_low <= self.value <= self.ci_high <= 1.0):
            raise ValueError(f"malformed estimate {self}")

    def as_dict(self) -> dict:
        return {"value": self.value, "ci_low": self.ci_low, "ci_high": self.ci_high, "n": self.n}


@dataclass(frozen=True)
class AnalysisConfig:
    bootstrap_samples: int = 10_000
    alpha: float = 0.05
    seed: int = 0
    cooperation_mode: str = ANY_NONZERO

    def __post_init__(self) -> None:
        if self.bootstrap_samples < 1:
            raise ValueError("bootstrap_samples must be >= 1")
        if not 0.0 < self.alpha < 1.0:
            raise ValueError("alpha must be in (0, 1)")
        if self.cooperation_mode not in (ANY_NONZERO, BOTH_NONZERO):
            raise ValueError(f"unknown cooperation mode {self.cooperation_mode}")


def filter_seed_trials(trials: Iterable[Trial]) -> list[Trial]:
    """Drop every trial played against an initializing seed, keeping order."""
    return [t for t in trials if t.p1_source != SEED_SOURCE and t.p2_source != SEED_SOURCE]


def is_cooperative(trial: Trial, mode: str = ANY_NONZERO) -> bool:
    """A cooperative round realizes a non-zero outcome."""
    if mode == ANY_NONZERO:
        return trial.u1 != 0 or trial.u2 != 0
    if mode == BOTH_NONZERO:
        return trial.u1 != 0 and trial.u2 != 0
    raise ValueError(f"unknown cooperation mode {mode}")


def bootstrap_ci(
    samples: Sequence[float],
    b: int,
    alpha: float,
    rng: np.random.Generator,
) -> tuple[float, float]:
    """Percentile bootstrap of the sample mean.

    Draws `b` resamples with replacement of the full sample size and
    returns the alpha/2 and 1-alpha/2 empirical percentiles.
    """
    data = np.asarray(samples, dtype=float)
    n = data.size
    if n == 0:
        raise EmptySampleError("cannot bootstrap an empty sample")
    if b < 1:
        raise ValueError("b must be >= 1")
    means = np.empty(b, dtype=float)
    chunk = max(1, min(b, 2_000_000 // max(n, 1)))
    done = 0
    while done < b:
        m = min(chunk, b - done)
        idx = rng.integers(0, n, size=(m, n))
        means[done : done + m] = data[idx].mean(axis=1)
        done += m
    low, high = np.percentile(means, [100 * alpha / 2, 100 * (1 - alpha / 2)])
    return float(low), float(high)


def proportion_estimate(flags: Sequence[int], config: AnalysisConfig, key: str) -> Estimate:
    """Exact count ratio plus a bootstrap CI from the per-statistic stream.

    Flags are sorted before resampling: the sample is an exchangeable
    multiset, so this changes nothing statistically but makes the CI
    invariant under dataset permutation.
    """
    if len(flags) == 0:
        raise EmptySampleError(key)
    rng = stat_rng(config.seed, "bootstrap", key)
    low, high = bootstrap_ci(sorted(flags), config.bootstrap_samples, config.alpha, rng)
    value = sum(flags) / len(flags)
    return Estimate(value, min(low, value), max(high, value), len(flags))


def cooperation_rate(
    trials: Sequence[Trial], label: FeatureVector | str, config: AnalysisConfig
) -> Estimate:
    """Share of cooperative trials for one game; expects seed-filtered input."""
    label = str(label)
    flags = [int(is_cooperative(t, config.cooperation_mode)) for t in trials if t.game_label == label]
    if not flags:
        raise EmptyCellError(f"no trials for game {label}")
    return proportion_estimate(flags, config, f"coop:{label}")


def preference_proportion(
    preferences: Sequence[PreferenceRecord],
    pair: ComparisonPair,
    config: AnalysisConfig,
) -> Estimate:
    """Share of records on this pair choosing the feature-added game."""
    low, high = str(pair.low), str(pair.high)
    flags = [int(p.chosen == high) for p in preferences if p.low == low and p.high == high]
    if not flags:
        raise EmptyCellError(f"no preference records for pair {low}->{high}")
    return proportion_estimate(flags, config, f"pref:{low}>{high}")


@dataclass
class LayerSummary:
    per_layer: dict[int, float]
    per_label: dict[str, Estimate]


def layer_summary(estimates: dict[str, Estimate]) -> LayerSummary:
    """Group per-game estimates into hypercube layers and average them."""
    if not estimates:
        raise MissingLabelError("no estimates given")
    k = len(next(iter(estimates)))
    expected = {str(fv) for fv in all_vectors(k)}
    missing = expected - set(estimates)
    if missing:
        raise MissingLabelError(f"missing labels: {sorted(missing)}")
    layers: dict[int, list[float]] = {}
    for label, est in sorted(estimates.items()):
        layers.setdefault(layer(FeatureVector.from_string(label)), []).append(est.value)
    per_layer = {lv: sum(vals) / len(vals) for lv, vals in sorted(layers.items())}
    return LayerSummary(per_layer, dict(sorted(estimates.items())))


ADVANCE = "ADVANCE"
NEUTRAL = "NEUTRAL"
RESIST = "RESIST"
MISSING = "MISSING"


@dataclass(frozen=True)
class PathStep:
    low: str
    high: str
    estimate: Estimate | None
    flag: str


@dataclass
class PathReport:
    path: list[str]
    steps: list[PathStep]

    @property
    def lock_in_prone(self) -> bool:
        return any(s.flag in (NEUTRAL, RESIST) for s in self.steps[1:])


def step_flag(estimate: Estimate, threshold: float = 0.5) -> str:
    """Classify a step by where its CI sits relative to indifference."""
    if estimate.ci_low > threshold:
        return ADVANCE
    if estimate.ci_high < threshold:
        return RESIST
    return NEUTRAL


def path_gradient(
    estimates: dict[tuple[str, str], Estimate],
    path: Sequence[FeatureVector | str],
    strict: bool = True,
) -> PathReport:
    """Flag each feature-adding step of a hypercube path.

    `estimates` maps (low, high) label pairs to preference estimates for
    choosing `high`.  With strict=True a step without an estimate raises
    MissingPairError; otherwise it is flagged MISSING.
    """
    labels = [str(p) for p in path]
    vectors = [FeatureVector.from_string(s) for s in labels]
    steps = []
    for lo, hi in zip(vectors, vectors[1:]):
        ComparisonPair(lo, hi)  # validates consecutive Hamming-1, feature-adding
        est = estimates.get((str(lo), str(hi)))
        if est is None:
            if strict:
                raise MissingPairError(f"no estimate for step {lo}->{hi}")
            steps.append(PathStep(str(lo), str(hi), None, MISSING))
        else:
            steps.append(PathStep(str(lo), str(hi), est, step_flag(est)))
    return PathReport(labels, steps)


def canonical_paths(feature_count: int = 3) -> list[list[str]]:
    """The k! one-feature-at-a-time routes from the null game to all-ones."""
    import itertools

    paths = []
    for order in itertools.permutations(range(feature_count)):
        bits = [0] * feature_count
        path = ["".join(map(str, bits))]
        for i in order:
            bits[i] = 1
            path.append("".join(map(str, bits)))
        paths.append(path)
    return paths


def report(
    trials: Sequence[Trial],
    preferences: Sequence[PreferenceRecord],
    space: GameSpace,
    config: AnalysisConfig,
) -> dict:
    """The full analysis document: accounting, rates, layers, and paths."""
    trials = list(trials)
    preferences = list(preferences)
    if not trials and not preferences:
        raise EmptyDatasetError("refusing to analyze an empty dataset")

    analyzed = filter_seed_trials(trials)
    participants = {t.session_id for t in trials} | {p.session_id for p in preferences}
    choosers = {p.session_id for p in preferences}

    cooperation: dict[str, dict] = {}
    coop_estimates: dict[str, Estimate] = {}
    for fv in sorted(space.games):
        label = str(fv)
        try:
            est = cooperation_rate(analyzed, label, config)
        except EmptyCellError:
            continue
        coop_estimates[label] = est
        cooperation[label] = est.as_dict()

    preference: dict[str, dict] = {}
    pair_estimates: dict[tuple[str, str], Estimate] = {}
    for pair in comparison_pairs(space):
        try:
            est = preference_proportion(preferences, pair, config)
        except EmptyCellError:
            continue
        pair_estimates[(str(pair.low), str(pair.high))] = est
        preference[f"{pair.low}->{pair.high}"] = est.as_dict()

    layers = None
    if len(coop_estimates) == 2 ** space.config.feature_count:
        summary = layer_summary(coop_estimates)
        layers = {str(lv): val for lv, val in summary.per_layer.items()}

    paths = []
    for path in canonical_paths(space.config.feature_count):
        rep = path_gradient(pair_estimates, path, strict=False)
        paths.append(
            {
                "path": rep.path,
                "steps": [
                    {
                        "low": s.low,
                        "high": s.high,
                        "flag": s.flag,
                        "estimate": s.estimate.as_dict() if s.estimate else None,
                    }
                    for s in rep.steps
                ],
                "lock_in_prone": rep.lock_in_prone,
            }
        )

    return {
        "counts": {
            "participants": len(participants),
            "choosers": len(choosers),
            "trials_total": len(trials),
            "seed_trials": len(trials) - len(analyzed),
            "trials_analyzed": len(analyzed),
        },
        "cooperation": cooperation,
        "cooperation_layers": layers,
        "preference": preference,
        "paths": paths,
        "config": {
            "bootstrap_samples": config.bootstrap_samples,
            "alpha": config.alpha,
            "seed": config.seed,
            "cooperation_mode": config.cooperation_mode,
        },
    }


# ---------------------------------------------------------------------------
# Dataset files: CSV with fixed column order.


def trials_to_csv(trials: Iterable[Trial]) -> str:
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=TRIAL_COLUMNS, lineterminator="\n")
    writer.writeheader()
    for t in trials:
        writer.writerow(asdict(t))
    return buf.getvalue()


def trials_from_csv(text: str) -> list[Trial]:
    out = []
    for row in csv.DictReader(io.StringIO(text)):
        out.append(
            Trial(
                trial_id=row["trial_id"],
                session_id=row["session_id"],
                condition_id=row["condition_id"],
                game_label=row["game_label"],
                transformation=row["transformation"],
                role_of_session=row["role_of_session"],
                a1=int(row["a1"]),
                a2=int(row["a2"]),
                u1=int(row["u1"]),
                u2=int(row["u2"]),
                p1_source=row["p1_source"],
                p2_source=row["p2_source"],
                stage=row["stage"],
                timestamp=float(row["timestamp"]),
            )
        )
    return out


def preferences_to_csv(preferences: Iterable[PreferenceRecord]) -> str:
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=PREFERENCE_COLUMNS, lineterminator="\n")
    writer.writeheader()
    for p in preferences:
        writer.writerow(asdict(p))
    return buf.getvalue()


def preferences_from_csv(text: str) -> list[PreferenceRecord]:
    out = []
    for row in csv.DictReader(io.StringIO(text)):
        out.append(
            PreferenceRecord(
                session_id=row["session_id"],
                condition_id=row["condition_id"],
                low=row["low"],
                high=row["high"],
                chosen=row["chosen"],
                timestamp=float(row["timestamp"]),
            )
        )
    return out


def write_trials(trials: Iterable[Trial], path: Path | str) -> None:
    Path(path).write_text(trials_to_csv(trials))


def read_trials(path: Path | str) -> list[Trial]:
    return trials_from_csv(Path(path).read_text())


def write_preferences(preferences: Iterable[PreferenceRecord], path: Path | str) -> None:
    Path(path).write_text(preferences_to_csv(preferences))


def read_preferences(path: Path | str) -> list[PreferenceRecord]:
    return preferences_from_csv(Path(path).read_text())
