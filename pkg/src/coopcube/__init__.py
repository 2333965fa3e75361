"""Cooperation laboratory on a hypercube of 2x2 economic games.

The package generates spaces of simple games whose stability, efficiency,
and fairness vary independently, simulates agent cohorts and preference
walks over the space, runs asynchronous human sessions behind an HTTP
service, and computes within-game cooperation and between-game preference
statistics with bootstrap confidence intervals.
"""

__version__ = "0.1.0"

from .games import (
    Action,
    BimatrixGame,
    Payoff,
    Presentation,
    Role,
    Transformation,
    apply_transformation,
    compose,
    inverse,
    payoff,
    viewer_presentation,
)
from .space import (
    ComparisonPair,
    FeatureVector,
    GameSpace,
    SpaceConfig,
    comparison_pairs,
    generate_space,
    is_efficient,
    is_fair,
    is_stable,
    layer,
    load_space,
    pure_nash_equilibria,
    save_space,
    verify_space,
)

__all__ = [
    "Action",
    "BimatrixGame",
    "Payoff",
    "Presentation",
    "Role",
    "Transformation",
    "apply_transformation",
    "compose",
    "inverse",
    "payoff",
    "viewer_presentation",
    "ComparisonPair",
    "FeatureVector",
    "GameSpace",
    "SpaceConfig",
    "comparison_pairs",
    "generate_space",
    "is_efficient",
    "is_fair",
    "is_stable",
    "layer",
    "load_space",
    "pure_nash_equilibria",
    "save_space",
    "verify_space",
]
