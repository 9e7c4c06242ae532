"""分支机制模块

提供 Lévy 测度变体的抽象层和分支机制的数值演算。
"""

from levytree.mechanism.atoms import AtomsMeasure
from levytree.mechanism.base import Capability, LevyMeasure
from levytree.mechanism.branching import (
    BranchingMechanism,
    ThetaWindow,
    cumulant,
    evaluate,
    extinction,
    gamma,
    invert,
    pure_stable_mechanism,
    shift,
    sigma_laplace,
    sigma_mean,
    theta_bar,
    theta_window,
)
from levytree.mechanism.exits import (
    ascension_tail,
    exit_density,
    exit_given_ascension,
    exit_tail,
    forest_ascension_cdf,
    forest_exit_cdf,
    level_derivative,
    spine_cdf,
    spine_density,
    spine_quantile,
    weighted_spine_cdf,
)
from levytree.mechanism.manager import MeasureRegistry, default_registry, describe_mechanism, parse_mechanism
from levytree.mechanism.stable import StableMeasure
from levytree.mechanism.tabulated import TabulatedMeasure
from levytree.mechanism.zero import ZeroMeasure

__all__ = [
    "AtomsMeasure",
    "BranchingMechanism",
    "Capability",
    "LevyMeasure",
    "MeasureRegistry",
    "StableMeasure",
    "TabulatedMeasure",
    "ThetaWindow",
    "ZeroMeasure",
    "ascension_tail",
    "cumulant",
    "default_registry",
    "describe_mechanism",
    "evaluate",
    "exit_density",
    "exit_given_ascension",
    "exit_tail",
    "extinction",
    "forest_ascension_cdf",
    "forest_exit_cdf",
    "gamma",
    "invert",
    "level_derivative",
    "parse_mechanism",
    "pure_stable_mechanism",
    "shift",
    "sigma_laplace",
    "sigma_mean",
    "spine_cdf",
    "spine_density",
    "spine_quantile",
    "theta_bar",
    "theta_window",
    "weighted_spine_cdf",
]
