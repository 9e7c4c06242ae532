from levytree.config_manager import ConfigManager
from levytree.errors import LevyTreeError
from levytree.ghp import Correspondence, dghp_compact, dghp_full, ghp_report
from levytree.growth import GrowthTrajectory, grow_mass, grow_tree, sample_exit_spine
from levytree.mechanism import BranchingMechanism, parse_mechanism
from levytree.pruning import MarkMeasure, decompose, prune_at, sample_marks
from levytree.rng import RngStream
from levytree.sampler import TreeSample, sample_csbp, sample_forest, sample_graft, sample_tree
from levytree.tree_parser import read_tree, write_tree
from levytree.util import load_package_version
from levytree.wtree import INFINITE_TREE, ROOT, Excursion, Location, WTree, from_excursion, graft, truncate

__all__ = [
    "BranchingMechanism",
    "ConfigManager",
    "Correspondence",
    "Excursion",
    "GrowthTrajectory",
    "INFINITE_TREE",
    "LevyTreeError",
    "Location",
    "MarkMeasure",
    "ROOT",
    "RngStream",
    "TreeSample",
    "WTree",
    "decompose",
    "dghp_compact",
    "dghp_full",
    "from_excursion",
    "ghp_report",
    "graft",
    "grow_mass",
    "grow_tree",
    "load_package_version",
    "parse_mechanism",
    "prune_at",
    "read_tree",
    "sample_csbp",
    "sample_exit_spine",
    "sample_forest",
    "sample_graft",
    "sample_marks",
    "sample_tree",
    "truncate",
    "write_tree",
]
