"""Shotgun assembly of labeled random graphs and jigsaw puzzles."""

from .canon import BudgetExceeded, CanonicalCode, are_isomorphic, canonical_code
from .generators import LabelDistribution, Seed, gen_binary_tree, gen_er, gen_jigsaw, gen_labeled_er, gen_lattice
from .graph import InputError, LabeledGraph, LatticeBox, RootedNeighborhood, extract_box, extract_neighborhood, sphere
from .identifiability import Status, Verdict, judge, solve_lambda_star
from .neighborhoods import check_overlap_uniqueness, reconstruct, shatter

__all__ = [
    "BudgetExceeded", "CanonicalCode", "InputError", "LabelDistribution", "LabeledGraph", "LatticeBox",
    "RootedNeighborhood", "Seed", "Status", "Verdict", "are_isomorphic", "canonical_code",
    "check_overlap_uniqueness", "extract_box", "extract_neighborhood", "gen_binary_tree", "gen_er", "gen_jigsaw",
    "gen_labeled_er", "gen_lattice", "judge", "reconstruct", "shatter", "solve_lambda_star", "sphere",
]
