"""Probe input generation: seed selection plus adversarial counterparts."""

from .blackbox import gen_blackbox, gen_blackbox_with_snapshots
from .criteria import (
    divergence,
    divergence_from_outputs,
    diversity,
    diversity_from_outputs,
    pair_distances,
    pairwise_distance_matrix,
    score_from_outputs,
    score_inputs,
)
from .pairset import InputPairSet, load_pairset, save_pairset, select_seeds
from .whitebox import gen_whitebox

__all__ = [
    "gen_blackbox",
    "gen_blackbox_with_snapshots",
    "divergence",
    "divergence_from_outputs",
    "diversity",
    "diversity_from_outputs",
    "pair_distances",
    "pairwise_distance_matrix",
    "score_from_outputs",
    "score_inputs",
    "InputPairSet",
    "load_pairset",
    "save_pairset",
    "select_seeds",
    "gen_whitebox",
]
