"""Probe-quality criteria: divergence, diversity, and their weighted score.

divergence(f, X, X') is the mean Euclidean distance between the outputs of
each seed and its adversarial counterpart; diversity(f, X') the mean
pairwise Euclidean distance among adversarial outputs.  The quality score
of a probe set is divergence + lam * diversity.
"""

from __future__ import annotations

import numpy as np

F64 = np.float64


def pair_distances(ya: np.ndarray, yb: np.ndarray) -> np.ndarray:
    """Row-wise Euclidean distances between two equal-shape output batches."""
    ya = np.asarray(ya, dtype=F64).reshape(len(ya), -1)
    yb = np.asarray(yb, dtype=F64).reshape(len(yb), -1)
    return np.linalg.norm(ya - yb, axis=1)


def divergence_from_outputs(y_seed: np.ndarray, y_adv: np.ndarray) -> float:
    if len(y_seed) == 0:
        raise ValueError("divergence needs at least one pair")
    if np.shape(y_seed) != np.shape(y_adv):
        raise ValueError(
            f"output shapes differ: {np.shape(y_seed)} vs {np.shape(y_adv)}"
        )
    return float(pair_distances(y_seed, y_adv).mean())


def pairwise_distance_matrix(y: np.ndarray) -> np.ndarray:
    y = np.asarray(y, dtype=F64).reshape(len(y), -1)
    diff = y[:, None, :] - y[None, :, :]
    return np.sqrt((diff * diff).sum(axis=2))


def diversity_from_outputs(y_adv: np.ndarray) -> float:
    n = len(y_adv)
    if n < 2:
        raise ValueError("diversity needs at least two inputs")
    dmat = pairwise_distance_matrix(y_adv)
    iu = np.triu_indices(n, k=1)
    return float(dmat[iu].mean())


def score_from_outputs(y_seed, y_adv, lam: float) -> float:
    return divergence_from_outputs(y_seed, y_adv) + lam * diversity_from_outputs(y_adv)


def divergence(model, seeds: np.ndarray, adversarial: np.ndarray) -> float:
    """Mean per-pair output distance; one batched forward per side."""
    return divergence_from_outputs(model.forward(seeds), model.forward(adversarial))


def diversity(model, adversarial: np.ndarray) -> float:
    """Mean pairwise output distance over all unordered pairs."""
    return diversity_from_outputs(model.forward(adversarial))


def score_inputs(model, seeds, adversarial, lam: float) -> float:
    """divergence + lam * diversity, by definition."""
    y_seed = model.forward(seeds)
    y_adv = model.forward(adversarial)
    return score_from_outputs(y_seed, y_adv, lam)
