"""Black-box probe generation by greedy coordinate mutation.

Each iteration picks the inputs currently responsible for low divergence
(per-pair output distance below the mean) and low diversity (members of
the closest output pairs), perturbs one shared input coordinate by +/-
epsilon, and keeps whichever candidate strictly improves the score.  Only
improvements are accepted, so the score trace is non-decreasing by
construction.  Only forward() is ever called on the model; seed outputs
are queried once and cached.
"""

from __future__ import annotations

import numpy as np

from ..config import GenConfig, derive_seed
from ..runtime.tensor import DTYPE
from .criteria import pairwise_distance_matrix
from .pairset import InputPairSet

F64 = np.float64


def _score(d_pairs, dmat, iu, lam):
    return float(d_pairs.mean() + lam * dmat[iu].mean())


def _low_divergence(d_pairs):
    """Indices whose per-pair divergence is strictly below the mean."""
    return np.flatnonzero(d_pairs < d_pairs.mean())


def _low_diversity(dmat, iu, ratio, n):
    """First index of each of the [ratio * n] closest output pairs, deduped."""
    order = np.argsort(dmat[iu], kind="stable")
    k = max(1, int(ratio * n))
    firsts = iu[0][order[:k]]
    _, keep = np.unique(firsts, return_index=True)
    return firsts[np.sort(keep)]


def gen_blackbox(model, seeds: np.ndarray, cfg: GenConfig) -> InputPairSet:
    pairs, _ = gen_blackbox_with_snapshots(model, seeds, cfg, snapshot_iters=())
    return pairs


def gen_blackbox_with_snapshots(
    model, seeds: np.ndarray, cfg: GenConfig, snapshot_iters=()
) -> tuple[InputPairSet, dict[int, InputPairSet]]:
    """Run the mutation search, snapshotting X' at the given iterations.

    Returns (final pair set, {iteration: pair set at that point}).
    Snapshot iteration 0 is the untouched seeds.
    """
    X = np.clip(np.ascontiguousarray(seeds, dtype=DTYPE), 0.0, 1.0)
    n = len(X)
    if n < 2:
        raise ValueError("need at least two seed inputs")
    flat_dim = int(np.prod(X.shape[1:]))
    rng = np.random.default_rng(derive_seed(cfg.rng_seed, "blackbox-mutation"))

    y_seed = np.asarray(model.forward(X), dtype=F64)
    Xp = X.copy()
    y_adv = y_seed.copy()
    iu = np.triu_indices(n, k=1)
    d_pairs = np.linalg.norm(y_adv - y_seed, axis=1)
    dmat = pairwise_distance_matrix(y_adv)
    score = _score(d_pairs, dmat, iu, cfg.lam)
    trace = [score]

    snapshot_iters = set(int(i) for i in snapshot_iters)
    snapshots: dict[int, InputPairSet] = {}

    def snap(it):
        snapshots[it] = InputPairSet(
            seeds=X.copy(),
            adversarial=Xp.copy(),
            target_model_id=model.id,
            gen_config=cfg,
            score_trace=list(trace),
        )

    if 0 in snapshot_iters:
        snap(0)

    eps = DTYPE(cfg.epsilon)
    Xp_flat = Xp.reshape(n, flat_dim)
    for it in range(1, cfg.iterations + 1):
        indices = np.union1d(_low_divergence(d_pairs), _low_diversity(dmat, iu, cfg.low_diversity_ratio, n))
        pos = int(rng.integers(flat_dim))

        cand_scores = []
        cand_states = []
        for sign in (-1.0, 1.0):
            rows = Xp_flat[indices].copy()
            rows[:, pos] = np.clip(rows[:, pos] + DTYPE(sign) * eps, 0.0, 1.0)
            y_rows = np.asarray(model.forward(rows.reshape((len(indices),) + X.shape[1:])), dtype=F64)
            y_cand = y_adv.copy()
            y_cand[indices] = y_rows
            d_cand = d_pairs.copy()
            d_cand[indices] = np.linalg.norm(y_rows - y_seed[indices], axis=1)
            dmat_cand = pairwise_distance_matrix(y_cand)
            cand_scores.append(_score(d_cand, dmat_cand, iu, cfg.lam))
            cand_states.append((rows, y_cand, d_cand, dmat_cand))

        score_left, score_right = cand_scores
        chosen = None
        if score_left > score and score_left > score_right:
            chosen = 0
        elif score_right > score:
            chosen = 1
        if chosen is not None:
            rows, y_adv, d_pairs, dmat = cand_states[chosen]
            Xp_flat[indices] = rows
            score = cand_scores[chosen]
        trace.append(score)
        if it in snapshot_iters:
            snap(it)

    pairs = InputPairSet(
        seeds=X,
        adversarial=Xp,
        target_model_id=model.id,
        gen_config=cfg,
        score_trace=trace,
    )
    return pairs, snapshots
