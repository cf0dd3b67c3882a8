"""White-box probe generation: projected sign-gradient ascent on the score.

Starting from X' = X, each step moves X' by epsilon_box/10 along the sign
of the score gradient, projects back into the L-inf epsilon_box ball
around the seeds, and clips to the [0, 1] input box.

For softmax-final classifiers the ascent direction is computed on the
score of the pre-softmax activations: the output-space score is flat
almost everywhere once predictions saturate (its gradient vanishes), while
the same objective over logits keeps pushing probes across decision
boundaries.  The reported score trace and the best-iterate selection
always use the definitional output-space score, so the returned probe set
never scores below the seeds themselves.
"""

from __future__ import annotations

import numpy as np

from ..config import GenConfig
from ..errors import UnsupportedOperation
from ..runtime.model import Model
from ..runtime.tensor import DTYPE
from .criteria import pairwise_distance_matrix
from .pairset import InputPairSet

F64 = np.float64


def _score_and_grad(y_seed, y_adv, lam):
    """Score of (y_seed, y_adv) and its gradient w.r.t. y_adv.

    Distance terms with zero norm contribute zero gradient (subgradient
    choice at the non-differentiable point).
    """
    n = len(y_adv)
    diff = y_adv - y_seed  # [n, k]
    dist = np.linalg.norm(diff, axis=1)
    div = dist.mean()
    safe = np.where(dist > 1e-12, dist, np.inf)
    g_div = diff / (n * safe[:, None])

    dmat = pairwise_distance_matrix(y_adv)
    iu = np.triu_indices(n, k=1)
    n_pairs = len(iu[0])
    diversity = dmat[iu].mean()
    pdiff = y_adv[:, None, :] - y_adv[None, :, :]
    psafe = np.where(dmat > 1e-12, dmat, np.inf)
    g_diversity = (pdiff / psafe[:, :, None]).sum(axis=1) / n_pairs

    score = div + lam * diversity
    return float(score), g_div + lam * g_diversity


def gen_whitebox(model: Model, seeds: np.ndarray, cfg: GenConfig) -> InputPairSet:
    if not isinstance(model, Model) or model.access != "whitebox":
        raise UnsupportedOperation("white-box generation requires a white-box model")
    X = np.clip(np.ascontiguousarray(seeds, dtype=DTYPE), 0.0, 1.0)
    n = len(X)
    if n < 2:
        raise ValueError("need at least two seed inputs")
    eps = DTYPE(cfg.epsilon_box)
    alpha = DTYPE(cfg.epsilon_box / 10.0)
    opt_idx = model.logits_index()  # == last layer unless softmax-final
    out_idx = len(model.layers) - 1

    acts, _ = model.forward_full(X)
    y_seed_out = acts[-1].reshape(n, -1).astype(F64)
    y_seed_opt = acts[opt_idx + 1].reshape(n, -1).astype(F64)

    Xp = X.copy()
    trace = []
    best_score = -np.inf
    best = Xp.copy()
    for step in range(cfg.pgd_steps + 1):
        acts, caches = model.forward_full(Xp)
        y_out = acts[-1].reshape(n, -1).astype(F64)
        score, _ = _score_and_grad(y_seed_out, y_out, cfg.lam)
        trace.append(score)
        if score > best_score:
            best_score = score
            best = Xp.copy()
        if step == cfg.pgd_steps:
            break
        y_opt = acts[opt_idx + 1].reshape(n, -1).astype(F64)
        _, gy = _score_and_grad(y_seed_opt, y_opt, cfg.lam)
        gx, _ = model.backward(
            caches, {opt_idx: gy.astype(DTYPE).reshape(acts[opt_idx + 1].shape)}
        )
        Xp = Xp + alpha * np.sign(gx, dtype=DTYPE)
        Xp = np.clip(Xp, X - eps, X + eps)
        Xp = np.clip(Xp, 0.0, 1.0)

    return InputPairSet(
        seeds=X,
        adversarial=best,
        target_model_id=model.id,
        gen_config=cfg,
        score_trace=trace,
    )
