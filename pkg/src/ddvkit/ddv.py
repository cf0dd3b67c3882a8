"""Decision distance vectors and the similarity/threshold/verdict pipeline.

A model's DDV over a probe set is the vector of cosine distances between
its outputs on each seed and on the paired adversarial input.  Two models'
knowledge similarity is the cosine similarity of their DDVs computed on
the same probe set.  A threshold calibrated as the maximum similarity
reached by unrelated reference models turns the score into a verdict.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field

import numpy as np

from . import __version__ as _version
from .config import GenConfig, config_hash
from .errors import ShapeError, UnsupportedOperation
from .inputgen import InputPairSet, gen_blackbox, gen_whitebox

logger = logging.getLogger(__name__)

F64 = np.float64


def cosine_distance(a, b) -> float:
    """1 - cos(a, b), in [0, 2].

    Zero-vector convention keeping the metric total: both zero -> 0,
    exactly one zero -> 1 (logged; the caller flags it).
    """
    a = np.asarray(a, dtype=F64).ravel()
    b = np.asarray(b, dtype=F64).ravel()
    if a.shape != b.shape or len(a) < 1:
        raise ShapeError(f"vectors not comparable: {a.shape} vs {b.shape}")
    na = np.linalg.norm(a)
    nb = np.linalg.norm(b)
    if na == 0.0 or nb == 0.0:
        both = na == 0.0 and nb == 0.0
        logger.debug("cosine_distance on zero vector(s): returning %d", 0 if both else 1)
        return 0.0 if both else 1.0
    if np.array_equal(a, b):
        return 0.0
    return float(np.clip(1.0 - float(a @ b) / (na * nb), 0.0, 2.0))


@dataclass
class DDV:
    values: np.ndarray  # [n] float64, each in [0, 2]
    pairset_id: str
    model_id: str
    degenerate_pairs: int = 0  # pairs that hit the zero-vector convention

    def __len__(self) -> int:
        return len(self.values)


def compute_ddv(model, pairs: InputPairSet) -> DDV:
    """Per-pair cosine distances of the model's outputs; two batched forwards.

    Non-flat outputs are flattened before the distance.  Works for any
    object exposing forward(); white-box access is not needed.
    """
    y_seed = np.asarray(model.forward(pairs.seeds), dtype=F64).reshape(len(pairs), -1)
    y_adv = np.asarray(model.forward(pairs.adversarial), dtype=F64).reshape(len(pairs), -1)
    values = np.empty(len(pairs), dtype=F64)
    degenerate = 0
    for i in range(len(pairs)):
        na = np.linalg.norm(y_seed[i])
        nb = np.linalg.norm(y_adv[i])
        if na == 0.0 or nb == 0.0:
            degenerate += 1
            values[i] = 0.0 if (na == 0.0 and nb == 0.0) else 1.0
        elif np.array_equal(y_seed[i], y_adv[i]):
            values[i] = 0.0
        else:
            values[i] = np.clip(1.0 - float(y_seed[i] @ y_adv[i]) / (na * nb), 0.0, 2.0)
    if degenerate:
        logger.debug(
            "model %s produced %d zero-output pairs in DDV", model.id, degenerate
        )
    return DDV(
        values=values,
        pairset_id=pairs.pairset_id,
        model_id=model.id,
        degenerate_pairs=degenerate,
    )


def similarity(ddv_f: DDV, ddv_g: DDV) -> float:
    """Cosine similarity of two DDVs from the same probe set, in [-1, 1].

    All-zero DDVs only arise for constant models; two all-zero DDVs compare
    as 1, one all-zero against a non-zero one as 0.
    """
    if ddv_f.pairset_id != ddv_g.pairset_id:
        raise ValueError(
            f"DDVs from different probe sets are not comparable "
            f"({ddv_f.pairset_id} vs {ddv_g.pairset_id})"
        )
    if len(ddv_f) != len(ddv_g):
        raise ShapeError(f"DDV lengths differ: {len(ddv_f)} vs {len(ddv_g)}")
    a = ddv_f.values
    b = ddv_g.values
    na = np.linalg.norm(a)
    nb = np.linalg.norm(b)
    if na == 0.0 or nb == 0.0:
        return 1.0 if (na == 0.0 and nb == 0.0) else 0.0
    return float(np.clip(float(a @ b) / (na * nb), -1.0, 1.0))


def calibrate_threshold(target, reference_models, pairs: InputPairSet):
    """Maximum similarity any reference model reaches against the target.

    Returns None when no references are given; verdicts then stay
    undecided.
    """
    refs = list(reference_models)
    if not refs:
        return None
    ddv_target = compute_ddv(target, pairs)
    return max(similarity(ddv_target, compute_ddv(r, pairs)) for r in refs)


@dataclass
class ComparisonReport:
    target_id: str
    suspect_id: str
    similarity: float
    threshold: float | None
    verdict: str  # reused | not_reused | undecided
    pairset_id: str
    gen_config: dict
    config_hash: str
    flags: list = field(default_factory=list)
    tool_version: str = _version

    def to_json(self) -> str:
        d = dict(self.__dict__)
        return json.dumps(d, indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "ComparisonReport":
        return cls(**json.loads(text))


def _verdict(sim, threshold):
    if threshold is None:
        return "undecided"
    return "reused" if sim > threshold else "not_reused"


def compare(
    target,
    suspect,
    seeds: np.ndarray,
    cfg: GenConfig,
    reference_models=(),
    pairs: InputPairSet | None = None,
) -> ComparisonReport:
    """Full pipeline: generate probes on the target, compare DDVs, decide.

    The suspect only needs forward(); the target must be white-box for
    whitebox mode.  A pre-generated probe set for the same target and
    config can be passed to skip generation.
    """
    if tuple(target.input_shape) != tuple(suspect.input_shape):
        raise ShapeError(
            f"models accept different input shapes: {tuple(target.input_shape)} "
            f"vs {tuple(suspect.input_shape)}"
        )
    if pairs is None:
        if cfg.mode == "whitebox":
            if getattr(target, "access", "blackbox") != "whitebox":
                raise UnsupportedOperation(
                    "whitebox mode needs a white-box target; use mode=blackbox"
                )
            pairs = gen_whitebox(target, seeds, cfg)
        else:
            pairs = gen_blackbox(target, seeds, cfg)
    elif pairs.target_model_id != target.id:
        raise ValueError(
            f"probe set was generated for {pairs.target_model_id}, not {target.id}"
        )

    ddv_t = compute_ddv(target, pairs)
    ddv_s = compute_ddv(suspect, pairs)
    sim = similarity(ddv_t, ddv_s)
    flags = []
    if ddv_t.degenerate_pairs or ddv_s.degenerate_pairs:
        flags.append(
            f"zero-output pairs: target={ddv_t.degenerate_pairs} "
            f"suspect={ddv_s.degenerate_pairs}"
        )
    if not np.any(ddv_t.values) or not np.any(ddv_s.values):
        flags.append("all-zero DDV (constant model?)")

    threshold = None
    refs = list(reference_models)
    if refs:
        threshold = max(similarity(ddv_t, compute_ddv(r, pairs)) for r in refs)

    return ComparisonReport(
        target_id=target.id,
        suspect_id=suspect.id,
        similarity=sim,
        threshold=threshold,
        verdict=_verdict(sim, threshold),
        pairset_id=pairs.pairset_id,
        gen_config=cfg.to_dict(),
        config_hash=config_hash(cfg),
        flags=flags,
    )
