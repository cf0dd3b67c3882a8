"""Probe sets: seed inputs paired with generated adversarial counterparts."""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field

import numpy as np

from ..config import GenConfig, config_hash, rng_for
from ..container import read_container, write_container
from ..errors import ShapeError

FORMAT = "ddvkit-pairset"


@dataclass
class InputPairSet:
    seeds: np.ndarray  # [n, ...] float32 in [0, 1]
    adversarial: np.ndarray  # same shape
    target_model_id: str
    gen_config: GenConfig
    score_trace: list = field(default_factory=list)

    def __post_init__(self):
        if self.seeds.shape != self.adversarial.shape:
            raise ShapeError(
                f"seeds {self.seeds.shape} and adversarial {self.adversarial.shape} differ"
            )

    def __len__(self) -> int:
        return len(self.seeds)

    @property
    def pairset_id(self) -> str:
        """Stable content hash; DDVs are only comparable within one id."""
        h = hashlib.sha256()
        h.update(self.target_model_id.encode())
        h.update(config_hash(self.gen_config).encode())
        h.update(np.ascontiguousarray(self.seeds, dtype="<f4").tobytes())
        h.update(np.ascontiguousarray(self.adversarial, dtype="<f4").tobytes())
        return h.hexdigest()[:16]


def select_seeds(dataset, n: int, rng_seed: int, stratify: bool = True) -> np.ndarray:
    """Draw n samples without replacement, class-stratified by default.

    With stratification, per-class counts differ by at most one (classes
    cycled in label order, remainder going to the first classes).
    """
    images = dataset.images
    labels = np.asarray(dataset.labels)
    if len(images) == 0:
        raise ValueError("empty dataset")
    if n > len(images):
        raise ValueError(f"cannot select {n} seeds from {len(images)} samples")
    rng = rng_for(rng_seed, "select_seeds", n)
    if not stratify:
        idx = rng.choice(len(images), size=n, replace=False)
        return np.ascontiguousarray(images[idx])

    by_class = {}
    for c in np.unique(labels):
        pool = np.flatnonzero(labels == c)
        by_class[int(c)] = pool[rng.permutation(len(pool))]
    classes = sorted(by_class)
    picks = []
    cursor = dict.fromkeys(classes, 0)
    i = 0
    while len(picks) < n:
        c = classes[i % len(classes)]
        if cursor[c] < len(by_class[c]):
            picks.append(by_class[c][cursor[c]])
            cursor[c] += 1
        i += 1
        if i > n * len(classes) + len(images):
            raise ValueError("stratified selection exhausted the dataset")
    return np.ascontiguousarray(images[np.array(picks[:n])])


def save_pairset(pairs: InputPairSet, path, extra_header: dict | None = None) -> None:
    header = {
        "format": FORMAT,
        "target_model_id": pairs.target_model_id,
        "shape": list(pairs.seeds.shape),
        "gen_config": pairs.gen_config.to_dict(),
        "config_hash": config_hash(pairs.gen_config),
        "score_trace": [float(s) for s in pairs.score_trace],
        "pairset_id": pairs.pairset_id,
    }
    if extra_header:
        header.update(extra_header)
    write_container(
        path,
        header,
        {
            "seeds": np.ascontiguousarray(pairs.seeds, dtype="<f4").tobytes(),
            "adversarial": np.ascontiguousarray(pairs.adversarial, dtype="<f4").tobytes(),
        },
    )


def load_pairset(path) -> InputPairSet:
    header, blobs = read_container(path)
    if header.get("format") != FORMAT:
        raise ShapeError(f"not a pairset file (format={header.get('format')!r})")
    shape = tuple(header["shape"])
    seeds = np.frombuffer(blobs["seeds"], dtype="<f4").reshape(shape).copy()
    adv = np.frombuffer(blobs["adversarial"], dtype="<f4").reshape(shape).copy()
    return InputPairSet(
        seeds=seeds,
        adversarial=adv,
        target_model_id=header["target_model_id"],
        gen_config=GenConfig.from_dict(header["gen_config"]),
        score_trace=list(header.get("score_trace", [])),
    )
