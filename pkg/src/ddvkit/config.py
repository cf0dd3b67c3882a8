"""Generation configuration, deterministic seed derivation, config hashing."""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass

import numpy as np

MODES = ("whitebox", "blackbox")


@dataclass
class GenConfig:
    """Knobs for probe-input generation.

    ``lam`` balances divergence against diversity in the quality score,
    ``epsilon`` is the per-step mutation magnitude of the black-box search,
    ``iterations`` its step budget, and ``low_diversity_ratio`` the fraction
    of closest output pairs marked as mutation candidates.  The white-box
    path uses an L-inf perturbation budget ``epsilon_box`` with
    ``pgd_steps`` sign-gradient steps of size ``epsilon_box / 10``.
    """

    lam: float = 0.5
    epsilon: float = 0.06
    iterations: int = 20000
    low_diversity_ratio: float = 0.5
    n_inputs: int = 100
    mode: str = "whitebox"
    rng_seed: int = 0
    epsilon_box: float = 0.15
    pgd_steps: int = 300

    def __post_init__(self):
        if self.lam < 0:
            raise ValueError(f"lam must be >= 0, got {self.lam}")
        if not 0 < self.epsilon < 1:
            raise ValueError(f"epsilon must be in (0, 1), got {self.epsilon}")
        if not 0 < self.low_diversity_ratio <= 1:
            raise ValueError(
                f"low_diversity_ratio must be in (0, 1], got {self.low_diversity_ratio}"
            )
        if self.n_inputs <= 0:
            raise ValueError(f"n_inputs must be positive, got {self.n_inputs}")
        if self.iterations < 0:
            raise ValueError(f"iterations must be >= 0, got {self.iterations}")
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}, got {self.mode!r}")
        if not 0 < self.epsilon_box <= 1:
            raise ValueError(f"epsilon_box must be in (0, 1], got {self.epsilon_box}")
        if self.pgd_steps < 0:
            raise ValueError(f"pgd_steps must be >= 0, got {self.pgd_steps}")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "GenConfig":
        return cls(**d)

    def replace(self, **kwargs) -> "GenConfig":
        d = self.to_dict()
        d.update(kwargs)
        return GenConfig.from_dict(d)


def canonical_json(obj) -> str:
    """JSON with sorted keys and no whitespace; stable across runs."""
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def config_hash(obj) -> str:
    """Short stable hash of any JSON-serializable configuration."""
    if hasattr(obj, "to_dict"):
        obj = obj.to_dict()
    digest = hashlib.sha256(canonical_json(obj).encode("utf-8")).hexdigest()
    return digest[:16]


def derive_seed(root_seed: int, *tags) -> int:
    """Stable 64-bit child seed for a (root seed, tag...) combination."""
    key = f"{root_seed}|" + "/".join(str(t) for t in tags)
    digest = hashlib.sha256(key.encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "little")


def rng_for(root_seed: int, *tags) -> np.random.Generator:
    return np.random.default_rng(derive_seed(root_seed, *tags))
