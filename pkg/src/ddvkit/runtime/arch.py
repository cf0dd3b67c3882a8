"""Reference architectures used across the benchmark.

Two deliberately different convnets over 1x16x16 inputs:

* convnetA: conv-pool-conv-pool then two dense layers (4 param layers)
* convnetB: three conv layers, single dense head (4 param layers)

Their last-conv feature maps have different shapes, so feature-level
comparisons across the two are undefined by construction.
"""

from __future__ import annotations

import numpy as np

from ..config import rng_for
from .layers import Conv2D, Dense, MaxPool2D, ReLU, Softmax
from .model import Model

INPUT_SHAPE = (1, 16, 16)

ARCHS = ("convnetA", "convnetB")


def build_model(arch: str, n_classes: int, seed: int, model_id: str | None = None) -> Model:
    """Freshly initialized classifier of the given architecture."""
    if arch == "convnetA":
        layers = _convnet_a(n_classes, seed)
    elif arch == "convnetB":
        layers = _convnet_b(n_classes, seed)
    else:
        raise ValueError(f"unknown architecture {arch!r}; expected one of {ARCHS}")
    mid = model_id or f"{arch}-s{seed}"
    return Model(
        id=mid,
        layers=layers,
        input_shape=INPUT_SHAPE,
        output_dim=n_classes,
        lineage=[{"op": "init", "arch": arch, "seed": seed}],
    )


def _convnet_a(n_classes, seed):
    rng = rng_for(seed, "convnetA")
    return [
        Conv2D.init(1, 8, 3, rng, stride=1, padding=1),    # -> 8x16x16
        ReLU(),
        MaxPool2D(2, 2),                                   # -> 8x8x8
        Conv2D.init(8, 16, 3, rng, stride=1, padding=1),   # -> 16x8x8
        ReLU(),
        MaxPool2D(2, 2),                                   # -> 16x4x4
        Dense.init(16 * 4 * 4, 32, rng),
        ReLU(),
        Dense.init(32, n_classes, rng),
        Softmax(),
    ]


def _convnet_b(n_classes, seed):
    rng = rng_for(seed, "convnetB")
    return [
        Conv2D.init(1, 10, 3, rng, stride=1, padding=1),   # -> 10x16x16
        ReLU(),
        MaxPool2D(2, 2),                                   # -> 10x8x8
        Conv2D.init(10, 14, 3, rng, stride=1, padding=1),  # -> 14x8x8
        ReLU(),
        Conv2D.init(14, 20, 3, rng, stride=1, padding=1),  # -> 20x8x8
        ReLU(),
        MaxPool2D(2, 2),                                   # -> 20x4x4
        Dense.init(20 * 4 * 4, n_classes, rng),
        Softmax(),
    ]
