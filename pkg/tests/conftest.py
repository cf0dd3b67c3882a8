"""Shared fixtures: small models, datasets, and the session-scoped bench.

The full MiniBench takes minutes to build; it is constructed once per
session in a temporary directory and reused by the harness and acceptance
tests.
"""

from __future__ import annotations

import numpy as np
import pytest

from ddvkit.data import make_dataset
from ddvkit.forge import BenchConfig, build_bench
from ddvkit.runtime import Conv2D, Dense, MaxPool2D, Model, ReLU, Softmax


def tiny_classifier(seed=0, n_classes=4, softmax=True, model_id="tiny"):
    """Small convnet on 1x8x8 inputs; fast enough for per-test training."""
    rng = np.random.default_rng(seed)
    layers = [
        Conv2D.init(1, 4, 3, rng, padding=1),
        ReLU(),
        MaxPool2D(2, 2),
        Dense.init(4 * 4 * 4, n_classes, rng),
    ]
    if softmax:
        layers.append(Softmax())
    return Model(
        id=f"{model_id}-s{seed}",
        layers=layers,
        input_shape=(1, 8, 8),
        output_dim=n_classes,
        lineage=[{"op": "init", "arch": "tiny", "seed": seed}],
    )


@pytest.fixture(scope="session")
def taskA_small():
    return make_dataset("taskA", 1234, 400)


@pytest.fixture(scope="session")
def bench_config():
    return BenchConfig(seed=2024)


@pytest.fixture(scope="session")
def bench(tmp_path_factory, bench_config):
    root = tmp_path_factory.mktemp("minibench")
    return build_bench(bench_config, root)
