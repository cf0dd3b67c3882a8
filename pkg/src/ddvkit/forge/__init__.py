"""Benchmark forging: datasets, reuse operations, and MiniBench assembly."""

from .bench import BenchConfig, BenchPair, MiniBench, build_bench, load_bench
from .reuse import distill, prune, quantize, retrain, steal, transfer

__all__ = [
    "BenchConfig",
    "BenchPair",
    "MiniBench",
    "build_bench",
    "load_bench",
    "distill",
    "prune",
    "quantize",
    "retrain",
    "steal",
    "transfer",
]
