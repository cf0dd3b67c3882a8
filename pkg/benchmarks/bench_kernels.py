#!/usr/bin/env python3
"""Benchmark the compiled kernels against the pure-NumPy fallback.

Usage:
    python benchmarks/bench_kernels.py [--repeats 50]

Times conv2d forward/backward and maxpool on the shapes that dominate the
benchmark workloads (training batches and probe evaluation), plus one
end-to-end forward/backward of each reference architecture.
"""

import argparse
import time

import numpy as np

from ddvkit.runtime.kernels import _numpy_impl as npk

try:
    from ddvkit.runtime.kernels import _fastcore as cyk
except ImportError:
    cyk = None


CASES = [
    # label, n, ci, h, w, co, k, stride, pad
    ("conv 16x1x16x16 -> 8ch (train batch)", 16, 1, 16, 16, 8, 3, 1, 1),
    ("conv 16x8x8x8 -> 16ch", 16, 8, 8, 8, 16, 3, 1, 1),
    ("conv 100x1x16x16 -> 8ch (probe batch)", 100, 1, 16, 16, 8, 3, 1, 1),
    ("conv 100x14x8x8 -> 20ch", 100, 14, 8, 8, 20, 3, 1, 1),
]


def timeit(fn, repeats):
    fn()  # warm up
    t0 = time.perf_counter()
    for _ in range(repeats):
        fn()
    return (time.perf_counter() - t0) / repeats


def bench_kernels(repeats):
    rng = np.random.default_rng(0)
    rows = []
    for label, n, ci, h, w, co, k, s, p in CASES:
        x = rng.standard_normal((n, ci, h, w)).astype(np.float32)
        wts = rng.standard_normal((co, ci, k, k)).astype(np.float32)
        b = rng.standard_normal(co).astype(np.float32)
        y = npk.conv2d_forward(x, wts, b, s, p)
        gy = rng.standard_normal(y.shape).astype(np.float32)

        for op, np_fn, cy_fn in [
            ("forward", lambda: npk.conv2d_forward(x, wts, b, s, p),
             (lambda: cyk.conv2d_forward(x, wts, b, s, p)) if cyk else None),
            ("bwd input", lambda: npk.conv2d_backward_input(gy, wts, x.shape, s, p),
             (lambda: cyk.conv2d_backward_input(gy, wts, x.shape, s, p)) if cyk else None),
            ("bwd weights", lambda: npk.conv2d_backward_weights(gy, x, wts.shape, s, p),
             (lambda: cyk.conv2d_backward_weights(gy, x, wts.shape, s, p)) if cyk else None),
        ]:
            t_np = timeit(np_fn, repeats)
            t_cy = timeit(cy_fn, repeats) if cy_fn else float("nan")
            rows.append((f"{label} [{op}]", t_np, t_cy))
    return rows


def bench_models(repeats):
    from ddvkit.runtime import build_model
    from ddvkit.runtime.kernels import backend_name

    rows = []
    rng = np.random.default_rng(1)
    for arch in ("convnetA", "convnetB"):
        model = build_model(arch, 4, seed=0)
        x = rng.random((32, 1, 16, 16), dtype=np.float64).astype(np.float32)

        def step():
            acts, caches = model.forward_full(x)
            gy = np.ones_like(acts[-1])
            model.backward(caches, {len(model.layers) - 1: gy}, need_weight_grads=True)

        rows.append((f"{arch} fwd+bwd batch32 [{backend_name()}]", timeit(step, repeats)))
    return rows


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--repeats", type=int, default=50)
    args = parser.parse_args()

    if cyk is None:
        print("compiled kernels not available; timing NumPy fallback only\n")

    print(f"{'case':<48} {'numpy':>10} {'compiled':>10} {'speedup':>8}")
    print("-" * 80)
    for label, t_np, t_cy in bench_kernels(args.repeats):
        speedup = f"{t_np / t_cy:6.2f}x" if t_cy == t_cy else "     -"
        cy_txt = f"{t_cy * 1e3:8.3f}ms" if t_cy == t_cy else "       -"
        print(f"{label:<48} {t_np * 1e3:8.3f}ms {cy_txt} {speedup}")

    print()
    for label, t in bench_models(args.repeats):
        print(f"{label:<48} {t * 1e3:8.3f}ms")


if __name__ == "__main__":
    main()
