"""Backend parity: compiled kernels against the NumPy fallback."""

import numpy as np
import pytest

from ddvkit.runtime.kernels import _numpy_impl as npk
from ddvkit.runtime.kernels import backend_name

try:
    from ddvkit.runtime.kernels import _fastcore as cyk

    HAVE_EXT = True
except ImportError:
    HAVE_EXT = False

needs_ext = pytest.mark.skipif(not HAVE_EXT, reason="compiled kernels not built")


def _cases():
    rng = np.random.default_rng(99)
    shapes = [
        # (n, ci, h, w, co, k, stride, pad)
        (2, 1, 8, 8, 4, 3, 1, 1),
        (3, 2, 7, 7, 3, 3, 2, 1),
        (1, 3, 6, 6, 5, 2, 1, 0),
        (2, 4, 9, 9, 2, 5, 2, 2),
    ]
    for n, ci, h, w, co, k, stride, pad in shapes:
        x = rng.standard_normal((n, ci, h, w)).astype(np.float32)
        wts = rng.standard_normal((co, ci, k, k)).astype(np.float32)
        b = rng.standard_normal(co).astype(np.float32)
        yield x, wts, b, stride, pad


@needs_ext
class TestConvParity:
    def test_forward(self):
        for x, w, b, s, p in _cases():
            ref = npk.conv2d_forward(x, w, b, s, p)
            fast = cyk.conv2d_forward(x, w, b, s, p)
            np.testing.assert_allclose(fast, ref, rtol=1e-6, atol=1e-6)

    def test_backward_input(self):
        rng = np.random.default_rng(7)
        for x, w, b, s, p in _cases():
            y = npk.conv2d_forward(x, w, b, s, p)
            gy = rng.standard_normal(y.shape).astype(np.float32)
            ref = npk.conv2d_backward_input(gy, w, x.shape, s, p)
            fast = cyk.conv2d_backward_input(gy, w, x.shape, s, p)
            np.testing.assert_allclose(fast, ref, rtol=1e-5, atol=1e-5)

    def test_backward_weights(self):
        rng = np.random.default_rng(8)
        for x, w, b, s, p in _cases():
            y = npk.conv2d_forward(x, w, b, s, p)
            gy = rng.standard_normal(y.shape).astype(np.float32)
            ref_w, ref_b = npk.conv2d_backward_weights(gy, x, w.shape, s, p)
            fast_w, fast_b = cyk.conv2d_backward_weights(gy, x, w.shape, s, p)
            np.testing.assert_allclose(fast_w, ref_w, rtol=1e-5, atol=1e-5)
            np.testing.assert_allclose(fast_b, ref_b, rtol=1e-5, atol=1e-5)


@needs_ext
class TestPoolParity:
    def test_forward_and_argmax(self):
        rng = np.random.default_rng(11)
        for shape, k, s in [((2, 3, 8, 8), 2, 2), ((1, 2, 7, 7), 3, 2), ((2, 1, 6, 6), 2, 1)]:
            x = rng.standard_normal(shape).astype(np.float32)
            ref_y, ref_a = npk.maxpool_forward(x, k, s)
            fast_y, fast_a = cyk.maxpool_forward(x, k, s)
            np.testing.assert_array_equal(fast_y, ref_y)
            np.testing.assert_array_equal(fast_a, ref_a)

    def test_tie_breaks_first_position(self):
        x = np.zeros((1, 1, 4, 4), dtype=np.float32)  # all equal: first index wins
        for impl in [npk] + ([cyk] if HAVE_EXT else []):
            y, a = impl.maxpool_forward(x, 2, 2)
            np.testing.assert_array_equal(a[0, 0], [[0, 2], [8, 10]])

    def test_backward(self):
        rng = np.random.default_rng(12)
        x = rng.standard_normal((2, 3, 8, 8)).astype(np.float32)
        y, a = npk.maxpool_forward(x, 2, 2)
        gy = rng.standard_normal(y.shape).astype(np.float32)
        ref = npk.maxpool_backward(gy, a, x.shape, 2, 2)
        fast = cyk.maxpool_backward(gy, a, x.shape, 2, 2)
        np.testing.assert_allclose(fast, ref, rtol=1e-6, atol=1e-6)


def test_backend_reports_name():
    assert backend_name() in ("compiled", "numpy")


def test_pure_python_env_override():
    import subprocess
    import sys

    out = subprocess.run(
        [sys.executable, "-c",
         "from ddvkit.runtime.kernels import backend_name; print(backend_name())"],
        env={"PATH": "/usr/bin:/bin", "DDVKIT_PURE_PYTHON": "1"},
        capture_output=True, text=True, check=True,
    )
    assert out.stdout.strip() == "numpy"
