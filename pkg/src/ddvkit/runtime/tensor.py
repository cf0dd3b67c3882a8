"""Array conventions: float32, C-contiguous, finite.

A tensor in this runtime is a plain ``numpy.ndarray`` of float32 in
row-major order; these helpers normalize inputs and enforce the finiteness
contract at public entry points.
"""

from __future__ import annotations

import numpy as np

from ..errors import ShapeError

DTYPE = np.float32


def tensor(data, shape=None) -> np.ndarray:
    """Build a float32 C-order array, optionally reshaped."""
    arr = np.ascontiguousarray(data, dtype=DTYPE)
    if shape is not None:
        if int(np.prod(shape)) != arr.size:
            raise ShapeError(f"cannot view {arr.size} elements as shape {tuple(shape)}")
        arr = arr.reshape(shape)
    return arr


def ensure_batch(x, input_shape, context="input") -> np.ndarray:
    """Validate a [n] + input_shape batch and convert to float32 C-order."""
    arr = np.ascontiguousarray(x, dtype=DTYPE)
    if arr.ndim != len(input_shape) + 1 or tuple(arr.shape[1:]) != tuple(input_shape):
        raise ShapeError(
            f"{context}: expected batch of shape [n, {', '.join(map(str, input_shape))}], "
            f"got {tuple(arr.shape)}"
        )
    check_finite(arr, context)
    return arr


def check_finite(arr, context="tensor") -> None:
    if not np.isfinite(arr).all():
        raise ValueError(f"{context}: non-finite values present")
