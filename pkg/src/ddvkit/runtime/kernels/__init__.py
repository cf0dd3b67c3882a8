"""Kernel backend selection.

Imports the compiled extension when present, otherwise the NumPy fallback.
Set ``DDVKIT_PURE_PYTHON=1`` to force the fallback (e.g. for benchmarking
or debugging).  Both backends share one contract: float32 in/out, float64
accumulation, first-maximum tie-breaking in pooling.
"""

import os

_FORCE_PY = os.environ.get("DDVKIT_PURE_PYTHON", "").strip().lower() in ("1", "true", "yes")

if _FORCE_PY:
    from . import _numpy_impl as _impl

    BACKEND = "numpy"
else:
    try:
        from . import _fastcore as _impl  # type: ignore[attr-defined]

        BACKEND = "compiled"
    except ImportError:
        from . import _numpy_impl as _impl

        BACKEND = "numpy"

conv2d_forward = _impl.conv2d_forward
conv2d_backward_input = _impl.conv2d_backward_input
conv2d_backward_weights = _impl.conv2d_backward_weights
maxpool_forward = _impl.maxpool_forward
maxpool_backward = _impl.maxpool_backward


def backend_name() -> str:
    """Active kernel backend: 'compiled' or 'numpy'."""
    return BACKEND
