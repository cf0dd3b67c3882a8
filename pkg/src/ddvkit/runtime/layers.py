"""Layer implementations: dense, conv2d, relu, maxpool, softmax.

Each layer exposes ``forward(x) -> (y, cache)`` and
``backward(gy, cache, need_wgrad) -> (gx, gw, gb)`` plus a serializable
hyperparameter spec.  Parameterized layers may carry int8 quantization
state; the float32 ``weights`` array is then the dequantized view used by
inference.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..errors import ShapeError
from . import kernels
from .tensor import DTYPE

F64 = np.float64


@dataclass
class QuantInfo:
    """Affine int8 weight quantization state: w ~= scale * (q - zero_point)."""

    q: np.ndarray  # int8, same shape as weights
    scale: float
    zero_point: int

    def dequantize(self) -> np.ndarray:
        return (self.scale * (self.q.astype(F64) - self.zero_point)).astype(DTYPE)

    def copy(self) -> "QuantInfo":
        return QuantInfo(self.q.copy(), self.scale, self.zero_point)


def quantize_array(w: np.ndarray):
    """Quantize to int8 with per-array affine (scale, zero_point).

    Degenerate constant arrays get scale 1 so the mapping stays invertible;
    the caller records that in lineage.
    """
    lo = float(w.min())
    hi = float(w.max())
    degenerate = hi == lo
    if degenerate:
        scale = 1.0
    else:
        scale = (hi - lo) / 254.0
    zp = int(math.floor(-127.0 - lo / scale + 0.5))
    q = np.clip(np.rint(w.astype(F64) / scale + zp), -128, 127).astype(np.int8)
    return QuantInfo(q=q, scale=scale, zero_point=zp), degenerate


class Dense:
    kind = "dense"
    has_params = True

    def __init__(self, in_features, out_features, weights=None, bias=None, quant=None):
        self.in_features = int(in_features)
        self.out_features = int(out_features)
        if weights is None:
            weights = np.zeros((self.in_features, self.out_features), dtype=DTYPE)
        if bias is None:
            bias = np.zeros(self.out_features, dtype=DTYPE)
        self.weights = np.ascontiguousarray(weights, dtype=DTYPE)
        self.bias = np.ascontiguousarray(bias, dtype=DTYPE)
        self.quant = quant
        if self.weights.shape != (self.in_features, self.out_features):
            raise ShapeError(
                f"dense weights shape {self.weights.shape} != "
                f"({self.in_features}, {self.out_features})"
            )
        if self.bias.shape != (self.out_features,):
            raise ShapeError(f"dense bias shape {self.bias.shape} != ({self.out_features},)")

    @classmethod
    def init(cls, in_features, out_features, rng):
        k = math.sqrt(1.0 / in_features)
        w = rng.uniform(-k, k, size=(in_features, out_features)).astype(DTYPE)
        b = rng.uniform(-k, k, size=out_features).astype(DTYPE)
        return cls(in_features, out_features, w, b)

    def out_shape(self, in_shape):
        if int(np.prod(in_shape)) != self.in_features:
            raise ShapeError(
                f"dense expects {self.in_features} input features, got shape {tuple(in_shape)}"
            )
        return (self.out_features,)

    def forward(self, x):
        x2 = x.reshape(x.shape[0], -1)
        y = x2.astype(F64) @ self.weights.astype(F64) + self.bias.astype(F64)
        return y.astype(DTYPE), (x2, x.shape)

    def backward(self, gy, cache, need_wgrad):
        x2, x_shape = cache
        gx = (gy.astype(F64) @ self.weights.astype(F64).T).astype(DTYPE).reshape(x_shape)
        if not need_wgrad:
            return gx, None, None
        gw = (x2.astype(F64).T @ gy.astype(F64)).astype(DTYPE)
        gb = gy.astype(F64).sum(axis=0).astype(DTYPE)
        return gx, gw, gb

    def spec(self):
        s = {"kind": "dense", "in_features": self.in_features, "out_features": self.out_features}
        if self.quant is not None:
            s["quant"] = {"scale": self.quant.scale, "zero_point": self.quant.zero_point}
        return s

    def copy(self):
        return Dense(
            self.in_features,
            self.out_features,
            self.weights.copy(),
            self.bias.copy(),
            None if self.quant is None else self.quant.copy(),
        )


class Conv2D:
    kind = "conv2d"
    has_params = True

    def __init__(self, in_channels, out_channels, kernel, stride=1, padding=0,
                 weights=None, bias=None, quant=None):
        self.in_channels = int(in_channels)
        self.out_channels = int(out_channels)
        self.kernel = int(kernel)
        self.stride = int(stride)
        self.padding = int(padding)
        if self.stride < 1:
            raise ShapeError(f"conv2d stride must be >= 1, got {self.stride}")
        if self.padding < 0:
            raise ShapeError(f"conv2d padding must be >= 0, got {self.padding}")
        wshape = (self.out_channels, self.in_channels, self.kernel, self.kernel)
        if weights is None:
            weights = np.zeros(wshape, dtype=DTYPE)
        if bias is None:
            bias = np.zeros(self.out_channels, dtype=DTYPE)
        self.weights = np.ascontiguousarray(weights, dtype=DTYPE)
        self.bias = np.ascontiguousarray(bias, dtype=DTYPE)
        self.quant = quant
        if self.weights.shape != wshape:
            raise ShapeError(f"conv2d weights shape {self.weights.shape} != {wshape}")
        if self.bias.shape != (self.out_channels,):
            raise ShapeError(f"conv2d bias shape {self.bias.shape} != ({self.out_channels},)")

    @classmethod
    def init(cls, in_channels, out_channels, kernel, rng, stride=1, padding=0):
        fan_in = in_channels * kernel * kernel
        k = math.sqrt(1.0 / fan_in)
        w = rng.uniform(-k, k, size=(out_channels, in_channels, kernel, kernel)).astype(DTYPE)
        b = rng.uniform(-k, k, size=out_channels).astype(DTYPE)
        return cls(in_channels, out_channels, kernel, stride, padding, w, b)

    def out_shape(self, in_shape):
        if len(in_shape) != 3 or in_shape[0] != self.in_channels:
            raise ShapeError(
                f"conv2d expects input [{self.in_channels}, h, w], got {tuple(in_shape)}"
            )
        _, h, w = in_shape
        oh = (h + 2 * self.padding - self.kernel) // self.stride + 1
        ow = (w + 2 * self.padding - self.kernel) // self.stride + 1
        if oh < 1 or ow < 1 or self.kernel > h + 2 * self.padding or self.kernel > w + 2 * self.padding:
            raise ShapeError(
                f"conv2d kernel {self.kernel} does not fit input {tuple(in_shape)} "
                f"with padding {self.padding}"
            )
        return (self.out_channels, oh, ow)

    def forward(self, x):
        y = kernels.conv2d_forward(x, self.weights, self.bias, self.stride, self.padding)
        return y, x

    def backward(self, gy, cache, need_wgrad):
        x = cache
        gx = kernels.conv2d_backward_input(gy, self.weights, x.shape, self.stride, self.padding)
        if not need_wgrad:
            return gx, None, None
        gw, gb = kernels.conv2d_backward_weights(
            gy, x, self.weights.shape, self.stride, self.padding
        )
        return gx, gw, gb

    def spec(self):
        s = {
            "kind": "conv2d",
            "in_channels": self.in_channels,
            "out_channels": self.out_channels,
            "kernel": self.kernel,
            "stride": self.stride,
            "padding": self.padding,
        }
        if self.quant is not None:
            s["quant"] = {"scale": self.quant.scale, "zero_point": self.quant.zero_point}
        return s

    def copy(self):
        return Conv2D(
            self.in_channels,
            self.out_channels,
            self.kernel,
            self.stride,
            self.padding,
            self.weights.copy(),
            self.bias.copy(),
            None if self.quant is None else self.quant.copy(),
        )


class ReLU:
    kind = "relu"
    has_params = False

    def out_shape(self, in_shape):
        return tuple(in_shape)

    def forward(self, x):
        return np.maximum(x, 0), x

    def backward(self, gy, cache, need_wgrad):
        return np.where(cache > 0, gy, 0).astype(DTYPE), None, None

    def spec(self):
        return {"kind": "relu"}

    def copy(self):
        return ReLU()


class MaxPool2D:
    kind = "maxpool"
    has_params = False

    def __init__(self, kernel=2, stride=2):
        self.kernel = int(kernel)
        self.stride = int(stride)
        if self.kernel < 1 or self.stride < 1:
            raise ShapeError("maxpool kernel and stride must be >= 1")

    def out_shape(self, in_shape):
        if len(in_shape) != 3:
            raise ShapeError(f"maxpool expects input [c, h, w], got {tuple(in_shape)}")
        c, h, w = in_shape
        if self.kernel > h or self.kernel > w:
            raise ShapeError(f"maxpool kernel {self.kernel} does not fit input {tuple(in_shape)}")
        oh = (h - self.kernel) // self.stride + 1
        ow = (w - self.kernel) // self.stride + 1
        return (c, oh, ow)

    def forward(self, x):
        y, argmax = kernels.maxpool_forward(x, self.kernel, self.stride)
        return y, (argmax, x.shape)

    def backward(self, gy, cache, need_wgrad):
        argmax, x_shape = cache
        return kernels.maxpool_backward(gy, argmax, x_shape, self.kernel, self.stride), None, None

    def spec(self):
        return {"kind": "maxpool", "kernel": self.kernel, "stride": self.stride}

    def copy(self):
        return MaxPool2D(self.kernel, self.stride)


class Softmax:
    kind = "softmax"
    has_params = False

    def out_shape(self, in_shape):
        if len(in_shape) != 1:
            raise ShapeError(f"softmax expects a flat input, got {tuple(in_shape)}")
        return tuple(in_shape)

    def forward(self, x):
        z = x.astype(F64)
        z -= z.max(axis=1, keepdims=True)
        e = np.exp(z)
        p = e / e.sum(axis=1, keepdims=True)
        return p.astype(DTYPE), p

    def backward(self, gy, cache, need_wgrad):
        p = cache  # float64 probabilities
        g = gy.astype(F64)
        inner = (g * p).sum(axis=1, keepdims=True)
        return (p * (g - inner)).astype(DTYPE), None, None

    def spec(self):
        return {"kind": "softmax"}

    def copy(self):
        return Softmax()


_KINDS = {
    "dense": Dense,
    "conv2d": Conv2D,
    "relu": ReLU,
    "maxpool": MaxPool2D,
    "softmax": Softmax,
}


def layer_from_spec(spec: dict):
    """Instantiate a layer (zero-filled parameters) from its spec dict."""
    kind = spec.get("kind")
    if kind not in _KINDS:
        raise ShapeError(f"unsupported layer kind {kind!r}")
    if kind == "dense":
        return Dense(spec["in_features"], spec["out_features"])
    if kind == "conv2d":
        return Conv2D(
            spec["in_channels"],
            spec["out_channels"],
            spec["kernel"],
            spec.get("stride", 1),
            spec.get("padding", 0),
        )
    if kind == "maxpool":
        return MaxPool2D(spec.get("kernel", 2), spec.get("stride", 2))
    if kind == "relu":
        return ReLU()
    return Softmax()
