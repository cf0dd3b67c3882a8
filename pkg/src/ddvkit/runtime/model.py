"""Model container: an ordered feedforward layer stack with metadata.

A model records its lineage (the chain of operations that produced it) and
an access level.  ``whitebox`` models expose layers and gradients;
``blackbox`` views expose only ``forward``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from ..errors import ShapeError, UnsupportedOperation
from .layers import Conv2D, Softmax
from .tensor import DTYPE, check_finite, ensure_batch

F64 = np.float64


@dataclass
class Model:
    id: str
    layers: list
    input_shape: tuple
    output_dim: int
    lineage: list = field(default_factory=list)
    access: str = "whitebox"

    def __post_init__(self):
        self.input_shape = tuple(int(d) for d in self.input_shape)
        if self.output_dim <= 0:
            raise ShapeError(f"output_dim must be positive, got {self.output_dim}")
        if self.access not in ("whitebox", "blackbox"):
            raise ValueError(f"access must be whitebox or blackbox, got {self.access!r}")
        self._shapes = self._compose_shapes()

    def _compose_shapes(self):
        """Chain layer output shapes, naming the first layer that breaks."""
        shapes = [self.input_shape]
        cur = self.input_shape
        for i, layer in enumerate(self.layers):
            try:
                cur = layer.out_shape(cur)
            except ShapeError as exc:
                raise ShapeError(f"layer {i} ({layer.kind}): {exc}") from None
            shapes.append(tuple(cur))
        if int(np.prod(cur)) != self.output_dim:
            raise ShapeError(
                f"final layer produces shape {tuple(cur)} "
                f"({int(np.prod(cur))} values), expected output_dim={self.output_dim}"
            )
        return shapes

    @property
    def layer_shapes(self):
        """Per-layer output shapes, index 0 being the input shape."""
        return list(self._shapes)

    def param_layers(self):
        """(index, layer) for every parameterized layer, in order."""
        return [(i, l) for i, l in enumerate(self.layers) if l.has_params]

    # -- inference ---------------------------------------------------------

    def forward(self, batch) -> np.ndarray:
        """Run the batch through all layers; returns [n, output_dim]."""
        x = ensure_batch(batch, self.input_shape, context=f"model {self.id}")
        for i, layer in enumerate(self.layers):
            try:
                x, _ = layer.forward(x)
            except ShapeError as exc:
                raise ShapeError(f"layer {i} ({layer.kind}): {exc}") from None
        out = x.reshape(x.shape[0], -1)
        check_finite(out, context=f"model {self.id} output")
        return out

    def forward_full(self, batch):
        """Forward pass keeping activations and backward caches.

        Returns (activations, caches): activations[i] is the input to layer
        i; activations[-1] is the final output.
        """
        self._require_whitebox("forward_full")
        x = ensure_batch(batch, self.input_shape, context=f"model {self.id}")
        acts = [x]
        caches = []
        for layer in self.layers:
            x, cache = layer.forward(x)
            acts.append(x)
            caches.append(cache)
        return acts, caches

    def backward(self, caches, grads_by_layer, need_weight_grads=False):
        """Backpropagate from injected output gradients.

        ``grads_by_layer`` maps layer index -> gradient of the loss with
        respect to that layer's OUTPUT.  Returns (grad_input, weight_grads)
        where weight_grads maps layer index -> (gw, gb).
        """
        self._require_whitebox("backward")
        grads_by_layer = dict(grads_by_layer)
        wgrads = {}
        g = None
        for i in range(len(self.layers) - 1, -1, -1):
            if i in grads_by_layer:
                inj = np.asarray(grads_by_layer[i], dtype=DTYPE)
                g = inj if g is None else g + inj
            if g is None:
                continue
            layer = self.layers[i]
            need = need_weight_grads and layer.has_params
            g, gw, gb = layer.backward(g, caches[i], need)
            if need:
                wgrads[i] = (gw, gb)
        return g, wgrads

    # -- access control ----------------------------------------------------

    def _require_whitebox(self, op):
        if self.access != "whitebox":
            raise UnsupportedOperation(f"{op} requires white-box access (model {self.id})")

    def as_blackbox(self) -> "BlackboxModel":
        """Restricted view exposing only forward()."""
        return BlackboxModel(self)

    def copy(self, new_id=None) -> "Model":
        return Model(
            id=self.id if new_id is None else new_id,
            layers=[l.copy() for l in self.layers],
            input_shape=self.input_shape,
            output_dim=self.output_dim,
            lineage=[dict(r) for r in self.lineage],
            access=self.access,
        )

    # -- metadata helpers ----------------------------------------------------

    @property
    def task_id(self):
        """Task the model was most recently trained for, if recorded."""
        for record in reversed(self.lineage):
            if "task" in record:
                return record["task"]
        return None

    @property
    def arch(self):
        for record in self.lineage:
            if "arch" in record:
                return record["arch"]
        return None

    def last_conv_index(self):
        idx = None
        for i, layer in enumerate(self.layers):
            if isinstance(layer, Conv2D):
                idx = i
        return idx

    def logits_index(self):
        """Index of the layer producing pre-softmax scores, if softmax-final."""
        if self.layers and isinstance(self.layers[-1], Softmax):
            return len(self.layers) - 2
        return len(self.layers) - 1


class BlackboxModel:
    """Opaque wrapper: inference only, no layers, no gradients."""

    access = "blackbox"

    def __init__(self, model: Model):
        self._model = model
        self.id = model.id
        self.input_shape = model.input_shape
        self.output_dim = model.output_dim

    def forward(self, batch) -> np.ndarray:
        return self._model.forward(batch)


@dataclass
class Objective:
    """Scalar objective over model outputs with its output-space gradient."""

    value: Callable[[np.ndarray], float]
    grad: Callable[[np.ndarray], np.ndarray]


def output_element(row: int, col: int) -> Objective:
    """Objective selecting a single output entry (e.g. one class score)."""

    def value(y):
        return float(y[row, col])

    def grad(y):
        g = np.zeros_like(y, dtype=DTYPE)
        g[row, col] = 1.0
        return g

    return Objective(value, grad)


def constant_objective(c: float = 0.0) -> Objective:
    return Objective(lambda y: float(c), lambda y: np.zeros_like(y, dtype=DTYPE))


def forward(model, batch) -> np.ndarray:
    """Module-level forward; works for any object exposing .forward()."""
    return model.forward(batch)


def input_gradient(model, x, objective: Objective) -> np.ndarray:
    """Gradient of a scalar objective of the outputs w.r.t. the input.

    Accepts a single input (shape == model.input_shape) or a batch; the
    returned gradient matches the given shape.
    """
    if getattr(model, "access", "blackbox") != "whitebox" or not isinstance(model, Model):
        raise UnsupportedOperation("input_gradient requires a white-box model")
    x = np.asarray(x, dtype=DTYPE)
    single = x.shape == model.input_shape
    batch = x[None] if single else x
    acts, caches = model.forward_full(batch)
    out = acts[-1].reshape(batch.shape[0], -1)
    gy = np.asarray(objective.grad(out), dtype=DTYPE).reshape(acts[-1].shape)
    gx, _ = model.backward(caches, {len(model.layers) - 1: gy})
    if gx is None:
        gx = np.zeros_like(batch)
    return gx[0] if single else gx
