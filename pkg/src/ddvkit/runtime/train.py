"""Plain SGD training with cross-entropy loss, layer freezing, weight masks.

Training never mutates the input model: it works on a private copy and
returns it.  ``trainable_layer_mask`` freezes parameterized layers
(frozen weights stay bit-identical); ``weight_masks`` pins individual
weights to zero after every update (used to preserve pruning).
"""

from __future__ import annotations

import logging

import numpy as np

from ..errors import ShapeError
from .layers import Softmax
from .model import Model
from .tensor import DTYPE, check_finite

logger = logging.getLogger(__name__)

F64 = np.float64


def _data_arrays(dataset):
    if hasattr(dataset, "images") and hasattr(dataset, "labels"):
        return dataset.images, dataset.labels
    images, labels = dataset
    return np.asarray(images), np.asarray(labels)


def _logits(model, batch):
    """Forward pass stopping before a final softmax layer."""
    acts, caches = model.forward_full(batch)
    if isinstance(model.layers[-1], Softmax):
        return acts[-2], caches
    return acts[-1], caches


def softmax_probs(logits):
    z = logits.astype(F64)
    z -= z.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def cross_entropy(model, dataset) -> float:
    """Mean cross-entropy of the model on a labeled dataset."""
    images, labels = _data_arrays(dataset)
    probs = softmax_probs(_model_logits_only(model, images))
    p = probs[np.arange(len(labels)), labels]
    return float(-np.log(np.maximum(p, 1e-12)).mean())


def accuracy(model, dataset) -> float:
    images, labels = _data_arrays(dataset)
    pred = model.forward(images).argmax(axis=1)
    return float((pred == np.asarray(labels)).mean())


def _model_logits_only(model, batch):
    x = batch
    out = None
    # cheap forward without caches; stops before final softmax
    layers = model.layers[:-1] if isinstance(model.layers[-1], Softmax) else model.layers
    x = np.ascontiguousarray(batch, dtype=DTYPE)
    for layer in layers:
        x, _ = layer.forward(x)
    return x.reshape(x.shape[0], -1)


def train(
    model: Model,
    dataset,
    epochs: int,
    lr: float,
    trainable_layer_mask=None,
    batch_size: int = 16,
    seed: int = 0,
    weight_masks=None,
) -> Model:
    """SGD + cross-entropy on a private copy of the model.

    trainable_layer_mask: bool per parameterized layer (True = update);
    length must match the number of parameterized layers.  weight_masks
    maps parameterized-layer index -> binary mask multiplied into the
    weights after every step.
    """
    images, labels = _data_arrays(dataset)
    if len(images) == 0:
        raise ValueError("empty dataset")
    if lr < 0:
        raise ValueError(f"learning rate must be >= 0, got {lr}")
    if tuple(images.shape[1:]) != model.input_shape:
        raise ShapeError(
            f"dataset inputs {tuple(images.shape[1:])} do not match "
            f"model input shape {model.input_shape}"
        )
    labels = np.asarray(labels, dtype=np.int64)
    if labels.min() < 0 or labels.max() >= model.output_dim:
        raise ValueError("labels outside [0, output_dim)")
    if not isinstance(model.layers[-1], Softmax):
        raise ShapeError("train expects a softmax-final classifier")

    out = model.copy()
    params = out.param_layers()
    if trainable_layer_mask is None:
        trainable_layer_mask = [True] * len(params)
    if len(trainable_layer_mask) != len(params):
        raise ValueError(
            f"trainable_layer_mask length {len(trainable_layer_mask)} != "
            f"{len(params)} parameterized layers"
        )
    trainable = {
        idx: bool(flag) for (idx, _), flag in zip(params, trainable_layer_mask)
    }
    masks = {}
    if weight_masks:
        masks = {idx: np.asarray(m, dtype=DTYPE) for idx, m in weight_masks.items()}

    rng = np.random.default_rng(seed)
    n = len(images)
    logit_idx = out.logits_index()
    onehot = np.zeros((n, model.output_dim), dtype=DTYPE)
    onehot[np.arange(n), labels] = 1.0

    for epoch in range(epochs):
        order = rng.permutation(n)
        epoch_loss = 0.0
        for start in range(0, n, batch_size):
            sel = order[start : start + batch_size]
            xb = np.ascontiguousarray(images[sel])
            yb = onehot[sel]
            acts, caches = out.forward_full(xb)
            logits = acts[logit_idx + 1].reshape(len(sel), -1)
            probs = softmax_probs(logits)
            p_true = probs[np.arange(len(sel)), labels[sel]]
            epoch_loss += float(-np.log(np.maximum(p_true, 1e-12)).sum())
            # fused softmax + cross-entropy gradient w.r.t. logits
            gy = ((probs - yb) / len(sel)).astype(DTYPE).reshape(acts[logit_idx + 1].shape)
            if lr == 0.0:
                continue
            _, wgrads = out.backward(caches, {logit_idx: gy}, need_weight_grads=True)
            for idx, (gw, gb) in wgrads.items():
                if not trainable.get(idx, False):
                    continue
                layer = out.layers[idx]
                layer.weights -= DTYPE(lr) * gw
                layer.bias -= DTYPE(lr) * gb
                if idx in masks:
                    layer.weights *= masks[idx]
                layer.quant = None  # updated weights invalidate any int8 backing
                check_finite(layer.weights, context=f"layer {idx} weights during training")
        logger.debug("epoch %d: mean cross-entropy %.6f", epoch, epoch_loss / n)

    return out
