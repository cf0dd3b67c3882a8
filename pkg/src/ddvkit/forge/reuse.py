"""Model reuse operations: transfer, prune, quantize, distill, steal.

Every operation returns a fresh model whose lineage is extended with a
record of what produced it; the input model is never mutated.
"""

from __future__ import annotations

import logging
import math

import numpy as np

from ..config import derive_seed, rng_for
from ..errors import UnsupportedOperation
from ..runtime.arch import build_model
from ..runtime.layers import Dense, quantize_array
from ..runtime.model import Model
from ..runtime.tensor import DTYPE
from ..runtime.train import softmax_probs, train

logger = logging.getLogger(__name__)

F64 = np.float64


def _require_whitebox(model, op):
    if not isinstance(model, Model) or model.access != "whitebox":
        raise UnsupportedOperation(f"{op} requires a white-box model")


def retrain(arch: str, dataset, epochs: int, lr: float, seed: int, model_id=None) -> Model:
    """Train a fresh model from scratch; no lineage connection to anything."""
    model = build_model(arch, dataset.n_classes, seed=seed, model_id=model_id)
    trained = train(model, dataset, epochs=epochs, lr=lr, seed=derive_seed(seed, "retrain"))
    trained.lineage.append(
        {"op": "train", "arch": arch, "task": dataset.task_id, "epochs": epochs,
         "lr": lr, "seed": seed}
    )
    return trained


def transfer(
    teacher: Model,
    dataset,
    tune_fraction: float,
    epochs: int = 8,
    lr: float = 0.05,
    seed: int = 0,
    model_id=None,
) -> Model:
    """Replace the head for the new task and fine-tune the trailing layers.

    The fresh head always trains; additionally the last
    ceil(tune_fraction * L) of the teacher's other parameterized layers
    are unfrozen (L counts the teacher's parameterized layers).  The rest
    stay bit-identical to the teacher.
    """
    _require_whitebox(teacher, "transfer")
    if not 0 < tune_fraction <= 1:
        raise ValueError(f"tune_fraction must be in (0, 1], got {tune_fraction}")

    student = teacher.copy()
    params = student.param_layers()
    head_idx, head = params[-1]
    if not isinstance(head, Dense):
        raise UnsupportedOperation("transfer expects a dense classification head")
    rng = rng_for(seed, "transfer-head", teacher.id)
    student.layers[head_idx] = Dense.init(head.in_features, dataset.n_classes, rng)

    n_params = len(params)
    n_tail = min(int(math.ceil(tune_fraction * n_params)), n_params - 1)
    mask = [False] * n_params
    mask[-1] = True  # fresh head
    for j in range(n_params - 1 - n_tail, n_params - 1):
        mask[j] = True

    new_id = model_id or f"{teacher.id}-transfer({dataset.task_id},{tune_fraction:g})"
    student = Model(
        id=new_id,
        layers=student.layers,
        input_shape=student.input_shape,
        output_dim=dataset.n_classes,
        lineage=list(student.lineage),
        access="whitebox",
    )
    student = train(
        student, dataset, epochs=epochs, lr=lr,
        trainable_layer_mask=mask, seed=derive_seed(seed, "transfer", teacher.id),
    )
    student.lineage.append(
        {"op": "transfer", "teacher": teacher.id, "task": dataset.task_id,
         "tune_fraction": tune_fraction, "epochs": epochs, "lr": lr, "seed": seed,
         "trained_layers": int(sum(mask))}
    )
    return student


def prune(
    model: Model,
    ratio: float,
    dataset=None,
    finetune_epochs: int = 0,
    lr: float = 0.05,
    seed: int = 0,
    model_id=None,
) -> Model:
    """Zero the globally smallest-magnitude fraction of conv/dense weights.

    The zero mask is enforced through fine-tuning, so achieved sparsity is
    exact.  Biases are untouched.
    """
    _require_whitebox(model, "prune")
    if not 0 < ratio < 1:
        raise ValueError(f"prune ratio must be in (0, 1), got {ratio}")

    pruned = model.copy(new_id=model_id or f"{model.id}-prune({ratio:g})")
    params = pruned.param_layers()
    sizes = [layer.weights.size for _, layer in params]
    flat = np.concatenate([np.abs(layer.weights).ravel() for _, layer in params])
    k = int(round(ratio * flat.size))
    cut = np.argpartition(flat, k - 1)[:k] if k > 0 else np.array([], dtype=np.int64)

    masks = {}
    offset = 0
    for (idx, layer), size in zip(params, sizes):
        local = cut[(cut >= offset) & (cut < offset + size)] - offset
        mask = np.ones(size, dtype=DTYPE)
        mask[local] = 0.0
        mask = mask.reshape(layer.weights.shape)
        layer.weights *= mask
        masks[idx] = mask
        offset += size

    if finetune_epochs > 0:
        if dataset is None:
            raise ValueError("fine-tuning requires a dataset")
        pruned = train(
            pruned, dataset, epochs=finetune_epochs, lr=lr,
            seed=derive_seed(seed, "prune-finetune", model.id), weight_masks=masks,
        )
    pruned.lineage.append(
        {"op": "prune", "parent": model.id, "ratio": ratio,
         "finetune_epochs": finetune_epochs, "lr": lr, "seed": seed}
    )
    return pruned


def quantize(model: Model, model_id=None) -> Model:
    """Post-training affine int8 quantization of each parameterized layer.

    Inference dequantizes on the fly (the stored float32 weights are the
    dequantized values).  Constant-weight layers get scale 1, recorded in
    lineage.
    """
    _require_whitebox(model, "quantize")
    q = model.copy(new_id=model_id or f"{model.id}-quant")
    degenerate_layers = []
    for idx, layer in q.param_layers():
        if layer.quant is not None:
            continue  # already int8-backed; stored values are final
        info, degenerate = quantize_array(layer.weights)
        layer.quant = info
        layer.weights = info.dequantize()
        if degenerate:
            degenerate_layers.append(idx)
            logger.info("layer %d has constant weights; quantization scale set to 1", idx)
    record = {"op": "quantize", "parent": model.id, "bits": 8}
    if degenerate_layers:
        record["scale_fallback_layers"] = degenerate_layers
    q.lineage.append(record)
    return q


def distill(
    teacher: Model,
    student_arch: str,
    dataset,
    epochs: int = 8,
    lr: float = 0.03,
    temperature: float = 4.0,
    feature_weight: float = 2.0,
    batch_size: int = 16,
    seed: int = 0,
    model_id=None,
) -> Model:
    """Train a fresh student on the teacher's soft outputs (+ features).

    Loss is temperature-softened KL between output distributions plus an
    MSE term on the last conv feature maps when their shapes match; the
    fallback to output-only distillation is recorded in lineage.
    """
    _require_whitebox(teacher, "distill")
    student = build_model(
        student_arch, teacher.output_dim, seed=derive_seed(seed, "distill-init", teacher.id),
        model_id=model_id or f"{teacher.id}-distill",
    )

    t_feat_idx = teacher.last_conv_index()
    s_feat_idx = student.last_conv_index()
    use_features = (
        feature_weight > 0
        and t_feat_idx is not None
        and s_feat_idx is not None
        and teacher.layer_shapes[t_feat_idx + 1] == student.layer_shapes[s_feat_idx + 1]
    )
    if not use_features:
        logger.info("feature shapes differ; distilling on outputs only")

    images = dataset.images
    n = len(images)
    rng = np.random.default_rng(derive_seed(seed, "distill", teacher.id))
    t_logit_idx = teacher.logits_index()
    s_logit_idx = student.logits_index()
    T = float(temperature)

    # teacher signals are fixed; compute once
    t_acts, _ = teacher.forward_full(images)
    t_logits_all = t_acts[t_logit_idx + 1].reshape(n, -1).astype(F64)
    t_soft_all = softmax_probs((t_logits_all / T).astype(DTYPE))
    t_feat_all = t_acts[t_feat_idx + 1].astype(F64) if use_features else None

    for _ in range(epochs):
        order = rng.permutation(n)
        for start in range(0, n, batch_size):
            sel = order[start : start + batch_size]
            xb = np.ascontiguousarray(images[sel])
            acts, caches = student.forward_full(xb)
            s_logits = acts[s_logit_idx + 1].reshape(len(sel), -1).astype(F64)
            s_soft = softmax_probs((s_logits / T).astype(DTYPE))
            # d/d(student logits) of T^2 * KL(teacher_soft || student_soft)
            g_logits = (T * (s_soft - t_soft_all[sel]) / len(sel)).astype(DTYPE)
            grads = {s_logit_idx: g_logits.reshape(acts[s_logit_idx + 1].shape)}
            if use_features:
                s_feat = acts[s_feat_idx + 1].astype(F64)
                diff = s_feat - t_feat_all[sel]
                g_feat = (2.0 * feature_weight * diff / diff[0].size / len(sel)).astype(DTYPE)
                grads[s_feat_idx] = g_feat
            _, wgrads = student.backward(caches, grads, need_weight_grads=True)
            for idx, (gw, gb) in wgrads.items():
                layer = student.layers[idx]
                layer.weights -= DTYPE(lr) * gw
                layer.bias -= DTYPE(lr) * gb

    student.lineage.append(
        {"op": "distill", "teacher": teacher.id, "student_arch": student_arch,
         "task": dataset.task_id, "epochs": epochs, "lr": lr,
         "temperature": temperature,
         "feature_weight": feature_weight if use_features else 0.0,
         "feature_fallback": not use_features, "seed": seed}
    )
    return student


def steal(
    teacher,
    student_arch: str,
    query_set: np.ndarray,
    n_classes: int | None = None,
    epochs: int = 8,
    lr: float = 0.1,
    seed: int = 0,
    task_id: str | None = None,
    model_id=None,
) -> Model:
    """Train a fresh model on the teacher's hard labels over a query set.

    Only forward() is used on the teacher, exactly once per query image
    (labels are cached across epochs), so black-box teachers work.
    """
    query_set = np.ascontiguousarray(query_set, dtype=DTYPE)
    labels = np.asarray(teacher.forward(query_set)).argmax(axis=1).astype(np.int64)
    if n_classes is None:
        n_classes = int(getattr(teacher, "output_dim"))
    student = build_model(
        student_arch, n_classes, seed=derive_seed(seed, "steal-init", teacher.id),
        model_id=model_id or f"{teacher.id}-steal({student_arch})",
    )
    student = train(
        student, (query_set, labels), epochs=epochs, lr=lr,
        seed=derive_seed(seed, "steal", teacher.id),
    )
    record = {"op": "steal", "teacher": teacher.id, "student_arch": student_arch,
              "queries": len(query_set), "epochs": epochs, "lr": lr, "seed": seed}
    if task_id is not None:
        record["task"] = task_id
    student.lineage.append(record)
    return student
