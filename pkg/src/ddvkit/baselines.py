"""Comparison baselines: weight equality, feature maps, and fingerprints.

Each comparator returns a similarity in [0, 1] or None when the pair is
infeasible for that method (black-box access, architecture mismatch, or
disjoint label spaces).  Feasibility itself is part of what the harness
reports.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .container import read_container, write_container
from .errors import ShapeError
from .inputgen import InputPairSet
from .runtime.model import Model

F64 = np.float64

FINGERPRINT_FORMAT = "ddvkit-fingerprint"


def _whitebox(model) -> bool:
    return isinstance(model, Model) and model.access == "whitebox"


def _structure(layer):
    return {k: v for k, v in layer.spec().items() if k != "quant"}


def _same_family(f, g):
    """Same architecture up to a replaced classification head."""
    pf = [layer for _, layer in f.param_layers()]
    pg = [layer for _, layer in g.param_layers()]
    if len(pf) != len(pg) or not pf:
        return False
    return all(_structure(a) == _structure(b) for a, b in zip(pf[:-1], pg[:-1]))


def weight_compare(f, g, atol: float = 0.0):
    """Fraction of positionally identical parameterized layers.

    Two layers are identical when their hyperparameters match and their
    weights and biases are equal (bit-exact by default; pass ``atol`` to
    tolerate rounding, e.g. for dequantized weights).  Returns None when
    either model is black-box or the architectures differ beyond a
    replaced head: positional weight comparison is undefined then.
    """
    if not (_whitebox(f) and _whitebox(g)):
        return None
    if not _same_family(f, g):
        return None
    pf = [layer for _, layer in f.param_layers()]
    pg = [layer for _, layer in g.param_layers()]
    n = min(len(pf), len(pg))
    identical = 0
    for lf, lg in zip(pf[:n], pg[:n]):
        sf = {k: v for k, v in lf.spec().items() if k != "quant"}
        sg = {k: v for k, v in lg.spec().items() if k != "quant"}
        if sf != sg:
            continue
        if lf.weights.shape != lg.weights.shape:
            continue
        if atol == 0.0:
            same = np.array_equal(lf.weights, lg.weights) and np.array_equal(lf.bias, lg.bias)
        else:
            same = np.allclose(lf.weights, lg.weights, atol=atol, rtol=0.0) and np.allclose(
                lf.bias, lg.bias, atol=atol, rtol=0.0
            )
        identical += bool(same)
    return identical / n


def _last_conv_features(model: Model, inputs) -> np.ndarray:
    idx = model.last_conv_index()
    if idx is None:
        return None
    acts, _ = model.forward_full(inputs)
    return acts[idx + 1]


def feature_compare(f, g, inputs):
    """Mean cosine similarity of last-conv feature maps on normal inputs.

    Infeasible (None) when either model is black-box, lacks a conv layer,
    or the feature shapes differ.
    """
    if not (_whitebox(f) and _whitebox(g)):
        return None
    fi = f.last_conv_index()
    gi = g.last_conv_index()
    if fi is None or gi is None:
        return None
    if f.layer_shapes[fi + 1] != g.layer_shapes[gi + 1]:
        return None
    feat_f = _last_conv_features(f, inputs).reshape(len(inputs), -1).astype(F64)
    feat_g = _last_conv_features(g, inputs).reshape(len(inputs), -1).astype(F64)
    sims = []
    for a, b in zip(feat_f, feat_g):
        na = np.linalg.norm(a)
        nb = np.linalg.norm(b)
        if na == 0.0 or nb == 0.0:
            sims.append(1.0 if (na == 0.0 and nb == 0.0) else 0.0)
        else:
            sims.append(float(a @ b) / (na * nb))
    return float(np.mean(sims))


@dataclass
class Fingerprint:
    """Adversarial probe inputs with the target's predicted labels."""

    inputs: np.ndarray
    labels: np.ndarray  # int64 argmax predictions
    model_id: str
    output_dim: int

    def __post_init__(self):
        if len(self.inputs) != len(self.labels):
            raise ShapeError("fingerprint inputs/labels length mismatch")


def fingerprint(f, pairs: InputPairSet) -> Fingerprint:
    """Fingerprint a model with the probe set's adversarial inputs."""
    preds = np.asarray(f.forward(pairs.adversarial)).argmax(axis=1).astype(np.int64)
    return Fingerprint(
        inputs=np.ascontiguousarray(pairs.adversarial),
        labels=preds,
        model_id=f.id,
        output_dim=int(f.output_dim),
    )


def fingerprint_match(fp: Fingerprint, g):
    """Label agreement rate of g on the fingerprint inputs.

    Infeasible (None) when g's output space differs from the fingerprint's
    label space: the labels are then not comparable.
    """
    if int(g.output_dim) != fp.output_dim:
        return None
    preds = np.asarray(g.forward(fp.inputs)).argmax(axis=1)
    return float((preds == fp.labels).mean())


def save_fingerprint(fp: Fingerprint, path) -> None:
    header = {
        "format": FINGERPRINT_FORMAT,
        "model_id": fp.model_id,
        "output_dim": fp.output_dim,
        "shape": list(fp.inputs.shape),
        "labels": fp.labels.tolist(),
    }
    write_container(
        path, header, {"inputs": np.ascontiguousarray(fp.inputs, dtype="<f4").tobytes()}
    )


def load_fingerprint(path) -> Fingerprint:
    header, blobs = read_container(path)
    if header.get("format") != FINGERPRINT_FORMAT:
        raise ShapeError(f"not a fingerprint file (format={header.get('format')!r})")
    shape = tuple(header["shape"])
    inputs = np.frombuffer(blobs["inputs"], dtype="<f4").reshape(shape).copy()
    return Fingerprint(
        inputs=inputs,
        labels=np.asarray(header["labels"], dtype=np.int64),
        model_id=header["model_id"],
        output_dim=int(header["output_dim"]),
    )
