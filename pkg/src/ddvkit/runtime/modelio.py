"""Model serialization: JSON header + length-prefixed float32 weight blob.

Weights are stored little-endian float32 in header layer order, each
parameterized layer contributing its weight array then its bias.  Layers
with int8-quantized weights store the dequantized float32 values; the
(scale, zero_point) pair in the layer spec makes requantization exact, so
round-trips are bit-identical either way.
"""

from __future__ import annotations

import numpy as np

from ..container import read_container, write_container
from ..errors import ModelFormatError
from .layers import QuantInfo, layer_from_spec
from .model import Model

FORMAT = "ddvkit-model"
FORMAT_VERSION = 1


def _to_le(arr: np.ndarray) -> bytes:
    return np.ascontiguousarray(arr, dtype="<f4").tobytes()


def save_model(model: Model, path, extra_header: dict | None = None) -> None:
    header = {
        "format": FORMAT,
        "version": FORMAT_VERSION,
        "id": model.id,
        "input_shape": list(model.input_shape),
        "output_dim": model.output_dim,
        "access": model.access,
        "lineage": model.lineage,
        "layers": [layer.spec() for layer in model.layers],
    }
    if extra_header:
        header.update(extra_header)
    parts = []
    for _, layer in model.param_layers():
        parts.append(_to_le(layer.weights))
        parts.append(_to_le(layer.bias))
    write_container(path, header, {"weights": b"".join(parts)})


def load_model(path) -> Model:
    header, blobs = read_container(path)
    if header.get("format") != FORMAT:
        raise ModelFormatError(f"not a model file (format={header.get('format')!r})", offset=0)
    layers = [layer_from_spec(spec) for spec in header["layers"]]
    model = Model(
        id=header["id"],
        layers=layers,
        input_shape=tuple(header["input_shape"]),
        output_dim=int(header["output_dim"]),
        lineage=header.get("lineage", []),
        access=header.get("access", "whitebox"),
    )
    blob = blobs["weights"]
    pos = 0
    for (idx, layer), spec in zip(model.param_layers(), _param_specs(header["layers"])):
        for attr in ("weights", "bias"):
            arr = getattr(layer, attr)
            nbytes = arr.size * 4
            if pos + nbytes > len(blob):
                raise ModelFormatError(
                    f"weight blob truncated in layer {idx} ({layer.kind})", offset=pos
                )
            vals = np.frombuffer(blob, dtype="<f4", count=arr.size, offset=pos)
            arr[...] = vals.reshape(arr.shape)
            pos += nbytes
        quant = spec.get("quant")
        if quant is not None:
            scale = float(quant["scale"])
            zp = int(quant["zero_point"])
            q = np.clip(
                np.rint(layer.weights.astype(np.float64) / scale + zp), -128, 127
            ).astype(np.int8)
            layer.quant = QuantInfo(q=q, scale=scale, zero_point=zp)
    if pos != len(blob):
        raise ModelFormatError(f"{len(blob) - pos} unconsumed weight bytes", offset=pos)
    return model


def _param_specs(layer_specs):
    return [s for s in layer_specs if s["kind"] in ("dense", "conv2d")]
