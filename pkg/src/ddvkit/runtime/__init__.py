"""Minimal differentiable feedforward runtime.

Dense / conv2d / relu / maxpool / softmax layers with forward inference,
input gradients, SGD training with layer freezing, and bit-exact model
serialization.  Heavy kernels dispatch to a compiled extension when built
(see :mod:`ddvkit.runtime.kernels`).
"""

from .arch import ARCHS, INPUT_SHAPE, build_model
from .kernels import backend_name
from .layers import Conv2D, Dense, MaxPool2D, QuantInfo, ReLU, Softmax, quantize_array
from .model import (
    BlackboxModel,
    Model,
    Objective,
    constant_objective,
    forward,
    input_gradient,
    output_element,
)
from .modelio import load_model, save_model
from .tensor import DTYPE, tensor
from .train import accuracy, cross_entropy, train

__all__ = [
    "ARCHS",
    "INPUT_SHAPE",
    "build_model",
    "backend_name",
    "Conv2D",
    "Dense",
    "MaxPool2D",
    "QuantInfo",
    "ReLU",
    "Softmax",
    "quantize_array",
    "BlackboxModel",
    "Model",
    "Objective",
    "constant_objective",
    "forward",
    "input_gradient",
    "output_element",
    "load_model",
    "save_model",
    "DTYPE",
    "tensor",
    "accuracy",
    "cross_entropy",
    "train",
]
