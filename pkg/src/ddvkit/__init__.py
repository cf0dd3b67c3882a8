"""ddvkit: behavioral similarity analysis for neural network reuse detection.

The toolkit probes a pair of models with matched normal/adversarial input
pairs, summarizes each model's reaction as a decision distance vector (DDV),
and scores knowledge similarity as the cosine similarity of the two DDVs.
A threshold calibrated from unrelated reference models turns the score into
a reuse verdict.
"""

__version__ = "0.1.0"

from .config import GenConfig, config_hash
from .ddv import (
    DDV,
    ComparisonReport,
    calibrate_threshold,
    compare,
    compute_ddv,
    cosine_distance,
    similarity,
)
from .inputgen import (
    InputPairSet,
    divergence,
    diversity,
    gen_blackbox,
    gen_whitebox,
    score_inputs,
    select_seeds,
)
from .runtime import Model, forward, input_gradient, load_model, save_model, train

__all__ = [
    "GenConfig",
    "config_hash",
    "DDV",
    "ComparisonReport",
    "calibrate_threshold",
    "compare",
    "compute_ddv",
    "cosine_distance",
    "similarity",
    "InputPairSet",
    "divergence",
    "diversity",
    "gen_blackbox",
    "gen_whitebox",
    "score_inputs",
    "select_seeds",
    "Model",
    "forward",
    "input_gradient",
    "load_model",
    "save_model",
    "train",
    "__version__",
]
