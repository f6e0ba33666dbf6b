"""Noise-level-map conditioned convolutional image denoiser.

A from-scratch numpy implementation: the network runs on a reversible
factor-2 rearrangement of the image with a per-pixel noise level map as an
extra input channel, so one trained model covers a whole range of noise
levels, including spatially varying ones. Training, synthetic noise,
evaluation, a CLI and an HTTP service are included.

Typical use::

    from mapdenoise import load_model, uniform_map, denoise

    params = load_model("toy.model")
    h, w = image.shape[2], image.shape[3]
    restored = denoise(params, image, uniform_map(h, w, 25.0))
"""

from .errors import ContractError, DataError, TrainingError
from .init import default_init, orthogonal_init
from .metrics import psnr, sensitivity_sweep, variant_noise_report
from .model import (
    ModelConfig,
    ParameterSet,
    backward,
    denoise,
    forward,
    load_model,
    merge_batchnorm,
    receptive_field,
    save_model,
)
from .noise import (
    SIGMA_MAX,
    NoiseLevelMap,
    NoiseSpec,
    RegionAnchor,
    add_awgn,
    anchored_map,
    gradient_map,
    load_map,
    save_map,
    uniform_map,
)
from .optim import TrainPlan, TrainResult, train
from .rng import make_rng
from .shuffle import depth_to_space, space_to_depth

__all__ = [
    "ContractError",
    "DataError",
    "TrainingError",
    "ModelConfig",
    "NoiseLevelMap",
    "NoiseSpec",
    "ParameterSet",
    "RegionAnchor",
    "SIGMA_MAX",
    "TrainPlan",
    "TrainResult",
    "add_awgn",
    "anchored_map",
    "backward",
    "default_init",
    "denoise",
    "depth_to_space",
    "forward",
    "gradient_map",
    "load_map",
    "load_model",
    "make_rng",
    "merge_batchnorm",
    "orthogonal_init",
    "psnr",
    "receptive_field",
    "save_map",
    "save_model",
    "sensitivity_sweep",
    "space_to_depth",
    "train",
    "uniform_map",
    "variant_noise_report",
]
