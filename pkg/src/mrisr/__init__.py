"""MRI super-resolution toolkit: a hybrid attention transformer for 2x
upscaling, a k-space phantom pipeline for paired data, and the statistics
used in reader studies of image quality and diagnostic performance."""

from .data import ImagePair, PairedDataset, SplitPolicy, load_dataset, save_dataset, split_dataset
from .errors import ConfigError, InputError, TrainingDiverged
from .image import Image2D, load_image, normalize_intensity, save_image
from .metrics import bicubic_upscale, mse, psnr, ssim
from .network import ModelConfig, SuperResolutionNet, load_weights, parameter_manifest, save_weights
from .phantom import (
    DegradationConfig,
    EllipseBand,
    Lesion,
    PhantomSpec,
    Wedge,
    add_rician_noise,
    default_knee_spec,
    generate_phantom,
    kspace_truncate,
    make_paired_dataset,
)
from .training import TrainConfig, TrainReport, evaluate_pairs, gradient_check, train

__version__ = "0.1.0"

__all__ = [
    "ImagePair",
    "PairedDataset",
    "SplitPolicy",
    "load_dataset",
    "save_dataset",
    "split_dataset",
    "ConfigError",
    "InputError",
    "TrainingDiverged",
    "Image2D",
    "load_image",
    "normalize_intensity",
    "save_image",
    "bicubic_upscale",
    "mse",
    "psnr",
    "ssim",
    "ModelConfig",
    "SuperResolutionNet",
    "load_weights",
    "parameter_manifest",
    "save_weights",
    "DegradationConfig",
    "EllipseBand",
    "Lesion",
    "PhantomSpec",
    "Wedge",
    "add_rician_noise",
    "default_knee_spec",
    "generate_phantom",
    "kspace_truncate",
    "make_paired_dataset",
    "TrainConfig",
    "TrainReport",
    "evaluate_pairs",
    "gradient_check",
    "train",
    "__version__",
]
