from .config import ModelConfig
from .model import SuperResolutionNet, parameter_manifest
from .weights_io import load_weights, save_weights

__all__ = [
    "ModelConfig",
    "SuperResolutionNet",
    "parameter_manifest",
    "save_weights",
    "load_weights",
]
