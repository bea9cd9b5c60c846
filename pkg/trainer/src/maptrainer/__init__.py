"""maptrainer: VGG11 training over exported feature-map tensors.

Consumes the dataset manifest (TSV) and SAMP tensor files; writes metrics
in the shared machine-readable schema.
"""

from .metrics import evaluate, write_metrics
from .model import build_vgg11
from .tensors import HeaderMismatch, MissingTensor, read_tensor
from .train import DivergenceDetected, TrainConfig, load_dataset, make_sampler, train

__version__ = "0.1.0"

__all__ = [
    "DivergenceDetected",
    "HeaderMismatch",
    "MissingTensor",
    "TrainConfig",
    "build_vgg11",
    "evaluate",
    "load_dataset",
    "make_sampler",
    "read_tensor",
    "train",
    "write_metrics",
]
