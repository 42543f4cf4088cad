"""Multimodal emotion recognition from video clips by late fusion of
per-modality experts."""

__version__ = "0.1.0"

from ._kernels import BACKEND
from .labels import (EMOTIONS, N_CLASSES, ClassDistribution, ConfusionMatrix, PredictionSet,
                     accuracy, confusion, read_labels, read_predictions, write_labels,
                     write_predictions)

__all__ = [
    "__version__", "BACKEND", "EMOTIONS", "N_CLASSES", "ClassDistribution", "ConfusionMatrix",
    "PredictionSet", "accuracy", "confusion", "read_labels", "read_predictions", "write_labels",
    "write_predictions",
]
