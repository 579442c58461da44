"""Minimal CNN engine with analytic gradients, in numpy.

Feature maps travel as (batch, time, channels); the public input layout
(w, 2, n) is folded to (w, 2n) at the model boundary. Convolutions are valid
(no padding) with stride 1, pooling runs along the time axis only.
"""

from iqautoml.nn.model import (
    Conv,
    Dense,
    Dropout,
    Flatten,
    MaxPool,
    Model,
    ModelSpec,
    ModelSpecError,
    SoftmaxHead,
)
from iqautoml.nn.layers import ShapeError
from iqautoml.nn.optim import NonFiniteGradients, make_optimizer
from iqautoml.nn.train import (
    LearnConfig,
    Metrics,
    TrainedModel,
    TrainingDiverged,
    evaluate,
    train,
)
from iqautoml.nn.checkpoint import load_checkpoint, save_checkpoint

__all__ = [
    "Conv",
    "Dense",
    "Dropout",
    "Flatten",
    "MaxPool",
    "Model",
    "ModelSpec",
    "ModelSpecError",
    "SoftmaxHead",
    "ShapeError",
    "NonFiniteGradients",
    "make_optimizer",
    "LearnConfig",
    "Metrics",
    "TrainedModel",
    "TrainingDiverged",
    "evaluate",
    "train",
    "load_checkpoint",
    "save_checkpoint",
]
