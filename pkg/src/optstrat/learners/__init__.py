"""Strategy classifiers: classification trees (parallel / hyperplane) and networks."""

from .data import Dataset, make_dataset
from .nn import NNModel, loss_and_grads, softmax, train_nn
from .predictor import (
    LEARNERS, TrainedPredictor, dumps_predictor, loads_predictor, render_dot, render_tree, train,
)
from .tree import HYPERPLANE, PARALLEL, TreeModel, fit_tree, oct_loss, train_oct

__all__ = [
    "Dataset", "make_dataset", "NNModel", "loss_and_grads", "softmax", "train_nn", "LEARNERS",
    "TrainedPredictor", "dumps_predictor", "loads_predictor", "render_dot", "render_tree", "train",
    "HYPERPLANE", "PARALLEL", "TreeModel", "fit_tree", "oct_loss", "train_oct",
]
