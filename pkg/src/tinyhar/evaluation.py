"""Accuracy and confusion-matrix reporting for trained models."""

from __future__ import annotations

from dataclasses import dataclass
from typing import List, Sequence, Tuple, Union

import numpy as np

from .errors import InvalidArgument, UnknownLabel
from .gbdt import Forest, gbdt_scores
from .mlp import MlpModel, mlp_forward

Model = Union[MlpModel, Forest]


@dataclass(frozen=True)
class ConfusionMatrix:
    counts: np.ndarray  # (n, n), rows = true class, cols = predicted
    class_names: Tuple[str, ...]

    def __post_init__(self):
        counts = np.asarray(self.counts, dtype=int)
        object.__setattr__(self, "counts", counts)
        n = len(self.class_names)
        if counts.shape != (n, n):
            raise InvalidArgument("confusion matrix shape/class mismatch")
        if np.any(counts < 0):
            raise InvalidArgument("negative confusion counts")

    @property
    def rates(self) -> np.ndarray:
        """Row-normalized confusion rates; empty rows stay zero."""
        totals = self.counts.sum(axis=1, keepdims=True)
        with np.errstate(invalid="ignore", divide="ignore"):
            r = np.where(totals > 0, self.counts / totals, 0.0)
        return r

    @property
    def accuracy(self) -> float:
        total = self.counts.sum()
        return float(np.trace(self.counts) / total) if total else 0.0

    def index(self, name: str) -> int:
        try:
            return self.class_names.index(name)
        except ValueError:
            raise UnknownLabel(f"unknown class {name!r}") from None


def model_scores(model: Model, X: np.ndarray) -> np.ndarray:
    if isinstance(model, MlpModel):
        return mlp_forward(model, X)
    return gbdt_scores(model, X)


def predict_labels(model: Model, X: np.ndarray) -> np.ndarray:
    return np.argmax(model_scores(model, np.atleast_2d(X)), axis=1)


def evaluate(
    model: Model,
    X: np.ndarray,
    y: Sequence[int],
    class_names: Tuple[str, ...] = (),
) -> Tuple[float, ConfusionMatrix]:
    """(accuracy, confusion matrix) over labeled feature vectors."""
    X = np.atleast_2d(np.asarray(X, float))
    y = np.asarray(y)
    if len(X) == 0:
        raise InvalidArgument("empty evaluation set")
    if not class_names:
        class_names = model.class_names or tuple(
            f"class{i}" for i in range(model_scores(model, X[:1]).shape[1])
        )
    n = len(class_names)
    if np.any(y < 0) or np.any(y >= n):
        raise UnknownLabel("label outside the model's class set")
    pred = predict_labels(model, X)
    counts = np.zeros((n, n), dtype=int)
    np.add.at(counts, (y, pred), 1)
    cm = ConfusionMatrix(counts, tuple(class_names))
    return cm.accuracy, cm
