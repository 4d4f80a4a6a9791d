"""Behavioural metric vector of a trained model on a candidate dataset.

Layout, for ``d`` input features (23 entries when d = 10)::

    [pred_error, entropy, pert, mean_f1..mean_fd, var_f1..var_fd]
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .mlp import MlpParams, TrainConfig, fine_tune, forward, weight_l2_distance
from .synthgen import Dataset

__all__ = [
    "MetricVector",
    "metric_names",
    "prediction_error",
    "mean_entropy",
    "perturbation_magnitude",
    "dataset_statistics",
    "extract_metric_vector",
]

_LN2 = math.log(2.0)


def metric_names(d: int) -> list[str]:
    return (
        ["pred_error", "entropy", "pert"]
        + [f"mean_f{j + 1}" for j in range(d)]
        + [f"var_f{j + 1}" for j in range(d)]
    )


@dataclass(frozen=True, eq=False)
class MetricVector:
    prediction_error: float
    mean_entropy: float
    perturbation: float
    feature_means: np.ndarray
    feature_variances: np.ndarray

    def __post_init__(self):
        means = np.asarray(self.feature_means, dtype=np.float64).ravel()
        variances = np.asarray(self.feature_variances, dtype=np.float64).ravel()
        if means.shape != variances.shape:
            raise ValueError("feature means and variances differ in length")
        object.__setattr__(self, "feature_means", means)
        object.__setattr__(self, "feature_variances", variances)
        self.check()

    def check(self) -> None:
        arr = self.as_array()
        if not np.all(np.isfinite(arr)):
            raise ValueError("metric vector contains non-finite entries")
        if not 0.0 <= self.prediction_error <= 1.0:
            raise ValueError(f"prediction_error {self.prediction_error} outside [0, 1]")
        # tiny negative/overshoot slack for rounding in the entropy sum
        if not -1e-12 <= self.mean_entropy <= _LN2 + 1e-12:
            raise ValueError(f"mean_entropy {self.mean_entropy} outside [0, ln 2]")
        if self.perturbation < 0.0:
            raise ValueError("perturbation must be non-negative")
        if np.any(self.feature_variances < 0.0):
            raise ValueError("feature variances must be non-negative")

    @property
    def n_features(self) -> int:
        return self.feature_means.shape[0]

    def __len__(self) -> int:
        return 3 + 2 * self.n_features

    def as_array(self) -> np.ndarray:
        return np.concatenate(
            [
                [self.prediction_error, self.mean_entropy, self.perturbation],
                self.feature_means,
                self.feature_variances,
            ]
        )

    def __array__(self, dtype=None, copy=None):
        arr = self.as_array()
        return arr if dtype is None else arr.astype(dtype)

    @classmethod
    def from_array(cls, values: Sequence[float]) -> "MetricVector":
        arr = np.asarray(values, dtype=np.float64).ravel()
        if arr.size < 5 or (arr.size - 3) % 2:
            raise ValueError(f"metric array of length {arr.size} is not 3 + 2d")
        d = (arr.size - 3) // 2
        return cls(float(arr[0]), float(arr[1]), float(arr[2]), arr[3 : 3 + d], arr[3 + d :])

    def to_dict(self) -> dict:
        return dict(zip(metric_names(self.n_features), self.as_array().tolist()))

    def __eq__(self, other) -> bool:
        if not isinstance(other, MetricVector):
            return NotImplemented
        return np.array_equal(self.as_array(), other.as_array())


def _check_probs(probs: np.ndarray) -> np.ndarray:
    probs = np.asarray(probs, dtype=np.float64)
    if probs.ndim != 2 or probs.shape[0] == 0:
        raise ValueError(f"expected a non-empty (n, k) probability matrix, got {probs.shape}")
    return probs


def prediction_error(probs: np.ndarray, labels: np.ndarray) -> float:
    """1 - accuracy of argmax predictions; ties go to the lower class index."""
    probs = _check_probs(probs)
    labels = np.asarray(labels)
    if labels.shape != (probs.shape[0],):
        raise ValueError("labels do not match the number of prediction rows")
    # np.argmax returns the first maximal index
    predicted = np.argmax(probs, axis=1)
    return 1.0 - float(np.mean(predicted == labels))


def mean_entropy(probs: np.ndarray) -> float:
    """Average Shannon entropy of the rows, in nats, with 0 ln 0 = 0."""
    probs = _check_probs(probs)
    safe = np.where(probs > 0.0, probs, 1.0)
    per_row = -np.sum(probs * np.log(safe), axis=1)
    return float(np.mean(per_row))


def perturbation_magnitude(params: MlpParams, dataset: Dataset, config: TrainConfig) -> float:
    return weight_l2_distance(params, fine_tune(params, dataset, config))


def dataset_statistics(features: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Column means and population (1/n) variances."""
    X = np.asarray(features, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] == 0:
        raise ValueError(f"need a non-empty 2-D feature matrix, got shape {X.shape}")
    return X.mean(axis=0), X.var(axis=0)


def extract_metric_vector(
    params: MlpParams, dataset: Dataset, config: TrainConfig
) -> MetricVector:
    probs = forward(params, dataset.features)
    means, variances = dataset_statistics(dataset.features)
    return MetricVector(
        prediction_error=prediction_error(probs, dataset.labels),
        mean_entropy=max(mean_entropy(probs), 0.0),
        perturbation=perturbation_magnitude(params, dataset, config),
        feature_means=means,
        feature_variances=variances,
    )

