"""Synthetic two-cluster binary classification data.

Class ``c`` is drawn from an isotropic unit-variance Gaussian centred at
``(-1)**(1 - c) * class_sep / 2`` along every coordinate, so class 0 sits at
``-sep/2 * 1_d`` and class 1 at ``+sep/2 * 1_d``.  Labels are flipped after
sampling and the rows are shuffled last.

Random streams come from numpy's PCG64.  A subset's seed is derived from the
parent seed and the subset index through ``numpy.random.SeedSequence``
(see :func:`derive_seed`), which makes every subset independent of the order
in which subsets are produced.
"""

from __future__ import annotations

import csv
import math
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Sequence

import numpy as np

__all__ = [
    "DatasetSpec",
    "Dataset",
    "derive_seed",
    "generate_dataset",
    "generate_subsets",
    "concat",
    "write_csv",
    "read_csv",
]

_U64 = 2**64


def derive_seed(seed: int, index: int) -> int:
    """Child seed for stream ``index`` of parent ``seed`` (64-bit, stable)."""
    if not 0 <= seed < _U64 or index < 0:
        raise ValueError(f"invalid seed/index pair ({seed}, {index})")
    ss = np.random.SeedSequence([int(seed), int(index)])
    return int(ss.generate_state(1, dtype=np.uint64)[0])


@dataclass(frozen=True)
class DatasetSpec:
    n_points: int = 200
    n_features: int = 10
    class_sep: float = 1.0
    flip_prob: float = 0.0
    class_weights: tuple[float, float] = (0.5, 0.5)
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "class_weights", tuple(float(w) for w in self.class_weights))
        self.validate()

    def validate(self) -> None:
        if int(self.n_points) != self.n_points or self.n_points < 2:
            raise ValueError(f"n_points must be an integer >= 2, got {self.n_points}")
        if int(self.n_features) != self.n_features or self.n_features < 1:
            raise ValueError(f"n_features must be an integer >= 1, got {self.n_features}")
        if not (math.isfinite(self.class_sep) and self.class_sep >= 0):
            raise ValueError(f"class_sep must be finite and non-negative, got {self.class_sep}")
        if not 0.0 <= self.flip_prob <= 1.0:
            raise ValueError(f"flip_prob must lie in [0, 1], got {self.flip_prob}")
        w = self.class_weights
        if len(w) != 2 or not all(0.0 < x < 1.0 for x in w):
            raise ValueError(f"class_weights must be two values in (0, 1), got {w}")
        if abs(w[0] + w[1] - 1.0) > 1e-12:
            raise ValueError(f"class_weights must sum to 1, got {w}")
        if not 0 <= self.seed < _U64:
            raise ValueError(f"seed must be an unsigned 64-bit integer, got {self.seed}")

    def class_counts(self) -> tuple[int, int]:
        """Pre-flip counts: class 0 gets round-half-up(n * w0), class 1 the rest."""
        n0 = int(math.floor(self.n_points * self.class_weights[0] + 0.5))
        return n0, self.n_points - n0

    def to_dict(self) -> dict:
        d = asdict(self)
        d["class_weights"] = list(self.class_weights)
        return d

    @classmethod
    def from_dict(cls, data: dict) -> "DatasetSpec":
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown DatasetSpec fields: {sorted(unknown)}")
        kwargs = dict(data)
        if "class_weights" in kwargs:
            kwargs["class_weights"] = tuple(kwargs["class_weights"])
        return cls(**kwargs)


@dataclass(frozen=True, eq=False)
class Dataset:
    features: np.ndarray
    labels: np.ndarray = field(repr=False)

    def __post_init__(self):
        X = np.asarray(self.features, dtype=np.float64)
        y = np.asarray(self.labels)
        if X.ndim != 2:
            raise ValueError(f"features must be a 2-D matrix, got shape {X.shape}")
        if y.ndim != 1 or y.shape[0] != X.shape[0]:
            raise ValueError(
                f"labels length {y.shape} does not match {X.shape[0]} feature rows"
            )
        if not np.all(np.isfinite(X)):
            raise ValueError("features contain non-finite values")
        if y.size and not np.all((y == 0) | (y == 1)):
            raise ValueError("labels must be 0 or 1")
        object.__setattr__(self, "features", X)
        object.__setattr__(self, "labels", y.astype(np.int64))

    @property
    def n(self) -> int:
        return self.features.shape[0]

    @property
    def d(self) -> int:
        return self.features.shape[1]

    def __len__(self) -> int:
        return self.n

    def __eq__(self, other) -> bool:
        if not isinstance(other, Dataset):
            return NotImplemented
        return np.array_equal(self.features, other.features) and np.array_equal(
            self.labels, other.labels
        )


def _generate(spec: DatasetSpec) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Return (features, clean labels, flipped labels), all in shuffled order."""
    rng = np.random.Generator(np.random.PCG64(spec.seed))
    n0, n1 = spec.class_counts()
    d = spec.n_features
    half = spec.class_sep / 2.0
    X = np.empty((spec.n_points, d))
    X[:n0] = rng.standard_normal((n0, d)) - half
    X[n0:] = rng.standard_normal((n1, d)) + half
    clean = np.concatenate([np.zeros(n0, np.int64), np.ones(n1, np.int64)])
    flip = rng.random(spec.n_points) < spec.flip_prob
    noisy = np.where(flip, 1 - clean, clean)
    order = rng.permutation(spec.n_points)
    return X[order], clean[order], noisy[order]


def generate_dataset(spec: DatasetSpec) -> Dataset:
    spec.validate()
    X, _, y = _generate(spec)
    return Dataset(X, y)


def generate_subsets(spec: DatasetSpec, k: int) -> list[Dataset]:
    """``k`` independent datasets; subset ``i`` uses ``derive_seed(spec.seed, i)``."""
    if int(k) != k or k < 1:
        raise ValueError(f"k must be a positive integer, got {k}")
    spec.validate()
    return [
        generate_dataset(replace(spec, seed=derive_seed(spec.seed, i))) for i in range(k)
    ]


def concat(datasets: Sequence[Dataset]) -> Dataset:
    if not datasets:
        raise ValueError("cannot concatenate an empty list of datasets")
    d = datasets[0].d
    for i, ds in enumerate(datasets):
        if ds.d != d:
            raise ValueError(f"dataset {i} has {ds.d} features, expected {d}")
    return Dataset(
        np.vstack([ds.features for ds in datasets]),
        np.concatenate([ds.labels for ds in datasets]),
    )


def write_csv(dataset: Dataset, path) -> None:
    path = Path(path)
    header = [f"f{j + 1}" for j in range(dataset.d)] + ["label"]
    try:
        with path.open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(header)
            for row, label in zip(dataset.features, dataset.labels):
                w.writerow([format(float(v), ".17g") for v in row] + [int(label)])
    except OSError as exc:
        raise OSError(f"failed to write {path}: {exc.strerror or exc}") from exc


def read_csv(path) -> Dataset:
    path = Path(path)
    try:
        with path.open(newline="") as fh:
            rows = list(csv.reader(fh))
    except OSError as exc:
        raise OSError(f"failed to read {path}: {exc.strerror or exc}") from exc
    if not rows:
        raise ValueError(f"{path}: empty CSV")
    header, body = rows[0], rows[1:]
    if not header or header[-1] != "label":
        raise ValueError(f"{path}: last column must be 'label'")
    if not body:
        raise ValueError(f"{path}: no data rows")
    X = np.array([[float(v) for v in r[:-1]] for r in body], dtype=np.float64)
    y = np.array([int(float(r[-1])) for r in body], dtype=np.int64)
    if X.shape[1] != len(header) - 1:
        raise ValueError(f"{path}: row width does not match header")
    return Dataset(X, y)
