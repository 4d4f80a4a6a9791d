"""Experiment orchestration: train, calibrate, score three test sets, report.

All randomness is derived from ``ExperimentConfig.seed``.  Each population
gets its own stream (``derive_seed(seed, STREAMS[name])``), so the trained
model and the three test sets are the same in experiments 1 and 2.
"""

from __future__ import annotations

import csv
import statistics
import time
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Optional

import numpy as np

from . import __version__, _jsonio
from .bayes import LikelihoodParams, PosteriorResult, Prior, calibrate, posterior_from_model
from .metrics import MetricVector, extract_metric_vector, metric_names
from .mlp import MlpParams, TrainConfig, forward, loss_and_grad, train
from .projection import pca_projection
from .synthgen import Dataset, DatasetSpec, concat, derive_seed, generate_dataset, generate_subsets

__all__ = [
    "STREAMS",
    "TEST_SETS",
    "ExperimentConfig",
    "Report",
    "run_experiment",
    "run_replicates",
    "emit_report",
    "emit_metrics_csv",
    "emit_projection_csv",
]

STREAMS = {
    "member": 0,
    "nonmember": 1,
    "similar_nonmember": 2,
    "test_similar": 3,
    "test_distinct": 4,
    "train": 5,
}
TEST_SETS = ("member_subset", "resampled_similar", "distinct")
_TEST_POPULATION = {
    "member_subset": "test_member",
    "resampled_similar": "test_similar",
    "distinct": "test_distinct",
}
_SPEC_FIELDS = ("member", "nonmember", "similar_nonmember", "distinct_test")


def _population(sep: float, flip: float = 0.0, weights=(0.5, 0.5)) -> DatasetSpec:
    return DatasetSpec(n_points=200, n_features=10, class_sep=sep, flip_prob=flip,
                       class_weights=weights)


def _spec_to_dict(spec: DatasetSpec) -> dict:
    d = spec.to_dict()
    d.pop("seed")
    return d


@dataclass(frozen=True)
class ExperimentConfig:
    seed: int = 0
    experiment_id: int = 1
    n_subsets: int = 10
    member: DatasetSpec = field(default_factory=lambda: _population(1.0))
    nonmember: DatasetSpec = field(default_factory=lambda: _population(5.0, 0.2, (0.8, 0.2)))
    similar_nonmember: DatasetSpec = field(default_factory=lambda: _population(3.0))
    distinct_test: DatasetSpec = field(default_factory=lambda: _population(3.0, 0.2, (0.8, 0.2)))
    train: TrainConfig = field(default_factory=TrainConfig)
    prior_member: float = 0.5

    def __post_init__(self):
        if self.experiment_id not in (1, 2):
            raise ValueError(f"experiment_id must be 1 or 2, got {self.experiment_id}")
        if not 0 <= self.seed < 2**64:
            raise ValueError(f"seed must be an unsigned 64-bit integer, got {self.seed}")
        if self.n_subsets < 2:
            raise ValueError("n_subsets must be >= 2 for pooled-variance calibration")
        Prior(self.prior_member)
        dims = {getattr(self, f).n_features for f in _SPEC_FIELDS}
        if len(dims) != 1:
            raise ValueError(f"all populations must share n_features, got {sorted(dims)}")

    def spec_for(self, population: str) -> DatasetSpec:
        base = {
            "member": self.member,
            "nonmember": self.nonmember,
            "similar_nonmember": self.similar_nonmember,
            "test_similar": self.member,
            "test_distinct": self.distinct_test,
        }[population]
        return replace(base, seed=derive_seed(self.seed, STREAMS[population]))

    def train_config(self) -> TrainConfig:
        return replace(self.train, seed=derive_seed(self.seed, STREAMS["train"]))

    def to_dict(self) -> dict:
        train = self.train.to_dict()
        train.pop("seed")
        return {
            "seed": self.seed,
            "experiment_id": self.experiment_id,
            "n_subsets": self.n_subsets,
            **{f: _spec_to_dict(getattr(self, f)) for f in _SPEC_FIELDS},
            "train": train,
            "prior_member": self.prior_member,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        """Build from a (possibly partial) dict; missing keys keep their defaults."""
        unknown = set(data) - set(cls.__dataclass_fields__)
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        defaults = cls()
        kwargs = {}
        for key, value in data.items():
            if key in _SPEC_FIELDS:
                if "seed" in value:
                    raise ValueError(f"{key}.seed is derived from the top-level seed")
                merged = {**_spec_to_dict(getattr(defaults, key)), **value}
                kwargs[key] = DatasetSpec.from_dict(merged)
            elif key == "train":
                if "seed" in value:
                    raise ValueError("train.seed is derived from the top-level seed")
                kwargs[key] = TrainConfig.from_dict({**defaults.train.to_dict(), **value})
            else:
                kwargs[key] = value
        return cls(**kwargs)


@dataclass
class Report:
    config: ExperimentConfig
    model: MlpParams
    train_loss: float
    train_error: float
    calibration: dict[str, list[MetricVector]]
    likelihood: LikelihoodParams
    posteriors: dict[str, PosteriorResult]
    datasets: dict[str, list[Dataset]] = field(repr=False)
    runtime_seconds: float = 0.0

    @property
    def calibration_groups(self) -> dict[str, list[str]]:
        nonmember = ["nonmember"]
        if self.config.experiment_id == 2:
            nonmember.append("similar_nonmember")
        return {"member": ["member"], "nonmember": nonmember}

    def to_dict(self) -> dict:
        """JSON-ready content.  Wall-clock runtime is left out to keep it reproducible."""
        d = self.config.member.n_features
        return {
            "format": "bayesmia-report",
            "version": __version__,
            "config": self.config.to_dict(),
            "metric_names": metric_names(d),
            "calibration_groups": self.calibration_groups,
            "calibration_metrics": {
                name: [v.as_array().tolist() for v in vecs]
                for name, vecs in self.calibration.items()
            },
            "likelihood": self.likelihood.to_dict(),
            "posteriors": {name: self.posteriors[name].to_dict() for name in TEST_SETS},
            "training": {"final_loss": self.train_loss, "train_error": self.train_error},
            "projection": {
                "method": "pca",
                "note": "2-D PCA of all generated features (deterministic stand-in for t-SNE)",
            },
        }


def _extract(model: MlpParams, datasets: list[Dataset], cfg: TrainConfig) -> list[MetricVector]:
    return [extract_metric_vector(model, ds, cfg) for ds in datasets]


def run_experiment(config: ExperimentConfig) -> Report:
    start = time.perf_counter()
    k = config.n_subsets
    tcfg = config.train_config()

    datasets: dict[str, list[Dataset]] = {
        "member": generate_subsets(config.spec_for("member"), k),
        "nonmember": generate_subsets(config.spec_for("nonmember"), k),
    }
    if config.experiment_id == 2:
        datasets["similar_nonmember"] = generate_subsets(config.spec_for("similar_nonmember"), k)

    pool = concat(datasets["member"])
    model = train(pool, tcfg)
    train_loss, _ = loss_and_grad(model, pool)
    train_error = 1.0 - float(np.mean(np.argmax(forward(model, pool.features), axis=1) == pool.labels))

    calibration = {name: _extract(model, sets, tcfg) for name, sets in datasets.items()}
    nonmember_vectors = list(calibration["nonmember"])
    if config.experiment_id == 2:
        nonmember_vectors += calibration["similar_nonmember"]
    lik = calibrate(calibration["member"], nonmember_vectors)

    tests = {
        "member_subset": datasets["member"][0],
        "resampled_similar": generate_dataset(config.spec_for("test_similar")),
        "distinct": generate_dataset(config.spec_for("test_distinct")),
    }
    prior = Prior(config.prior_member)
    posteriors = {
        name: posterior_from_model(model, ds, lik, prior, tcfg)
        for name, ds in tests.items()
    }
    for name, ds in tests.items():
        datasets[_TEST_POPULATION[name]] = [ds]

    return Report(
        config=config,
        model=model,
        train_loss=train_loss,
        train_error=train_error,
        calibration=calibration,
        likelihood=lik,
        posteriors=posteriors,
        datasets=datasets,
        runtime_seconds=time.perf_counter() - start,
    )


def run_replicates(config: ExperimentConfig, n_seeds: int) -> tuple[list[Report], dict]:
    """Run seeds ``config.seed .. config.seed + n_seeds - 1``; return reports and medians."""
    if n_seeds < 1:
        raise ValueError("n_seeds must be >= 1")
    reports = [run_experiment(replace(config, seed=config.seed + i)) for i in range(n_seeds)]
    medians = {
        name: statistics.median(r.posteriors[name].posterior_member for r in reports)
        for name in TEST_SETS
    }
    return reports, medians


def replicate_summary(reports: list[Report], medians: dict) -> dict:
    return {
        "format": "bayesmia-replicates",
        "version": __version__,
        "seeds": [r.config.seed for r in reports],
        "median_posteriors": medians,
        "replicates": [r.to_dict() for r in reports],
    }


def emit_report(report, path) -> None:
    """Write a Report (or an already-built dict) as sorted-key JSON."""
    data = report.to_dict() if isinstance(report, Report) else report
    _jsonio.dump(data, path)


def emit_metrics_csv(reports: list[Report], path) -> None:
    rows = []
    for r in reports:
        for population, vecs in r.calibration.items():
            rows += [(f"{r.config.seed}", population, i, v) for i, v in enumerate(vecs)]
        for name in TEST_SETS:
            rows.append((f"{r.config.seed}", _TEST_POPULATION[name], 0, r.posteriors[name].metric_vector))
    d = reports[0].config.member.n_features
    path = Path(path)
    try:
        with path.open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["seed", "population", "subset"] + metric_names(d))
            for seed, population, i, v in rows:
                w.writerow([seed, population, i] + [format(float(x), ".17g") for x in v.as_array()])
    except OSError as exc:
        raise OSError(f"failed to write {path}: {exc.strerror or exc}") from exc


def projection_inputs(report: Report) -> tuple[list[str], np.ndarray]:
    labels: list[str] = []
    blocks = []
    for population, sets in report.datasets.items():
        for ds in sets:
            labels += [population] * ds.n
            blocks.append(ds.features)
    return labels, np.vstack(blocks)


def emit_projection_csv(labels, coords: np.ndarray, path) -> None:
    coords = np.asarray(coords, dtype=np.float64)
    if coords.ndim != 2 or coords.shape != (len(labels), 2):
        raise ValueError(f"coords shape {coords.shape} does not match {len(labels)} labels")
    path = Path(path)
    try:
        with path.open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["population", "x", "y"])
            for label, (x, y) in zip(labels, coords):
                w.writerow([label, format(float(x), ".17g"), format(float(y), ".17g")])
    except OSError as exc:
        raise OSError(f"failed to write {path}: {exc.strerror or exc}") from exc


def write_outputs(reports: list[Report], medians: Optional[dict], out_dir) -> dict[str, Path]:
    """Write report.json, metrics.csv, projection.csv (+ model and likelihood of the first seed)."""
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OSError(f"cannot create output directory {out}: {exc.strerror or exc}") from exc
    paths = {
        "report": out / "report.json",
        "metrics": out / "metrics.csv",
        "projection": out / "projection.csv",
        "model": out / "model.json",
        "likelihood": out / "likelihood.json",
    }
    if len(reports) == 1:
        emit_report(reports[0], paths["report"])
    else:
        emit_report(replicate_summary(reports, medians), paths["report"])
    emit_metrics_csv(reports, paths["metrics"])
    labels, X = projection_inputs(reports[0])
    emit_projection_csv(labels, pca_projection(X), paths["projection"])
    _jsonio.dump(reports[0].model.to_dict(), paths["model"])
    _jsonio.dump(reports[0].likelihood.to_dict(), paths["likelihood"])
    return paths
