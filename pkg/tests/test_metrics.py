import math

import numpy as np
import pytest

from bayesmia.metrics import (
    MetricVector,
    dataset_statistics,
    extract_metric_vector,
    mean_entropy,
    metric_names,
    perturbation_magnitude,
    prediction_error,
)
from bayesmia.mlp import MlpParams, TrainConfig, train
from bayesmia.synthgen import Dataset, DatasetSpec, concat, generate_dataset, generate_subsets


@pytest.fixture(scope="module")
def trained():
    subsets = generate_subsets(DatasetSpec(class_sep=1.0, seed=77), 10)
    cfg = TrainConfig(seed=4)
    return train(concat(subsets), cfg), subsets, cfg


def test_prediction_error_extremes():
    probs = np.array([[0.9, 0.1], [0.2, 0.8], [0.6, 0.4]])
    assert prediction_error(probs, np.array([0, 1, 0])) == 0.0
    assert prediction_error(probs, np.array([1, 0, 1])) == 1.0


def test_prediction_error_tie_goes_to_class_zero():
    probs = np.full((6, 2), 0.5)
    labels = np.array([0, 1, 0, 1, 0, 1])
    # enumerate: every row predicts class 0, so exactly the label-1 rows are wrong
    wrong = sum(1 for lab in labels if lab != 0)
    assert prediction_error(probs, labels) == wrong / len(labels) == 0.5


def test_prediction_error_rejects_empty():
    with pytest.raises(ValueError):
        prediction_error(np.empty((0, 2)), np.empty(0))


def test_entropy_values():
    assert mean_entropy(np.array([[1.0, 0.0], [0.0, 1.0]])) == 0.0
    assert mean_entropy(np.full((4, 2), 0.5)) == pytest.approx(math.log(2), abs=1e-15)
    # -0.9 ln 0.9 - 0.1 ln 0.1, evaluated with mpmath at 40 digits
    assert mean_entropy(np.array([[0.9, 0.1]] * 3)) == pytest.approx(0.3250829733914482, abs=1e-15)
    with pytest.raises(ValueError):
        mean_entropy(np.empty((0, 2)))


def test_dataset_statistics():
    X = np.array([[3.0, 0.0], [3.0, 2.0]])
    means, variances = dataset_statistics(X)
    assert np.array_equal(means, [3.0, 1.0])
    assert np.array_equal(variances, [0.0, 1.0])
    with pytest.raises(ValueError):
        dataset_statistics(np.empty((0, 3)))


def test_dataset_statistics_two_pass_oracle():
    X = np.random.default_rng(12).normal(size=(5, 3)) * 4 + 1
    means, variances = dataset_statistics(X)
    for j in range(3):
        col = [float(v) for v in X[:, j]]
        m = sum(col) / len(col)
        v = sum((c - m) ** 2 for c in col) / len(col)
        assert abs(means[j] - m) <= 1e-12
        assert abs(variances[j] - v) <= 1e-12


def test_metric_vector_layout(trained):
    model, subsets, cfg = trained
    ds = subsets[3]
    vec = extract_metric_vector(model, ds, cfg)
    arr = vec.as_array()
    assert arr.shape == (23,) and len(vec) == 23
    assert metric_names(10)[:3] == ["pred_error", "entropy", "pert"]
    assert metric_names(10)[3] == "mean_f1" and metric_names(10)[13] == "var_f1"
    assert arr[0] == vec.prediction_error
    assert arr[2] == vec.perturbation == perturbation_magnitude(model, ds, cfg)
    means, variances = dataset_statistics(ds.features)
    assert np.array_equal(arr[3:13], means)
    assert np.array_equal(arr[13:], variances)
    assert MetricVector.from_array(arr) == vec
    assert extract_metric_vector(model, ds, cfg) == vec


def test_metric_vector_bounds(trained):
    model, subsets, cfg = trained
    vec = extract_metric_vector(model, subsets[0], cfg)
    assert 0 <= vec.prediction_error <= 1
    assert 0 <= vec.mean_entropy <= math.log(2)
    assert vec.perturbation >= 0
    assert np.all(vec.feature_variances >= 0)
    with pytest.raises(ValueError):
        MetricVector(1.5, 0.1, 0.1, [0.0], [1.0])
    with pytest.raises(ValueError):
        MetricVector(0.5, 0.1, 0.1, [np.nan], [1.0])
    with pytest.raises(ValueError):
        MetricVector(0.5, 0.1, 0.1, [0.0], [-1.0])


def test_perturbation_is_deterministic_and_pure(trained):
    model, subsets, cfg = trained
    before = model.flat().tobytes()
    a = perturbation_magnitude(model, subsets[1], cfg)
    b = perturbation_magnitude(model, subsets[1], cfg)
    assert a == b > 0
    assert model.flat().tobytes() == before


def test_perturbation_zero_at_stationary_point():
    zero = MlpParams(np.zeros((2, 16)), np.zeros(16), np.zeros((16, 2)), np.zeros(2))
    ds = Dataset(np.array([[0.5, -1.0], [0.5, -1.0]]), np.array([1, 0]))
    assert perturbation_magnitude(zero, ds, TrainConfig()) == 0.0


def test_training_pool_moves_weights_less_than_distinct_data(trained):
    model, subsets, cfg = trained
    pool = concat(subsets)
    distinct = generate_dataset(
        DatasetSpec(n_points=2000, class_sep=3.0, flip_prob=0.2, class_weights=(0.8, 0.2), seed=5)
    )
    assert perturbation_magnitude(model, pool, cfg) < perturbation_magnitude(model, distinct, cfg)
