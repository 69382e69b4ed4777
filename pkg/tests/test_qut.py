"""Tests for the zero-thresholding closed forms, the oracle and the quantile."""

import numpy as np
import pytest
from fd_utils import random_instance

from sparseann import (
    ActivationSpec,
    DataError,
    Dataset,
    NetworkShape,
    QutConfig,
    QutResult,
    compute_qut,
    lambda0,
    lambda0_classification,
    lambda0_oracle,
    lambda0_regression,
    sample_null_classification,
    sample_null_regression,
)

# sigma'(0) = logistic(50) = 1 to double precision; keeps hand values clean
UNIT_SLOPE = ActivationSpec(50.0, 1.0, 1.0)


def test_regression_hand_value_two_layers():
    X = np.array([[1.0], [-1.0]])
    Y = np.array([[1.0], [-1.0]])
    shape = NetworkShape.make((1, 3, 1), "identity", UNIT_SLOPE)
    # |X' Yc|_inf = 2, |Yc|_2 = sqrt 2
    assert lambda0_regression(Y, X, shape) == pytest.approx(np.sqrt(2.0), rel=1e-12)


def test_regression_hand_value_three_layers_width_factor():
    X = np.array([[1.0], [-1.0]])
    Y = np.array([[1.0], [-1.0]])
    shape = NetworkShape.make((1, 3, 4, 1), "identity", UNIT_SLOPE)
    # extra factor sqrt(p3) = 2
    assert lambda0_regression(Y, X, shape) == pytest.approx(2.0 * np.sqrt(2.0), rel=1e-12)


def test_regression_pivotality_exact():
    rng = np.random.default_rng(0)
    X = rng.standard_normal((20, 6))
    Y = rng.standard_normal((20, 1))
    shape = NetworkShape.make((6, 4, 1), "identity")
    base = lambda0_regression(Y, X, shape)
    a, b = 3.7, -2.0
    shifted = lambda0_regression(a * Y + b, X, shape)
    assert abs(shifted - base) <= 1e-12 * base


def test_regression_rejects_constant_response():
    shape = NetworkShape.make((2, 2, 1), "identity")
    with pytest.raises(DataError):
        lambda0_regression(np.ones((5, 1)), np.zeros((5, 2)), shape)


def test_classification_hand_value():
    X = np.array([[1.0], [-1.0]])
    Y = np.array([[1.0, 0.0], [0.0, 1.0]])
    shape = NetworkShape.make((1, 3, 2), "softmax", UNIT_SLOPE)
    # X' Yc = (1, -1): row l1 sum 2, no norm divisor in classification
    assert lambda0_classification(Y, X, shape) == pytest.approx(2.0, rel=1e-12)


def test_classification_single_class_is_zero():
    X = np.random.default_rng(1).standard_normal((5, 3))
    Y = np.zeros((5, 2))
    Y[:, 0] = 1.0
    shape = NetworkShape.make((3, 2, 2), "softmax")
    assert lambda0_classification(Y, X, shape) == 0.0


def test_classification_class_permutation_invariance():
    rng = np.random.default_rng(2)
    X = rng.standard_normal((12, 4))
    idx = rng.integers(0, 3, size=12)
    Y = np.zeros((12, 3))
    Y[np.arange(12), idx] = 1.0
    shape = NetworkShape.make((4, 3, 3), "softmax")
    base = lambda0_classification(Y, X, shape)
    assert lambda0_classification(Y[:, [2, 0, 1]], X, shape) == pytest.approx(base)


def test_relu_limit_rejected_in_closed_forms():
    relu = ActivationSpec(M=np.inf, u0=0.0, k=1.0)
    shape = NetworkShape.make((2, 2, 1), "identity", relu)
    with pytest.raises(ValueError):
        lambda0_regression(np.array([[1.0], [0.0]]), np.eye(2), shape)


def test_oracle_never_exceeds_and_approaches_closed_form():
    rng = np.random.default_rng(3)
    for n_layers in (2, 3):
        shape, _, dataset = random_instance(rng, n_layers=n_layers)
        closed = lambda0(dataset, shape)
        got = lambda0_oracle(dataset, shape, restarts=50, seed=7)
        assert got <= closed + 1e-8
        assert got >= 0.99 * closed


def test_sampler_regression_reproducible_and_centered():
    a = sample_null_regression(100, np.random.default_rng(5))
    b = sample_null_regression(100, np.random.default_rng(5))
    assert np.array_equal(a, b)
    big = sample_null_regression(10**5, np.random.default_rng(6))
    assert abs(big.mean()) < 0.02


def test_sampler_classification():
    rng = np.random.default_rng(7)
    Y = sample_null_classification(10, np.array([1.0, 0.0]), rng)
    assert np.array_equal(Y, np.tile([1.0, 0.0], (10, 1)))
    Y = sample_null_classification(10**4, np.array([0.5, 0.5]), np.random.default_rng(8))
    assert abs(Y[:, 0].sum() - 5000) < 150  # 3 sigma
    big = sample_null_classification(
        10**5, np.array([0.2, 0.5, 0.3]), np.random.default_rng(9)
    )
    assert np.allclose(big.mean(axis=0), [0.2, 0.5, 0.3], atol=0.02)
    with pytest.raises(DataError):
        sample_null_classification(5, np.array([0.7, 0.7]), rng)


def _small_regression(seed=10, n=15, p=4):
    rng = np.random.default_rng(seed)
    return Dataset(
        X=rng.standard_normal((n, p)),
        Y=rng.standard_normal((n, 1)),
        task="regression",
    )


def test_qut_median_at_half_alpha():
    dataset = _small_regression()
    shape = NetworkShape.make((4, 3, 1), "identity")
    res = compute_qut(dataset, shape, QutConfig(alpha=0.5, mc_samples=100, seed=0))
    # order statistic ceil(0.5 * 100) = 50 of the sorted sample
    assert res.lambda_qut == res.lambda_samples[49]


def test_qut_deterministic_and_sorted():
    dataset = _small_regression()
    shape = NetworkShape.make((4, 3, 1), "identity")
    cfg = QutConfig(alpha=0.05, mc_samples=120, seed=42)
    a = compute_qut(dataset, shape, cfg)
    b = compute_qut(dataset, shape, cfg)
    assert a.lambda_qut == b.lambda_qut
    assert np.array_equal(a.lambda_samples, b.lambda_samples)
    assert np.all(np.diff(a.lambda_samples) >= 0)
    assert a.lambda_qut >= np.median(a.lambda_samples)


def test_qut_scales_linearly_with_inputs():
    dataset = _small_regression()
    shape = NetworkShape.make((4, 3, 1), "identity")
    cfg = QutConfig(alpha=0.05, mc_samples=100, seed=3)
    base = compute_qut(dataset, shape, cfg)
    doubled = compute_qut(
        Dataset(X=2.0 * dataset.X, Y=dataset.Y, task="regression"), shape, cfg
    )
    assert np.allclose(doubled.lambda_samples, 2.0 * base.lambda_samples, rtol=1e-12)
    assert doubled.lambda_qut == pytest.approx(2.0 * base.lambda_qut, rel=1e-12)


def test_qut_classification_path():
    rng = np.random.default_rng(11)
    idx = rng.integers(0, 2, size=30)
    Y = np.zeros((30, 2))
    Y[np.arange(30), idx] = 1.0
    dataset = Dataset(X=rng.standard_normal((30, 5)), Y=Y, task="classification")
    shape = NetworkShape.make((5, 3, 2), "softmax")
    res = compute_qut(dataset, shape, QutConfig(mc_samples=150, seed=1))
    assert res.task == "classification"
    assert res.lambda_qut > 0


def test_qut_config_validation():
    with pytest.raises(ValueError):
        QutConfig(alpha=0.0)
    with pytest.raises(ValueError):
        QutConfig(alpha=1.0)
    with pytest.raises(ValueError):
        QutConfig(mc_samples=99)


def test_qut_result_serialization_round_trip():
    dataset = _small_regression()
    shape = NetworkShape.make((4, 3, 1), "identity")
    res = compute_qut(dataset, shape, QutConfig(mc_samples=100, seed=5))
    again = QutResult.from_dict(res.to_dict())
    assert again.lambda_qut == res.lambda_qut
    assert np.array_equal(again.lambda_samples, res.lambda_samples)
    assert (again.alpha, again.mc_samples, again.seed) == (
        res.alpha,
        res.mc_samples,
        res.seed,
    )
    assert (again.task, again.link) == (res.task, res.link)
