"""Losses, the l1 penalty on the first-layer parameters, and the prox map."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .activations import act_deriv
from .errors import DataError
from .network import Dataset, NetworkShape, Theta, _row_norms, forward

PROB_FLOOR = 1e-12


@dataclass(frozen=True)
class PenaltySpec:
    """Penalty level; only the entrywise (q=1) variant is implemented.

    ``q`` is kept as a config hook for a future grouped variant.
    """

    lam: float
    q: int = 1

    def __post_init__(self):
        if self.lam < 0:
            raise ValueError("lambda must be nonnegative")
        if self.q != 1:
            raise ValueError("only q=1 is supported")


def loss_sqrt_l2(Y: np.ndarray, mu: np.ndarray) -> float:
    """Euclidean (Frobenius) norm of the residual, not squared."""
    Y = np.asarray(Y, dtype=float)
    mu = np.asarray(mu, dtype=float)
    if Y.shape != mu.shape:
        raise ValueError("Y and mu must have matching shapes")
    return float(np.linalg.norm(Y - mu))


def loss_cross_entropy(Y: np.ndarray, P: np.ndarray) -> float:
    """Negative sum of log-probabilities of the true classes."""
    Y = np.asarray(Y, dtype=float)
    P = np.asarray(P, dtype=float)
    if Y.shape != P.shape:
        raise ValueError("Y and P must have matching shapes")
    if not np.allclose(P.sum(axis=1), 1.0, atol=1e-8):
        raise DataError("probability rows must sum to 1")
    return -float(np.sum(Y * np.log(np.clip(P, PROB_FLOOR, None))))


def penalty_l1(theta: Theta) -> float:
    """Sum of absolute values of the first-layer weights and all hidden biases."""
    return float(sum(np.abs(a).sum() for a in theta.theta1_arrays()))


def objective_value(
    shape: NetworkShape, theta: Theta, dataset: Dataset, penalty: PenaltySpec
) -> float:
    """Loss plus lambda times the l1 penalty on the penalized parameters."""
    mu = forward(shape, theta, dataset.X)
    if dataset.task == "regression":
        loss = loss_sqrt_l2(dataset.Y, mu)
    else:
        loss = loss_cross_entropy(dataset.Y, mu)
    return loss + penalty.lam * penalty_l1(theta)


def soft_threshold(w: np.ndarray, t: float) -> np.ndarray:
    """sign(w) * max(|w| - t, 0); produces exact zeros."""
    return np.sign(w) * np.maximum(np.abs(w) - t, 0.0)


def prox_l1(theta: Theta, step: float, lam: float) -> Theta:
    """Soft-threshold the penalized parameters; free parameters untouched."""
    if step <= 0:
        raise ValueError("step must be positive")
    out = theta.copy()
    t = step * lam
    out.W1 = soft_threshold(out.W1, t)
    out.biases = [soft_threshold(b, t) for b in out.biases]
    return out


def hessian_at_null(shape: NetworkShape, theta: Theta, dataset: Dataset):
    """Bias-block Hessians of the square-root loss at the null point.

    For a 3-layer regression network, at W1 = 0, all biases 0 and c equal
    to the response mean, the Hessian blocks w.r.t. the two hidden bias
    vectors have the closed forms

        H_b1 = n sigma'(0)^4 (w3 W2)^T (w3 W2) / ||Yc||_2
        H_b2 = n sigma'(0)^2 w3^T w3 / ||Yc||_2

    with Yc the centered responses and w3, W2 the row-normalized deep
    weights of ``theta``.  Both are outer products, hence PSD.
    """
    if shape.n_layers != 3:
        raise ValueError("the closed-form bias Hessians require a 3-layer network")
    if dataset.task != "regression":
        raise ValueError("the closed-form bias Hessians are for regression")
    Yc = dataset.Y - dataset.Y.mean(axis=0)
    nrm = float(np.linalg.norm(Yc))
    if nrm < 1e-12:
        raise DataError("constant response: centered norm is zero")
    n = dataset.n
    sp0 = float(act_deriv(shape.activations[0], 0.0))
    W2 = theta.deep[0]
    w3 = theta.deep[1]
    W2_hat = W2 / _row_norms(W2)[:, None]
    w3_hat = w3 / _row_norms(w3)[:, None]
    v = (w3_hat @ W2_hat).ravel()  # 1 x p2 row
    H_b1 = n * sp0**4 * np.outer(v, v) / nrm
    w3r = w3_hat.ravel()
    H_b2 = n * sp0**2 * np.outer(w3r, w3r) / nrm
    return H_b1, H_b2


def descent_direction_certificate(
    shape: NetworkShape,
    dataset: Dataset,
    theta2: Theta,
    lam: float,
    n_directions: int,
    step: float,
    rng: np.random.Generator,
) -> bool:
    """Check that the null point is a finite-step local minimum.

    Starting from theta1 = 0 with the loss-minimizing intercept, perturbs
    the penalized parameters along random unit-l1 directions with the
    given step and verifies the penalized objective never decreases.
    """
    theta = theta2.copy()
    theta.W1 = np.zeros_like(theta.W1)
    theta.biases = [np.zeros_like(b) for b in theta.biases]
    if dataset.task == "regression":
        theta.c = dataset.Y.mean(axis=0)
    else:
        raise ValueError("certificate implemented for regression only")
    pen = PenaltySpec(lam)
    base = objective_value(shape, theta, dataset, pen)
    sizes = [a.size for a in theta.theta1_arrays()]
    total = sum(sizes)
    for _ in range(n_directions):
        d = rng.standard_normal(total)
        d /= np.abs(d).sum()
        pert = theta.copy()
        offset = 0
        arrays = pert.theta1_arrays()
        for i, a in enumerate(arrays):
            chunk = d[offset : offset + a.size].reshape(a.shape)
            offset += a.size
            if i == 0:
                pert.W1 = pert.W1 + step * chunk
            else:
                pert.biases[i - 1] = pert.biases[i - 1] + step * chunk
        if objective_value(shape, pert, dataset, pen) < base - 1e-12:
            return False
    return True
