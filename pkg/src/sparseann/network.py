"""Fully connected sparse-input network: forward pass and exact gradients.

The first layer is a plain affine map; every deeper layer divides each
weight row by its l2 norm before use, so rescaling a deep row leaves the
output unchanged.  The output layer applies a link function (identity,
softmax, or multiclass logit).  Gradients are hand-derived and
differentiate through the row normalization.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .activations import ActivationSpec, act_deriv, act_value
from .errors import DegenerateParameterError, NumericalError

LINKS = ("identity", "softmax", "logit")
LOSSES = ("sqrt_l2", "cross_entropy")

ROW_NORM_FLOOR = 1e-12


@dataclass(frozen=True)
class NetworkShape:
    """Layer widths (p1, p2, ..., pl, m), link name and hidden activations.

    ``widths`` has l+1 entries for an l-layer network, l >= 2.  ``activations``
    holds one spec per hidden layer (l-1 of them); passing a single spec to
    ``make`` broadcasts it.
    """

    widths: tuple
    link: str = "identity"
    activations: tuple = field(default_factory=tuple)

    def __post_init__(self):
        widths = tuple(int(w) for w in self.widths)
        object.__setattr__(self, "widths", widths)
        if len(widths) < 3:
            raise ValueError("need at least one hidden layer (>= 3 widths)")
        if any(w < 1 for w in widths):
            raise ValueError("all widths must be >= 1")
        if self.link not in LINKS:
            raise ValueError(f"unknown link {self.link!r}, expected one of {LINKS}")
        acts = tuple(self.activations)
        if len(acts) != self.n_layers - 1:
            raise ValueError(
                f"need {self.n_layers - 1} hidden activation specs, got {len(acts)}"
            )
        object.__setattr__(self, "activations", acts)

    @staticmethod
    def make(widths, link="identity", activation=None) -> "NetworkShape":
        if activation is None:
            activation = ActivationSpec()
        if isinstance(activation, ActivationSpec):
            activation = (activation,) * (len(widths) - 2)
        return NetworkShape(tuple(widths), link, tuple(activation))

    @property
    def n_layers(self) -> int:
        return len(self.widths) - 1

    @property
    def n_inputs(self) -> int:
        return self.widths[0]

    @property
    def n_outputs(self) -> int:
        return self.widths[-1]

    @property
    def param_count(self) -> int:
        w = self.widths
        return sum(w[k + 1] * (w[k] + 1) for k in range(self.n_layers))

    def to_dict(self) -> dict:
        return {
            "widths": list(self.widths),
            "link": self.link,
            "activations": [a.to_dict() for a in self.activations],
        }

    @staticmethod
    def from_dict(d: dict) -> "NetworkShape":
        return NetworkShape(
            tuple(d["widths"]),
            d["link"],
            tuple(ActivationSpec.from_dict(a) for a in d["activations"]),
        )


@dataclass
class Theta:
    """Network parameters split into the penalized and free parts.

    Penalized (theta1): ``W1`` (p2 x p1) and all hidden biases ``biases[k]``
    (the bias of layer k+1).  Free (theta2): the deeper weight matrices
    ``deep[i]`` = W_{i+2} whose rows get normalized in the forward pass, and
    the output intercept ``c``.
    """

    W1: np.ndarray
    biases: list
    deep: list
    c: np.ndarray

    def copy(self) -> "Theta":
        return Theta(
            self.W1.copy(),
            [b.copy() for b in self.biases],
            [w.copy() for w in self.deep],
            self.c.copy(),
        )

    def theta1_arrays(self):
        return [self.W1, *self.biases]

    def theta2_arrays(self):
        return [*self.deep, self.c]

    def all_arrays(self):
        return self.theta1_arrays() + self.theta2_arrays()

    @staticmethod
    def zeros(shape: NetworkShape) -> "Theta":
        w = shape.widths
        l = shape.n_layers
        return Theta(
            W1=np.zeros((w[1], w[0])),
            biases=[np.zeros(w[k + 1]) for k in range(l - 1)],
            deep=[np.zeros((w[k], w[k - 1])) for k in range(2, l + 1)],
            c=np.zeros(w[-1]),
        )

    def check_shapes(self, shape: NetworkShape):
        w = shape.widths
        l = shape.n_layers
        ok = (
            self.W1.shape == (w[1], w[0])
            and len(self.biases) == l - 1
            and all(b.shape == (w[k + 1],) for k, b in enumerate(self.biases))
            and len(self.deep) == l - 1
            and all(m.shape == (w[k + 2], w[k + 1]) for k, m in enumerate(self.deep))
            and self.c.shape == (w[-1],)
        )
        if not ok:
            raise ValueError("parameter shapes do not match the network shape")

    def to_dict(self) -> dict:
        return {
            "W1": self.W1.tolist(),
            "biases": [b.tolist() for b in self.biases],
            "deep": [w.tolist() for w in self.deep],
            "c": self.c.tolist(),
        }

    @staticmethod
    def from_dict(d: dict) -> "Theta":
        return Theta(
            W1=np.asarray(d["W1"], dtype=float),
            biases=[np.asarray(b, dtype=float) for b in d["biases"]],
            deep=[np.asarray(w, dtype=float) for w in d["deep"]],
            c=np.asarray(d["c"], dtype=float),
        )


@dataclass
class Dataset:
    """Design matrix X (n x p1), responses Y (n x m) and the task tag."""

    X: np.ndarray
    Y: np.ndarray
    task: str  # "regression" or "classification"
    feature_names: list = None
    class_labels: list = None

    def __post_init__(self):
        self.X = np.asarray(self.X, dtype=float)
        self.Y = np.asarray(self.Y, dtype=float)
        if self.X.ndim != 2 or self.Y.ndim != 2:
            raise ValueError("X and Y must be 2-d arrays")
        if self.X.shape[0] != self.Y.shape[0]:
            raise ValueError("X and Y must have the same number of rows")
        if self.task not in ("regression", "classification"):
            raise ValueError(f"unknown task {self.task!r}")
        if self.task == "regression" and self.Y.shape[1] != 1:
            raise ValueError("regression responses must be n x 1")
        if self.task == "classification":
            if not np.all(np.isin(self.Y, (0.0, 1.0))):
                raise ValueError("classification responses must be one-hot")
            if not np.allclose(self.Y.sum(axis=1), 1.0):
                raise ValueError("each classification response row must sum to 1")

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def n_features(self) -> int:
        return self.X.shape[1]

    @property
    def n_outputs(self) -> int:
        return self.Y.shape[1]


def _row_norms(W: np.ndarray) -> np.ndarray:
    norms = np.linalg.norm(W, axis=1)
    if np.any(norms < ROW_NORM_FLOOR):
        raise DegenerateParameterError(
            "a deep weight row has (numerically) zero norm; the normalized "
            "layer map is undefined there"
        )
    return norms


def link_apply(link: str, Z: np.ndarray) -> np.ndarray:
    """Apply the output link row-wise, shift-stably.

    For the multiclass logit link the columns of Z are the m-1 free
    log-odds coordinates, so the output has one more column than Z.
    """
    Z = np.asarray(Z, dtype=float)
    if not np.all(np.isfinite(Z)):
        raise ValueError("link input must be finite")
    if link == "identity":
        return Z
    if link == "softmax":
        shifted = Z - Z.max(axis=1, keepdims=True)
        e = np.exp(shifted)
        return e / e.sum(axis=1, keepdims=True)
    if link == "logit":
        # reference class appended with logit 0
        full = np.concatenate([Z, np.zeros((Z.shape[0], 1))], axis=1)
        shifted = full - full.max(axis=1, keepdims=True)
        e = np.exp(shifted)
        return e / e.sum(axis=1, keepdims=True)
    raise ValueError(f"unknown link {link!r}")


def forward(shape: NetworkShape, theta: Theta, X: np.ndarray) -> np.ndarray:
    """Network output for each row of X, an n x m matrix."""
    mu, _ = _forward_cached(shape, theta, np.asarray(X, dtype=float))
    return mu


def _forward_cached(shape: NetworkShape, theta: Theta, X: np.ndarray):
    theta.check_shapes(shape)
    if X.ndim != 2 or X.shape[1] != shape.n_inputs:
        raise ValueError(
            f"X must be n x {shape.n_inputs}, got {X.shape}"
        )
    l = shape.n_layers
    pre_acts = []
    acts = [X]
    a = X
    # hidden layers 1 .. l-1 (layer 1 unnormalized, deeper ones row-normalized)
    for k in range(l - 1):
        if k == 0:
            pre = a @ theta.W1.T + theta.biases[0]
        else:
            W = theta.deep[k - 1]
            norms = _row_norms(W)
            pre = a @ (W / norms[:, None]).T + theta.biases[k]
        a = act_value(shape.activations[k], pre)
        pre_acts.append(pre)
        acts.append(a)
    Wl = theta.deep[l - 2]
    norms_l = _row_norms(Wl)
    Z = a @ (Wl / norms_l[:, None]).T + theta.c
    if shape.link == "logit":
        mu = link_apply("logit", Z[:, :-1])
    else:
        mu = link_apply(shape.link, Z)
    cache = {"pre_acts": pre_acts, "acts": acts, "Z": Z, "mu": mu}
    return mu, cache


def _dloss_dmu(loss_kind: str, Y: np.ndarray, mu: np.ndarray):
    """Loss value and its gradient w.r.t. the network output."""
    if loss_kind == "sqrt_l2":
        resid = mu - Y
        nrm = np.linalg.norm(resid)
        if nrm < 1e-12:
            raise NumericalError(
                "square-root l2 loss is not differentiable at zero residual"
            )
        return nrm, resid / nrm
    if loss_kind == "cross_entropy":
        P = np.clip(mu, 1e-12, None)
        loss = -float(np.sum(Y * np.log(P)))
        return loss, -Y / P
    raise ValueError(f"unknown loss {loss_kind!r}, expected one of {LOSSES}")


def _dZ_from_dmu(link: str, mu: np.ndarray, dmu: np.ndarray) -> np.ndarray:
    """Pull the output-gradient back through the link to the last-layer logits."""
    if link == "identity":
        return dmu
    if link == "softmax":
        s = np.sum(dmu * mu, axis=1, keepdims=True)
        return mu * (dmu - s)
    if link == "logit":
        s = np.sum(dmu * mu, axis=1, keepdims=True)
        dZ = mu * (dmu - s)
        dZ[:, -1] = 0.0  # reference-class logit is fixed at zero
        return dZ
    raise ValueError(f"unknown link {link!r}")


def _normalized_row_backprop(W: np.ndarray, dW_hat: np.ndarray) -> np.ndarray:
    """Gradient w.r.t. W given the gradient w.r.t. its row-normalized version."""
    norms = _row_norms(W)
    W_hat = W / norms[:, None]
    dots = np.sum(dW_hat * W_hat, axis=1, keepdims=True)
    return (dW_hat - dots * W_hat) / norms[:, None]


def loss_and_grad(shape: NetworkShape, theta: Theta, dataset: Dataset, loss_kind: str):
    """Loss value and its exact gradient, a Theta-shaped structure.

    Differentiates through the row normalization of the deep layers.
    """
    mu, cache = _forward_cached(shape, theta, dataset.X)
    loss, dmu = _dloss_dmu(loss_kind, dataset.Y, mu)
    dZ = _dZ_from_dmu(shape.link, mu, dmu)

    l = shape.n_layers
    acts = cache["acts"]
    pre_acts = cache["pre_acts"]
    grad = Theta.zeros(shape)

    grad.c = dZ.sum(axis=0)
    Wl = theta.deep[l - 2]
    Wl_hat = Wl / _row_norms(Wl)[:, None]
    grad.deep[l - 2] = _normalized_row_backprop(Wl, dZ.T @ acts[l - 1])
    dA = dZ @ Wl_hat

    for k in range(l - 1, 0, -1):  # hidden layer index, 1-based
        dpre = dA * act_deriv(shape.activations[k - 1], pre_acts[k - 1])
        grad.biases[k - 1] = dpre.sum(axis=0)
        if k == 1:
            grad.W1 = dpre.T @ acts[0]
        else:
            W = theta.deep[k - 2]
            W_hat = W / _row_norms(W)[:, None]
            grad.deep[k - 2] = _normalized_row_backprop(W, dpre.T @ acts[k - 1])
            dA = dpre @ W_hat
    return loss, grad


def backward(shape: NetworkShape, theta: Theta, dataset: Dataset, loss_kind: str) -> Theta:
    """Exact gradient of the loss w.r.t. every parameter."""
    _, grad = loss_and_grad(shape, theta, dataset, loss_kind)
    return grad


def predict(shape: NetworkShape, theta: Theta, X_new: np.ndarray) -> np.ndarray:
    """Forward pass on new inputs."""
    return forward(shape, theta, np.asarray(X_new, dtype=float))


def predict_class(shape: NetworkShape, theta: Theta, X_new: np.ndarray) -> np.ndarray:
    """Class index per row (argmax of the output, ties to the smallest index)."""
    return np.argmax(predict(shape, theta, X_new), axis=1)
