"""Fully connected ReLU networks F(L, r) with hand-written backpropagation.

A network with input dimension ``d``, ``L`` hidden layers and ``r`` neurons
per hidden layer stores ``L + 1`` affine maps.  Weight matrices use the
``(fan_out, fan_in)`` layout, so row ``i`` of ``weights[s]`` holds the
coefficients feeding neuron ``i`` of layer ``s + 1``::

    h_0 = x
    h_s = relu(W_{s-1} h_{s-1} + b_{s-1}),   s = 1..L
    f(x) = W_L h_L + b_L

All arithmetic is float64.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import DegenerateBatchError, DivergenceError, InputShapeError, ParameterError

CHECKPOINT_FORMAT = "stdense.densenet/1"


@dataclass
class DenseNet:
    input_dim: int
    depth: int
    width: int
    weights: list = field(default_factory=list)
    biases: list = field(default_factory=list)

    def __post_init__(self):
        if self.input_dim < 1 or self.depth < 1 or self.width < 1:
            raise ParameterError("input_dim, depth and width must be positive")
        if not self.weights:
            shapes = layer_shapes(self.input_dim, self.depth, self.width)
            self.weights = [np.zeros(s) for s in shapes]
            self.biases = [np.zeros(s[0]) for s in shapes]
        self.weights = [np.asarray(w, dtype=np.float64) for w in self.weights]
        self.biases = [np.asarray(b, dtype=np.float64) for b in self.biases]
        expected = layer_shapes(self.input_dim, self.depth, self.width)
        if len(self.weights) != len(expected) or len(self.biases) != len(expected):
            raise InputShapeError(
                f"expected {len(expected)} layers, got {len(self.weights)} weights "
                f"and {len(self.biases)} biases"
            )
        for s, (w, b, shape) in enumerate(zip(self.weights, self.biases, expected)):
            if w.shape != shape or b.shape != (shape[0],):
                raise InputShapeError(
                    f"layer {s}: weight {w.shape} / bias {b.shape}, expected {shape} / ({shape[0]},)"
                )
        check_finite(self.weights, self.biases)

    @classmethod
    def he_init(cls, input_dim, depth, width, rng):
        """Gaussian weights with variance 2 / fan_in, zero biases."""
        shapes = layer_shapes(input_dim, depth, width)
        weights = [rng.standard_normal(s) * np.sqrt(2.0 / s[1]) for s in shapes]
        biases = [np.zeros(s[0]) for s in shapes]
        return cls(input_dim, depth, width, weights, biases)

    @property
    def n_params(self):
        return sum(w.size + b.size for w, b in zip(self.weights, self.biases))

    def copy(self):
        return DenseNet(
            self.input_dim,
            self.depth,
            self.width,
            [w.copy() for w in self.weights],
            [b.copy() for b in self.biases],
        )

    def __call__(self, X):
        return forward_batch(self, X)


@dataclass
class Gradients:
    """Per-parameter arrays, shape-congruent with a :class:`DenseNet`."""

    weights: list
    biases: list

    @classmethod
    def zeros_like(cls, net):
        return cls([np.zeros_like(w) for w in net.weights], [np.zeros_like(b) for b in net.biases])

    def flat(self):
        return np.concatenate([a.ravel() for pair in zip(self.weights, self.biases) for a in pair])


def layer_shapes(input_dim, depth, width):
    shapes = [(width, input_dim)]
    shapes += [(width, width)] * (depth - 1)
    shapes.append((1, width))
    return shapes


def check_finite(weights, biases):
    for s, (w, b) in enumerate(zip(weights, biases)):
        if not (np.all(np.isfinite(w)) and np.all(np.isfinite(b))):
            raise DivergenceError(f"non-finite parameters in layer {s}", layer=s)


def _as_batch(net, X):
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 1:
        X = X[None, :]
    if X.ndim != 2 or X.shape[1] != net.input_dim:
        raise InputShapeError(f"expected inputs of dimension {net.input_dim}, got shape {X.shape}")
    return X


def forward_batch(net, X):
    """Evaluate the network on the rows of ``X``; returns shape ``(N,)``."""
    h = _as_batch(net, X)
    for w, b in zip(net.weights[:-1], net.biases[:-1]):
        h = np.maximum(h @ w.T + b, 0.0)
    return h @ net.weights[-1][0] + net.biases[-1][0]


def forward(net, x):
    """Network value at a single point ``x`` of length ``input_dim``."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1:
        raise InputShapeError(f"expected a vector, got shape {x.shape}")
    return float(forward_batch(net, x)[0])


def pre_activations(net, X):
    """Hidden-layer pre-activations for every row of ``X`` (list of ``(N, r)`` arrays)."""
    h = _as_batch(net, X)
    out = []
    for w, b in zip(net.weights[:-1], net.biases[:-1]):
        z = h @ w.T + b
        out.append(z)
        h = np.maximum(z, 0.0)
    return out


def truncate(value, threshold):
    """Clip to ``[-threshold, threshold]``: ``sign(v) * min(|v|, A)``."""
    if not threshold > 0:
        raise ParameterError(f"truncation threshold must be positive, got {threshold}")
    out = np.clip(value, -threshold, threshold)
    return float(out) if np.ndim(out) == 0 else out


def backward(net, X, y, weights):
    """Loss ``sum_k w_k (y_k - f(x_k))^2`` and its exact gradient.

    The ReLU subgradient at zero is taken to be zero.

    Returns
    -------
    (Gradients, float)
    """
    X = _as_batch(net, X)
    y = np.asarray(y, dtype=np.float64).ravel()
    wts = np.asarray(weights, dtype=np.float64).ravel()
    if X.shape[0] == 0:
        raise DegenerateBatchError("backward called with an empty batch")
    if y.shape[0] != X.shape[0] or wts.shape[0] != X.shape[0]:
        raise InputShapeError("X, y and weights must have the same number of rows")
    if np.any(wts < 0):
        raise ParameterError("sample weights must be nonnegative")

    acts = [X]
    masks = []
    h = X
    for w, b in zip(net.weights[:-1], net.biases[:-1]):
        z = h @ w.T + b
        mask = z > 0.0
        h = np.where(mask, z, 0.0)
        masks.append(mask)
        acts.append(h)
    pred = h @ net.weights[-1][0] + net.biases[-1][0]
    resid = y - pred
    loss = float(np.sum(wts * resid * resid))

    # dloss/dpred
    delta = (-2.0 * wts * resid)[:, None]
    gw = [None] * len(net.weights)
    gb = [None] * len(net.biases)
    for s in range(len(net.weights) - 1, -1, -1):
        gw[s] = delta.T @ acts[s]
        gb[s] = delta.sum(axis=0)
        if s > 0:
            delta = (delta @ net.weights[s]) * masks[s - 1]
    return Gradients(gw, gb), loss


def sgd_step(net, grads, lr, velocity=None, momentum=0.0):
    """One (heavy-ball) momentum step, in place.

    ``v <- momentum * v + g``; ``theta <- theta - lr * v``.  Returns the
    updated net and velocity.  Raises :class:`DivergenceError` naming the
    first layer holding a non-finite value.
    """
    if not lr > 0:
        raise ParameterError(f"learning rate must be positive, got {lr}")
    if not 0.0 <= momentum < 1.0:
        raise ParameterError(f"momentum must lie in [0, 1), got {momentum}")
    if velocity is None:
        velocity = Gradients.zeros_like(net)
    for s in range(len(net.weights)):
        if grads.weights[s].shape != net.weights[s].shape or grads.biases[s].shape != net.biases[s].shape:
            raise InputShapeError(f"gradient shape mismatch in layer {s}")
        velocity.weights[s] = momentum * velocity.weights[s] + grads.weights[s]
        velocity.biases[s] = momentum * velocity.biases[s] + grads.biases[s]
        net.weights[s] -= lr * velocity.weights[s]
        net.biases[s] -= lr * velocity.biases[s]
    check_finite(net.weights, net.biases)
    return net, velocity


def lipschitz_bound(net):
    """Upper bound on the Lipschitz constant of ``x -> f(x)``: product of spectral norms."""
    return float(np.prod([np.linalg.norm(w, 2) for w in net.weights]))


def net_to_dict(net):
    return {
        "format": CHECKPOINT_FORMAT,
        "input_dim": net.input_dim,
        "depth": net.depth,
        "width": net.width,
        "weights": [w.ravel(order="C").tolist() for w in net.weights],
        "biases": [b.tolist() for b in net.biases],
    }


def net_from_dict(data):
    fmt = data.get("format")
    if fmt != CHECKPOINT_FORMAT:
        raise ParameterError(f"unsupported checkpoint format {fmt!r}")
    d, L, r = int(data["input_dim"]), int(data["depth"]), int(data["width"])
    shapes = layer_shapes(d, L, r)
    if len(data["weights"]) != len(shapes):
        raise InputShapeError(f"checkpoint has {len(data['weights'])} layers, expected {len(shapes)}")
    weights = [np.asarray(w, dtype=np.float64).reshape(s) for w, s in zip(data["weights"], shapes)]
    biases = [np.asarray(b, dtype=np.float64) for b in data["biases"]]
    return DenseNet(d, L, r, weights, biases)


def save_checkpoint(net, path, metadata=None):
    """Write ``net`` as JSON.  Floats are stored with ``repr`` precision, so
    a save/load round trip is exact."""
    data = net_to_dict(net)
    if metadata:
        data["metadata"] = metadata
    Path(path).write_text(json.dumps(data))


def load_checkpoint(path):
    data = json.loads(Path(path).read_text())
    return net_from_dict(data), data.get("metadata", {})
