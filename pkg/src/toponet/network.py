"""Dense ReLU/softmax networks written directly in NumPy.

A network is ``Net = f_L o ... o f_1`` with ``f_i(x) = act(W_i x + b_i)``.
Hidden layers use ReLU, the last layer of a classifier uses softmax.
Training minimizes cross-entropy with Adam and hand-written backprop.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np


class Activation(str, Enum):
    RELU = "relu"
    SOFTMAX = "softmax"
    IDENTITY = "identity"


class DivergenceError(RuntimeError):
    """Training produced a non-finite loss."""

    def __init__(self, epoch, loss):
        super().__init__(f"loss became non-finite ({loss}) at epoch {epoch}")
        self.epoch = epoch
        self.loss = loss


@dataclass(frozen=True)
class LayerSpec:
    in_dim: int
    out_dim: int
    activation: Activation = Activation.RELU

    def __post_init__(self):
        if self.in_dim < 1 or self.out_dim < 1:
            raise ValueError("layer dimensions must be positive")
        object.__setattr__(self, "activation", Activation(self.activation))


@dataclass(frozen=True)
class NetworkSpec:
    layers: tuple[LayerSpec, ...]

    def __post_init__(self):
        layers = tuple(self.layers)
        object.__setattr__(self, "layers", layers)
        if not layers:
            raise ValueError("a network needs at least one layer")
        for i, (a, b) in enumerate(zip(layers, layers[1:])):
            if a.out_dim != b.in_dim:
                raise ValueError(
                    f"layer {i} out_dim {a.out_dim} does not match layer {i + 1} in_dim {b.in_dim}"
                )
        for i, lay in enumerate(layers[:-1]):
            if lay.activation is Activation.SOFTMAX:
                raise ValueError(f"softmax is only allowed on the last layer (found at layer {i})")

    @classmethod
    def from_dims(cls, dims, last=Activation.SOFTMAX, hidden=Activation.RELU):
        """``[2, 5, 2]`` -> ReLU 2->5, then ``last`` 5->2."""
        dims = list(dims)
        if len(dims) < 2:
            raise ValueError("need at least input and output dimension")
        acts = [hidden] * (len(dims) - 2) + [last]
        return cls(tuple(LayerSpec(a, b, act) for a, b, act in zip(dims, dims[1:], acts)))

    @property
    def dims(self) -> list[int]:
        return [self.layers[0].in_dim] + [lay.out_dim for lay in self.layers]


@dataclass
class Layer:
    W: np.ndarray
    b: np.ndarray
    activation: Activation

    @property
    def in_dim(self):
        return self.W.shape[1]

    @property
    def out_dim(self):
        return self.W.shape[0]

    def affine(self, x):
        return x @ self.W.T + self.b

    def __call__(self, x):
        return activate(self.affine(x), self.activation)


@dataclass
class Network:
    layers: list[Layer]
    seed: int | None = None
    epochs: int = 0

    @property
    def depth(self) -> int:
        return len(self.layers)

    @property
    def in_dim(self) -> int:
        return self.layers[0].in_dim

    @property
    def out_dim(self) -> int:
        return self.layers[-1].out_dim

    @property
    def spec(self) -> NetworkSpec:
        return NetworkSpec(tuple(LayerSpec(l.in_dim, l.out_dim, l.activation) for l in self.layers))

    def copy(self) -> "Network":
        return Network([Layer(l.W.copy(), l.b.copy(), l.activation) for l in self.layers],
                       self.seed, self.epochs)


@dataclass
class Hyperparams:
    """Optimizer settings.  ``batch_size=None`` means full batch."""

    seed: int = 0
    epochs: int = 2000
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-8
    batch_size: int | None = None


def softmax(z: np.ndarray) -> np.ndarray:
    z = np.asarray(z, dtype=float)
    e = np.exp(z - z.max(axis=-1, keepdims=True))
    return e / e.sum(axis=-1, keepdims=True)


def log_softmax(z: np.ndarray) -> np.ndarray:
    z = np.asarray(z, dtype=float)
    m = z.max(axis=-1, keepdims=True)
    return z - m - np.log(np.exp(z - m).sum(axis=-1, keepdims=True))


def activate(z, activation):
    if activation is Activation.RELU:
        return np.maximum(z, 0.0)
    if activation is Activation.SOFTMAX:
        return softmax(z)
    return z


def init_network(spec: NetworkSpec, seed: int = 0, X=None) -> Network:
    """He-scaled Gaussian weights.

    Biases are zero unless sample inputs ``X`` are given; then every ReLU
    unit gets the bias that puts its pre-activation median at zero, so
    each unit starts out active on half of the data.  Narrow layers
    (width 2) otherwise die early in training far too often.
    """
    rng = np.random.Generator(np.random.PCG64(seed))
    layers = []
    for ls in spec.layers:
        W = rng.standard_normal((ls.out_dim, ls.in_dim)) * math.sqrt(2.0 / ls.in_dim)
        layers.append(Layer(W, np.zeros(ls.out_dim), ls.activation))
    if X is not None:
        H = np.asarray(X, dtype=float)
        for layer in layers:
            z = H @ layer.W.T
            if layer.activation is Activation.RELU:
                layer.b = -np.median(z, axis=0)
            H = activate(z + layer.b, layer.activation)
    return Network(layers, seed=seed)


def _as_batch(net, x):
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    X = x[None, :] if single else x
    if X.ndim != 2 or X.shape[1] != net.in_dim:
        raise ValueError(f"expected input dimension {net.in_dim}, got shape {x.shape}")
    if not np.all(np.isfinite(X)):
        raise ValueError("input contains non-finite values")
    return X, single


def head(net: Network, i: int, x) -> np.ndarray:
    """``Net^[i](x)``: the first ``i`` layers applied to ``x`` (``i=0`` is the identity).

    Accepts a single vector or a batch of row vectors.
    """
    if not 0 <= i <= net.depth:
        raise IndexError(f"head index {i} outside 0..{net.depth}")
    X, single = _as_batch(net, x)
    for layer in net.layers[:i]:
        X = layer(X)
    return X[0] if single else X


def forward(net: Network, x) -> np.ndarray:
    return head(net, net.depth, x)


def _forward_cache(net, X):
    """Pre-activations and activations for every layer (logits kept raw)."""
    acts, pres = [X], []
    for layer in net.layers:
        z = layer.affine(acts[-1])
        pres.append(z)
        acts.append(z if layer.activation is Activation.SOFTMAX else activate(z, layer.activation))
    return pres, acts


def cross_entropy(net: Network, X, y) -> float:
    """Mean cross-entropy; the last layer's softmax is folded into log-sum-exp."""
    if net.layers[-1].activation is not Activation.SOFTMAX:
        raise ValueError("cross-entropy needs a softmax output layer")
    pres, _ = _forward_cache(net, np.asarray(X, dtype=float))
    logp = log_softmax(pres[-1])
    return float(-logp[np.arange(len(y)), y].mean())


def gradients(net: Network, X, y):
    """Loss and per-layer ``(dW, db)`` of the mean cross-entropy."""
    X = np.asarray(X, dtype=float)
    y = np.asarray(y)
    n = X.shape[0]
    pres, acts = _forward_cache(net, X)
    logp = log_softmax(pres[-1])
    loss = float(-logp[np.arange(n), y].mean())
    delta = np.exp(logp)
    delta[np.arange(n), y] -= 1.0
    delta /= n
    grads = [None] * net.depth
    for i in range(net.depth - 1, -1, -1):
        grads[i] = (delta.T @ acts[i], delta.sum(axis=0))
        if i == 0:
            break
        delta = delta @ net.layers[i].W
        prev = net.layers[i - 1].activation
        if prev is Activation.RELU:
            delta = delta * (pres[i - 1] > 0)
    return loss, grads


def train(spec: NetworkSpec, data, hp: Hyperparams | None = None, *, net: Network | None = None):
    """Fit a softmax classifier to ``data`` with Adam.

    Returns ``(network, loss_history)``; the history holds one loss per
    epoch, measured on the batch(es) of that epoch before the update.
    """
    hp = hp or Hyperparams()
    if spec.layers[-1].activation is not Activation.SOFTMAX:
        raise ValueError("training needs a network ending in softmax")
    if spec.layers[0].in_dim != data.dim:
        raise ValueError(f"network input {spec.layers[0].in_dim} != data dimension {data.dim}")
    if spec.layers[-1].out_dim != data.num_classes:
        raise ValueError(
            f"network output {spec.layers[-1].out_dim} != number of classes {data.num_classes}"
        )
    net = net.copy() if net is not None else init_network(spec, hp.seed, data.points)
    X, y = data.points, data.labels
    n = len(y)
    rng = np.random.Generator(np.random.PCG64(hp.seed + 1))
    m = [(np.zeros_like(l.W), np.zeros_like(l.b)) for l in net.layers]
    v = [(np.zeros_like(l.W), np.zeros_like(l.b)) for l in net.layers]
    history = []
    step = 0
    for epoch in range(hp.epochs):
        if hp.batch_size is None or hp.batch_size >= n:
            batches = [slice(None)]
        else:
            order = rng.permutation(n)
            batches = [order[s:s + hp.batch_size] for s in range(0, n, hp.batch_size)]
        total = 0.0
        for idx in batches:
            loss, grads = gradients(net, X[idx], y[idx])
            if not math.isfinite(loss):
                raise DivergenceError(epoch, loss)
            total += loss * (n if isinstance(idx, slice) else len(idx))
            step += 1
            c1 = 1 - hp.beta1 ** step
            c2 = 1 - hp.beta2 ** step
            for layer, g, mi, vi in zip(net.layers, grads, m, v):
                for p, gp, mp, vp in zip((layer.W, layer.b), g, mi, vi):
                    mp *= hp.beta1
                    mp += (1 - hp.beta1) * gp
                    vp *= hp.beta2
                    vp += (1 - hp.beta2) * gp * gp
                    p -= hp.lr * (mp / c1) / (np.sqrt(vp / c2) + hp.adam_eps)
        history.append(total / n)
        if not all(np.all(np.isfinite(l.W)) and np.all(np.isfinite(l.b)) for l in net.layers):
            raise DivergenceError(epoch, math.nan)
    net.seed = hp.seed
    net.epochs += hp.epochs
    return net, history


def accuracy(net: Network, data) -> float:
    pred = np.argmax(forward(net, data.points), axis=1)
    return float(np.mean(pred == data.labels))


@dataclass
class ActivationTrace:
    """Point clouds ``X^[0] .. X^[L]`` of a dataset pushed through a network.

    ``clouds[0]`` is the input and ``clouds[i]`` the output of layer ``i``;
    ``pre[i-1]`` holds the affine image ``W_i x + b_i`` feeding layer ``i``.
    """

    clouds: list[np.ndarray]
    labels: np.ndarray
    pre: list[np.ndarray] = field(default_factory=list)

    @property
    def depth(self):
        return len(self.clouds) - 1


def trace_activations(net: Network, data, keep_pre: bool = True) -> ActivationTrace:
    X, _ = _as_batch(net, data.points)
    clouds, pres = [X], []
    for layer in net.layers:
        z = layer.affine(clouds[-1])
        pres.append(z)
        clouds.append(activate(z, layer.activation))
    return ActivationTrace(clouds, np.asarray(data.labels).copy(), pres if keep_pre else [])
