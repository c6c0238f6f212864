"""Feedforward sigmoid network with cross-entropy cost and backprop gradients.

Parameters live in one flat vector (layer-major: row-major weights, then
biases, per layer) so the optimizer can treat the network as a generic
objective. The output layer is sigmoid as well, so output entries are
independent probabilities that need not sum to one.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .gscm import entries_of

LOG_EPS = 1e-12  # clamp for log arguments inside the cross-entropy


@dataclass(frozen=True)
class NetShape:
    layer_sizes: tuple

    def __post_init__(self):
        sizes = tuple(int(s) for s in self.layer_sizes)
        object.__setattr__(self, "layer_sizes", sizes)
        if len(sizes) < 3:
            raise ValueError("need input, at least one hidden, and output layer")
        if any(s < 1 for s in sizes):
            raise ValueError("layer sizes must be positive")

    @property
    def n_params(self) -> int:
        return sum(
            (a + 1) * b for a, b in zip(self.layer_sizes[:-1], self.layer_sizes[1:])
        )

    @property
    def n_inputs(self) -> int:
        return self.layer_sizes[0]

    @property
    def n_outputs(self) -> int:
        return self.layer_sizes[-1]


@dataclass
class NetParams:
    theta: np.ndarray
    shape: NetShape

    def __post_init__(self):
        self.theta = np.asarray(self.theta, dtype=float).ravel()
        if self.theta.size != self.shape.n_params:
            raise ValueError(
                f"theta has {self.theta.size} entries, shape needs {self.shape.n_params}"
            )


@dataclass
class OutputCode:
    """Selection probabilities, one entry per small cell."""

    probs: np.ndarray

    def __post_init__(self):
        self.probs = np.asarray(self.probs, dtype=float)
        if np.any(self.probs < 0) or np.any(self.probs > 1):
            raise ValueError("output code entries must lie in [0, 1]")


def sigmoid(z):
    return 1.0 / (1.0 + np.exp(-z))


def unpack_params(theta: np.ndarray, shape: NetShape):
    """Flat vector -> list of (W, b) with W of shape (n_out, n_in)."""
    layers = []
    pos = 0
    for n_in, n_out in zip(shape.layer_sizes[:-1], shape.layer_sizes[1:]):
        w = theta[pos : pos + n_in * n_out].reshape(n_out, n_in)
        pos += n_in * n_out
        b = theta[pos : pos + n_out]
        pos += n_out
        layers.append((w, b))
    return layers


def pack_params(layers) -> np.ndarray:
    return np.concatenate([np.concatenate([w.ravel(), b]) for w, b in layers])


def weight_mask(shape: NetShape) -> np.ndarray:
    """Boolean mask over theta selecting weights (True) vs biases (False)."""
    parts = []
    for n_in, n_out in zip(shape.layer_sizes[:-1], shape.layer_sizes[1:]):
        parts.append(np.ones(n_in * n_out, dtype=bool))
        parts.append(np.zeros(n_out, dtype=bool))
    return np.concatenate(parts)


def init_params(shape: NetShape, seed: int) -> NetParams:
    """Uniform weights within the per-layer fan bound, zero biases."""
    rng = np.random.default_rng(seed)
    layers = []
    for n_in, n_out in zip(shape.layer_sizes[:-1], shape.layer_sizes[1:]):
        r = np.sqrt(6.0 / (n_in + n_out))
        w = rng.uniform(-r, r, size=(n_out, n_in))
        layers.append((w, np.zeros(n_out)))
    return NetParams(pack_params(layers), shape)


def _forward_activations(theta: np.ndarray, shape: NetShape, x_batch: np.ndarray):
    acts = [x_batch]
    for w, b in unpack_params(theta, shape):
        acts.append(sigmoid(acts[-1] @ w.T + b))
    return acts


def forward(params: NetParams, x) -> np.ndarray:
    """Network output for one feature vector; entries strictly inside (0, 1)."""
    x = np.asarray(getattr(x, "values", x), dtype=float)
    if x.size != params.shape.n_inputs:
        raise ValueError(
            f"input has {x.size} entries, network expects {params.shape.n_inputs}"
        )
    return _forward_activations(params.theta, params.shape, x[None, :])[-1][0]


def encode_hard(label: int, k_cells: int) -> OutputCode:
    """One-hot target with a single 1 at the best-cell index."""
    if not 0 <= label < k_cells:
        raise ValueError(f"label {label} outside [0, {k_cells})")
    probs = np.zeros(k_cells)
    probs[label] = 1.0
    return OutputCode(probs)


def encode_softmax(h_u) -> OutputCode:
    """Soft target: each entry is that cell's share of the total channel magnitude."""
    mags = np.abs(entries_of(h_u))
    total = mags.sum()
    if mags.size == 0 or total == 0:
        raise ValueError("cannot soft-encode an all-zero channel")
    return OutputCode(mags / total)


def _stack_batch(batch):
    xs = np.vstack([np.asarray(getattr(x, "values", x), dtype=float) for x, _ in batch])
    ts = np.vstack([np.asarray(getattr(t, "probs", t), dtype=float) for _, t in batch])
    return xs, ts


def cost_and_gradient(
    theta: np.ndarray,
    shape: NetShape,
    x_batch: np.ndarray,
    t_batch: np.ndarray,
    lam: float,
    reg_include_bias: bool = False,
):
    """Batch-averaged cross-entropy plus lam * sum(theta^2), with its exact gradient.

    Outputs are clamped to [LOG_EPS, 1 - LOG_EPS] inside the logs; where the
    clamp binds the local gradient is zero, so the gradient matches finite
    differences of this exact cost. Biases are left out of the regularizer
    unless reg_include_bias is set.
    """
    n = x_batch.shape[0]
    acts = _forward_activations(theta, shape, x_batch)
    y = acts[-1]
    y_clip = np.clip(y, LOG_EPS, 1.0 - LOG_EPS)
    ce = -(t_batch * np.log(y_clip) + (1.0 - t_batch) * np.log(1.0 - y_clip))
    reg_vec = theta if reg_include_bias else np.where(weight_mask(shape), theta, 0.0)
    total_cost = float(ce.sum() / n + lam * np.dot(reg_vec, reg_vec))

    inside = (y > LOG_EPS) & (y < 1.0 - LOG_EPS)
    delta = np.where(inside, y - t_batch, 0.0) / n
    layers = unpack_params(theta, shape)
    grads = [None] * len(layers)
    for li in range(len(layers) - 1, -1, -1):
        w, _ = layers[li]
        a_prev = acts[li]
        grads[li] = (delta.T @ a_prev, delta.sum(axis=0))
        if li > 0:
            delta = (delta @ w) * acts[li] * (1.0 - acts[li])
    grad = pack_params(grads)
    grad += 2.0 * lam * reg_vec
    return total_cost, grad


def cost(params: NetParams, batch, lam: float, reg_include_bias: bool = False) -> float:
    xs, ts = _stack_batch(batch)
    value, _ = cost_and_gradient(
        params.theta, params.shape, xs, ts, lam, reg_include_bias
    )
    return value


def gradient(
    params: NetParams, batch, lam: float, reg_include_bias: bool = False
) -> np.ndarray:
    xs, ts = _stack_batch(batch)
    _, grad = cost_and_gradient(params.theta, params.shape, xs, ts, lam, reg_include_bias)
    return grad


def predict_batch(params: NetParams, x_batch: np.ndarray) -> np.ndarray:
    y = _forward_activations(params.theta, params.shape, np.atleast_2d(x_batch))[-1]
    return np.argmax(y, axis=1)


def predict(params: NetParams, x) -> int:
    """Best-cell index: argmax of the output probabilities, ties to the lowest."""
    return int(np.argmax(forward(params, x)))


def save_params(params: NetParams, path) -> None:
    """Text format: 'layers: a,b,c' header, then one parameter per line."""
    with open(path, "w") as fh:
        fh.write("layers: " + ",".join(str(s) for s in params.shape.layer_sizes) + "\n")
        for value in params.theta:
            fh.write(f"{float(value)!r}\n")


def load_params(path) -> NetParams:
    with open(path) as fh:
        header = fh.readline().strip()
        if not header.startswith("layers:"):
            raise ValueError(f"bad model file {path}: missing 'layers:' header")
        sizes = tuple(int(s) for s in header.split(":", 1)[1].split(","))
        theta = np.array([float(line) for line in fh if line.strip()])
    return NetParams(theta, NetShape(sizes))
