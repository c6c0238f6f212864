"""Comparison algorithms: random selection, channel-space KNN, and a location net.

The location net (NN-LO) reuses the exact training machinery of the channel
feature net; only the input encoding differs (true 2-D locations scaled by the
coverage radius onto [-1, 1]).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import optim
from .gscm import entries_of
from .neuralnet import NetParams, NetShape, predict_batch


@dataclass
class KnnModel:
    """Stored channel points as stacked [Re; Im] real vectors plus labels."""

    points: np.ndarray
    labels: np.ndarray
    k: int

    def __post_init__(self):
        self.points = np.atleast_2d(np.asarray(self.points, dtype=float))
        self.labels = np.asarray(self.labels, dtype=int)
        if self.k < 1 or self.k > len(self.points):
            raise ValueError("k must be in [1, number of stored points]")
        if len(self.labels) != len(self.points):
            raise ValueError("one label per stored point required")


def stack_channel(h) -> np.ndarray:
    """Complex channel -> real vector [Re parts; Im parts]."""
    e = entries_of(h)
    return np.concatenate([e.real, e.imag])


def build_knn(channels, labels, k: int) -> KnnModel:
    points = np.vstack([stack_channel(h) for h in channels])
    return KnnModel(points=points, labels=np.asarray(labels, dtype=int), k=k)


def _vote(neighbor_labels: np.ndarray) -> int:
    counts = np.bincount(neighbor_labels)
    return int(np.argmax(counts))  # vote ties resolve to the lowest label


def knn_predict(model: KnnModel, query) -> int:
    """Majority label among the k Euclidean-nearest stored points.

    Distance ties keep insertion order (stable sort); vote ties go to the
    lowest label.
    """
    query = np.asarray(query, dtype=float)
    if query.size != model.points.shape[1]:
        raise ValueError(
            f"query has {query.size} entries, stored points have {model.points.shape[1]}"
        )
    dists = np.linalg.norm(model.points - query, axis=1)
    nearest = np.argsort(dists, kind="stable")[: model.k]
    return _vote(model.labels[nearest])


def knn_predict_batch(model: KnnModel, queries: np.ndarray) -> np.ndarray:
    queries = np.atleast_2d(np.asarray(queries, dtype=float))
    # (q - p)^2 = q^2 + p^2 - 2 q.p, one matmul for all queries
    d2 = (
        np.sum(queries**2, axis=1)[:, None]
        + np.sum(model.points**2, axis=1)[None, :]
        - 2.0 * queries @ model.points.T
    )
    order = np.argsort(d2, axis=1, kind="stable")[:, : model.k]
    return np.array([_vote(model.labels[row]) for row in order])


def rs_predict(rng_seed, k_cells: int) -> int:
    """Uniform random cell index. Pass a Generator to draw from one seed stream."""
    if k_cells < 1:
        raise ValueError("k_cells must be >= 1")
    rng = (
        rng_seed
        if isinstance(rng_seed, np.random.Generator)
        else np.random.default_rng(rng_seed)
    )
    return int(rng.integers(k_cells))


def normalize_locations(locations: np.ndarray, coverage_radius: float) -> np.ndarray:
    """Scale 2-D positions by the coverage radius onto [-1, 1] x [-1, 1]."""
    return np.atleast_2d(np.asarray(locations, dtype=float)) / coverage_radius


def nnlo_train(
    locations,
    labels,
    coverage_radius: float,
    k_cells: int,
    hidden_units: int = 50,
    lam: float = 0.0,
    opts=None,
    seed: int = 0,
    reg_include_bias: bool = False,
):
    """Train the location-input network; same code path as the channel net."""
    x = normalize_locations(locations, coverage_radius)
    shape = NetShape((2, hidden_units, k_cells))
    return optim.train_on_arrays(
        x, labels, shape, lam, opts, seed, reg_include_bias
    )


def nnlo_predict(params: NetParams, locations, coverage_radius: float) -> np.ndarray:
    x = normalize_locations(locations, coverage_radius)
    return predict_batch(params, x)
