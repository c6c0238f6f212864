"""Feature pipeline: angular-domain magnitude, log compression, Lloyd quantization.

The learner input is the per-bin quantization index of the log angular
magnitude, normalized to [-1, 1]. One scalar codebook is trained on the pooled
log-magnitudes of the training split and then frozen.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .gscm import entries_of

DEFAULT_LOG_FLOOR = 1e-12


@dataclass(frozen=True)
class Codebook:
    """Scalar quantizer: sorted codepoints and midpoint decision boundaries."""

    levels: np.ndarray
    boundaries: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "levels", np.asarray(self.levels, dtype=float))
        object.__setattr__(self, "boundaries", np.asarray(self.boundaries, dtype=float))
        if self.levels.size < 2:
            raise ValueError("codebook needs at least two levels")
        if np.any(np.diff(self.levels) <= 0):
            raise ValueError("codepoints must be strictly increasing")
        mid = 0.5 * (self.levels[:-1] + self.levels[1:])
        if self.boundaries.shape != mid.shape or not np.allclose(
            self.boundaries, mid, rtol=0, atol=1e-9 * (1 + np.abs(mid).max())
        ):
            raise ValueError("boundaries must be midpoints of adjacent codepoints")

    @property
    def n_levels(self) -> int:
        return int(self.levels.size)


@dataclass
class FeatureVector:
    """Normalized quantization indices in [-1, 1], one per antenna bin."""

    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if np.any(self.values < -1) or np.any(self.values > 1):
            raise ValueError("feature values must lie in [-1, 1]")


def angular_magnitude(h_o) -> np.ndarray:
    """Magnitude of the unnormalized forward DFT of the array response."""
    h = entries_of(h_o)
    if h.size < 1:
        raise ValueError("empty channel")
    return np.abs(np.fft.fft(h))


def log_compress(mags, floor: float = DEFAULT_LOG_FLOOR) -> np.ndarray:
    """Elementwise log10 with a positive floor guarding zero bins."""
    if floor <= 0:
        raise ValueError("floor must be positive")
    return np.log10(np.maximum(np.asarray(mags, dtype=float), floor))


def _assign(values: np.ndarray, boundaries: np.ndarray) -> np.ndarray:
    # Boundary ties go to the lower cell.
    return np.searchsorted(boundaries, values, side="left")


def lloyd_train(
    samples,
    n_levels: int,
    max_iters: int = 200,
    tol: float = 1e-10,
    return_trace: bool = False,
):
    """Train a scalar quantizer by alternating centroid and boundary updates.

    Stops once the mean-squared quantization error improves by less than tol
    (or after max_iters). With return_trace=True also returns the per-iteration
    MSE sequence, which is non-increasing.
    """
    samples = np.asarray(samples, dtype=float).ravel()
    if n_levels < 2:
        raise ValueError("n_levels must be >= 2")
    distinct = np.unique(samples)
    if distinct.size < n_levels:
        raise ValueError(
            f"need at least {n_levels} distinct sample values, got {distinct.size}"
        )

    # Seed codepoints with evenly spaced distinct sample values: strictly
    # increasing by construction regardless of ties in the data.
    idx = np.linspace(0, distinct.size - 1, n_levels).round().astype(int)
    levels = distinct[np.unique(idx)]
    if levels.size < n_levels:  # rounding collisions on tiny inputs
        idx = np.floor(np.linspace(0, distinct.size - n_levels, n_levels)).astype(int)
        levels = distinct[idx + np.arange(n_levels)]

    trace = []
    prev_mse = np.inf
    for _ in range(max_iters):
        boundaries = 0.5 * (levels[:-1] + levels[1:])
        cells = _assign(samples, boundaries)
        sums = np.bincount(cells, weights=samples, minlength=n_levels)
        counts = np.bincount(cells, minlength=n_levels)
        occupied = counts > 0
        new_levels = levels.copy()  # empty cells keep their codepoint
        new_levels[occupied] = sums[occupied] / counts[occupied]
        levels = new_levels
        mse = float(np.mean((samples - levels[cells]) ** 2))
        trace.append(mse)
        if prev_mse - mse < tol:
            break
        prev_mse = mse

    codebook = Codebook(levels=levels, boundaries=0.5 * (levels[:-1] + levels[1:]))
    if return_trace:
        return codebook, trace
    return codebook


def quantize_normalize(values, codebook: Codebook) -> FeatureVector:
    """Map each value to its nearest codepoint index, rescaled onto [-1, 1]."""
    cells = _assign(np.asarray(values, dtype=float), codebook.boundaries)
    grid = -1.0 + 2.0 * cells / (codebook.n_levels - 1)
    return FeatureVector(grid)


def make_feature(
    h_o, codebook: Codebook, floor: float = DEFAULT_LOG_FLOOR
) -> FeatureVector:
    """Full pipeline: DFT magnitude -> log10 -> quantize -> normalized index."""
    return quantize_normalize(log_compress(angular_magnitude(h_o), floor), codebook)


def codebook_rows(codebook: Codebook) -> list[tuple]:
    """Rows (level_index, codepoint, upper_boundary) for CSV export."""
    uppers = list(codebook.boundaries) + [np.inf]
    return [
        (k, float(codebook.levels[k]), float(uppers[k]))
        for k in range(codebook.n_levels)
    ]


def codebook_from_rows(rows) -> Codebook:
    levels = np.array([float(r[1]) for r in sorted(rows, key=lambda r: int(r[0]))])
    return Codebook(levels=levels, boundaries=0.5 * (levels[:-1] + levels[1:]))
