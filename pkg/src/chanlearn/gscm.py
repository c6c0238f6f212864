"""Geometry-based stochastic channel model: line-of-sight plus single-bounce scattering.

All propagation targets (the macro array, each small cell) sit in a planar
layout restricted to the upper half-disc around the macro array. Channels are
narrowband far-field sums of complex path gains; the aggregate scattered field
of every user-to-target link is rescaled so the LoS-to-scattered power ratio
matches the configured Rician factor exactly.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

# Reject path lengths below this to avoid near-field singularities.
MIN_PATH_DISTANCE = 1e-9


@dataclass(frozen=True)
class GscmParams:
    """Propagation parameters. Noise is disabled by design."""

    rician_k_db: float = 10.0
    pathloss_exponent: float = 2.0
    reference_distance: float = 1.0

    def __post_init__(self):
        if not np.isfinite(self.rician_k_db):
            raise ValueError("rician_k_db must be finite")
        if self.pathloss_exponent < 0:
            raise ValueError("pathloss_exponent must be >= 0")
        if self.reference_distance <= 0:
            raise ValueError("reference_distance must be positive")

    @property
    def rician_k_linear(self) -> float:
        return 10.0 ** (self.rician_k_db / 10.0)


@dataclass
class Geometry:
    """Static layout of one simulation run.

    Scatterer reflection coefficients are frozen here together with the
    scatterer positions so that every channel is a deterministic function of
    the user location for a fixed geometry.
    """

    macro_array_origin: np.ndarray
    array_orientation: np.ndarray
    n_antennas: int
    antenna_spacing: float
    small_cell_positions: np.ndarray
    scatterer_positions: np.ndarray
    scatterer_gains: np.ndarray
    coverage_radius: float
    wavelength: float

    def __post_init__(self):
        self.macro_array_origin = np.asarray(self.macro_array_origin, dtype=float)
        self.array_orientation = np.asarray(self.array_orientation, dtype=float)
        self.small_cell_positions = np.atleast_2d(
            np.asarray(self.small_cell_positions, dtype=float)
        )
        self.scatterer_positions = np.asarray(
            self.scatterer_positions, dtype=float
        ).reshape(-1, 2)
        self.scatterer_gains = np.asarray(self.scatterer_gains, dtype=complex)
        if self.n_antennas < 1:
            raise ValueError("n_antennas must be >= 1")
        if abs(np.linalg.norm(self.array_orientation) - 1.0) > 1e-9:
            raise ValueError("array_orientation must be a unit vector")
        if abs(self.antenna_spacing - self.wavelength / 2.0) > 1e-12:
            raise ValueError("antenna_spacing must equal wavelength / 2")
        if len(self.scatterer_gains) != len(self.scatterer_positions):
            raise ValueError("one reflection coefficient per scatterer required")
        cells = self.small_cell_positions
        if len(cells) != len(np.unique(cells, axis=0)):
            raise ValueError("small_cell_positions must be pairwise distinct")
        for name, pts in (("small_cell", cells), ("scatterer", self.scatterer_positions)):
            if len(pts) == 0:
                continue
            rel = pts - self.macro_array_origin
            if np.any(np.linalg.norm(rel, axis=1) > self.coverage_radius * (1 + 1e-9)):
                raise ValueError(f"{name} positions must lie within the coverage radius")
            if np.any(rel[:, 1] < -1e-9):
                raise ValueError(f"{name} positions must lie in the upper half-disc")

    @property
    def n_cells(self) -> int:
        return len(self.small_cell_positions)


@dataclass
class ChannelVector:
    """Complex response from one user to a set of antennas."""

    entries: np.ndarray
    role: str = "observable"  # "observable" (macro array) or "unobservable" (cells)

    def __post_init__(self):
        self.entries = np.asarray(self.entries, dtype=complex)
        if self.entries.size == 0:
            raise ValueError("channel must have at least one entry")
        if not np.all(np.isfinite(self.entries)):
            raise ValueError("channel entries must be finite")


def entries_of(h) -> np.ndarray:
    """Accept a ChannelVector or a bare array of complex entries."""
    return np.asarray(getattr(h, "entries", h))


def sample_half_disc(rng: np.random.Generator, n: int, radius: float) -> np.ndarray:
    """n points uniform over the upper half-disc of given radius (area-uniform)."""
    r = radius * np.sqrt(rng.random(n))
    phi = np.pi * rng.random(n)
    return np.column_stack([r * np.cos(phi), r * np.sin(phi)])


def place_scatterers(rng_seed: int, n_scatterers: int, geometry: Geometry) -> np.ndarray:
    """Drop scatterers uniformly over the coverage half-disc, deterministic per seed."""
    if n_scatterers < 0:
        raise ValueError("n_scatterers must be >= 0")
    rng = np.random.default_rng(rng_seed)
    pts = sample_half_disc(rng, n_scatterers, geometry.coverage_radius)
    return pts + geometry.macro_array_origin


def draw_scatterer_gains(rng_seed: int, n_scatterers: int) -> np.ndarray:
    """Per-scatterer complex reflection coefficients with unit mean power."""
    rng = np.random.default_rng(rng_seed)
    g = rng.standard_normal(n_scatterers) + 1j * rng.standard_normal(n_scatterers)
    return g / np.sqrt(2.0)


def steering_vector(angle: float, n_antennas: int) -> ChannelVector:
    """Half-wavelength ULA response for an arrival angle measured from broadside."""
    if n_antennas < 1:
        raise ValueError("n_antennas must be >= 1")
    k = np.arange(n_antennas)
    return ChannelVector(np.exp(-1j * np.pi * k * np.sin(angle)))


def _steering_matrix(sin_angles: np.ndarray, n_antennas: int) -> np.ndarray:
    # rows: one steering vector per sin(angle)
    k = np.arange(n_antennas)
    return np.exp(-1j * np.pi * np.outer(sin_angles, k))


def _amplitude(dist: np.ndarray, params: GscmParams) -> np.ndarray:
    return (dist / params.reference_distance) ** (-params.pathloss_exponent / 2.0)


def _checked_distances(diff: np.ndarray) -> np.ndarray:
    d = np.linalg.norm(diff, axis=-1)
    if np.any(d < MIN_PATH_DISTANCE):
        raise ValueError("degenerate geometry: zero-length propagation path")
    return d


def _rician_rescale(los_power, scat_power, scat_field, k_linear):
    # Exact power-ratio constraint; skipped when there is no scattered field.
    scale = np.sqrt(los_power / (scat_power * k_linear))
    return scale * scat_field


def batch_array_channels(
    users: np.ndarray, geometry: Geometry, params: GscmParams
) -> np.ndarray:
    """Channels from each user (rows) to the macro array, shape (n_users, n_antennas)."""
    users = np.atleast_2d(np.asarray(users, dtype=float))
    origin = geometry.macro_array_origin
    lam = geometry.wavelength
    rel = users - origin
    d_los = _checked_distances(rel)
    sin_u = (rel @ geometry.array_orientation) / d_los
    los = (
        (_amplitude(d_los, params) * np.exp(-2j * np.pi * d_los / lam))[:, None]
        * _steering_matrix(sin_u, geometry.n_antennas)
    )
    scat = geometry.scatterer_positions
    if len(scat) == 0:
        return los
    d_us = _checked_distances(users[:, None, :] - scat[None, :, :])
    rel_s = scat - origin
    d_so = _checked_distances(rel_s)
    sin_s = (rel_s @ geometry.array_orientation) / d_so
    coeff = (
        _amplitude(d_us, params)
        * (_amplitude(d_so, params) * geometry.scatterer_gains)[None, :]
        * np.exp(-2j * np.pi * (d_us + d_so[None, :]) / lam)
    )
    scat_field = coeff @ _steering_matrix(sin_s, geometry.n_antennas)
    p_los = np.sum(np.abs(los) ** 2, axis=1)
    p_scat = np.sum(np.abs(scat_field) ** 2, axis=1)
    scat_field = _rician_rescale(
        p_los[:, None], p_scat[:, None], scat_field, params.rician_k_linear
    )
    return los + scat_field


def batch_cell_channels(
    users: np.ndarray, geometry: Geometry, params: GscmParams
) -> np.ndarray:
    """Scalar channels from each user to each small cell, shape (n_users, n_cells).

    Every (user, cell) pair is its own link: the single-antenna steering vector
    degenerates to a phase and the Rician constraint is enforced per entry.
    """
    users = np.atleast_2d(np.asarray(users, dtype=float))
    cells = geometry.small_cell_positions
    lam = geometry.wavelength
    d_uc = _checked_distances(users[:, None, :] - cells[None, :, :])
    los = _amplitude(d_uc, params) * np.exp(-2j * np.pi * d_uc / lam)
    scat = geometry.scatterer_positions
    if len(scat) == 0:
        return los
    d_us = _checked_distances(users[:, None, :] - scat[None, :, :])
    d_sc = _checked_distances(scat[:, None, :] - cells[None, :, :])
    user_leg = (
        _amplitude(d_us, params)
        * np.exp(-2j * np.pi * d_us / lam)
        * geometry.scatterer_gains[None, :]
    )
    cell_leg = _amplitude(d_sc, params) * np.exp(-2j * np.pi * d_sc / lam)
    scat_field = user_leg @ cell_leg
    scat_field = _rician_rescale(
        np.abs(los) ** 2, np.abs(scat_field) ** 2, scat_field, params.rician_k_linear
    )
    return los + scat_field


def channel_to_array(user, geometry: Geometry, params: GscmParams) -> ChannelVector:
    """Observable channel h from one user to the macro array."""
    h = batch_array_channels(np.asarray(user, dtype=float)[None, :], geometry, params)
    return ChannelVector(h[0], role="observable")


def channel_to_small_cells(user, geometry: Geometry, params: GscmParams) -> ChannelVector:
    """Unobservable channel from one user to every small cell."""
    h = batch_cell_channels(np.asarray(user, dtype=float)[None, :], geometry, params)
    return ChannelVector(h[0], role="unobservable")


def best_cell_label(h_u) -> int:
    """Index of the strongest cell; ties resolve to the lowest index."""
    mags = np.abs(entries_of(h_u))
    if mags.size == 0:
        raise ValueError("empty channel vector")
    return int(np.argmax(mags))


def antenna_positions(geometry: Geometry) -> np.ndarray:
    """Physical element positions (plot/export only; channels use the far field)."""
    k = np.arange(geometry.n_antennas) - (geometry.n_antennas - 1) / 2.0
    return (
        geometry.macro_array_origin
        + np.outer(k * geometry.antenna_spacing, geometry.array_orientation)
    )


def geometry_table(geometry: Geometry, users: np.ndarray | None = None) -> list[tuple]:
    """Rows (kind, x, y) describing the layout, for CSV export."""
    rows = []
    for p in antenna_positions(geometry):
        rows.append(("antenna", float(p[0]), float(p[1])))
    for p in geometry.small_cell_positions:
        rows.append(("small_cell", float(p[0]), float(p[1])))
    for p in geometry.scatterer_positions:
        rows.append(("scatterer", float(p[0]), float(p[1])))
    if users is not None:
        for p in np.atleast_2d(users):
            rows.append(("user", float(p[0]), float(p[1])))
    return rows
