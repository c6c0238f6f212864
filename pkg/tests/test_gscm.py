"""Channel model tests: placement, steering, LoS/scatter composition, labeling."""

import numpy as np
import pytest

from chanlearn import gscm
from chanlearn.gscm import ChannelVector, Geometry, GscmParams


def make_geometry(n_antennas=16, n_scatterers=0, seed=5, radius=700.0, wavelength=0.15):
    g0 = Geometry(
        macro_array_origin=np.zeros(2),
        array_orientation=np.array([1.0, 0.0]),
        n_antennas=n_antennas,
        antenna_spacing=wavelength / 2,
        small_cell_positions=np.array(
            [[303.1, 175.0], [175.0, 303.1], [0.0, 350.0], [-175.0, 303.1], [-303.1, 175.0]]
        ),
        scatterer_positions=np.empty((0, 2)),
        scatterer_gains=np.empty(0, dtype=complex),
        coverage_radius=radius,
        wavelength=wavelength,
    )
    if n_scatterers == 0:
        return g0
    scat = gscm.place_scatterers(seed, n_scatterers, g0)
    gains = gscm.draw_scatterer_gains(seed + 1, n_scatterers)
    return Geometry(
        macro_array_origin=g0.macro_array_origin,
        array_orientation=g0.array_orientation,
        n_antennas=n_antennas,
        antenna_spacing=wavelength / 2,
        small_cell_positions=g0.small_cell_positions,
        scatterer_positions=scat,
        scatterer_gains=gains,
        coverage_radius=radius,
        wavelength=wavelength,
    )


PARAMS = GscmParams(rician_k_db=10.0, pathloss_exponent=2.0)


class TestPlaceScatterers:
    def test_zero_scatterers_empty(self):
        pts = gscm.place_scatterers(7, 0, make_geometry())
        assert pts.shape == (0, 2)

    def test_twenty_inside_upper_half_disc(self):
        pts = gscm.place_scatterers(7, 20, make_geometry())
        assert pts.shape == (20, 2)
        assert np.all(np.linalg.norm(pts, axis=1) <= 700.0)
        assert np.all(pts[:, 1] >= 0.0)

    def test_deterministic_per_seed(self):
        a = gscm.place_scatterers(7, 20, make_geometry())
        b = gscm.place_scatterers(7, 20, make_geometry())
        np.testing.assert_array_equal(a, b)

    def test_negative_count_rejected(self):
        with pytest.raises(ValueError):
            gscm.place_scatterers(7, -1, make_geometry())


class TestSteeringVector:
    def test_broadside_all_ones(self):
        sv = gscm.steering_vector(0.0, 4)
        np.testing.assert_allclose(sv.entries, np.ones(4))

    def test_norm_is_sqrt_n(self):
        for angle in (-1.2, -0.3, 0.0, 0.7, 1.5):
            sv = gscm.steering_vector(angle, 100)
            assert np.linalg.norm(sv.entries) == pytest.approx(10.0, abs=1e-12)

    def test_thirty_degrees_two_elements(self):
        sv = gscm.steering_vector(np.pi / 6, 2)
        np.testing.assert_allclose(sv.entries, [1.0, np.exp(-1j * np.pi / 2)], atol=1e-15)

    def test_unit_magnitude_entries(self):
        sv = gscm.steering_vector(0.42, 33)
        np.testing.assert_allclose(np.abs(sv.entries), 1.0, atol=1e-14)


class TestChannelToArray:
    def test_zero_scatterers_is_pure_los(self):
        geo = make_geometry(n_antennas=8)
        user = np.array([120.0, 250.0])
        h = gscm.channel_to_array(user, geo, PARAMS)
        # independent LoS construction
        d = np.linalg.norm(user)
        sin_u = user[0] / d
        expected = (
            (1.0 / d)
            * np.exp(-2j * np.pi * d / geo.wavelength)
            * np.exp(-1j * np.pi * np.arange(8) * sin_u)
        )
        np.testing.assert_allclose(h.entries, expected, rtol=1e-12)

    def test_rician_power_ratio_exact(self):
        geo = make_geometry(n_antennas=32, n_scatterers=20)
        user = np.array([-200.0, 340.0])
        h = gscm.channel_to_array(user, geo, PARAMS)
        geo_los = make_geometry(n_antennas=32)
        los = gscm.channel_to_array(user, geo_los, PARAMS).entries
        scattered = h.entries - los
        ratio = np.sum(np.abs(los) ** 2) / np.sum(np.abs(scattered) ** 2)
        assert ratio == pytest.approx(10.0, rel=1e-9)

    def test_distinct_users_distinct_channels(self):
        # brute-force pairs: empirical injectivity of the channel map
        geo = make_geometry(n_antennas=100, n_scatterers=20)
        rng = np.random.default_rng(11)
        users = gscm.sample_half_disc(rng, 200, 690.0) + [0.0, 0.5]
        h = gscm.batch_array_channels(users, geo, PARAMS)
        for i in range(100):
            d = np.linalg.norm(h[2 * i] - h[2 * i + 1])
            assert d > 0.0

    def test_single_user_matches_batch_row(self):
        geo = make_geometry(n_antennas=12, n_scatterers=7)
        users = np.array([[50.0, 90.0], [-310.0, 40.0]])
        batch = gscm.batch_array_channels(users, geo, PARAMS)
        one = gscm.channel_to_array(users[1], geo, PARAMS)
        np.testing.assert_allclose(one.entries, batch[1], rtol=1e-12)

    def test_user_at_origin_rejected(self):
        geo = make_geometry()
        with pytest.raises(ValueError):
            gscm.channel_to_array(np.zeros(2), geo, PARAMS)

    def test_user_on_scatterer_rejected(self):
        geo = make_geometry(n_scatterers=5)
        with pytest.raises(ValueError):
            gscm.channel_to_array(geo.scatterer_positions[2], geo, PARAMS)


class TestChannelToSmallCells:
    def test_los_only_magnitude_is_pathloss(self):
        geo = make_geometry()
        user = np.array([100.0, 150.0])
        h = gscm.channel_to_small_cells(user, geo, PARAMS)
        dists = np.linalg.norm(geo.small_cell_positions - user, axis=1)
        np.testing.assert_allclose(np.abs(h.entries), 1.0 / dists, rtol=1e-12)

    def test_length_matches_cell_count(self):
        geo = make_geometry(n_scatterers=4)
        h = gscm.channel_to_small_cells(np.array([10.0, 400.0]), geo, PARAMS)
        assert len(h.entries) == 5

    def test_nearer_user_has_larger_entry(self):
        # scatterer-free: |h_j| = a(d) which is strictly decreasing in d
        geo = make_geometry()
        cell = geo.small_cell_positions[2]
        near = cell + np.array([0.0, 5.0])
        far = cell + np.array([0.0, 180.0])
        h_near = gscm.channel_to_small_cells(near, geo, PARAMS)
        h_far = gscm.channel_to_small_cells(far, geo, PARAMS)
        assert np.abs(h_near.entries[2]) > np.abs(h_far.entries[2])

    def test_rician_ratio_exact_per_cell(self):
        geo = make_geometry(n_scatterers=12)
        user = np.array([250.0, 100.0])
        h = gscm.channel_to_small_cells(user, geo, PARAMS).entries
        los = gscm.channel_to_small_cells(user, make_geometry(), PARAMS).entries
        ratio = np.abs(los) ** 2 / np.abs(h - los) ** 2
        np.testing.assert_allclose(ratio, 10.0, rtol=1e-9)


class TestBestCellLabel:
    def test_argmax(self):
        assert gscm.best_cell_label(ChannelVector([1 + 0j, 3 + 0j, 2 + 0j])) == 1

    def test_tie_breaks_low(self):
        assert gscm.best_cell_label(ChannelVector([2 + 0j, 0 + 2j])) == 0

    def test_matches_exhaustive_scan(self):
        rng = np.random.default_rng(23)
        for _ in range(1000):
            v = rng.standard_normal(6) + 1j * rng.standard_normal(6)
            # independent oracle: explicit scan keeping the first maximum
            best, best_mag = 0, abs(v[0])
            for j in range(1, 6):
                if abs(v[j]) > best_mag:
                    best, best_mag = j, abs(v[j])
            assert gscm.best_cell_label(v) == best

    def test_invariant_under_positive_scaling(self):
        rng = np.random.default_rng(29)
        for _ in range(200):
            v = rng.standard_normal(5) + 1j * rng.standard_normal(5)
            c = rng.uniform(0.01, 100.0)
            assert gscm.best_cell_label(v) == gscm.best_cell_label(c * v)


class TestGeometry:
    def test_spacing_must_be_half_wavelength(self):
        with pytest.raises(ValueError):
            Geometry(
                macro_array_origin=np.zeros(2),
                array_orientation=np.array([1.0, 0.0]),
                n_antennas=4,
                antenna_spacing=0.1,
                small_cell_positions=np.array([[0.0, 10.0]]),
                scatterer_positions=np.empty((0, 2)),
                scatterer_gains=np.empty(0, dtype=complex),
                coverage_radius=700.0,
                wavelength=0.15,
            )

    def test_duplicate_cells_rejected(self):
        with pytest.raises(ValueError):
            Geometry(
                macro_array_origin=np.zeros(2),
                array_orientation=np.array([1.0, 0.0]),
                n_antennas=4,
                antenna_spacing=0.075,
                small_cell_positions=np.array([[0.0, 10.0], [0.0, 10.0]]),
                scatterer_positions=np.empty((0, 2)),
                scatterer_gains=np.empty(0, dtype=complex),
                coverage_radius=700.0,
                wavelength=0.15,
            )

    def test_geometry_table_kinds(self):
        geo = make_geometry(n_antennas=3, n_scatterers=2)
        rows = gscm.geometry_table(geo, users=np.array([[1.0, 2.0]]))
        kinds = [r[0] for r in rows]
        assert kinds.count("antenna") == 3
        assert kinds.count("small_cell") == 5
        assert kinds.count("scatterer") == 2
        assert kinds.count("user") == 1

    def test_scatterer_gains_unit_mean_power(self):
        g = gscm.draw_scatterer_gains(0, 200000)
        assert np.mean(np.abs(g) ** 2) == pytest.approx(1.0, rel=0.02)
