import math

import numpy as np
import pytest

from ssumkit.core import RngStream
from ssumkit.errors import DimensionMismatch
from ssumkit.models.network import (
    CsiParams,
    MeanChannelVariant,
    NetworkConfig,
)
from ssumkit.services.wmmse import (
    build_channel_model,
    cell_powers,
    mean_channels,
    random_precoders,
    sample_channels,
)
from ssumkit.services.wmmse.channels import (
    estimated_links,
    hex_axial_spiral,
    hex_cell_centers,
    path_loss_matrix,
    wrap_shifts,
)


class TestGeometry:
    def test_spiral_starts_at_the_centre(self):
        cells = hex_axial_spiral(19)
        assert cells[0] == (0, 0)
        assert len(set(cells)) == 19

    def test_first_ring_is_at_unit_distance(self):
        centers = hex_cell_centers(7)
        np.testing.assert_allclose(np.linalg.norm(centers[1:], axis=1), 1.0)

    def test_wrap_shifts(self):
        np.testing.assert_array_equal(wrap_shifts(1), np.zeros((1, 2)))
        shifts = wrap_shifts(7)
        assert shifts.shape == (7, 2)
        np.testing.assert_allclose(np.linalg.norm(shifts[1:], axis=1), math.sqrt(7))

    def test_median_direct_snr_matches_the_configuration(self, desk_network):
        gains = path_loss_matrix(desk_network, RngStream(3).generator())
        direct = [gains[u, k] for u, k in enumerate(desk_network.user_cell)]
        assert np.median(direct) == pytest.approx(desk_network.csi.snr_linear)
        assert np.all(gains > 0)


class TestEstimatedLinks:
    def test_only_direct_links_at_minus_infinity(self):
        path_loss = np.array([[1.0, 0.9], [0.9, 1.0]])
        mask = estimated_links(path_loss, (0, 1), -math.inf)
        np.testing.assert_array_equal(mask, np.eye(2, dtype=bool))

    def test_threshold(self):
        path_loss = np.array([[1.0, 0.5, 0.1]])
        mask = estimated_links(path_loss, (0,), 6.0)
        np.testing.assert_array_equal(mask, [[True, True, False]])


class TestChannelModel:
    def test_explicit_path_loss_shape_is_checked(self, desk_network):
        with pytest.raises(DimensionMismatch):
            build_channel_model(
                desk_network, RngStream(0).generator(), path_loss=np.ones((2, 2))
            )

    def test_perfect_csi_draws_equal_the_estimates(self, point_mass_model):
        H = sample_channels(point_mass_model, RngStream(1).generator())
        for u in range(H.n_users):
            for j in range(H.n_tx):
                expected = point_mass_model.estimates[u][j]
                np.testing.assert_array_equal(H[u, j], expected)

    def test_unestimated_link_variance(self):
        network = NetworkConfig.uniform(2, csi=CsiParams(eta_db=-math.inf))
        path_loss = np.array([[1.0, 0.25], [0.25, 1.0]])
        model = build_channel_model(network, RngStream(2).generator(), path_loss)
        assert not model.estimated[0, 1]
        gen = RngStream(3).generator()
        power = np.mean(
            [np.abs(sample_channels(model, gen)[0, 1]) ** 2 for _ in range(20_000)]
        )
        assert power == pytest.approx(0.25, rel=0.02)

    def test_estimation_error_variance(self):
        network = NetworkConfig.uniform(1, csi=CsiParams(snr_db=0.0, gamma_csi=1.0))
        model = build_channel_model(network, RngStream(2).generator(), np.ones((1, 1)))
        assert model.error_fraction == pytest.approx(0.5)
        gen = RngStream(4).generator()
        errors = [
            sample_channels(model, gen)[0, 0] - model.estimates[0][0]
            for _ in range(20_000)
        ]
        assert np.mean(np.abs(errors) ** 2) == pytest.approx(0.5, rel=0.02)

    def test_mean_channel_variants(self):
        network = NetworkConfig.uniform(2, csi=CsiParams(eta_db=-math.inf))
        path_loss = np.array([[1.0, 0.25], [0.25, 1.0]])
        model = build_channel_model(network, RngStream(2).generator(), path_loss)
        strict = mean_channels(model, MeanChannelVariant.STRICT)
        magnitude = mean_channels(model, MeanChannelVariant.PATH_LOSS)
        np.testing.assert_array_equal(strict[0, 1], np.zeros((2, 2)))
        np.testing.assert_allclose(magnitude[0, 1], 0.5 * np.ones((2, 2)))
        np.testing.assert_array_equal(strict[0, 0], model.estimates[0][0])

    def test_same_seed_same_channels(self, small_channel_model):
        a = sample_channels(small_channel_model, RngStream(6).generator())
        b = sample_channels(small_channel_model, RngStream(6).generator())
        for u in range(a.n_users):
            for j in range(a.n_tx):
                np.testing.assert_array_equal(a[u, j], b[u, j])


class TestPrecoders:
    def test_random_precoders_use_full_power(self, small_network):
        V = random_precoders(small_network, RngStream(9).generator())
        np.testing.assert_allclose(cell_powers(V, small_network), small_network.power)
        for u, Vu in enumerate(V):
            assert Vu.shape == small_network.precoder_shape(u)
