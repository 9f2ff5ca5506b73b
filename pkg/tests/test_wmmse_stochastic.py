import math

import numpy as np
import pytest

from ssumkit.core import RngStream, check_tightness
from ssumkit.errors import DimensionMismatch
from ssumkit.models.network import (
    AuxVars,
    BeamformerState,
    CsiParams,
    NetworkConfig,
)
from ssumkit.services.wmmse import (
    WMMSESurrogateModel,
    accumulate,
    aggregate_value,
    big_g1,
    build_channel_model,
    cell_powers,
    deterministic_wmmse,
    random_precoders,
    sample_channels,
    stochastic_wmmse,
    sum_rate,
    surrogate_p_update,
    v_update,
)


def neutral_aux(network):
    """U = 0, W = I, Z = 0 for every user."""
    U, W, Z = [], [], []
    for u in range(network.n_users):
        M, d = network.precoder_shape(u)
        U.append(np.zeros((network.rx_antennas[u], d), dtype=complex))
        W.append(np.eye(d, dtype=complex))
        Z.append(np.zeros((M, d), dtype=complex))
    return AuxVars(W=W, U=U, Z=Z)


def accumulated(network, channel_model, n, seed=0):
    """State after n surrogates anchored at random precoders, plus the pieces."""
    stream = RngStream(seed)
    state = BeamformerState.initial(
        network, random_precoders(network, stream.generator())
    )
    pieces = []
    for i in range(n):
        child = stream.child(i).generator()
        H = sample_channels(channel_model, child)
        V_bar = random_precoders(network, child)
        P = surrogate_p_update(V_bar, H, network.noise)
        state = accumulate(state, P, H, network)
        pieces.append((P, H))
    return state, pieces


class TestAccumulate:
    def test_neutral_surrogate_adds_rho_identity(self, small_network, gen):
        state = BeamformerState.initial(
            small_network, random_precoders(small_network, gen)
        )
        H = sample_channels(
            build_channel_model(small_network, RngStream(1).generator()), gen
        )
        new = accumulate(state, neutral_aux(small_network), H, small_network)
        assert new.r == 1
        for A in new.A:
            np.testing.assert_allclose(A, small_network.rho * np.eye(A.shape[0]))
        for B in new.B:
            assert not np.any(B)
        assert state.r == 0

    def test_curvature_grows_with_r(self, small_network, small_channel_model):
        state, _ = accumulated(small_network, small_channel_model, 6)
        floor = state.r * small_network.rho
        for A in state.A:
            assert np.min(np.linalg.eigvalsh(A)) >= floor * (1.0 - 1e-9)

    def test_cell_users_share_a_matrix(self, small_network, small_channel_model):
        state, _ = accumulated(small_network, small_channel_model, 2)
        first, second = small_network.users_of(1)
        assert state.A_user(first) is state.A_user(second)

    def test_mismatched_aux_raises(self, small_network, small_channel_model, gen):
        state, _ = accumulated(small_network, small_channel_model, 1)
        H = sample_channels(small_channel_model, gen)
        aux = neutral_aux(small_network)
        aux.W = aux.W[:-1]
        with pytest.raises(DimensionMismatch):
            accumulate(state, aux, H, small_network)


class TestVUpdate:
    def test_scalar_active_budget(self, scalar_network):
        state = BeamformerState(
            V=[np.ones((1, 1), dtype=complex)],
            A=[np.array([[1.0 + 0j]])],
            B=[np.array([[2.0 + 0j]])],
            user_cell=(0,),
            r=1,
        )
        V, mus = v_update(state, scalar_network)
        assert mus[0] == pytest.approx(1.0, abs=1e-7)
        assert abs(V[0][0, 0]) == pytest.approx(1.0, abs=1e-7)

    def test_zero_statistics_give_zero_precoders(self, small_network):
        state = BeamformerState.initial(
            small_network, random_precoders(small_network, RngStream(0).generator())
        )
        state.A = [small_network.rho * np.eye(A.shape[0]) for A in state.A]
        state.r = 1
        V, mus = v_update(state, small_network)
        assert mus == [0.0, 0.0]
        assert all(not np.any(Vu) for Vu in V)

    def test_needs_a_sample(self, small_network):
        state = BeamformerState.initial(
            small_network, random_precoders(small_network, RngStream(0).generator())
        )
        with pytest.raises(ValueError):
            v_update(state, small_network)

    def test_first_order_conditions(self, small_network, small_channel_model):
        state, _ = accumulated(small_network, small_channel_model, 5)
        V, mus = v_update(state, small_network)
        for k in range(small_network.n_cells):
            users = small_network.users_of(k)
            Vk = np.hstack([V[u] for u in users])
            Bk = np.hstack([state.B[u] for u in users])
            M = state.A[k].shape[0]
            residual = (state.A[k] + mus[k] * np.eye(M)) @ Vk - Bk
            assert np.linalg.norm(residual) <= 1e-9 * (1.0 + np.linalg.norm(Bk))
        powers = cell_powers(V, small_network)
        for power, budget in zip(powers, small_network.power):
            assert power <= budget * (1.0 + 1e-8)

    def test_minimizer_beats_feasible_points(self, small_network, small_channel_model):
        state, _ = accumulated(small_network, small_channel_model, 5)
        V, _ = v_update(state, small_network)
        best = aggregate_value(state, V)
        for seed in range(10):
            other = random_precoders(small_network, RngStream(50 + seed).generator())
            assert best <= aggregate_value(state, other) + 1e-9


class TestAggregate:
    def test_matches_the_mean_of_surrogates(self, small_network, small_channel_model):
        state, pieces = accumulated(small_network, small_channel_model, 4)
        V = random_precoders(small_network, RngStream(77).generator())
        direct = math.fsum(
            big_g1(V, P, H, small_network.noise, small_network.rho)
            for P, H in pieces
        ) / len(pieces)
        assert aggregate_value(state, V) == pytest.approx(direct, rel=1e-9, abs=1e-9)


class TestSurrogateModel:
    def test_tight_upper_bound(self, small_network, small_channel_model):
        model = WMMSESurrogateModel(
            small_network, random_precoders(small_network, RngStream(0).generator())
        )
        for seed in range(10):
            gen = RngStream(seed).child(1).generator()
            x = random_precoders(small_network, gen)
            y = random_precoders(small_network, gen)
            xi = sample_channels(small_channel_model, gen)
            assert check_tightness(model, x, y, xi, tol=1e-9).ok

    def test_gradient_matches_finite_differences(self, small_network, gen):
        channel_model = build_channel_model(small_network, RngStream(4).generator())
        model = WMMSESurrogateModel(
            small_network, random_precoders(small_network, gen)
        )
        V = random_precoders(small_network, gen)
        H = sample_channels(channel_model, gen)
        analytic = model.grad_g1(V, H)
        numeric = super(WMMSESurrogateModel, model).grad_g1(V, H)
        np.testing.assert_allclose(analytic, numeric, rtol=1e-5, atol=1e-6)


class TestStochasticWMMSE:
    def test_same_seed_same_run(self, small_network, small_channel_model):
        V0 = random_precoders(small_network, RngStream(1).generator())

        def run():
            return stochastic_wmmse(small_network, small_channel_model, V0, 20, rng=5)

        a, b = run(), run()
        assert a.step_norms == b.step_norms
        for Va, Vb in zip(a.final, b.final):
            np.testing.assert_array_equal(Va, Vb)

    def test_iterates_respect_the_budgets(self, small_network, small_channel_model):
        V0 = random_precoders(small_network, RngStream(1).generator())
        excess = []

        def check(r, V):
            for used, budget in zip(cell_powers(V, small_network), small_network.power):
                excess.append(used / budget - 1.0)

        stochastic_wmmse(
            small_network, small_channel_model, V0, 30, rng=2, callback=check
        )
        assert max(excess) <= 1e-6

    def test_siso_point_mass_reaches_capacity(self):
        csi = CsiParams(eta_db=1000.0, gamma_csi=math.inf)
        network = NetworkConfig.uniform(
            1, tx_antennas=1, rx_antennas=1, power=2.0, csi=csi
        )
        model = build_channel_model(
            network, RngStream(3).generator(), path_loss=np.ones((1, 1))
        )
        h = model.estimates[0][0][0, 0]
        V0 = random_precoders(network, RngStream(4).generator())
        trace = stochastic_wmmse(network, model, V0, 30, rng=6, keep_iterates=True)
        H = sample_channels(model, RngStream(0).generator())
        capacity = math.log1p(abs(h) ** 2 * 2.0)
        for V in trace.iterates:
            assert sum_rate(V, H, network.noise) == pytest.approx(capacity, rel=1e-6)

    def test_multi_user_point_mass_matches_deterministic_wmmse(self):
        csi = CsiParams(eta_db=1000.0, gamma_csi=math.inf)
        network = NetworkConfig.uniform(
            2, users_per_cell=1, streams=1, power=10.0, csi=csi
        )
        path_loss = np.array([[1.0, 0.1], [0.1, 1.0]])
        model = build_channel_model(
            network, RngStream(11).generator(), path_loss=path_loss
        )
        H = sample_channels(model, RngStream(0).generator())
        V0 = random_precoders(network, RngStream(12).generator())

        trace = stochastic_wmmse(network, model, V0, 400, rng=13)
        fixed_point = deterministic_wmmse(H, network, V0, n_iter=200)

        assert sum_rate(trace.final, H, network.noise) == pytest.approx(
            fixed_point.sum_rates[-1], rel=5e-3
        )
        assert fixed_point.sum_rates[-1] > fixed_point.sum_rates[0]
