import math

import numpy as np
import pytest

import umfband as ub
from umfband.bands import sweep_fibers
from umfband.dynamics import (
    _tau,
    a_weighted_norm,
    overlap,
    q2_apply,
    q2_mean,
    q2_norm,
    velocity_operator_data,
)
from umfband.errors import ValidationError


def grid_of(x_min, x_max, h):
    n = int(round((x_max - x_min) / h)) + 1
    return ub.Grid1D(x_min, x_max, n)


@pytest.fixture(scope="module")
def landau():
    grid = grid_of(-16, 16, 0.0125)
    field = ub.sample_field(ub.Constant(1.0), grid)
    return sweep_fibers(field, ub.KGrid(-2.0, 2.0, 161), 0, keep_vectors=True)


@pytest.fixture(scope="module")
def landau_multi():
    grid = grid_of(-16, 16, 0.0125)
    field = ub.sample_field(ub.Constant(1.0), grid)
    return sweep_fibers(field, ub.KGrid(-2.0, 2.0, 161), 3, keep_vectors=True)


@pytest.fixture(scope="module")
def snake():
    grid = grid_of(-20, 20, 0.02)
    field = ub.sample_field(ub.Step(-1.0, 1.0), grid)
    return sweep_fibers(field, ub.KGrid(-4.0, 4.0, 121), 8, keep_vectors=True)


class TestPreparePacket:
    def test_ground_band_profile_is_gaussian(self, landau):
        spec = ub.PacketSpec(k_center=0.2, sigma_k=0.2)
        p = ub.prepare_packet(landau, spec)
        assert p.capture == 1.0
        assert ub.packet_norm(p) == pytest.approx(1.0, abs=1e-12)
        k = landau.kgrid.values
        expected = np.exp(-((k - 0.2) ** 2) / (4 * 0.2**2))
        ratio = np.abs(p.coeffs[0]) / expected
        assert np.max(np.abs(ratio - ratio[80])) < 1e-9

    def test_x2_center_enters_as_phase(self, landau):
        # accuracy limited by the second-order k-derivative stencil
        p = ub.prepare_packet(landau, ub.PacketSpec(sigma_k=0.25, x2_center=5.0))
        assert q2_mean(p) == pytest.approx(5.0, abs=0.05)

    def test_multiband_capture_on_snake(self, snake):
        spec = ub.PacketSpec(k_center=0.0, sigma_k=0.5, profile="gaussian_x1",
                             x1_sigma=1.0)
        p = ub.prepare_packet(snake, spec)
        assert p.capture >= 0.999
        assert ub.packet_norm(p) == pytest.approx(1.0, abs=1e-12)

    def test_insufficient_bands_rejected(self):
        grid = grid_of(-20, 20, 0.02)
        field = ub.sample_field(ub.Step(-1.0, 1.0), grid)
        sw = sweep_fibers(field, ub.KGrid(-4.0, 4.0, 61), 0, keep_vectors=True)
        spec = ub.PacketSpec(k_center=0.0, sigma_k=0.5, profile="gaussian_x1",
                             x1_sigma=2.5)
        with pytest.raises(ValidationError, match="truncation"):
            ub.prepare_packet(sw, spec)

    def test_wide_packet_rejected_at_k_edges(self, landau):
        with pytest.raises(ValidationError, match="edges"):
            ub.prepare_packet(landau, ub.PacketSpec(sigma_k=2.0))

    def test_needs_eigenvectors(self):
        grid = grid_of(-12, 12, 0.02)
        field = ub.sample_field(ub.Constant(1.0), grid)
        sw = sweep_fibers(field, ub.KGrid(-1.0, 1.0, 41), 0)
        with pytest.raises(ValidationError):
            ub.prepare_packet(sw, ub.PacketSpec(sigma_k=0.2))


class TestEvolve:
    def test_t_zero_is_identity(self, landau):
        p = ub.prepare_packet(landau, ub.PacketSpec(sigma_k=0.25))
        assert np.array_equal(ub.evolve(p, 0.0).coeffs, p.coeffs)

    def test_norm_conserved_over_long_times(self, snake):
        p = ub.prepare_packet(snake, ub.PacketSpec(
            sigma_k=0.5, profile="gaussian_x1", x1_sigma=1.0))
        assert abs(ub.packet_norm(ub.evolve(p, 1000.0)) - 1.0) < 1e-10

    def test_energy_conserved(self, snake):
        p = ub.prepare_packet(snake, ub.PacketSpec(
            sigma_k=0.5, profile="gaussian_x1", x1_sigma=1.0))
        e0 = ub.energy_half_norm(p)
        et = ub.energy_half_norm(ub.evolve(p, 200.0))
        assert abs(et - e0) / e0 < 1e-10

    def test_landau_overlap_periodicity(self, landau):
        p = ub.prepare_packet(landau, ub.PacketSpec(sigma_k=0.25))
        period = 2 * math.pi
        for t in (3.0, 7.0, 11.5):
            o1 = abs(overlap(p, ub.evolve(p, t)))
            o2 = abs(overlap(p, ub.evolve(p, t + period)))
            assert abs(o1 - o2) < 1e-6


class TestQ1Moment:
    def test_landau_single_band_stationary(self, landau):
        p = ub.prepare_packet(landau, ub.PacketSpec(sigma_k=0.25))
        base = ub.q1_second_moment(p)
        for t in (5.0, 50.0, 200.0):
            assert abs(ub.q1_second_moment(ub.evolve(p, t)) - base) < 1e-6

    def test_localization_bound_holds_on_snake(self, snake):
        p = ub.prepare_packet(snake, ub.PacketSpec(
            sigma_k=0.5, profile="gaussian_x1", x1_sigma=1.0))
        bound = ub.localization_bound(p)
        sup_q1 = max(ub.q1_second_moment(ub.evolve(p, t))
                     for t in np.linspace(0.0, 200.0, 21))
        assert sup_q1 <= bound

    def test_a_weighted_norm_finite(self, snake):
        p = ub.prepare_packet(snake, ub.PacketSpec(
            sigma_k=0.5, profile="gaussian_x1", x1_sigma=1.0))
        assert 0.0 < a_weighted_norm(p) < 10.0


class TestVelocityOperators:
    def test_matrices_symmetric_with_sweep_diagonal(self, snake):
        vdata = velocity_operator_data(snake)
        assert np.max(np.abs(vdata.matrices - vdata.matrices.transpose(0, 2, 1))) < 1e-12
        diag = np.einsum("knn->nk", vdata.matrices)
        assert np.max(np.abs(diag - snake.velocities)) < 1e-10

    def test_landau_asymptotic_velocity_vanishes(self, landau_multi):
        p = ub.prepare_packet(landau_multi, ub.PacketSpec(sigma_k=0.25))
        assert ub.packet_norm(ub.asymptotic_velocity_apply(p)) <= 1e-8

    def test_kinetic_bound_for_prepared_packets(self, snake):
        for sigma in (0.1, 0.3, 0.5):
            p = ub.prepare_packet(snake, ub.PacketSpec(sigma_k=sigma))
            v = ub.packet_norm(ub.asymptotic_velocity_apply(p))
            assert v < math.sqrt(2.0) * ub.energy_half_norm(p)

    def test_snake_narrow_packet_speed(self, snake):
        p = ub.prepare_packet(snake, ub.PacketSpec(k_center=0.0, sigma_k=0.1))
        speed = ub.packet_norm(ub.asymptotic_velocity_apply(p))
        assert speed == pytest.approx(1.0 / math.sqrt(math.pi), rel=0.05)

    def test_single_band_time_average_equals_asymptotic(self, landau):
        p = ub.prepare_packet(landau, ub.PacketSpec(sigma_k=0.25))
        for t in (1.0, 37.0):
            avg = ub.time_averaged_velocity_apply(p, t)
            asym = ub.asymptotic_velocity_apply(p)
            assert np.max(np.abs(avg.coeffs - asym.coeffs)) < 1e-14

    def test_time_average_approaches_asymptotic(self, snake):
        p = ub.prepare_packet(snake, ub.PacketSpec(
            sigma_k=0.5, profile="gaussian_x1", x1_sigma=1.0))
        avg = ub.time_averaged_velocity_apply(p, 1e9)
        asym = ub.asymptotic_velocity_apply(p)
        diff = np.sqrt(np.sum(np.abs(avg.coeffs - asym.coeffs) ** 2) * p.dk)
        assert diff <= 1e-8

    def test_hard_diagonal_average_reproduces_asymptotic(self, snake, monkeypatch):
        import umfband.dynamics as dyn_module

        monkeypatch.setattr(dyn_module, "_tau",
                            lambda delta, t: (delta == 0.0).astype(complex))
        p = ub.prepare_packet(snake, ub.PacketSpec(
            sigma_k=0.5, profile="gaussian_x1", x1_sigma=1.0))
        avg = ub.time_averaged_velocity_apply(p, 5.0)
        asym = ub.asymptotic_velocity_apply(p)
        assert np.max(np.abs(avg.coeffs - asym.coeffs)) < 1e-8

    def test_time_average_bounded_by_kinetic_energy(self, snake):
        p = ub.prepare_packet(snake, ub.PacketSpec(
            sigma_k=0.5, profile="gaussian_x1", x1_sigma=1.0))
        limit = math.sqrt(2.0) * ub.energy_half_norm(p)
        for t in (1.0, 10.0, 100.0):
            avg = ub.time_averaged_velocity_apply(p, t)
            assert ub.packet_norm(avg) < limit

    def test_flat_band_components_annihilated(self, landau_multi):
        # packet spread over several flat bands still maps to (numerically) zero
        coeffs = np.zeros_like(np.empty((4, 161), dtype=complex))
        k = landau_multi.kgrid.values
        for n in range(4):
            coeffs[n] = np.exp(-(k**2) / (4 * 0.25**2)) / (n + 1)
        p = ub.FiberedWavePacket(landau_multi, coeffs, capture=1.0)
        assert ub.packet_norm(ub.asymptotic_velocity_apply(p)) <= 1e-8

    def test_tau_against_high_precision_reference(self):
        import mpmath as mp

        t = 10.0
        with mp.workdps(40):
            for delta in (1e-9, 1e-8, 9.9e-8, 1.01e-7, 1e-6, 1e-3, 0.3):
                z = mp.mpf(repr(t)) * mp.mpf(repr(delta))
                ref = complex((mp.e ** (1j * z) - 1) / (1j * z))
                mine = _tau(np.array([delta]), t)[0]
                # the full branch cancels to ~1e-11 just above the cutoff
                assert abs(mine - ref) < 5e-10
        assert _tau(np.array([0.0]), t)[0] == 1.0


class TestBallisticResidual:
    def test_single_band_identity(self, landau):
        p = ub.prepare_packet(landau, ub.PacketSpec(sigma_k=0.25))
        for t in (10.0, 80.0):
            assert ub.ballistic_residual(p, t) == pytest.approx(
                q2_norm(p) / t, abs=1e-14)

    def test_t_zero_rejected(self, landau):
        p = ub.prepare_packet(landau, ub.PacketSpec(sigma_k=0.25))
        with pytest.raises(ValidationError):
            ub.ballistic_residual(p, 0.0)
        with pytest.raises(ValidationError):
            ub.time_averaged_velocity_apply(p, 0.0)

    def test_residual_decays_on_tanh_field(self):
        grid = grid_of(-20, 20, 0.02)
        field = ub.sample_field(ub.Tanh(1.0, 3.0, 2.0), grid)
        sw = sweep_fibers(field, ub.KGrid(-6.0, 6.0, 121), 5, keep_vectors=True)
        p = ub.prepare_packet(sw, ub.PacketSpec(
            sigma_k=0.5, profile="gaussian_x1", x1_sigma=0.7))
        vdata = velocity_operator_data(sw)
        ladder = [ub.ballistic_residual(p, t, vdata) for t in (10.0, 20.0, 40.0, 80.0)]
        assert all(a > b for a, b in zip(ladder, ladder[1:]))

    def test_q2_apply_matches_phase_derivative(self, landau):
        p = ub.prepare_packet(landau, ub.PacketSpec(sigma_k=0.25, x2_center=2.0))
        # i d/dk of exp(-i k x2) contributes x2 * c up to the stencil error
        q2c = q2_apply(p)
        inner = np.sum(np.conj(p.coeffs) * q2c) * p.dk
        assert inner.real == pytest.approx(2.0, abs=0.01)


class TestSimulate:
    def test_series_columns_and_conservation(self, snake):
        p = ub.prepare_packet(snake, ub.PacketSpec(
            sigma_k=0.5, profile="gaussian_x1", x1_sigma=1.0))
        series = ub.simulate(p, horizon=100.0, n_times=16)
        assert len(series.times) == 16
        assert np.max(np.abs(series.norm - 1.0)) < 1e-10
        assert np.all(series.q1_moment > 0)
        assert np.all(np.isfinite(series.ballistic_residual))

    def test_landau_residual_decays(self, landau):
        p = ub.prepare_packet(landau, ub.PacketSpec(sigma_k=0.25))
        series = ub.simulate(p, horizon=200.0, n_times=16)
        assert series.ballistic_residual[-1] < series.ballistic_residual[0]
        # single band: q2 mean must stay put
        assert np.max(np.abs(series.q2_mean - series.q2_mean[0])) < 1e-9
