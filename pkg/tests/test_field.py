import json

import numpy as np
import pytest

import umfband as ub
from umfband.errors import ValidationError
from umfband.field import (
    metric_tail_bound,
    read_field_csv,
    spec_from_dict,
    spec_to_dict,
    write_field_csv,
)
from umfband.sampling import poisson_points_for


def grid_of(x_min, x_max, h):
    n = int(round((x_max - x_min) / h)) + 1
    return ub.Grid1D(x_min, x_max, n)


class TestGrid:
    def test_basic_properties(self):
        g = ub.Grid1D(-2.0, 2.0, 5)
        assert g.h == 1.0
        assert np.array_equal(g.points, [-2, -1, 0, 1, 2])
        assert g.index_of(1.0) == 3

    def test_invalid_grids(self):
        with pytest.raises(ValidationError):
            ub.Grid1D(2.0, -2.0, 5)
        with pytest.raises(ValidationError):
            ub.Grid1D(-1.0, 1.0, 2)
        with pytest.raises(ValidationError):
            ub.Grid1D(1.0, 3.0, 5)  # anchor x = 0 outside the box

    def test_off_lattice_point_rejected(self):
        g = ub.Grid1D(-2.0, 2.0, 5)
        with pytest.raises(ValidationError):
            g.index_of(0.25)


class TestVectorPotential:
    def test_constant_field_is_exact(self):
        g = grid_of(-10, 10, 0.01)
        f = ub.sample_field(ub.Constant(2.0), g)
        a = ub.vector_potential(f)
        assert np.max(np.abs(a.values - 2.0 * g.points)) < 1e-12

    def test_step_field_one_cell_error(self):
        g = grid_of(-10, 10, 0.01)
        f = ub.sample_field(ub.Step(-1.0, 1.0), g)
        a = ub.vector_potential(f)
        assert np.max(np.abs(a.values - np.abs(g.points))) <= g.h + 1e-12

    def test_anchor_at_zero(self):
        g = grid_of(-3, 5, 0.1)
        f = ub.sample_field(ub.Tanh(1.0, 2.0, 1.0), g)
        a = ub.vector_potential(f)
        assert a.values[g.index_of(0.0)] == 0.0

    def test_linearity(self):
        g = grid_of(-5, 5, 0.05)
        b1 = ub.sample_field(ub.Poisson(1.0, ub.BumpProfile(1.0, 0.5)), g, seed=1)
        b2 = ub.sample_field(ub.Tanh(1.0, 3.0, 2.0), g)
        mix = ub.FieldRealization(g, 0.3 * b1.values + 1.7 * b2.values, "mix")
        a_mix = ub.vector_potential(mix).values
        a_lin = 0.3 * ub.vector_potential(b1).values + 1.7 * ub.vector_potential(b2).values
        assert np.max(np.abs(a_mix - a_lin)) < 1e-12

    def test_against_richardson_refined_quadrature(self):
        # smooth raised-cosine impurity profile, so the trapezoid rule is O(h^2)
        offs = np.linspace(-1.0, 1.0, 801)
        prof = ub.TabulatedProfile(offs, 0.5 * (1.0 + np.cos(np.pi * offs)))
        spec = ub.Poisson(1.5, prof)
        h = 0.05
        g = grid_of(-8, 8, h)
        f = ub.sample_field(spec, g, seed=9)
        a = ub.vector_potential(f).values

        pts = poisson_points_for(spec, g, seed=9)

        def exact_field(x):
            return sum(prof.at(x - p) for p in pts)

        def cumtrapz_at(step):
            gg = grid_of(-8, 8, step)
            b = exact_field(gg.points)
            out = np.concatenate([[0.0], np.cumsum(0.5 * step * (b[1:] + b[:-1]))])
            return out - out[gg.index_of(0.0)]

        fine = cumtrapz_at(h / 2)
        finer = cumtrapz_at(h / 4)
        oracle = (4.0 * finer[::2] - fine) / 3.0      # Richardson to O(h^4)
        dev = np.max(np.abs(a - oracle[::2]))
        assert dev < 2.0 * h**2


class TestSpatialMean:
    def test_constant(self):
        g = grid_of(-7, 7, 0.1)
        f = ub.sample_field(ub.Constant(3.5), g)
        assert ub.spatial_mean(f) == pytest.approx(3.5, abs=1e-13)

    def test_step_antisymmetric(self):
        g = grid_of(-10, 10, 0.01)
        f = ub.sample_field(ub.Step(-1.0, 1.0), g)
        assert abs(ub.spatial_mean(f)) <= 2 * g.h / g.span

    def test_gaussian_ergodic_window(self):
        spec = ub.Gaussian(2.0, ub.GaussianKernel(1.0, 1.0))
        g = grid_of(-1000, 1000, 1.0)
        f = ub.sample_field(spec, g, seed=4)
        assert ub.spatial_mean(f) == pytest.approx(2.0, rel=0.05)

    def test_growth_rate_snake_vs_mean(self):
        # zero spatial mean but unit growth of |a|
        g = grid_of(-10, 10, 0.01)
        f = ub.sample_field(ub.Step(-1.0, 1.0), g)
        assert abs(ub.spatial_mean(f)) < 0.01
        rate = ub.growth_rate(ub.vector_potential(f))
        assert rate == pytest.approx(1.0, abs=2 * g.h)


class TestFieldMetric:
    def test_identity(self):
        g = grid_of(-4, 4, 0.05)
        f = ub.sample_field(ub.Tanh(1.0, 3.0, 2.0), g)
        assert ub.field_metric(f, f) == 0.0

    def test_saturated_geometric_series(self):
        J = 8
        g = grid_of(-J, J + 1, 0.125)
        ones = ub.FieldRealization(g, np.ones(g.n_points), "one")
        zero = ub.FieldRealization(g, np.zeros(g.n_points), "zero")
        expected = 3.0 - 2.0 ** (-(J - 1))   # cells -J .. J present
        assert ub.field_metric(ones, zero) == pytest.approx(expected, abs=1e-12)
        assert metric_tail_bound(g) == pytest.approx(2.0 ** (-(J - 1)), abs=1e-12)

    def test_local_difference_weighting(self):
        g = grid_of(-8, 8, 0.125)
        base = ub.sample_field(ub.Gaussian(1.0, ub.GaussianKernel(0.25, 1.0)), g, seed=2)
        bump = np.zeros(g.n_points)
        x = g.points
        inside = (x >= 5.0) & (x <= 6.0)
        # triangle of height 0.5 on [5, 6]: trapezoid integral exactly 0.25
        bump[inside] = 0.5 * (1.0 - np.abs((x[inside] - 5.5) / 0.5))
        other = ub.FieldRealization(g, base.values + bump, "bumped")
        d = ub.field_metric(base, other)
        assert d == pytest.approx(2.0 ** -5 * 0.25, abs=1e-12)

    def test_symmetry_and_triangle_inequality(self):
        g = grid_of(-6, 6, 0.1)
        spec = ub.Gaussian(1.0, ub.GaussianKernel(1.0, 0.5))
        fields = [ub.sample_field(spec, g, seed=s) for s in range(6)]
        for i, fa in enumerate(fields):
            for j, fc in enumerate(fields):
                assert ub.field_metric(fa, fc) == pytest.approx(
                    ub.field_metric(fc, fa), abs=1e-14)
                for fm in fields:
                    assert (ub.field_metric(fa, fc)
                            <= ub.field_metric(fa, fm) + ub.field_metric(fm, fc) + 1e-12)

    def test_mismatched_grids_rejected(self):
        fa = ub.sample_field(ub.Constant(1.0), grid_of(-4, 4, 0.1))
        fb = ub.sample_field(ub.Constant(1.0), grid_of(-4, 4, 0.05))
        with pytest.raises(ValidationError):
            ub.field_metric(fa, fb)


class TestShiftField:
    def test_zero_shift_identity(self):
        g = grid_of(-5, 5, 0.1)
        f = ub.sample_field(ub.Poisson(1.0, ub.BumpProfile(1.0, 0.5)), g, seed=3)
        shifted = ub.shift_field(f, 0.0)
        assert shifted.grid == f.grid
        assert np.array_equal(shifted.values, f.values)

    def test_constant_field_shift(self):
        g = grid_of(-5, 5, 0.1)
        f = ub.sample_field(ub.Constant(2.0), g)
        shifted = ub.shift_field(f, 1.5)
        assert np.all(shifted.values == 2.0)
        assert shifted.grid.x_max == pytest.approx(3.5)

    def test_step_shift_matches_pointwise_oracle(self):
        g = grid_of(-6, 6, 0.1)
        f = ub.sample_field(ub.Step(-1.0, 1.0), g)
        shifted = ub.shift_field(f, 1.0)
        x = shifted.grid.points
        oracle = np.where(x + 1.0 < 0.0, -1.0, 1.0)
        assert np.array_equal(shifted.values, oracle)

    def test_negative_shift(self):
        g = grid_of(-6, 6, 0.1)
        f = ub.sample_field(ub.Tanh(1.0, 3.0, 2.0), g)
        shifted = ub.shift_field(f, -2.0)
        assert shifted.grid.x_min == pytest.approx(-4.0)
        assert np.array_equal(shifted.values, f.values[:-20])

    def test_misaligned_or_oversized_shift_rejected(self):
        g = grid_of(-5, 5, 0.1)
        f = ub.sample_field(ub.Constant(1.0), g)
        with pytest.raises(ValidationError):
            ub.shift_field(f, 0.05)
        with pytest.raises(ValidationError):
            ub.shift_field(f, 10.0)

    def test_restrict_field(self):
        g = grid_of(-5, 5, 0.1)
        f = ub.sample_field(ub.Tanh(1.0, 3.0, 2.0), g)
        sub = ub.restrict_field(f, -2.0, 3.0)
        assert sub.grid.x_min == pytest.approx(-2.0)
        assert sub.grid.x_max == pytest.approx(3.0)
        assert np.array_equal(sub.values, f.values[30:81])


class TestSerialization:
    def test_csv_roundtrip(self, tmp_path):
        g = grid_of(-4, 4, 0.05)
        spec = ub.Poisson(1.0, ub.BumpProfile(1.0, 0.5))
        f = ub.sample_field(spec, g, seed=17)
        path = tmp_path / "field.csv"
        write_field_csv(f, path, spec)
        back = read_field_csv(path)
        assert back.grid == f.grid
        assert np.array_equal(back.values, f.values)
        assert back.seed == 17
        sidecar = json.loads(path.with_suffix(".json").read_text())
        assert sidecar["spec"]["type"] == "poisson"

    @pytest.mark.parametrize("spec", [
        ub.Constant(1.5),
        ub.Step(-1.0, 2.0),
        ub.Tanh(1.0, 3.0, 2.0),
        ub.Gaussian(1.0, ub.GaussianKernel(0.5, 2.0)),
        ub.Gaussian(2.0, ub.ExponentialKernel(1.0, 0.7)),
        ub.Gaussian(1.0, ub.TabulatedCovariance([0.0, 1.0, 2.0], [1.0, 0.4, 0.0])),
        ub.SquaredGaussian(1.0, ub.Gaussian(0.5, ub.GaussianKernel(0.25, 1.0))),
        ub.Poisson(2.0, ub.BumpProfile(0.5, 1.0)),
        ub.Poisson(1.0, ub.TabulatedProfile([-1.0, 0.0, 1.0], [0.0, 1.0, 0.0])),
        ub.LatticeIID(ub.NormalDistribution(1.0, 0.5), ub.BumpProfile(1.0, 0.5)),
        ub.LatticeIID(ub.UniformDistribution(0.0, 1.0), ub.BumpProfile(1.0, 0.5)),
    ])
    def test_spec_dict_roundtrip(self, spec):
        d = spec_to_dict(spec)
        json.dumps(d)  # must be JSON encodable
        back = spec_from_dict(d)
        assert spec_to_dict(back) == d
        assert back.spec_id == spec.spec_id


class TestSpecValidation:
    def test_invalid_specs(self):
        with pytest.raises(ValidationError):
            ub.Constant(0.0)
        with pytest.raises(ValidationError):
            ub.Gaussian(0.0, ub.GaussianKernel(1.0, 1.0))
        with pytest.raises(ValidationError):
            ub.SquaredGaussian(0.0, ub.Gaussian(1.0, ub.GaussianKernel(1.0, 1.0)))
        with pytest.raises(ValidationError):
            ub.Poisson(-1.0, ub.BumpProfile(1.0, 0.5))
        with pytest.raises(ValidationError):
            ub.LatticeIID(ub.UniformDistribution(-1.0, 1.0), ub.BumpProfile(1.0, 0.5))

    def test_covariance_validation(self):
        with pytest.raises(ValidationError):
            ub.GaussianKernel(-1.0, 1.0)
        with pytest.raises(ValidationError):
            ub.TabulatedCovariance([0.0, 1.0], [1.0, 1.5])  # |c| > c(0)


class TestTwoColumnCsv:
    def test_tabulated_covariance_from_csv(self, tmp_path):
        path = tmp_path / "cov.csv"
        path.write_text("lag,c\n0.0,1.0\n1.0,0.5\n2.0,0.1\n")
        cov = ub.TabulatedCovariance.from_csv(path)
        assert cov.variance == 1.0
        assert cov.at(np.array([-1.0]))[0] == 0.5

    def test_tabulated_profile_from_csv(self, tmp_path):
        path = tmp_path / "profile.csv"
        path.write_text("offset,u\n-1.0,0.0\n0.0,1.0\n1.0,0.0\n")
        prof = ub.TabulatedProfile.from_csv(path)
        assert prof.integral == pytest.approx(1.0)
        assert prof.support_halfwidth == 1.0
