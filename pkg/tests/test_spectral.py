import numpy as np
import pytest

from wigprop import make_grid
from wigprop.phasespace import (PhaseSpaceGridND, WignerField, WignerFieldND,
                                diff_metrics, norm, norm_nd)
from wigprop.potentials import (Constant, GaussianWell, Harmonic, Linear,
                                RadialGaussianWell, SeparableSum)
from wigprop.spectral import (SpectralStepConfig, StepDiagnostics, drift,
                              evolve, kick_full, step_first_order, step_full,
                              step_separable)

GRID = make_grid(-8, 8, 256, -8, 8, 256)


def blob(grid, x0=0.0, p0=0.0, width_sq=2.0):
    x = grid.x_lattice[:, None]
    p = grid.p_lattice[None, :]
    values = 2.0 * np.exp(-((x - x0) ** 2) / width_sq - ((p - p0) ** 2) * width_sq)
    return WignerField(grid=grid, values=values)


class TestDrift:
    def test_zero_dt_is_identity(self):
        f = blob(GRID, x0=1.0)
        out = drift(f, 0.0)
        np.testing.assert_allclose(out.values, f.values, atol=1e-14)

    def test_zero_momentum_row_unchanged(self):
        f = blob(GRID, x0=1.0)
        j0 = int(np.argmin(np.abs(GRID.p_lattice)))
        assert GRID.p_lattice[j0] == 0.0
        out = drift(f, 0.7)
        np.testing.assert_allclose(out.values[:, j0], f.values[:, j0], atol=1e-13)

    def test_blob_shifts_by_row_momentum(self):
        f = blob(GRID, x0=0.0, p0=1.0)
        out = drift(f, 0.5)
        # x-marginal peak of the p0 = 1 blob moves to p0 * dt
        density = out.values.sum(axis=1)
        assert abs(GRID.x_lattice[int(np.argmax(density))] - 0.5) <= GRID.dx

    def test_matches_analytic_shear(self):
        # centered blob so the periodic wrap stays below the tolerance
        f = blob(GRID, x0=0.0)
        out = drift(f, 0.5)
        x = GRID.x_lattice[:, None]
        p = GRID.p_lattice[None, :]
        want = 2.0 * np.exp(-((x - p * 0.5) ** 2) / 2.0 - p**2 * 2.0)
        assert np.abs(out.values - want).max() < 1e-10

    def test_interpolation_mode_close_to_spectral(self):
        f = blob(GRID)
        a = drift(f, 0.3).values
        b = drift(f, 0.3, drift_mode="interpolation").values
        assert np.abs(a - b).max() < 1e-4


class TestKick:
    def test_constant_potential_is_identity(self):
        f = blob(GRID)
        out = kick_full(f, Constant(c=5.0), 0.0, 0.3)
        np.testing.assert_allclose(out.values, f.values, atol=1e-13)

    def test_linear_potential_is_momentum_shift(self):
        # dV(x, s) = g s exactly, so the kick translates p by -g dt
        g, dt = 0.8, 0.25
        f = blob(GRID)
        out = kick_full(f, Linear(g=g), 0.0, dt)
        x = GRID.x_lattice[:, None]
        p = GRID.p_lattice[None, :]
        want = 2.0 * np.exp(-x**2 / 2.0 - ((p + g * dt) ** 2) * 2.0)
        assert np.abs(out.values - want).max() < 1e-10

    def test_momentum_marginal_invariant(self, bench):
        kicked = kick_full(bench.f0, bench.pot, 0.0, 0.1)
        before = bench.f0.values.sum(axis=1)
        after = kicked.values.sum(axis=1)
        scale = np.abs(before).max()
        assert np.abs(after - before).max() < 1e-12 * scale

    def test_output_is_real_array(self, bench):
        out = kick_full(bench.f0, bench.pot, 0.0, 0.1)
        assert out.values.dtype == np.float64


class TestStepFull:
    def test_free_particle_matches_analytic_shear(self):
        # 10 steps against the closed-form sheared Gaussian
        f = blob(GRID, x0=1.0)
        cfg = SpectralStepConfig(dt=0.05)
        current = f
        for k in range(10):
            current = step_full(current, Constant(c=0.0), k * 0.05, cfg)
        x = GRID.x_lattice[:, None]
        p = GRID.p_lattice[None, :]
        want = 2.0 * np.exp(-((x - p * 0.5 - 1.0) ** 2) / 2.0 - p**2 * 2.0)
        assert np.abs(current.values - want).max() < 1e-8
        assert current.time == pytest.approx(0.5, rel=1e-12)

    def test_harmonic_period_returns_initial(self):
        # rigid rotation: one full period at k = m = 1 restores the field
        f = blob(GRID, x0=1.0)
        cfg = SpectralStepConfig(dt=2 * np.pi / 200)
        current = f
        for k in range(200):
            current = step_full(current, Harmonic(k=1.0), k * cfg.dt, cfg)
        assert np.abs(current.values - f.values).max() < 1e-3

    def test_norm_conserved_each_step(self, bench):
        norm0 = norm(bench.f0)
        for d in bench.spectral30.diagnostics:
            assert abs(d.norm - norm0) <= 1e-10 * abs(norm0)


class TestStepFirstOrder:
    def test_constant_potential_equals_pure_drift(self):
        f = blob(GRID, x0=0.5)
        cfg = SpectralStepConfig(dt=0.1, variant="first_order")
        out = step_first_order(f, Constant(c=2.0), 0.0, cfg)
        want = drift(f, 0.1)
        np.testing.assert_allclose(out.values, want.values, atol=1e-13)

    def test_one_step_truncation_is_second_order(self, bench):
        # halving dt must quarter the gap to the full kernel
        gaps = []
        for dt in (0.1, 0.05):
            cfg = SpectralStepConfig(dt=dt)
            full = step_full(bench.f0, bench.pot, 0.0, cfg)
            fo = step_first_order(bench.f0, bench.pot, 0.0, cfg)
            gaps.append(np.abs(full.values - fo.values).max())
        ratio = gaps[0] / gaps[1]
        assert 3.5 < ratio < 4.5

    def test_long_run_stays_close_to_full_variant(self, bench):
        # 300 first-order steps must land within 1.5x of the 30-step full
        # variant's distance from the reference solution
        res = evolve(bench.f0, bench.pot, 0.0, 3.0, 300,
                     SpectralStepConfig(dt=0.01, variant="first_order"))
        gap_fo = diff_metrics(res.field, bench.oracle_t3).linf
        gap_full = diff_metrics(bench.spectral30.field, bench.oracle_t3).linf
        assert gap_fo <= 1.5 * gap_full


class TestKernelEquivalence:
    def test_fft_kick_matches_direct_cosine_sine_quadrature(self):
        # independent route: build the dense momentum kernel from explicit
        # cosine and sine sums over the same s-lattice and apply it per row
        grid = make_grid(-6, 6, 32, -4, 4, 32)
        pot = GaussianWell(depth=1.0, sigma=2.0)
        dt = 0.15
        rng = np.random.default_rng(12)
        f = WignerField(grid=grid, values=rng.standard_normal(grid.shape()))

        got = kick_full(f, pot, 0.0, dt).values

        s = grid.s_lattice
        p = grid.p_lattice
        dp_mat = p[:, None] - p[None, :]
        want = np.empty(grid.shape())
        for i, xv in enumerate(grid.x_lattice):
            delta_v = pot.value(xv - s / 2.0) - pot.value(xv + s / 2.0)
            kernel = (np.cos(np.outer(dp_mat.ravel(), s)) @ np.cos(delta_v * dt)
                      + np.sin(np.outer(dp_mat.ravel(), s)) @ np.sin(delta_v * dt))
            kernel = kernel.reshape(dp_mat.shape) / grid.np
            want[i] = kernel @ f.values[i]
        assert np.abs(got - want).max() < 1e-10


class TestEvolve:
    def test_single_step_matches_step_full(self, bench):
        cfg = SpectralStepConfig(dt=0.1)
        res = evolve(bench.f0, bench.pot, 0.0, 0.1, 1, cfg)
        direct = step_full(bench.f0, bench.pot, 0.0, cfg)
        np.testing.assert_array_equal(res.field.values, direct.values)

    def test_diagnostics_rows(self, bench):
        assert len(bench.spectral30.diagnostics) == 30
        d = bench.spectral30.diagnostics[-1]
        assert isinstance(d, StepDiagnostics)
        assert d.time == pytest.approx(3.0, rel=1e-12)
        assert d.min < 0 < d.max

    def test_no_warnings_for_contained_field(self, bench):
        assert bench.spectral30.warnings == []

    def test_interpolation_drift_leaks_norm_and_warns(self):
        # a blob pushed through the boundary loses norm in interpolation
        # mode; that must surface as a warning, not silence
        grid = make_grid(-4, 4, 64, -4, 4, 64)
        f = blob(grid, x0=2.0, p0=2.0, width_sq=1.0)
        cfg = SpectralStepConfig(dt=0.2, drift_mode="interpolation")
        res = evolve(f, Constant(c=0.0), 0.0, 2.0, 10, cfg)
        assert res.warnings

    def test_invalid_arguments(self, bench):
        cfg = SpectralStepConfig(dt=0.1)
        with pytest.raises(ValueError):
            evolve(bench.f0, bench.pot, 0.0, 1.0, 0, cfg)
        with pytest.raises(ValueError):
            evolve(bench.f0, bench.pot, 1.0, 0.5, 5, cfg)


class TestConfigValidation:
    @pytest.mark.parametrize("kwargs", [
        dict(dt=0.0), dict(dt=-0.1), dict(dt=0.1, mass=0.0),
        dict(dt=0.1, variant="exact"), dict(dt=0.1, drift_mode="fft"),
    ])
    def test_rejected(self, kwargs):
        with pytest.raises(ValueError):
            SpectralStepConfig(**kwargs)


def grid_nd_square(n=32, half=8.0):
    axis = make_grid(-half, half, n, -half, half, n)
    return PhaseSpaceGridND(axes=(axis, axis))


def blob_nd(grid_nd, x0=(1.0, 0.0), width_sq=1.62):
    # equal x and p widths above the joint resolution limit of the coarse
    # lattice (a minimum-uncertainty Gaussian cannot be band-limited in
    # both axes at 32 points over (-8, 8))
    g1, g2 = grid_nd.axes
    x1 = g1.x_lattice[:, None, None, None]
    x2 = g2.x_lattice[None, :, None, None]
    p1 = g1.p_lattice[None, None, :, None]
    p2 = g2.p_lattice[None, None, None, :]
    values = 4.0 * np.exp(-((x1 - x0[0]) ** 2 + (x2 - x0[1]) ** 2
                            + p1**2 + p2**2) / width_sq)
    return WignerFieldND(grid=grid_nd, values=values)


class TestStepSeparable:
    def test_constant_potential_is_identity(self):
        f = blob_nd(grid_nd_square())
        pot = SeparableSum(terms=(Constant(c=1.0), Constant(c=1.0)))
        out = step_separable(f, pot, 0.0, SpectralStepConfig(dt=1e-9))
        np.testing.assert_allclose(out.values, f.values, atol=1e-9)

    def test_2d_harmonic_period_returns_initial(self):
        f = blob_nd(grid_nd_square())
        pot = SeparableSum(terms=(Harmonic(k=1.0), Harmonic(k=1.0)))
        cfg = SpectralStepConfig(dt=2 * np.pi / 100)
        current = f
        for k in range(100):
            current = step_separable(current, pot, k * cfg.dt, cfg)
        assert np.abs(current.values - f.values).max() < 1e-2

    def test_radial_well_conserves_norm(self):
        f = blob_nd(grid_nd_square(), x0=(0.5, -0.5))
        pot = RadialGaussianWell(depth=1.0, sigma=3.0)
        cfg = SpectralStepConfig(dt=0.1)
        norm0 = norm_nd(f)
        current = f
        for k in range(3):
            current = step_separable(current, pot, k * cfg.dt, cfg)
            assert norm_nd(current) == pytest.approx(norm0, rel=1e-10)

    def test_one_dimension_rejected(self):
        axis = make_grid(-8, 8, 32, -8, 8, 32)
        grid_1d = PhaseSpaceGridND(axes=(axis,))
        values = np.zeros(grid_1d.shape())
        f = WignerFieldND(grid=grid_1d, values=values)
        pot = SeparableSum(terms=(Constant(c=0.0),))
        with pytest.raises(ValueError):
            step_separable(f, pot, 0.0, SpectralStepConfig(dt=0.1))


class TestStepSeparable3D:
    def test_3d_factorizes_into_1d_steps(self):
        # separable potential + product initial data: the 3-d sweep must
        # equal the outer product of 1-d full steps exactly, which pins the
        # axis indexing without any resolution requirement
        axis = make_grid(-6, 6, 8, -6, 6, 8)
        grid_3d = PhaseSpaceGridND(axes=(axis, axis, axis))
        rng = np.random.default_rng(21)
        parts = [WignerField(grid=axis, values=rng.standard_normal(axis.shape()))
                 for _ in range(3)]
        pots = (Harmonic(k=1.0), Linear(g=0.5), GaussianWell(depth=1.0, sigma=2.0))

        values = np.einsum("ad,be,cf->abcdef", *(p.values for p in parts))
        f3 = WignerFieldND(grid=grid_3d, values=values)
        pot3 = SeparableSum(terms=pots)
        cfg = SpectralStepConfig(dt=0.07)
        norm0 = norm_nd(f3)
        for k in range(3):
            f3 = step_separable(f3, pot3, k * cfg.dt, cfg)
            parts = [step_full(p, pots[j], k * cfg.dt, cfg)
                     for j, p in enumerate(parts)]
        want = np.einsum("ad,be,cf->abcdef", *(p.values for p in parts))
        np.testing.assert_allclose(f3.values, want, atol=1e-12)
        assert norm_nd(f3) == pytest.approx(norm0, rel=1e-10)
