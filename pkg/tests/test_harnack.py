import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from memkern.geometry import Cylinder, CylinderKind, phi_bar
from memkern import harnack as H
from memkern import solver as S

IDENTITY = S.CoefficientField.constant([[1.0]])


def dirichlet_grid(n=64, value=0.0):
    bc = S.BoundaryCondition.dirichlet(value)
    return S.SpatialGrid(extents=((0.0, 1.0),), n_cells=(n,),
                         boundary=((bc, bc),))


def constant_field(grid, n_steps, step, value):
    vals = np.full((n_steps + 1,) + grid.shape, float(value))
    return S.SolutionField(grid=grid, step=step, values=vals, f_samples=None,
                           residuals=np.zeros(n_steps), wall_time=0.0)


class TestCriticalExponent:
    def test_examples(self):
        assert H.critical_exponent(0.5, 1) == pytest.approx(5.0 / 3.0)
        assert H.critical_exponent(1 - 1e-12, 1) == pytest.approx(3.0,
                                                                  rel=1e-9)
        assert H.critical_exponent(1 - 1e-12, 2) == pytest.approx(2.0,
                                                                  rel=1e-9)
        assert H.critical_exponent(1e-6, 3) == pytest.approx(1.0, abs=1e-5)

    @given(g=st.floats(0.05, 0.95), n=st.integers(1, 5))
    @settings(max_examples=40, deadline=None)
    def test_monotone(self, g, n):
        eps = 0.02
        if g + eps < 1.0:
            assert H.critical_exponent(g + eps, n) > H.critical_exponent(g, n)
        if n > 1:
            assert H.critical_exponent(g, n) < H.critical_exponent(g, n - 1)
        assert H.critical_exponent(g, n) > 1.0

    def test_domain_errors(self):
        with pytest.raises(H.HarnackError):
            H.critical_exponent(1.0, 1)
        with pytest.raises(H.HarnackError):
            H.critical_exponent(0.5, 0)


@pytest.fixture(scope="module")
def geometry_half(half):
    height = 2.0 * phi_bar(half, 0.4)
    return {"t0": 0.0, "x0": 0.5, "r": 0.4, "delta": 0.5, "tau": 1.0,
            "height": height}


class TestWeakHarnackRatio:

    def test_constant_field_ratio_exactly_one(self, half, geometry_half):
        g = dirichlet_grid(64)
        fld = constant_field(g, 128, geometry_half["height"] / 128, 3.2)
        rep = H.weak_harnack_ratio(fld, half, t0=0.0, x0=0.5, r=0.4,
                                   delta=0.5, tau=1.0, p=1.0)
        assert rep.ratio == 1.0 and rep.status == "ok"

    def test_scale_invariance(self, half, geometry_half):
        g = dirichlet_grid(64)
        step = geometry_half["height"] / 128
        rng = np.random.default_rng(2)
        base_vals = np.abs(rng.normal(size=(129, 64))) + 0.1
        f1 = S.SolutionField(grid=g, step=step, values=base_vals,
                             f_samples=None, residuals=np.zeros(128),
                             wall_time=0.0)
        f2 = S.SolutionField(grid=g, step=step, values=17.0 * base_vals,
                             f_samples=None, residuals=np.zeros(128),
                             wall_time=0.0)
        kw = dict(t0=0.0, x0=0.5, r=0.4, delta=0.5, tau=1.0, p=1.0)
        r1 = H.weak_harnack_ratio(f1, half, **kw)
        r2 = H.weak_harnack_ratio(f2, half, **kw)
        assert r1.ratio == pytest.approx(r2.ratio, rel=1e-12)

    def test_mean_monotone_in_p(self, half, geometry_half):
        g = dirichlet_grid(64)
        step = geometry_half["height"] / 128
        rng = np.random.default_rng(4)
        vals = np.abs(rng.normal(size=(129, 64))) + 0.05
        fld = S.SolutionField(grid=g, step=step, values=vals, f_samples=None,
                              residuals=np.zeros(128), wall_time=0.0)
        means = [H.weak_harnack_ratio(fld, half, t0=0.0, x0=0.5, r=0.4,
                                      delta=0.5, tau=1.0, p=p).mean_p
                 for p in (0.5, 1.0, 1.5)]
        assert means[0] <= means[1] <= means[2]

    def test_degenerate_zero_field(self, half, geometry_half):
        g = dirichlet_grid(64)
        fld = constant_field(g, 128, geometry_half["height"] / 128, 0.0)
        rep = H.weak_harnack_ratio(fld, half, t0=0.0, x0=0.5, r=0.4,
                                   delta=0.5, tau=1.0, p=1.0)
        assert rep.status == "degenerate"

    def test_too_coarse_grid_errors(self, half):
        g = dirichlet_grid(4)
        fld = constant_field(g, 16, 2.0 * phi_bar(half, 0.4) / 16, 1.0)
        with pytest.raises(H.HarnackError):
            H.weak_harnack_ratio(fld, half, t0=0.0, x0=0.5, r=0.4,
                                 delta=0.05, tau=1.0, p=1.0)

    def test_p_beyond_critical_rejected(self, half, geometry_half):
        g = dirichlet_grid(64)
        fld = constant_field(g, 128, geometry_half["height"] / 128, 1.0)
        with pytest.raises(H.HarnackError):
            H.weak_harnack_ratio(fld, half, t0=0.0, x0=0.5, r=0.4,
                                 delta=0.5, tau=1.0, p=5.0)

    def test_forcing_correction_enters(self, half, geometry_half):
        g = dirichlet_grid(64)
        step = geometry_half["height"] / 128
        vals = np.full((129, 64), 2.0)
        f_samples = np.full((129, 64), -0.5)  # f^- = 0.5
        fld = S.SolutionField(grid=g, step=step, values=vals,
                              f_samples=f_samples,
                              residuals=np.zeros(128), wall_time=0.0)
        rep = H.weak_harnack_ratio(fld, half, t0=0.0, x0=0.5, r=0.4,
                                   delta=0.5, tau=1.0, p=1.0)
        assert rep.correction == pytest.approx(0.4**2 * 0.5)
        assert rep.ratio == pytest.approx(2.0 / (2.0 + 0.08))


class TestEnsemble:
    def test_small_ensemble_finite(self, half):
        rep = H.harnack_ensemble(half, n_members=5, seed=3, n_cells=48,
                                 n_steps=96, r=0.4, x0=0.5)
        assert rep.all_finite
        assert rep.max_ratio >= rep.median_ratio > 0.0

    def test_seed_reproducible(self, half):
        a = H.harnack_ensemble(half, n_members=3, seed=9, n_cells=32,
                               n_steps=64, r=0.4, x0=0.5)
        b = H.harnack_ensemble(half, n_members=3, seed=9, n_cells=32,
                               n_steps=64, r=0.4, x0=0.5)
        assert a.ratios == b.ratios


class TestOscillation:
    def test_linear_profile_exponent_one(self, half):
        bc = S.BoundaryCondition.dirichlet(lambda t, x: float(x[0]))
        grid = S.SpatialGrid(extents=((0.0, 1.0),), n_cells=(256,),
                             boundary=((bc, bc),))
        x = grid.axis_centers(0)
        horizon = 0.5 * phi_bar(half, 0.2)
        fld = S.solve(half, grid, IDENTITY, x.copy(), 0.0, horizon, 256)
        prof = H.oscillation_profile(fld, half, t1=0.9 * horizon, x1=0.4,
                                     theta=1.0, levels=[1, 2, 3, 4], r=0.2)
        assert prof.kappa == pytest.approx(1.0, abs=0.05)

    def test_smooth_solution_positive_exponent(self, half):
        grid = dirichlet_grid(256)
        x = grid.axis_centers(0)
        eta, r = 0.25, 0.2
        horizon = 2 * eta * phi_bar(half, r)
        fld = S.solve(half, grid, IDENTITY, np.sin(np.pi * x), 0.0,
                      horizon, 256)
        prof = H.oscillation_profile(fld, half, t1=1.5 * eta * phi_bar(half, r),
                                     x1=0.4, theta=1.0,
                                     levels=[0, 1, 2, 3, 4], r=r)
        assert prof.status == "ok"
        assert prof.kappa > 0.0
        assert prof.fit_residual <= 0.2
        assert all(o2 <= o1 + 1e-15 for o1, o2 in zip(prof.osc, prof.osc[1:]))

    def test_constant_reports_flat(self, half):
        grid = dirichlet_grid(256)
        horizon = 0.5 * phi_bar(half, 0.2)
        fld = constant_field(grid, 128, horizon / 128, 4.2)
        prof = H.oscillation_profile(fld, half, t1=0.9 * horizon, x1=0.4,
                                     theta=1.0, levels=[1, 2, 3, 4], r=0.2)
        assert prof.flat and prof.kappa is None

    def test_too_few_levels_errors(self, half):
        grid = dirichlet_grid(64)
        horizon = 0.5 * phi_bar(half, 0.2)
        fld = constant_field(grid, 64, horizon / 64, 1.0)
        with pytest.raises(H.HarnackError):
            H.oscillation_profile(fld, half, t1=0.9 * horizon, x1=0.4,
                                  theta=1.0, levels=[1, 2], r=0.2)


class TestStrongMax:
    def test_constant_scenario_consistent(self, half):
        # constant data with matching boundary stays at its maximum
        grid = dirichlet_grid(48, value=2.0)
        fld = S.solve(half, grid, IDENTITY, 2.0, 0.0, 0.05, 64)
        cyl = Cylinder(0.02, 0.04, (0.5,), 0.2, CylinderKind.DYADIC)
        assert H.strong_max_check(fld, cyl, 1e-10) == "consistent"

    def test_decaying_scenario_not_applicable(self, half):
        grid = dirichlet_grid(64)
        x = grid.axis_centers(0)
        fld = S.solve(half, grid, IDENTITY, np.sin(np.pi * x), 0.0, 0.05, 64)
        cyl = Cylinder(0.02, 0.045, (0.5,), 0.2, CylinderKind.DYADIC)
        assert H.strong_max_check(fld, cyl, 1e-10) == "not-applicable"

    def test_fabricated_violation_detected(self, half):
        grid = dirichlet_grid(32)
        vals = np.ones((65, 32))
        vals[3, 10] = 0.2          # non-flat early slice
        vals[40:, :] = 1.0         # late cylinder attains the sup
        fld = S.SolutionField(grid=grid, step=0.01, values=vals,
                              f_samples=None, residuals=np.zeros(64),
                              wall_time=0.0)
        cyl = Cylinder(0.5, 0.6, (0.5,), 0.3, CylinderKind.DYADIC)
        assert H.strong_max_check(fld, cyl, 1e-10) == "violated"

    def test_empty_cylinder_errors(self, half):
        grid = dirichlet_grid(32)
        fld = constant_field(grid, 32, 0.01, 1.0)
        with pytest.raises(H.HarnackError):
            H.strong_max_check(fld, Cylinder(5.0, 6.0, (0.5,), 0.3,
                                             CylinderKind.DYADIC))
