import math

import numpy as np
import pytest

from memkern.measure import MeasureSpec
from memkern import solver as S
from memkern import volterra as V
from memkern.kernels import one_star_k_eval

E_HALF_AT_1 = 0.4275835761558070  # E_{1/2}(-1) = e * erfc(1)


def dirichlet_grid(n=64, value=0.0):
    bc = S.BoundaryCondition.dirichlet(value)
    return S.SpatialGrid(extents=((0.0, 1.0),), n_cells=(n,),
                         boundary=((bc, bc),))


def neumann_grid(n=32):
    bc = S.BoundaryCondition.neumann_zero()
    return S.SpatialGrid(extents=((0.0, 1.0),), n_cells=(n,),
                         boundary=((bc, bc),))


IDENTITY = S.CoefficientField.constant([[1.0]])


class TestConvWeights:
    def test_classical_l1_form(self, half):
        tau, m = 0.1, 7
        beta = S.conv_weights(half, m, tau)
        i = np.arange(1, m + 1)
        classical = ((m - i + 1) ** 0.5 - (m - i) ** 0.5) \
            * tau ** -0.5 / math.gamma(1.5)
        assert np.max(np.abs(beta - classical)) <= 1e-12

    def test_single_weight_m1(self, half):
        beta = S.conv_weights(half, 1, 0.25)
        assert beta.shape == (1,)
        assert beta[0] == pytest.approx(one_star_k_eval(half, 0.25) / 0.25)

    def test_two_atom_additivity(self):
        a1 = MeasureSpec.single_order(0.3, 0.4)
        a2 = MeasureSpec.single_order(0.7, 0.6)
        both = MeasureSpec.from_atoms([(0.3, 0.4), (0.7, 0.6)])
        w = S.conv_weights(both, 5, 0.2)
        assert np.max(np.abs(w - S.conv_weights(a1, 5, 0.2)
                             - S.conv_weights(a2, 5, 0.2))) <= 1e-12

    def test_positive_increasing_with_fixed_tail(self, measures):
        for spec in measures.values():
            beta = S.conv_weights(spec, 9, 0.05)
            assert np.all(beta > 0.0)
            assert np.all(np.diff(beta) > 0.0)  # increasing toward i = m
            beta3 = S.conv_weights(spec, 3, 0.05)
            assert beta[-1] == pytest.approx(beta3[-1], rel=1e-14)


class TestRelaxationMode:
    def test_half_order_against_ml(self, half):
        fld = S.solve(half, S.SpatialGrid(), None, 1.0, 0.0, 1.0, 4096,
                      reaction=1.0)
        assert abs(float(fld.values[-1, 0]) - E_HALF_AT_1) <= 1e-3

    def test_classical_limit(self):
        spec = MeasureSpec.single_order(0.999)
        fld = S.solve(spec, S.SpatialGrid(), None, 1.0, 0.0, 1.0, 2048,
                      reaction=1.0)
        assert abs(float(fld.values[-1, 0]) - math.exp(-1)) <= 2e-2

    def test_temporal_order(self, half):
        errs = []
        for n in (256, 512, 1024, 2048):
            fld = S.solve(half, S.SpatialGrid(), None, 1.0, 0.0, 1.0, n,
                          reaction=1.0)
            errs.append(abs(float(fld.values[-1, 0]) - E_HALF_AT_1))
        slope = -np.polyfit(np.log([256, 512, 1024, 2048]), np.log(errs), 1)[0]
        assert slope >= 1.0

    def test_zero_data_zero_solution(self, half):
        fld = S.solve(half, S.SpatialGrid(), None, 0.0, 0.0, 1.0, 64,
                      reaction=1.0)
        assert np.max(np.abs(fld.values)) == 0.0


class TestPdeSanity:
    def test_constant_preserved_neumann(self, half):
        fld = S.solve(half, neumann_grid(), IDENTITY, 3.7, 0.0, 0.5, 64)
        assert np.max(np.abs(fld.values - 3.7)) <= 1e-12

    def test_nonnegativity_random_data(self, half):
        grid = dirichlet_grid(64)
        rng = np.random.default_rng(11)
        for _ in range(10):
            u0 = np.maximum(rng.normal(size=64), 0.0)
            fld = S.solve(half, grid, IDENTITY, u0, 0.0, 0.4, 96)
            assert float(np.min(fld.values)) >= -1e-12

    def test_heat_limit_against_crank_nicolson(self):
        spec = MeasureSpec.single_order(0.999)
        n, big_t, steps = 64, 0.1, 512
        grid = dirichlet_grid(n)
        x = grid.axis_centers(0)
        u0 = np.sin(np.pi * x)
        fld = S.solve(spec, grid, IDENTITY, u0, 0.0, big_t, steps)
        # Crank-Nicolson reference on the same spatial stencil
        h = grid.spacing[0]
        lap = np.zeros((n, n))
        for c in range(n):
            if c > 0:
                lap[c, c] += 1 / h**2
                lap[c, c - 1] -= 1 / h**2
            if c < n - 1:
                lap[c, c] += 1 / h**2
                lap[c, c + 1] -= 1 / h**2
        lap[0, 0] += 2 / h**2
        lap[-1, -1] += 2 / h**2
        tau = big_t / steps
        eye = np.eye(n)
        lhs = eye / tau + lap / 2
        rhs = eye / tau - lap / 2
        u = u0.copy()
        for _ in range(steps):
            u = np.linalg.solve(lhs, rhs @ u)
        assert np.max(np.abs(fld.values[-1] - u)) <= 2e-2

    def test_linearity(self, half):
        grid = dirichlet_grid(48)
        rng = np.random.default_rng(5)
        u1, u2 = rng.normal(size=48), rng.normal(size=48)
        f1, f2 = 0.4, -0.2
        a = S.solve(half, grid, IDENTITY, u1, f1, 0.3, 48)
        b = S.solve(half, grid, IDENTITY, u2, f2, 0.3, 48)
        ab = S.solve(half, grid, IDENTITY, u1 + u2, f1 + f2, 0.3, 48)
        assert np.max(np.abs(ab.values - a.values - b.values)) <= 1e-10

    def test_m_matrix_structure(self, half):
        stepper = S.TimeStepper(half, dirichlet_grid(32), IDENTITY, 1.0, 0.0,
                                0.2, 32)
        assert stepper.check_m_matrix(0.1, float(stepper.weights[0]))
        grid2 = S.SpatialGrid(
            extents=((0.0, 1.0), (0.0, 1.0)), n_cells=(8, 8),
            boundary=((S.BoundaryCondition.dirichlet(0.0),) * 2,) * 2)
        coeffs = S.CoefficientField.constant([[1.0, 0.1], [0.1, 2.0]])
        st2 = S.TimeStepper(half, grid2, coeffs, 1.0, 0.0, 0.2, 32)
        assert st2.check_m_matrix(0.1, float(st2.weights[0]))

    def test_2d_constant_and_nonneg(self, half):
        bcn = S.BoundaryCondition.neumann_zero()
        g2 = S.SpatialGrid(extents=((0.0, 1.0), (0.0, 1.0)),
                           n_cells=(10, 10), boundary=((bcn, bcn),) * 2)
        coeffs = S.CoefficientField.constant([[1.0, 0.2], [0.2, 1.5]])
        fld = S.solve(half, g2, coeffs, 1.25, 0.0, 0.1, 24)
        assert np.max(np.abs(fld.values - 1.25)) <= 1e-12
        g2d = S.SpatialGrid(extents=((0.0, 1.0), (0.0, 1.0)),
                            n_cells=(12, 12),
                            boundary=((S.BoundaryCondition.dirichlet(0.0),) * 2,
                                      ) * 2)
        u0 = np.maximum(np.random.default_rng(8).normal(size=(12, 12)), 0.0)
        fld2 = S.solve(half, g2d, coeffs, u0, 0.0, 0.1, 24)
        assert float(np.min(fld2.values)) >= -1e-12
        assert float(np.max(fld2.residuals)) <= 1e-10

    def test_yosida_weight_consistency(self, half):
        # swapping the kernel for its n=256 regularization moves u only a little
        grid = dirichlet_grid(48)
        x = grid.axis_centers(0)
        u0 = np.sin(np.pi * x)
        n_steps, big_t = 256, 1.0
        base = S.solve(half, grid, IDENTITY, u0, 0.0, big_t, n_steps)
        tau = big_t / n_steps
        yos = V.yosida_kernels(half, 256, tau, n_steps)
        cum = np.concatenate(([0.0], np.cumsum(yos.k_n.masses())))
        reg = S.solve(half, grid, IDENTITY, u0, 0.0, big_t, n_steps,
                      kernel_cumulative=cum)
        assert np.max(np.abs(base.values - reg.values)) <= 5e-2

    def test_checkerboard_coefficients(self, half):
        cb = S.CoefficientField.checkerboard(0.5, 2.0, 0.25, dim=1)
        grid = dirichlet_grid(40)
        u0 = np.maximum(np.sin(2 * np.pi * grid.axis_centers(0)), 0.0)
        fld = S.solve(half, grid, cb, u0, 0.0, 0.2, 40)
        assert float(np.min(fld.values)) >= -1e-12
        assert not cb.validate_bounds(grid, [0.0, 0.1])

    def test_coefficient_bound_probes_catch_lies(self):
        field = S.CoefficientField(fn=lambda t, x: np.array([[2.0]]),
                                   lam=1.0, nu=0.5)
        problems = field.validate_bounds(dirichlet_grid(8), [0.0])
        assert problems


class TestMittagLeffler:
    def test_values(self):
        assert S.mittag_leffler(1.0, -1.0) == pytest.approx(math.exp(-1),
                                                            rel=1e-14)
        assert S.mittag_leffler(0.5, -1.0) == pytest.approx(E_HALF_AT_1,
                                                            abs=1e-12)
        assert S.mittag_leffler(0.7, 0.0) == 1.0

    def test_two_parameter(self):
        got = S.mittag_leffler(0.5, -1.0, beta=0.5)
        identity = 1 / math.sqrt(math.pi) - math.e * math.erfc(1.0)
        assert got == pytest.approx(identity, abs=1e-12)

    def test_asymptotic_branch(self):
        from scipy.special import erfcx
        assert S.mittag_leffler(0.5, -25.0) == pytest.approx(
            float(erfcx(25.0)), rel=1e-4)

    def test_domain_errors(self):
        with pytest.raises(ValueError):
            S.mittag_leffler(1.5, -1.0)
        with pytest.raises(ValueError):
            S.mittag_leffler(0.5, 1.0)


class TestValidationErrors:
    def test_grid_too_coarse(self):
        with pytest.raises(S.SolverError):
            S.SpatialGrid(extents=((0.0, 1.0),), n_cells=(2,))

    def test_asymmetric_matrix_rejected(self):
        with pytest.raises(S.SolverError):
            S.CoefficientField.constant([[1.0, 0.5], [0.0, 1.0]])
