import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pointdn.grid import (BoundaryData, ScalarField, boundary_bump, build_grid,
                          normal_derivative, trace_data)
from pointdn.linear_solve import harmonic_extension
from pointdn.semilinear import (DELTA_DEFAULT, BranchEscape, NewtonParams,
                                NonConvergence, SemilinearProblem, dn_map,
                                solve_semilinear)


def small_bump(g, height=0.04):
    return boundary_bump(g, 0.5, 0.3, height=height)


class TestProblemValidation:
    def test_m_below_two_rejected(self, g41):
        with pytest.raises(ValueError):
            SemilinearProblem(g41, ScalarField.zeros(g41), 1, small_bump(g41))

    def test_m_non_integer_rejected(self, g41):
        with pytest.raises(ValueError):
            SemilinearProblem(g41, ScalarField.zeros(g41), 2.5, small_bump(g41))

    def test_complex_potential_rejected(self, g41):
        q = ScalarField.constant(g41, 1.0 + 0.1j)
        with pytest.raises(ValueError):
            SemilinearProblem(g41, q, 2, small_bump(g41))

    def test_data_at_or_above_delta_rejected(self, g41):
        f = small_bump(g41, height=DELTA_DEFAULT)
        with pytest.raises(ValueError):
            SemilinearProblem(g41, ScalarField.zeros(g41), 2, f)

    def test_grid_mismatch_rejected(self, g41):
        other = build_grid(21)
        with pytest.raises(ValueError):
            SemilinearProblem(g41, ScalarField.zeros(other), 2, small_bump(g41))

    def test_newton_param_validation(self):
        with pytest.raises(ValueError):
            NewtonParams(max_iter=0)
        with pytest.raises(ValueError):
            NewtonParams(residual_tol=-1.0)
        with pytest.raises(ValueError):
            NewtonParams(damping_limit=-1)


class TestExactCases:
    def test_zero_potential_gives_harmonic_solution(self, g41):
        f = small_bump(g41)
        prob = SemilinearProblem(g41, ScalarField.zeros(g41), 2, f)
        report = {}
        u = solve_semilinear(prob, report=report)
        want = harmonic_extension(g41, f)
        assert np.array_equal(u.values, want.values)
        assert report["iterations"] == 0

    def test_zero_data_gives_zero_solution(self, g41):
        f = BoundaryData.zeros(g41)
        prob = SemilinearProblem(g41, ScalarField.constant(g41, 3.0), 2, f)
        u = solve_semilinear(prob)
        assert np.max(np.abs(u.values)) == 0.0

    def test_converges_fast_for_unit_potential(self, g81):
        prob = SemilinearProblem(g81, ScalarField.constant(g81, 1.0), 2,
                                 small_bump(g81, height=0.049))
        report = {}
        solve_semilinear(prob, report=report)
        assert report["iterations"] <= 3
        # tolerance is relative to max(1, ||f||_inf) = 1 here
        assert report["residual_norms"][-1] < 1e-12


class TestStructure:
    def test_quadratic_smallness_of_nonlinear_correction(self, g41):
        # u_eps = eps*v + O(eps^2) where v is the harmonic extension
        q = ScalarField.constant(g41, 1.0)
        f0 = boundary_bump(g41, 1.0, 0.4)
        v = harmonic_extension(g41, f0)
        eps_list = [4e-3, 2e-3, 1e-3]
        devs = []
        for eps in eps_list:
            prob = SemilinearProblem(
                g41, q, 2, BoundaryData(g41, eps * f0.values))
            u = solve_semilinear(prob)
            devs.append(np.max(np.abs(u.values - eps * v.values)))
        fit = np.polyfit(np.log(eps_list), np.log(devs), 1)[0]
        assert fit == pytest.approx(2.0, abs=0.1)

    def test_odd_symmetry_for_odd_power(self, g41):
        # m = 3 makes the equation odd: flipping f flips u exactly
        q = ScalarField.constant(g41, 2.0)
        f = small_bump(g41, height=0.03)
        up = solve_semilinear(SemilinearProblem(g41, q, 3, f))
        dn_ = solve_semilinear(SemilinearProblem(
            g41, q, 3, BoundaryData(g41, -f.values)))
        assert np.max(np.abs(up.values + dn_.values)) < 1e-14

    def test_solution_stays_in_small_branch(self, g41):
        q = ScalarField.constant(g41, 5.0)
        f = small_bump(g41, height=0.04)
        u = solve_semilinear(SemilinearProblem(g41, q, 2, f))
        assert np.max(np.abs(u.values)) <= 2.0 * f.sup_norm() + 1e-12


class TestFailureModes:
    def test_branch_escape_near_fold(self):
        g = build_grid(41)
        q = ScalarField.constant(g, 20.0)
        f = trace_data(g, lambda x, y: 0 * x + 0.24)
        prob = SemilinearProblem(g, q, 2, f, delta=10.0)
        with pytest.raises(BranchEscape):
            solve_semilinear(prob)

    def test_nonconvergence_past_fold(self):
        g = build_grid(41)
        q = ScalarField.constant(g, 20.0)
        f = trace_data(g, lambda x, y: 0 * x + 0.35)
        prob = SemilinearProblem(g, q, 2, f, delta=10.0)
        with pytest.raises((NonConvergence, BranchEscape)):
            solve_semilinear(prob)

    def test_moderate_constant_data_still_converges(self):
        g = build_grid(41)
        q = ScalarField.constant(g, 20.0)
        f = trace_data(g, lambda x, y: 0 * x + 0.2)
        prob = SemilinearProblem(g, q, 2, f, delta=10.0)
        u = solve_semilinear(prob)
        assert np.max(np.abs(u.values)) <= 2.0 * 0.2


class TestDNRecord:
    def test_flux_of_affine_solution_is_exact(self, g41):
        # q = 0 and affine data: u is the affine extension, flux known exactly
        prob = SemilinearProblem(
            g41, ScalarField.zeros(g41), 2,
            trace_data(g41, lambda x, y: 0.04 * x))
        rec = dn_map(prob)
        bx = g41.x[g41.boundary_nodes]
        by = g41.y[g41.boundary_nodes]
        right = (bx == 1.0) & (by > 0) & (by < 1)
        assert np.allclose(rec.flux.values[right], 0.04, atol=1e-12)
        assert rec.pair is None

    def test_pairing_against_density(self, g41):
        prob = SemilinearProblem(
            g41, ScalarField.constant(g41, 1.0), 2, small_bump(g41))
        dens = np.full(g41.n_boundary, 0.25)
        rec = dn_map(prob, measure=dens)
        # total flux of any solution of Delta u = -q u^m balances the source
        assert rec.pair is not None
        assert rec.iterations >= 1

    def test_report_contents(self, g41):
        prob = SemilinearProblem(
            g41, ScalarField.constant(g41, 1.0), 2, small_bump(g41))
        report = {}
        solve_semilinear(prob, report=report)
        assert set(report) >= {"iterations", "residual_norms", "update_norms",
                               "dampings"}
        assert len(report["residual_norms"]) == report["iterations"] + 1


class TestSmallDataWellPosedness:
    @given(st.integers(min_value=0, max_value=10_000))
    @settings(max_examples=20)
    def test_random_small_problems_converge_quickly(self, draw_seed):
        g = build_grid(21)
        rng = np.random.default_rng(draw_seed)
        m = int(rng.integers(2, 4))
        qv = rng.uniform(-1, 1, g.n_nodes)
        q = ScalarField(g, qv * rng.uniform(0.1, 10.0) / np.max(np.abs(qv)))
        fb = rng.standard_normal(g.n_boundary)
        fb *= rng.uniform(0.2, 1.0) * DELTA_DEFAULT / np.max(np.abs(fb))
        prob = SemilinearProblem(g, q, m, BoundaryData(g, fb))
        report = {}
        u = solve_semilinear(prob, report=report)
        assert report["iterations"] <= 8
        assert np.max(np.abs(u.values)) <= 2.0 * np.max(np.abs(fb)) + 1e-12
