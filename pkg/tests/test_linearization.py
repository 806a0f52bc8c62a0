import numpy as np
import pytest

from pointdn.grid import BoundaryData, ScalarField, boundary_bump, trace_data
from pointdn.linearization import (LinearizationPlan, cascade_fields,
                                   cascade_oracle, mixed_difference_dn,
                                   three_way_report, volume_identity)
from pointdn.measure_data import mollified_point_mass, uniform_measure


def two_bumps(g):
    return [boundary_bump(g, 0.5, 0.6), boundary_bump(g, 0.9, 0.6)]


def point_mu(g):
    return mollified_point_mass(g, (0.5, 1.0), 0.1)


class TestPlanValidation:
    def test_direction_count_must_match_order(self, g41):
        with pytest.raises(ValueError):
            LinearizationPlan(g41, ScalarField.zeros(g41), 3, two_bumps(g41),
                              point_mu(g41))

    def test_zero_direction_rejected(self, g41):
        dirs = [two_bumps(g41)[0], BoundaryData.zeros(g41)]
        with pytest.raises(ValueError):
            LinearizationPlan(g41, ScalarField.zeros(g41), 2, dirs, point_mu(g41))

    def test_step_budget_must_stay_below_delta(self, g41):
        with pytest.raises(ValueError):
            LinearizationPlan(g41, ScalarField.zeros(g41), 2, two_bumps(g41),
                              point_mu(g41), epsilons=[0.03, 0.03])

    def test_default_steps_scale_with_direction_size(self, g41):
        big = boundary_bump(g41, 0.5, 0.6, height=4.0)
        plan = LinearizationPlan(g41, ScalarField.zeros(g41), 2,
                                 [big, two_bumps(g41)[1]], point_mu(g41))
        assert plan.epsilons[0] == pytest.approx(1e-2 / 4.0)
        assert plan.epsilons[1] == pytest.approx(1e-2)

    def test_high_order_corner_blowup_refused(self, g41):
        h = boundary_bump(g41, 0.5, 0.6)
        plan = LinearizationPlan(g41, ScalarField.zeros(g41), 7, [h] * 7,
                                 point_mu(g41), epsilons=[1e-3] * 7)
        with pytest.raises(ValueError):
            mixed_difference_dn(plan)

    def test_complex_directions_refused_by_difference_route(self, g41):
        h1 = BoundaryData(g41, np.exp(1j * g41.boundary_s))
        h2 = two_bumps(g41)[1]
        plan = LinearizationPlan(g41, ScalarField.zeros(g41), 2, [h1, h2],
                                 point_mu(g41))
        with pytest.raises(ValueError):
            mixed_difference_dn(plan)


class TestZeroPotential:
    def test_cascade_vanishes_identically(self, g41):
        plan = LinearizationPlan(g41, ScalarField.zeros(g41), 2,
                                 two_bumps(g41), point_mu(g41))
        assert cascade_oracle(plan) == 0.0
        assert volume_identity(plan) == 0.0

    def test_mixed_difference_sits_at_rounding_floor(self, g41):
        # the flux map is linear when q = 0, so the second difference
        # cancels to roundoff
        plan = LinearizationPlan(g41, ScalarField.zeros(g41), 2,
                                 two_bumps(g41), point_mu(g41))
        assert abs(mixed_difference_dn(plan)) < 1e-9


class TestAgreement:
    def test_three_way_report_structure_and_gaps(self, g41):
        plan = LinearizationPlan(g41, ScalarField.constant(g41, 1.0), 2,
                                 two_bumps(g41), point_mu(g41))
        rep = three_way_report(plan)
        assert set(rep) == {"mixed", "cascade", "volume",
                            "rel_mixed_cascade", "rel_cascade_volume"}
        assert rep["rel_mixed_cascade"] <= 1e-3
        # cascade and volume differ by the O(h^2) pairing discretization,
        # about 3.1e-3 on this grid; the refinement test below pins the rate
        assert rep["rel_cascade_volume"] <= 5e-3
        assert rep["cascade"] != 0.0

    def test_richardson_tightens_the_difference(self, g41):
        q = ScalarField.constant(g41, 1.0)
        exact = cascade_oracle(LinearizationPlan(
            g41, q, 2, two_bumps(g41), point_mu(g41)))
        errs = []
        for levels in (0, 1):
            plan = LinearizationPlan(g41, q, 2, two_bumps(g41), point_mu(g41),
                                     richardson=levels)
            errs.append(abs(mixed_difference_dn(plan) - exact))
        assert errs[1] < errs[0]

    def test_constant_traces_uniform_measure_closed_form(self, g41):
        # v1 = v2 = 1 and Psi = 1/4 make the volume pairing exactly -1/2
        ones = trace_data(g41, lambda x, y: 0 * x + 1.0)
        plan = LinearizationPlan(g41, ScalarField.constant(g41, 1.0), 2,
                                 [ones, ones], uniform_measure(g41))
        assert volume_identity(plan) == pytest.approx(-0.5, abs=1e-13)
        assert cascade_oracle(plan) == pytest.approx(-0.5, abs=5e-3)


class TestCascadeStructure:
    def test_multilinearity_in_direction_scale(self, g41):
        q = ScalarField.constant(g41, 1.0)
        h1, h2 = two_bumps(g41)
        base = cascade_oracle(LinearizationPlan(g41, q, 2, [h1, h2], point_mu(g41)))
        h1x2 = BoundaryData(g41, 2.0 * h1.values, h1.support_mask)
        doubled = cascade_oracle(LinearizationPlan(g41, q, 2, [h1x2, h2],
                                                   point_mu(g41)))
        assert doubled == pytest.approx(2.0 * base, rel=1e-12)

    def test_complex_directions_expand_multilinearly(self, g41):
        q = ScalarField.constant(g41, 1.0)
        mu = point_mu(g41)
        a, b = two_bumps(g41)
        t = BoundaryData(g41, a.values + 1j * b.values)

        def casc(d1, d2):
            return cascade_oracle(LinearizationPlan(g41, q, 2, [d1, d2], mu))

        full = casc(t, t)
        want = casc(a, a) - casc(b, b) + 2j * casc(a, b)
        assert full == pytest.approx(want, rel=1e-10)

    def test_cascade_fields_satisfy_their_equations(self, g41):
        from pointdn.grid import apply_laplacian
        q = ScalarField.constant(g41, 2.0)
        h1, h2 = two_bumps(g41)
        plan = LinearizationPlan(g41, q, 2, [h1, h2], point_mu(g41))
        vs, w = cascade_fields(plan)
        # directions extend harmonically
        lap_v = apply_laplacian(g41, vs[0])
        assert np.max(np.abs(lap_v.values[g41.interior_nodes])) < 1e-8
        # w carries the product load with the order factorial
        lap_w = apply_laplacian(g41, w)
        want = -2.0 * q.values * vs[0].values * vs[1].values
        gap = lap_w.values[g41.interior_nodes] - want[g41.interior_nodes]
        assert np.max(np.abs(gap)) < 1e-8
        # and vanishes on the boundary
        assert np.max(np.abs(w.values[g41.boundary_nodes])) == 0.0

    def test_volume_route_matches_cascade_at_refinement(self, g41, g81):
        # the two routes converge to each other at second order
        gaps = []
        for g in (g41, g81):
            plan = LinearizationPlan(g, ScalarField.constant(g, 1.0), 2,
                                     two_bumps(g), point_mu(g))
            rep = three_way_report(plan)
            gaps.append(abs(rep["cascade"] - rep["volume"]))
        assert 3.5 <= gaps[0] / gaps[1] <= 4.5
