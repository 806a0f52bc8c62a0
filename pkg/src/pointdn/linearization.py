"""Mixed-difference extraction of the m-th derivative of the flux functional,
and its two exact discrete counterparts.

The object of interest is the m-linear form

    B(h_1, ..., h_m) = d^m/deps_1...deps_m  < flux of u_{f_eps}, mu >  at eps=0,

where f_eps = eps_1 h_1 + ... + eps_m h_m and u_f is the small solution of
lap(u) + q u^m = 0. Three independent evaluations are implemented:

  * mixed_difference_dn: central differences over the 2^m sign corners of the
    eps-box, each corner one nonlinear solve. Optional Richardson levels halve
    eps and cancel the even-order truncation terms.
  * cascade_oracle: the linearization cascade. Each v_j is harmonic; the
    m-th order term w solves lap(w) = -(m!) q v_1...v_m with zero trace. This
    is the exact discrete derivative, no difference truncation.
  * volume_identity: -(m!) int q v_1...v_m Psi dx, the volume form obtained by
    pairing the cascade source against the measure solution Psi.

Agreement of the three is the computational heart of the package: mixed vs
cascade validates the difference scheme, cascade vs volume validates the
flux/volume duality.
"""

from __future__ import annotations

import itertools
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .grid import (BoundaryData, Grid, ScalarField, boundary_pair,
                   normal_derivative, volume_integral)
from .linear_solve import harmonic_extension, solve_dirichlet
from .measure_data import BoundaryMeasure, solve_measure_dirichlet
from .semilinear import DELTA_DEFAULT, NewtonParams, SemilinearProblem, solve_semilinear


@dataclass
class LinearizationPlan:
    grid: Grid
    q: ScalarField
    m: int
    directions: list          # m BoundaryData entries
    measure: BoundaryMeasure
    epsilons: list | None = None   # default 1e-2 / ||h_j||_inf
    richardson: int = 1
    delta: float = DELTA_DEFAULT
    newton: NewtonParams = field(default_factory=NewtonParams)

    def __post_init__(self):
        if self.m < 2:
            raise ValueError("m must be >= 2")
        if len(self.directions) != self.m:
            raise ValueError(f"need {self.m} directions, got {len(self.directions)}")
        if self.richardson < 0:
            raise ValueError("richardson must be >= 0")
        sups = [h.sup_norm() for h in self.directions]
        if min(sups) == 0.0:
            raise ValueError("directions must be nonzero")
        if self.epsilons is None:
            self.epsilons = [1e-2 / s for s in sups]
        if len(self.epsilons) != self.m or min(self.epsilons) <= 0:
            raise ValueError("need m positive step sizes")
        budget = sum(e * s for e, s in zip(self.epsilons, sups))
        if budget >= self.delta:
            raise ValueError(
                f"corner data budget sum(eps_j ||h_j||) = {budget:.3e} >= "
                f"delta = {self.delta:.3e}; every corner must be admissible")


def _corner_value(plan: LinearizationPlan, signs, scale: float) -> float:
    """One corner of the eps-box: nonlinear solve + flux pairing."""
    g = plan.grid
    f = np.zeros(g.n_boundary)
    for s_j, e_j, h_j in zip(signs, plan.epsilons, plan.directions):
        f = f + (s_j * e_j * scale) * h_j.values
    prob = SemilinearProblem(g, plan.q, plan.m, BoundaryData(g, f), plan.delta)
    u = solve_semilinear(prob, plan.newton)
    return float(boundary_pair(g, normal_derivative(g, u), plan.measure))


def _central_difference(plan: LinearizationPlan, scale: float, threads: int) -> float:
    signs_list = list(itertools.product((-1.0, 1.0), repeat=plan.m))
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            values = list(pool.map(lambda s: _corner_value(plan, s, scale), signs_list))
    else:
        values = [_corner_value(plan, s, scale) for s in signs_list]
    total = 0.0
    for signs, val in zip(signs_list, values):   # fixed lexicographic order
        total += float(np.prod(signs)) * val
    denom = float(np.prod([2.0 * e * scale for e in plan.epsilons]))
    return total / denom


def mixed_difference_dn(plan: LinearizationPlan, threads: int = 1) -> float:
    """Central mixed difference of the paired DN functional at eps = 0.

    With richardson = r, evaluates the difference at eps, eps/2, ..., eps/2^r
    and eliminates the even-order error terms through the standard
    factor-of-four extrapolation table.
    """
    if plan.m > 6:
        raise ValueError("2^m corner solves refused for m > 6")
    for h in plan.directions:
        if np.iscomplexobj(h.values):
            raise ValueError("mixed differences need real directions; "
                             "split complex traces at the caller")
    levels = plan.richardson
    table = [_central_difference(plan, 0.5**k, threads) for k in range(levels + 1)]
    for col in range(1, levels + 1):
        fac = 4.0**col
        table = [(fac * table[i + 1] - table[i]) / (fac - 1.0)
                 for i in range(len(table) - 1)]
    return table[0]


def cascade_fields(plan: LinearizationPlan):
    """The harmonic directions v_j and the order-m cascade solution w."""
    g = plan.grid
    vs = [harmonic_extension(g, h) for h in plan.directions]
    prod = vs[0].values.copy()
    for v in vs[1:]:
        prod = prod * v.values
    F = ScalarField(g, -float(math.factorial(plan.m)) * plan.q.values * prod)
    w = solve_dirichlet(g, F=F)
    return vs, w


def cascade_oracle(plan: LinearizationPlan):
    """Exact discrete m-th derivative via the linearization cascade."""
    g = plan.grid
    _, w = cascade_fields(plan)
    val = boundary_pair(g, normal_derivative(g, w), plan.measure)
    return val if np.iscomplexobj(w.values) else float(val)


def volume_identity(plan: LinearizationPlan):
    """-(m!) int q v_1...v_m Psi dx with Psi the measure solution."""
    g = plan.grid
    vs = [harmonic_extension(g, h) for h in plan.directions]
    prod = vs[0].values.copy()
    for v in vs[1:]:
        prod = prod * v.values
    psi = solve_measure_dirichlet(g, plan.measure)
    mfact = float(math.factorial(plan.m))
    val = -mfact * volume_integral(g, ScalarField(g, plan.q.values * prod * psi.values))
    return val if np.iscomplexobj(prod) else float(val)


def three_way_report(plan: LinearizationPlan, threads: int = 1) -> dict:
    """All three evaluations plus their relative gaps (for the identity suite)."""
    mixed = mixed_difference_dn(plan, threads=threads)
    cascade = cascade_oracle(plan)
    volume = volume_identity(plan)
    ref = max(abs(cascade), 1e-300)
    return {
        "mixed": mixed,
        "cascade": cascade,
        "volume": volume,
        "rel_mixed_cascade": abs(mixed - cascade) / ref,
        "rel_cascade_volume": abs(cascade - volume) / ref,
    }
