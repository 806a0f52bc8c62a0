"""Newton solution of the semilinear Dirichlet problem and its boundary-flux map.

The equation is

    lap(u) + q * u**m = 0   in the interior,
    u = f                   on the boundary,

with integer m >= 2 and a real potential q. For small boundary data the
problem has a unique small solution, and Newton iteration started from the
harmonic extension of f reaches it in a handful of steps. "Small" is
operationalized two ways: the constructor enforces a budget ||f||_inf < delta,
and every accepted Newton iterate must satisfy the branch guard
||u||_inf <= 2 ||f||_inf. An iterate that escapes the guard means the data was
too large for the small-solution branch, and that is reported as an error
rather than silently converging to some other solution.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .grid import BoundaryData, Grid, ScalarField, apply_laplacian, normal_derivative, boundary_pair
from .linear_solve import LinearSystem, SolverError, harmonic_extension

# Default smallness budget, calibrated for m=2 and ||q||_inf <= 10. Larger
# data frequently still converges but sits outside the regime the guard is
# meant to certify; callers can widen it explicitly.
DELTA_DEFAULT = 5e-2


class NonConvergence(SolverError):
    """Newton failed to meet the residual tolerance within its budgets."""


class BranchEscape(SolverError):
    """An iterate violated the small-solution guard ||u||_inf <= 2 ||f||_inf."""


@dataclass(frozen=True)
class NewtonParams:
    max_iter: int = 50
    residual_tol: float = 1e-12  # relative to max(1, ||f||_inf)
    damping_limit: int = 20      # step halvings per iteration

    def __post_init__(self):
        if self.max_iter < 1 or self.damping_limit < 0:
            raise ValueError("iteration budgets must be positive")
        if self.residual_tol <= 0:
            raise ValueError("residual_tol must be positive")


@dataclass
class SemilinearProblem:
    grid: Grid
    q: ScalarField
    m: int
    f: BoundaryData
    delta: float = DELTA_DEFAULT

    def __post_init__(self):
        if not isinstance(self.m, (int, np.integer)) or self.m < 2:
            raise ValueError(f"m must be an integer >= 2, got {self.m!r}")
        if np.iscomplexobj(self.q.values):
            raise ValueError("q must be real")
        if self.q.grid is not self.grid or self.f.grid is not self.grid:
            raise ValueError("q and f must live on the problem grid")
        if self.delta <= 0:
            raise ValueError("delta must be positive")
        if self.f.sup_norm() >= self.delta:
            raise ValueError(
                f"boundary data too large: ||f||_inf = {self.f.sup_norm():.3e} "
                f">= delta = {self.delta:.3e}")


@dataclass
class DNRecord:
    """Boundary flux of the small solution, plus the paired scalar if a
    measure was supplied."""
    flux: BoundaryData
    pair: float | None
    iterations: int


def _residual(g: Grid, qv: np.ndarray, m: int, u: np.ndarray) -> np.ndarray:
    """Interior residual of lap(u) + q u^m (boundary rows excluded)."""
    lap = apply_laplacian(g, ScalarField(g, u)).values
    return (lap + qv * u**m)[g.interior_nodes]


def solve_semilinear(p: SemilinearProblem, params: NewtonParams | None = None,
                     report: dict | None = None) -> ScalarField:
    """Newton iteration for the small solution, started from the harmonic
    extension of f.

    If `report` is a dict it is filled in place with iteration diagnostics
    (residual and update norms per step, damping counts).
    """
    params = params or NewtonParams()
    g = p.grid
    qv = p.q.values
    fsup = p.f.sup_norm()
    tol = params.residual_tol * max(1.0, fsup)
    guard = 2.0 * fsup

    u = harmonic_extension(g, p.f).values.copy()
    res_norms, upd_norms, dampings = [], [], []

    def record(iters):
        if report is not None:
            report.update(iterations=iters, residual_norms=res_norms,
                          update_norms=upd_norms, dampings=dampings)

    rn = float(np.max(np.abs(_residual(g, qv, p.m, u)))) if g.n_interior else 0.0
    res_norms.append(rn)
    for it in range(params.max_iter):
        if rn <= tol:
            record(it)
            return ScalarField(g, u)
        # Jacobian: lap + m q u^(m-1); LinearSystem solves lap(d) + c d = F
        c = ScalarField(g, p.m * qv * u**(p.m - 1))
        sys = LinearSystem(g, c=c)
        r_full = np.zeros(g.n_nodes)
        r_full[g.interior_nodes] = _residual(g, qv, p.m, u)
        delta_u = sys.solve(F=ScalarField(g, -r_full), bc=BoundaryData.zeros(g)).values

        step, accepted = 1.0, False
        for halving in range(params.damping_limit + 1):
            u_try = u + step * delta_u
            rn_try = float(np.max(np.abs(_residual(g, qv, p.m, u_try))))
            if rn_try < rn or rn_try <= tol:
                u, rn = u_try, rn_try
                res_norms.append(rn)
                upd_norms.append(step * float(np.max(np.abs(delta_u))))
                dampings.append(halving)
                accepted = True
                break
            step *= 0.5
        if not accepted:
            record(it + 1)
            raise NonConvergence(
                f"no residual decrease after {params.damping_limit} halvings "
                f"(residual {rn:.3e}, iteration {it})")
        if float(np.max(np.abs(u))) > guard * (1.0 + 1e-12) + 1e-300:
            record(it + 1)
            raise BranchEscape(
                f"iterate norm {np.max(np.abs(u)):.3e} exceeds small-branch "
                f"guard 2||f||_inf = {guard:.3e}")

    if rn <= tol:
        record(params.max_iter)
        return ScalarField(g, u)
    record(params.max_iter)
    raise NonConvergence(
        f"residual {rn:.3e} > tol {tol:.3e} after {params.max_iter} iterations")


def dn_map(p: SemilinearProblem, params: NewtonParams | None = None,
           measure=None) -> DNRecord:
    """Boundary flux of the small solution; optionally paired against a measure.

    `measure` is anything boundary_pair accepts (a BoundaryMeasure or a raw
    density array over boundary nodes).
    """
    report: dict = {}
    u = solve_semilinear(p, params, report=report)
    flux = normal_derivative(p.grid, u)
    pair = None
    if measure is not None:
        pair = float(boundary_pair(p.grid, flux, measure))
    return DNRecord(flux=flux, pair=pair, iterations=report.get("iterations", 0))
