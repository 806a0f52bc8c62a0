"""Recovery of the potential q from fixed-measure boundary flux data.

Two pipelines share the measurement model but differ in the probing traces:

  * Fourier mode (full boundary): trace pairs are restrictions of the complex
    exponentials e^{i zeta.x}, e^{i eta.x} with zeta + eta = k and
    zeta.zeta = eta.eta = 0, so both factors are harmonic and their product is
    exactly e^{ik.x}. Each wavevector on the 2pi-lattice then delivers one
    Fourier moment of q*Phi, and q is read off by a trigonometric fit divided
    pointwise by the weight Phi (masked where Phi is too small to divide by).

  * Moment mode (data supported in a sub-arc Gamma): trace pairs come from a
    tiered family of overlapping boundary bumps on Gamma. Each pair gives one
    volume moment of q against the kernel v_i*v_j*Phi, and q is recovered by
    first-order Tikhonov least squares with an L-curve-selected lambda.

The weight field Phi = v_3...v_m * Psi collects the auxiliary directions and
the measure solution; the positivity of every factor (maximum principle) is
what makes division and moment inversion meaningful, and it is checked.

Measurement values are order-m mixed differences of the paired flux
functional. For complex traces the difference scheme runs on real and
imaginary parts separately and is recombined by multilinearity. The cascade
route (exact discrete derivative) is also available and is the default data
generator for experiment-scale runs, where difference noise at tiny eps would
otherwise dominate; the equivalence of the two routes at moderate eps is part
of the test suite.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sparse
import scipy.sparse.linalg as spla

from .grid import (BoundaryData, Grid, ScalarField, gamma_mask,
                   quadrature_weights, smooth_bump, wrapped_distance)
from .linear_solve import harmonic_extension
from .linearization import LinearizationPlan, cascade_oracle, mixed_difference_dn
from .measure_data import BoundaryMeasure, solve_measure_dirichlet
from .semilinear import DELTA_DEFAULT, NewtonParams


# ---------------------------------------------------------------------------
# Calderon exponential pairs


@dataclass(frozen=True)
class CalderonPair:
    k: tuple          # real wavevector
    zeta: tuple       # complex, zeta.zeta = 0
    eta: tuple        # complex, eta.eta = 0, zeta + eta = k


def calderon_pair(k) -> CalderonPair:
    """zeta = (k + i k_perp)/2, eta = (k - i k_perp)/2, k_perp = (-k2, k1)."""
    k1, k2 = float(k[0]), float(k[1])
    if k1 == 0.0 and k2 == 0.0:
        raise ValueError("k must be nonzero")
    zeta = ((k1 - 1j * k2) / 2.0, (k2 + 1j * k1) / 2.0)
    eta = ((k1 + 1j * k2) / 2.0, (k2 - 1j * k1) / 2.0)
    return CalderonPair(k=(k1, k2), zeta=zeta, eta=eta)


def exponential_trace(g: Grid, vec) -> BoundaryData:
    """Boundary restriction of e^{i vec . x} for a (possibly complex) vector."""
    xb = g.x[g.boundary_nodes]
    yb = g.y[g.boundary_nodes]
    return BoundaryData(g, np.exp(1j * (vec[0] * xb + vec[1] * yb)))


def fourier_lattice(kmax: float) -> list:
    """Wavevectors 2*pi*(j1, j2) with |k| <= kmax, origin included.

    Order is deterministic: by |k|^2, then lexicographic in (j1, j2).
    """
    if kmax < 2.0 * np.pi:
        raise ValueError("kmax below the first lattice shell 2*pi")
    jmax = int(np.floor(kmax / (2.0 * np.pi)))
    ks = []
    for j1 in range(-jmax, jmax + 1):
        for j2 in range(-jmax, jmax + 1):
            k = (2.0 * np.pi * j1, 2.0 * np.pi * j2)
            if np.hypot(*k) <= kmax + 1e-12:
                ks.append(k)
    ks.sort(key=lambda k: (k[0] ** 2 + k[1] ** 2, k))
    return ks


# ---------------------------------------------------------------------------
# measurement sets


@dataclass(frozen=True)
class FourierSpec:
    kmax: float


@dataclass(frozen=True)
class MomentSpec:
    gamma: tuple               # (s_start, s_end) arclength interval
    basis_count: int
    pairs: tuple               # tuple of (i, j) index pairs


@dataclass
class MeasurementSet:
    grid: Grid                 # data-generation grid
    mode: object               # FourierSpec | MomentSpec
    aux: list                  # h_3..h_m directions (empty for m = 2)
    measure: BoundaryMeasure
    m: int
    values: np.ndarray
    provenance: str            # "cascade" | "mixed-difference"

    def __post_init__(self):
        for h in self.aux:
            v = h.values
            if np.iscomplexobj(v) or np.min(v) < 0 or np.max(v) <= 0:
                raise ValueError("auxiliary directions must be nonnegative and "
                                 "positive somewhere")


def weight_field(g: Grid, aux, measure: BoundaryMeasure) -> ScalarField:
    """Phi = v_3 ... v_m * Psi (just Psi when there are no auxiliaries)."""
    phi = solve_measure_dirichlet(g, measure).values.copy()
    for h in aux:
        phi *= harmonic_extension(g, h).values
    return ScalarField(g, phi)


def check_positive_interior(g: Grid, u: ScalarField, what: str = "field"):
    interior = u.values[g.interior_nodes]
    if interior.size and np.min(interior) <= 0.0:
        raise ValueError(f"{what} must be positive at interior nodes "
                         f"(min = {np.min(interior):.3e})")


def _nonzero(bd: BoundaryData) -> bool:
    return bd.sup_norm() > 0.0


def simulate_measurement(q_true: ScalarField, trace1: BoundaryData,
                         trace2: BoundaryData, aux, measure: BoundaryMeasure,
                         m: int, method: str = "mixed-difference",
                         richardson: int = 1, delta: float = DELTA_DEFAULT,
                         newton: NewtonParams | None = None,
                         threads: int = 1):
    """Order-m derivative of the paired flux map in directions
    (trace1, trace2, aux...).

    method="mixed-difference" runs 2^m-corner central differences per real
    part; complex traces expand by multilinearity,
    D(a+ib, c+id, ...) = D(a,c,...) - D(b,d,...) + i [D(a,d,...) + D(b,c,...)].
    method="cascade" evaluates the exact discrete derivative instead (the
    linear cascade handles complex directions natively).
    """
    g = q_true.grid
    newton = newton or NewtonParams()

    def plan_for(directions):
        return LinearizationPlan(g, q_true, m, list(directions), measure,
                                 richardson=richardson, delta=delta, newton=newton)

    if method == "cascade":
        return cascade_oracle(plan_for([trace1, trace2, *aux]))
    if method != "mixed-difference":
        raise ValueError(f"unknown measurement method {method!r}")

    def D(d1: BoundaryData, d2: BoundaryData) -> float:
        # multilinear form vanishes when any direction is identically zero
        if not (_nonzero(d1) and _nonzero(d2)):
            return 0.0
        return mixed_difference_dn(plan_for([d1, d2, *aux]), threads=threads)

    def split(t: BoundaryData):
        if np.iscomplexobj(t.values):
            return (BoundaryData(g, np.ascontiguousarray(t.values.real), t.support_mask),
                    BoundaryData(g, np.ascontiguousarray(t.values.imag), t.support_mask))
        return t, None

    a, b = split(trace1)
    c, d = split(trace2)
    if b is None and d is None:
        return D(a, c)
    b = b if b is not None else BoundaryData.zeros(g)
    d = d if d is not None else BoundaryData.zeros(g)
    return complex(D(a, c) - D(b, d), D(a, d) + D(b, c))


def fourier_measurements(q_true: ScalarField, kmax: float, measure: BoundaryMeasure,
                         m: int = 2, aux=(), method: str = "cascade",
                         **sim_kw) -> MeasurementSet:
    """One measurement per lattice wavevector; k = 0 uses constant traces."""
    g = q_true.grid
    ones = BoundaryData(g, np.ones(g.n_boundary))
    values = []
    for k in fourier_lattice(kmax):
        if k == (0.0, 0.0):
            t1, t2 = ones, ones
        else:
            pair = calderon_pair(k)
            t1 = exponential_trace(g, pair.zeta)
            t2 = exponential_trace(g, pair.eta)
        values.append(simulate_measurement(q_true, t1, t2, list(aux), measure, m,
                                           method=method, **sim_kw))
    return MeasurementSet(grid=g, mode=FourierSpec(kmax=kmax), aux=list(aux),
                          measure=measure, m=m,
                          values=np.asarray(values, dtype=complex),
                          provenance=method)


# ---------------------------------------------------------------------------
# Fourier-mode inversion


@dataclass
class ReconstructionResult:
    q_rec: ScalarField
    lam: float | None
    residual: float
    rel_l2_error: float | None
    phi: ScalarField
    mask: np.ndarray            # True where the reconstruction is reported
    condition: float | None = None
    lcurve: list | None = None  # (lam, residual, seminorm) sweep rows

    @property
    def masked_fraction(self) -> float:
        return 1.0 - float(np.count_nonzero(self.mask)) / self.mask.size


def relative_l2(g: Grid, q_rec: ScalarField, q_true: ScalarField,
                mask: np.ndarray | None = None) -> float:
    w = quadrature_weights(g)
    if mask is not None:
        w = w * mask
    num = np.sum(w * np.abs(q_rec.values - q_true.values) ** 2)
    den = np.sum(w * np.abs(q_true.values) ** 2)
    if den == 0.0:
        raise ValueError("ground truth vanishes on the compared region")
    return float(np.sqrt(num / den))


def recover_q_fourier(mset: MeasurementSet, g_recon: Grid,
                      phi_floor: float = 1e-3,
                      q_true: ScalarField | None = None) -> ReconstructionResult:
    """Trigonometric inversion of the moments -b(k)/m! of q*Phi.

    The lattice exponentials are fit to the measured moments by a square
    Gram system assembled with the reconstruction grid's quadrature (the
    2pi-lattice is trapezoid-orthogonal, so the system is perfectly
    conditioned); the fit is divided pointwise by Phi and masked where
    Phi < phi_floor * max(Phi).
    """
    if not isinstance(mset.mode, FourierSpec):
        raise ValueError("measurement set is not in Fourier mode")
    g = g_recon
    phi = weight_field(g, [_transplant(h, g) for h in mset.aux],
                       _remeasure(mset.measure, g))
    check_positive_interior(g, phi, "Phi")

    ks = fourier_lattice(mset.mode.kmax)
    moments = -np.asarray(mset.values, dtype=complex) / math.factorial(mset.m)
    w = quadrature_weights(g)
    E = np.array([np.exp(1j * (k[0] * g.x + k[1] * g.y)) for k in ks])
    G = (E * w) @ E.T          # G[a,b] = int e^{i(k_a+k_b).x} dx
    cond = float(np.linalg.cond(G))
    coeff = np.linalg.solve(G, moments)
    qphi = (coeff @ E).real
    phimax = float(np.max(phi.values))
    mask = phi.values >= phi_floor * phimax
    q_vals = np.zeros(g.n_nodes)
    q_vals[mask] = qphi[mask] / phi.values[mask]
    q_rec = ScalarField(g, q_vals)

    residual = float(np.linalg.norm(G @ coeff - moments))
    rel = relative_l2(g, q_rec, q_true, mask) if q_true is not None else None
    return ReconstructionResult(q_rec=q_rec, lam=None, residual=residual,
                                rel_l2_error=rel, phi=phi, mask=mask,
                                condition=cond)


def _transplant(bd: BoundaryData, g: Grid) -> BoundaryData:
    """Move boundary values to another grid by periodic arclength interpolation."""
    src = bd.grid
    if src is g:
        return bd
    s_src = np.concatenate([src.boundary_s, [4.0]])
    vals = np.concatenate([bd.values, bd.values[:1]])
    out = np.interp(g.boundary_s, s_src, vals.real)
    if np.iscomplexobj(vals):
        out = out + 1j * np.interp(g.boundary_s, s_src, vals.imag)
    return BoundaryData(g, out)


def _remeasure(mu: BoundaryMeasure, g: Grid) -> BoundaryMeasure:
    """Rebuild a measure on another grid.

    Point masses are re-mollified from their descriptor; generic densities
    are transplanted by arclength interpolation (mass is renormalized by the
    density constructor's convention only insofar as interpolation preserves
    it to quadrature accuracy, which suffices for the weight field).
    """
    from .measure_data import PointMass, density_measure, mollified_point_mass
    if g is mu.grid:
        return mu
    if isinstance(mu.descriptor, PointMass):
        return mollified_point_mass(g, mu.descriptor.x0, mu.descriptor.sigma)
    src = mu.grid
    wrapped = np.concatenate([mu.density, mu.density[:1]])
    s_src = np.concatenate([src.boundary_s, [4.0]])
    return density_measure(g, np.interp(g.boundary_s, s_src, wrapped))


# ---------------------------------------------------------------------------
# Moment-mode basis, assembly, Tikhonov


def bump_basis(g: Grid, gamma: tuple, count: int) -> list:
    """Tiered overlapping bump family on the arc gamma = (s_start, s_end).

    Three width tiers (30%, 15%, 8% of the arc length), split roughly
    1:2:2 in count. Overlap is deliberate: wide bumps carry depth
    sensitivity, narrow ones resolve tangential detail.
    """
    s0, s1 = float(gamma[0]), float(gamma[1])
    length = (s1 - s0) % 4.0 or 4.0
    if count < 3:
        raise ValueError("need at least 3 bumps for the tiered basis")
    n_wide = max(1, count // 5)
    n_med = max(1, (2 * count) // 5)
    n_narrow = count - n_wide - n_med
    tiers = [(n_wide, 0.30 * length), (n_med, 0.15 * length), (n_narrow, 0.08 * length)]
    basis = []
    mask = gamma_mask(g, s0, s1)
    for n_tier, hw in tiers:
        if n_tier == 1:
            centers = [s0 + length / 2.0]
        else:
            centers = [s0 + hw + (length - 2.0 * hw) * i / (n_tier - 1)
                       for i in range(n_tier)]
        for c in centers:
            vals = smooth_bump(wrapped_distance(g.boundary_s, c % 4.0) / hw)
            basis.append(BoundaryData(g, np.where(mask, vals, 0.0), mask))
    return basis


def all_pairs(count: int) -> tuple:
    return tuple((i, j) for i in range(count) for j in range(i, count))


def moment_measurements(q_true: ScalarField, gamma: tuple, basis_count: int,
                        measure: BoundaryMeasure, m: int = 2, aux=(),
                        method: str = "cascade", **sim_kw) -> MeasurementSet:
    g = q_true.grid
    basis = bump_basis(g, gamma, basis_count)
    pairs = all_pairs(basis_count)
    values = [simulate_measurement(q_true, basis[i], basis[j], list(aux),
                                   measure, m, method=method, **sim_kw)
              for (i, j) in pairs]
    return MeasurementSet(grid=g, mode=MomentSpec(gamma=tuple(gamma),
                                                  basis_count=basis_count,
                                                  pairs=pairs),
                          aux=list(aux), measure=measure, m=m,
                          values=np.asarray(values, dtype=float),
                          provenance=method)


def assemble_moment_system(g_recon: Grid, mset: MeasurementSet):
    """Rows A[pair, node] = quad_weight * v_i * v_j * Phi; b = -values/m!."""
    if not isinstance(mset.mode, MomentSpec):
        raise ValueError("measurement set is not in moment mode")
    g = g_recon
    basis = bump_basis(g, mset.mode.gamma, mset.mode.basis_count)
    aux = [_transplant(h, g) for h in mset.aux]
    phi = weight_field(g, aux, _remeasure(mset.measure, g))
    check_positive_interior(g, phi, "Phi")
    vs = [harmonic_extension(g, h).values for h in basis]
    w = quadrature_weights(g)
    A = np.array([w * vs[i] * vs[j] * phi.values for (i, j) in mset.mode.pairs])
    b = -np.asarray(mset.values, dtype=float) / math.factorial(mset.m)
    return A, b, phi


def _gradient_matrix(n: int) -> sparse.csr_matrix:
    """Forward-difference edge incidence on the n x n node graph."""
    idx = np.arange(n * n).reshape(n, n)
    rows, cols, vals = [], [], []
    row = 0
    for a, b in ((idx[:, :-1].ravel(), idx[:, 1:].ravel()),
                 (idx[:-1, :].ravel(), idx[1:, :].ravel())):
        m = len(a)
        r = np.arange(row, row + m)
        rows.extend([r, r])
        cols.extend([a, b])
        vals.extend([np.full(m, -1.0), np.full(m, 1.0)])
        row += m
    return sparse.csr_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(row, n * n))


LCURVE_LAMBDAS = np.logspace(-16, -6, 51)


def lcurve_corner(rows) -> int:
    """Index of the L-curve corner among (lam, residual, seminorm) rows.

    Points left of the residual minimum are discarded (they sit in the
    noise-amplification tail where the curve doubles back), then the corner
    is the maximum Menger curvature on the axis-normalized log-log curve.
    """
    res = [r[1] for r in rows]
    i_min = int(np.argmin(res))
    sub = rows[i_min:]
    if len(sub) < 3:
        return i_min
    lx = np.log10([max(r[1], 1e-300) for r in sub])
    ly = np.log10([max(r[2], 1e-300) for r in sub])
    lx = (lx - lx.min()) / max(lx.max() - lx.min(), 1e-30)
    ly = (ly - ly.min()) / max(ly.max() - ly.min(), 1e-30)
    best_k, best_i = -np.inf, 1
    for i in range(1, len(sub) - 1):
        a = np.array([lx[i - 1], ly[i - 1]])
        b = np.array([lx[i], ly[i]])
        c = np.array([lx[i + 1], ly[i + 1]])
        ab, bc, ca = (np.linalg.norm(b - a), np.linalg.norm(c - b),
                      np.linalg.norm(a - c))
        if ab * bc * ca == 0.0:
            continue
        cross = (b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1])
        curv = 2.0 * cross / (ab * bc * ca)
        if curv > best_k:
            best_k, best_i = curv, i
    return i_min + best_i


def tikhonov_solve(g: Grid, A: np.ndarray, b: np.ndarray,
                   lam: float | str = "lcurve", smoothing: str = "gradient",
                   phi: ScalarField | None = None,
                   q_true: ScalarField | None = None,
                   lambdas=None) -> ReconstructionResult:
    """min ||A q - b||^2 + lam ||L q||^2 over nodal values of q.

    L is the discrete gradient (smoothing="gradient") or the identity.
    lam may be a positive number or "lcurve", which sweeps `lambdas`
    (default LCURVE_LAMBDAS) and picks the corner. The normal equations are
    solved in the dual form through a single sparse factorization of
    L^T L + tau I, so the whole sweep costs one factorization plus one dense
    n_pairs x n_pairs solve per lambda.
    """
    n_nodes = g.n_nodes
    if A.shape[1] != n_nodes:
        raise ValueError("A columns must match grid nodes")
    if smoothing == "gradient":
        L = _gradient_matrix(g.n)
        # tiny ridge removes the constant-vector null space of the gradient
        M = (L.T @ L + 1e-10 * sparse.eye(n_nodes)).tocsc()
    elif smoothing == "identity":
        L = sparse.eye(n_nodes, format="csr")
        M = sparse.eye(n_nodes, format="csc")
    else:
        raise ValueError(f"unknown smoothing {smoothing!r}")

    lu = spla.splu(M)
    W = np.column_stack([lu.solve(A[r]) for r in range(A.shape[0])])
    Gw = A @ W

    def solve_at(l):
        y = np.linalg.solve(Gw + l * np.eye(Gw.shape[0]), b)
        return W @ y

    sweep = None
    if lam == "lcurve":
        lams = LCURVE_LAMBDAS if lambdas is None else np.asarray(lambdas)
        sweep = []
        for l in lams:
            qv = solve_at(l)
            sweep.append((float(l), float(np.linalg.norm(A @ qv - b)),
                          float(np.linalg.norm(L @ qv))))
        lam = sweep[lcurve_corner(sweep)][0]
    elif not (isinstance(lam, (int, float)) and lam > 0):
        raise ValueError("lam must be positive or 'lcurve'")

    qv = solve_at(float(lam))
    q_rec = ScalarField(g, qv)
    residual = float(np.linalg.norm(A @ qv - b))
    mask = np.ones(n_nodes, dtype=bool)
    rel = relative_l2(g, q_rec, q_true) if q_true is not None else None
    return ReconstructionResult(q_rec=q_rec, lam=float(lam), residual=residual,
                                rel_l2_error=rel,
                                phi=phi if phi is not None else ScalarField.zeros(g),
                                mask=mask, lcurve=sweep)


def with_noise(mset: MeasurementSet, rel: float, rng: np.random.Generator) -> MeasurementSet:
    """White Gaussian noise with expected norm rel * ||values||."""
    v = mset.values
    scale = rel * np.linalg.norm(v) / np.sqrt(v.size)
    noise = rng.standard_normal(v.shape)
    if np.iscomplexobj(v):
        noise = (rng.standard_normal(v.shape) + 1j * rng.standard_normal(v.shape)) / np.sqrt(2.0)
    return MeasurementSet(grid=mset.grid, mode=mset.mode, aux=mset.aux,
                          measure=mset.measure, m=mset.m,
                          values=v + scale * noise, provenance=mset.provenance)
