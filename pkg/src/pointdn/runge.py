"""Density experiment: approximating inner-domain harmonic functions by
Green potentials sourced outside.

The outer domain is the unit square; the inner domain is the sub-rectangle
below a horizontal split line, sharing its bottom, left, and right sides
with the square. Functions that are discretely harmonic on the inner
rectangle and vanish on those three shared sides are fit, in the weighted
L2 norm of the rectangle, by combinations of discrete Green columns whose
unit sources sit on a line strictly inside the strip above the split.

Every such combination is harmonic on the inner rectangle and exactly zero
on the shared sides by construction, so the experiment isolates the density
question: how fast does the span of finitely many exterior columns fill the
admissible space as sources are added? No rate is claimed, only the measured
monotone decrease; the negative control (a target with nonzero shared-side
trace) shows the zero-trace hypothesis is doing real work.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sparse
import scipy.sparse.linalg as spla

from .grid import Grid, ScalarField, smooth_bump
from .linear_solve import solve_dirichlet

N_SOURCE_SLOTS = 64
SVD_CUTOFF = 1e-12


@dataclass
class NestedDomains:
    """Unit square with an inner rectangle [0,1] x [0, split] below a grid line.

    split_index is the row index of the split line (the free side of the
    inner rectangle); sources occupy a horizontal line of N_SOURCE_SLOTS
    equispaced interior nodes strictly above it. Taking every (64/m)-th slot
    yields nested source sets for m = 8, 16, 32, 64.
    """

    grid: Grid
    split_index: int
    source_row: int | None = None
    _cache: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        g, ia = self.grid, self.split_index
        if not (1 <= ia <= g.n - 3):
            raise ValueError("split line must be interior with room for sources above")
        if self.source_row is None:
            self.source_row = (ia + g.n - 1) // 2
        if not (ia < self.source_row < g.n - 1):
            raise ValueError("source row must lie strictly between the split "
                             "line and the top side")
        # equispaced slot abscissas, snapped to interior nodes
        xs = (np.arange(N_SOURCE_SLOTS) + 0.5) / N_SOURCE_SLOTS
        ix = np.clip(np.rint(xs / g.h).astype(int), 1, g.n - 2)
        if len(np.unique(ix)) != N_SOURCE_SLOTS:
            raise ValueError(f"grid too coarse to host {N_SOURCE_SLOTS} "
                             "distinct source slots")
        self.slot_nodes = self.source_row * g.n + ix

    @property
    def split_y(self) -> float:
        return self.split_index * self.grid.h

    def source_nodes(self, n_sources: int) -> np.ndarray:
        if n_sources < 1 or N_SOURCE_SLOTS % n_sources:
            raise ValueError(f"n_sources must divide {N_SOURCE_SLOTS}")
        return self.slot_nodes[:: N_SOURCE_SLOTS // n_sources]

    def inner_nodes(self) -> np.ndarray:
        """All node indices of the closed inner rectangle (rows 0..split)."""
        g = self.grid
        return np.arange((self.split_index + 1) * g.n)

    def inner_weights(self) -> np.ndarray:
        """Trapezoid quadrature on the inner rectangle, per inner node."""
        g, ia = self.grid, self.split_index
        wx = np.full(g.n, g.h)
        wx[0] = wx[-1] = g.h / 2.0
        wy = np.full(ia + 1, g.h)
        wy[0] = wy[-1] = g.h / 2.0
        return np.outer(wy, wx).ravel()

    def shared_side_nodes(self) -> np.ndarray:
        """Nodes on the three sides the rectangle shares with the square."""
        g, ia = self.grid, self.split_index
        idx = np.arange(g.n_nodes).reshape(g.n, g.n)
        parts = [idx[0, :], idx[1 : ia + 1, 0], idx[1 : ia + 1, -1]]
        return np.concatenate(parts)


def green_column(g: Grid, node: int) -> ScalarField:
    """Discrete Green column: -lap G = e_node / h^2, zero boundary data.

    The 1/h^2 scaling makes the column the inverse-matrix entry column, so
    symmetry green_column(y)(x) = green_column(x)(y) holds exactly up to
    solver tolerance, and interior positivity follows from the M-matrix
    structure of the negative Laplacian.
    """
    iy, ix = divmod(int(node), g.n)
    if not (0 < iy < g.n - 1 and 0 < ix < g.n - 1):
        raise ValueError("source node must be interior")
    F = np.zeros(g.n_nodes)
    F[node] = -1.0 / g.h**2
    return solve_dirichlet(g, F=ScalarField(g, F))


def _columns(dom: NestedDomains, nodes, threads: int = 1) -> np.ndarray:
    """Green columns restricted to the inner rectangle, one per column."""
    key = ("runge_columns", dom.split_index)
    store = dom._cache.setdefault(key, {})
    missing = [int(nd) for nd in nodes if int(nd) not in store]
    if missing:
        inner = dom.inner_nodes()

        def col(nd):
            return green_column(dom.grid, nd).values[inner]

        if threads > 1:
            with ThreadPoolExecutor(max_workers=threads) as pool:
                vals = list(pool.map(col, missing))
        else:
            vals = [col(nd) for nd in missing]
        store.update(zip(missing, vals))
    return np.column_stack([store[int(nd)] for nd in nodes])


def harmonic_target(dom: NestedDomains, free_side_values) -> ScalarField:
    """Discrete harmonic function on the inner rectangle, zero on the three
    shared sides, with the given values on the free side (the split line).

    Returned on the full outer grid with zeros above the split line; only
    the inner-rectangle restriction is meaningful.
    """
    g, ia = dom.grid, dom.split_index
    f = np.asarray(free_side_values, dtype=float)
    if f.shape != (g.n,):
        raise ValueError(f"free side carries {g.n} nodes, got {f.shape}")
    if f[0] != 0.0 or f[-1] != 0.0:
        raise ValueError("free-side data must vanish at the shared corners")
    nx, ny = g.n - 2, ia - 1          # interior unknowns of the rectangle
    vals = np.zeros(g.n_nodes)
    vals[ia * g.n + 1 : ia * g.n + g.n - 1] = f[1:-1]
    if ny > 0:
        key = ("runge_subsolver", ia)
        if key not in dom._cache:
            ex = sparse.eye(nx)
            ey = sparse.eye(ny)
            d1x = sparse.diags([np.ones(nx - 1), np.ones(nx - 1)], [-1, 1])
            d1y = sparse.diags([np.ones(ny - 1), np.ones(ny - 1)], [-1, 1])
            lap = sparse.kron(ey, d1x - 4.0 * ex) + sparse.kron(d1y, ex)
            dom._cache[key] = spla.splu(lap.tocsc())
        rhs = np.zeros(nx * ny)
        rhs[-nx:] = -f[1:-1]          # neighbors just below the split line
        sol = dom._cache[key].solve(rhs)
        for j in range(ny):
            row = (j + 1) * g.n
            vals[row + 1 : row + g.n - 1] = sol[j * nx : (j + 1) * nx]
    return ScalarField(g, vals)


def random_target(dom: NestedDomains, rng: np.random.Generator) -> ScalarField:
    """Admissible target with random smooth free-side data (2 to 4 bumps)."""
    g = dom.grid
    x = np.linspace(0.0, 1.0, g.n)
    f = np.zeros(g.n)
    for _ in range(int(rng.integers(2, 5))):
        c = rng.uniform(0.2, 0.8)
        w = rng.uniform(0.1, 0.3)
        a = rng.uniform(-1.0, 1.0)
        f += a * smooth_bump(np.abs(x - c) / w)
    f[0] = f[-1] = 0.0
    if np.max(np.abs(f)) < 1e-3:      # rare; keep targets well away from zero
        f += smooth_bump(np.abs(x - 0.5) / 0.25)
        f[0] = f[-1] = 0.0
    return harmonic_target(dom, f)


def admissibility_report(dom: NestedDomains, target: ScalarField) -> dict:
    """Shared-side trace and interior harmonic defect of a candidate target."""
    g, ia = dom.grid, dom.split_index
    t = target.values
    scale = max(float(np.max(np.abs(t[dom.inner_nodes()]))), 1e-300)
    trace = float(np.max(np.abs(t[dom.shared_side_nodes()]))) / scale
    M = t.reshape(g.n, g.n)
    if ia >= 2:
        lap = (M[1:ia, 2:] + M[1:ia, :-2] + M[2 : ia + 1, 1:-1]
               + M[: ia - 1, 1:-1] - 4.0 * M[1:ia, 1:-1]) / g.h**2
        defect = float(np.max(np.abs(lap))) * g.h**2 / scale
    else:
        defect = 0.0
    return {"trace": trace, "harmonic_defect": defect}


@dataclass
class RungeFit:
    coefficients: np.ndarray
    residual: float               # relative weighted-L2 misfit on the rectangle
    condition: float
    n_sources: int


def runge_fit(dom: NestedDomains, target: ScalarField, n_sources: int,
              enforce_admissible: bool = True, threads: int = 1,
              tol: float = 1e-8) -> RungeFit:
    """Weighted least-squares fit of exterior Green columns to the target.

    The normal problem is solved through the SVD with singular values below
    SVD_CUTOFF * s_max discarded (the column family is increasingly
    coherent, so bare normal equations would be meaningless past ~30
    sources). Set enforce_admissible=False to fit an inadmissible target on
    purpose, e.g. the negative control for the zero-trace hypothesis.
    """
    if target.grid is not dom.grid:
        raise ValueError("target lives on a different grid")
    rep = admissibility_report(dom, target)
    if enforce_admissible and max(rep["trace"], rep["harmonic_defect"]) > tol:
        raise ValueError(f"target violates admissibility: shared-side trace "
                         f"{rep['trace']:.2e}, harmonic defect "
                         f"{rep['harmonic_defect']:.2e} (tol {tol:.1e})")
    inner = dom.inner_nodes()
    sw = np.sqrt(dom.inner_weights())
    B = _columns(dom, dom.source_nodes(n_sources), threads) * sw[:, None]
    t = target.values[inner] * sw
    tnorm = float(np.linalg.norm(t))
    if tnorm == 0.0:
        return RungeFit(np.zeros(B.shape[1]), 0.0, 1.0, n_sources)
    U, s, Vt = np.linalg.svd(B, full_matrices=False)
    keep = s > SVD_CUTOFF * s[0]
    c = Vt[keep].T @ ((U[:, keep].T @ t) / s[keep])
    residual = float(np.linalg.norm(B @ c - t)) / tnorm
    condition = float(s[0] / s[keep][-1])
    return RungeFit(c, residual, condition, n_sources)


def density_sweep(dom: NestedDomains, target: ScalarField,
                  counts=(8, 16, 32, 64), enforce_admissible: bool = True,
                  threads: int = 1) -> list:
    """Rows (n_sources, residual, condition) over nested source sets."""
    rows = []
    for m in counts:
        fit = runge_fit(dom, target, m, enforce_admissible=enforce_admissible,
                        threads=threads)
        rows.append((m, fit.residual, fit.condition))
    return rows
