"""Uniform unit-square discretization: fields, boundary data, quadrature.

The domain is the closed square [0, 1]^2 sampled with n nodes per side,
spacing h = 1/(n - 1).  Nodes are indexed row-major, id = iy*n + ix, so x
varies fastest.  Boundary nodes additionally carry a canonical perimeter
order that starts at (0, 0) and walks counterclockwise (bottom, right,
top, left); the arclength parameter s runs over [0, 4) with the corners
at s = 0, 1, 2, 3.

All operators in this module are plain functions taking the grid first.
Fields may be real or complex; the stencils are dtype-agnostic.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

__all__ = [
    "Grid",
    "ScalarField",
    "BoundaryData",
    "build_grid",
    "apply_laplacian",
    "normal_derivative",
    "boundary_pair",
    "volume_integral",
    "gamma_mask",
    "boundary_bump",
    "trace_data",
    "arclength_of_point",
    "point_of_arclength",
    "dump_field_csv",
    "load_field_csv",
    "dump_boundary_csv",
]


@dataclass(eq=False)
class Grid:
    """Tensor grid on [0,1]^2 with precomputed node bookkeeping.

    Attributes
    ----------
    n : nodes per side (nx = ny = n)
    h : spacing, 1/(n-1)
    x, y : flat per-node coordinates, row-major
    interior_nodes : node ids strictly inside the square, ascending
    boundary_nodes : node ids in counterclockwise perimeter order
    boundary_s : arclength of each boundary node, in [0, 4)
    boundary_weights : per-boundary-node quadrature weight for closed
        perimeter trapezoid integration; the weights sum to 4 exactly
    node_to_interior, node_to_boundary : inverse index maps (-1 if absent)
    """

    n: int
    h: float
    x: np.ndarray
    y: np.ndarray
    interior_nodes: np.ndarray
    boundary_nodes: np.ndarray
    boundary_s: np.ndarray
    boundary_weights: np.ndarray
    node_to_interior: np.ndarray
    node_to_boundary: np.ndarray
    _cache: dict = field(default_factory=dict, repr=False)

    @property
    def n_nodes(self) -> int:
        return self.n * self.n

    @property
    def n_interior(self) -> int:
        return self.interior_nodes.size

    @property
    def n_boundary(self) -> int:
        return self.boundary_nodes.size


def build_grid(n: int) -> Grid:
    """Build the n-by-n grid.  Requires n >= 5 so one-sided stencils fit."""
    if n < 5:
        raise ValueError(f"need at least 5 nodes per side, got n={n}")
    h = 1.0 / (n - 1)
    coords = np.linspace(0.0, 1.0, n)
    X, Y = np.meshgrid(coords, coords)  # shape (ny, nx), X[iy, ix] = coords[ix]
    x = X.ravel()
    y = Y.ravel()

    ix = np.arange(n)
    iy = np.arange(n)
    # Perimeter walk.  Corners belong to the segment that reaches them first,
    # so every boundary node appears exactly once.
    bottom = ix                     # (ix, 0), s = x
    right = iy[1:] * n + (n - 1)    # (n-1, iy), s = 1 + y
    top = (n - 1) * n + ix[n - 2::-1]   # (ix, n-1), s = 2 + (1 - x)
    left = iy[n - 2:0:-1] * n       # (0, iy), s = 3 + (1 - y)
    boundary_nodes = np.concatenate([bottom, right, top, left])
    boundary_s = np.concatenate([
        coords,
        1.0 + coords[1:],
        2.0 + (1.0 - coords[n - 2::-1]),
        3.0 + (1.0 - coords[n - 2:0:-1]),
    ])
    # Closed-curve trapezoid rule: every node gets h (each corner collects
    # h/2 from both adjacent sides), so the weights sum to 4(n-1)*h = 4.
    boundary_weights = np.full(boundary_nodes.size, h)

    on_boundary = np.zeros(n * n, dtype=bool)
    on_boundary[boundary_nodes] = True
    interior_nodes = np.nonzero(~on_boundary)[0]

    node_to_interior = np.full(n * n, -1, dtype=np.int64)
    node_to_interior[interior_nodes] = np.arange(interior_nodes.size)
    node_to_boundary = np.full(n * n, -1, dtype=np.int64)
    node_to_boundary[boundary_nodes] = np.arange(boundary_nodes.size)

    return Grid(
        n=n,
        h=h,
        x=x,
        y=y,
        interior_nodes=interior_nodes,
        boundary_nodes=boundary_nodes,
        boundary_s=boundary_s,
        boundary_weights=boundary_weights,
        node_to_interior=node_to_interior,
        node_to_boundary=node_to_boundary,
    )


@dataclass(eq=False)
class ScalarField:
    """One value per grid node, flat row-major storage."""

    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values)
        if self.values.shape != (self.grid.n_nodes,):
            raise ValueError(
                f"field has {self.values.shape} values, grid has {self.grid.n_nodes} nodes"
            )
        if not np.all(np.isfinite(self.values)):
            raise ValueError("field contains non-finite values")

    def as_matrix(self) -> np.ndarray:
        """(n, n) view, first index iy, second ix."""
        return self.values.reshape(self.grid.n, self.grid.n)

    @classmethod
    def from_function(cls, g: Grid, fn: Callable) -> "ScalarField":
        return cls(g, np.asarray(fn(g.x, g.y)) + np.zeros(g.n_nodes))

    @classmethod
    def constant(cls, g: Grid, value: float) -> "ScalarField":
        dtype = complex if isinstance(value, complex) else float
        return cls(g, np.full(g.n_nodes, value, dtype=dtype))

    @classmethod
    def zeros(cls, g: Grid) -> "ScalarField":
        return cls(g, np.zeros(g.n_nodes))


@dataclass(eq=False)
class BoundaryData:
    """Values on the boundary nodes (perimeter order) with a support mask.

    Values must vanish wherever the mask is false; that is how partial
    data supported on an arc is represented.
    """

    grid: Grid
    values: np.ndarray
    support_mask: Optional[np.ndarray] = None

    def __post_init__(self):
        self.values = np.asarray(self.values)
        nb = self.grid.n_boundary
        if self.values.shape != (nb,):
            raise ValueError(f"boundary data has {self.values.shape} values, expected {nb}")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("boundary data contains non-finite values")
        if self.support_mask is None:
            self.support_mask = np.ones(nb, dtype=bool)
        else:
            self.support_mask = np.asarray(self.support_mask, dtype=bool)
            if self.support_mask.shape != (nb,):
                raise ValueError("support mask length mismatch")
            off = self.values[~self.support_mask]
            if off.size and np.max(np.abs(off)) != 0.0:
                raise ValueError("boundary values nonzero outside the support mask")

    def sup_norm(self) -> float:
        return float(np.max(np.abs(self.values))) if self.values.size else 0.0

    @classmethod
    def zeros(cls, g: Grid) -> "BoundaryData":
        return cls(g, np.zeros(g.n_boundary))


# ---------------------------------------------------------------------------
# discrete operators


def apply_laplacian(g: Grid, u: ScalarField, boundary: str = "zero") -> ScalarField:
    """Five-point Laplacian.

    boundary="zero" (default) sets boundary rows to 0 by convention.
    boundary="extend" fills them with a one-sided second-order stencil
    (2*u0 - 5*u1 + 4*u2 - u3)/h^2 along directions that leave the grid, which
    keeps volume quadratures of lap(u)*phi second-order accurate up to the
    boundary strip.
    """
    M = u.as_matrix()
    h2 = g.h**2
    if boundary == "zero":
        out = np.zeros_like(u.values).reshape(g.n, g.n)
        out[1:-1, 1:-1] = (
            M[1:-1, 2:] + M[1:-1, :-2] + M[2:, 1:-1] + M[:-2, 1:-1] - 4.0 * M[1:-1, 1:-1]
        ) / h2
        return ScalarField(g, out.ravel())
    if boundary != "extend":
        raise ValueError(f"unknown boundary mode {boundary!r}")
    dxx = np.empty_like(M)
    dxx[:, 1:-1] = (M[:, 2:] - 2.0 * M[:, 1:-1] + M[:, :-2]) / h2
    dxx[:, 0] = (2.0 * M[:, 0] - 5.0 * M[:, 1] + 4.0 * M[:, 2] - M[:, 3]) / h2
    dxx[:, -1] = (2.0 * M[:, -1] - 5.0 * M[:, -2] + 4.0 * M[:, -3] - M[:, -4]) / h2
    dyy = np.empty_like(M)
    dyy[1:-1, :] = (M[2:, :] - 2.0 * M[1:-1, :] + M[:-2, :]) / h2
    dyy[0, :] = (2.0 * M[0, :] - 5.0 * M[1, :] + 4.0 * M[2, :] - M[3, :]) / h2
    dyy[-1, :] = (2.0 * M[-1, :] - 5.0 * M[-2, :] + 4.0 * M[-3, :] - M[-4, :]) / h2
    return ScalarField(g, (dxx + dyy).ravel())


def normal_derivative(g: Grid, u: ScalarField) -> BoundaryData:
    """Outward normal derivative, one-sided second order.

    Uses (3*u_b - 4*u_1 + u_2)/(2h) along the inward grid line.  The two
    adjacent sides are averaged at corners, where the normal direction is
    ambiguous.
    """
    M = u.as_matrix()
    h2 = 2.0 * g.h
    acc = np.zeros(g.n_nodes, dtype=u.values.dtype)
    cnt = np.zeros(g.n_nodes)

    sides = [
        (np.arange(g.n), (3.0 * M[0, :] - 4.0 * M[1, :] + M[2, :]) / h2),          # bottom
        (np.arange(g.n) * g.n + g.n - 1, (3.0 * M[:, -1] - 4.0 * M[:, -2] + M[:, -3]) / h2),  # right
        ((g.n - 1) * g.n + np.arange(g.n), (3.0 * M[-1, :] - 4.0 * M[-2, :] + M[-3, :]) / h2),  # top
        (np.arange(g.n) * g.n, (3.0 * M[:, 0] - 4.0 * M[:, 1] + M[:, 2]) / h2),     # left
    ]
    for ids, vals in sides:
        acc[ids] += vals
        cnt[ids] += 1.0
    flux = acc[g.boundary_nodes] / cnt[g.boundary_nodes]
    return BoundaryData(g, flux)


def boundary_pair(g: Grid, phi: BoundaryData, mu) -> float:
    """Perimeter pairing sum(phi * density * weight).

    ``mu`` may be a BoundaryMeasure, anything exposing ``.density``, or a
    raw density array in perimeter order.
    """
    density = getattr(mu, "density", mu)
    density = np.asarray(density)
    if density.shape != (g.n_boundary,):
        raise ValueError("density length does not match the boundary node count")
    total = np.sum(phi.values * density * g.boundary_weights)
    return complex(total) if np.iscomplexobj(total) else float(total)


def quadrature_weights(g: Grid) -> np.ndarray:
    """Tensor trapezoid weights per node: h^2 interior, h^2/2 edges, h^2/4 corners."""
    w = g._cache.get("quad_weights")
    if w is None:
        w1 = np.full(g.n, g.h)
        w1[0] = w1[-1] = g.h / 2.0
        w = np.outer(w1, w1).ravel()
        w.setflags(write=False)
        g._cache["quad_weights"] = w
    return w


def volume_integral(g: Grid, u: ScalarField) -> float:
    """Tensor trapezoid rule over the square."""
    total = np.sum(u.values * quadrature_weights(g))
    return complex(total) if np.iscomplexobj(total) else float(total)


# ---------------------------------------------------------------------------
# boundary parameterization helpers


def arclength_of_point(x0, tol: float = 1e-9) -> float:
    """Map a point on the boundary to its arclength s in [0, 4)."""
    px, py = float(x0[0]), float(x0[1])
    if abs(py) <= tol and -tol <= px <= 1 + tol:
        return float(np.clip(px, 0.0, 1.0))
    if abs(px - 1.0) <= tol and -tol <= py <= 1 + tol:
        return 1.0 + float(np.clip(py, 0.0, 1.0))
    if abs(py - 1.0) <= tol and -tol <= px <= 1 + tol:
        s = 2.0 + (1.0 - float(np.clip(px, 0.0, 1.0)))
        return s if s < 4.0 else 0.0
    if abs(px) <= tol and -tol <= py <= 1 + tol:
        s = 3.0 + (1.0 - float(np.clip(py, 0.0, 1.0)))
        return s if s < 4.0 else 0.0
    raise ValueError(f"point {x0} is not on the boundary of the unit square")


def point_of_arclength(s: float) -> tuple:
    s = float(s) % 4.0
    if s <= 1.0:
        return (s, 0.0)
    if s <= 2.0:
        return (1.0, s - 1.0)
    if s <= 3.0:
        return (3.0 - s, 1.0)
    return (0.0, 4.0 - s)


def wrapped_distance(s: np.ndarray, s0: float) -> np.ndarray:
    """Distance along the closed perimeter (period 4)."""
    d = np.abs(np.asarray(s) - s0) % 4.0
    return np.minimum(d, 4.0 - d)


def gamma_mask(g: Grid, s_start: float, s_end: float) -> np.ndarray:
    """Boolean mask of boundary nodes on the arc [s_start, s_end].

    The arc is taken counterclockwise from s_start to s_end and may wrap
    past s = 4.
    """
    s = g.boundary_s
    a = s_start % 4.0
    b = s_end % 4.0
    if s_end - s_start >= 4.0:
        return np.ones(g.n_boundary, dtype=bool)
    if a <= b:
        return (s >= a - 1e-12) & (s <= b + 1e-12)
    return (s >= a - 1e-12) | (s <= b + 1e-12)


def smooth_bump(t: np.ndarray) -> np.ndarray:
    """C-infinity bump: exp(1 - 1/(1-t^2)) on |t| < 1, zero outside."""
    t = np.asarray(t, dtype=float)
    out = np.zeros_like(t)
    inside = np.abs(t) < 1.0
    ti = t[inside]
    out[inside] = np.exp(1.0 - 1.0 / (1.0 - ti * ti))
    return out


def boundary_bump(
    g: Grid,
    center_s: float,
    halfwidth: float,
    height: float = 1.0,
    gamma: Optional[np.ndarray] = None,
) -> BoundaryData:
    """Smooth nonnegative bump in arclength, optionally masked to an arc."""
    if halfwidth <= 0:
        raise ValueError("halfwidth must be positive")
    vals = height * smooth_bump(wrapped_distance(g.boundary_s, center_s % 4.0) / halfwidth)
    if gamma is not None:
        vals = np.where(gamma, vals, 0.0)
        return BoundaryData(g, vals, support_mask=gamma)
    return BoundaryData(g, vals)


def trace_data(g: Grid, fn: Callable, gamma: Optional[np.ndarray] = None) -> BoundaryData:
    """Boundary data from a function of (x, y) sampled at boundary nodes."""
    bx = g.x[g.boundary_nodes]
    by = g.y[g.boundary_nodes]
    vals = np.asarray(fn(bx, by)) + np.zeros(g.n_boundary)
    if gamma is not None:
        vals = np.where(gamma, vals, 0.0)
        return BoundaryData(g, vals, support_mask=gamma)
    return BoundaryData(g, vals)


# ---------------------------------------------------------------------------
# CSV dumps (17 significant digits, stable row order)


def _fmt(v: float) -> str:
    return f"{v:.17g}"


def dump_field_csv(f: ScalarField, path) -> None:
    """Write x,y,value_re[,value_im] rows, row-major over nodes."""
    g = f.grid
    cplx = np.iscomplexobj(f.values)
    with open(path, "w") as fh:
        fh.write("x,y,value_re,value_im\n" if cplx else "x,y,value_re\n")
        for i in range(g.n_nodes):
            if cplx:
                fh.write(
                    f"{_fmt(g.x[i])},{_fmt(g.y[i])},"
                    f"{_fmt(f.values[i].real)},{_fmt(f.values[i].imag)}\n"
                )
            else:
                fh.write(f"{_fmt(g.x[i])},{_fmt(g.y[i])},{_fmt(f.values[i])}\n")


def load_field_csv(g: Grid, path) -> ScalarField:
    """Read a field dump back onto a matching grid (node order is checked)."""
    data = np.genfromtxt(path, delimiter=",", names=True)
    names = data.dtype.names
    if names is None or "x" not in names or "y" not in names or "value_re" not in names:
        raise ValueError(f"{path}: expected columns x,y,value_re[,value_im]")
    if data.size != g.n_nodes:
        raise ValueError(f"{path}: {data.size} rows, grid has {g.n_nodes} nodes")
    if np.max(np.abs(data["x"] - g.x)) > 1e-9 or np.max(np.abs(data["y"] - g.y)) > 1e-9:
        raise ValueError(f"{path}: node coordinates do not match the grid")
    vals = data["value_re"].copy()
    if "value_im" in names:
        vals = vals + 1j * data["value_im"]
    return ScalarField(g, vals)


def dump_boundary_csv(g: Grid, values, path) -> None:
    """Write s,value rows in perimeter order; s runs over [0, 4)."""
    vals = np.asarray(getattr(values, "values", values))
    if np.iscomplexobj(vals):
        raise ValueError("boundary dumps are defined for real data")
    if vals.shape != (g.n_boundary,):
        raise ValueError("boundary value count mismatch")
    with open(path, "w") as fh:
        fh.write("s,value\n")
        for s, v in zip(g.boundary_s, vals):
            fh.write(f"{_fmt(s)},{_fmt(v)}\n")
