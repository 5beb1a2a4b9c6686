"""Torus Green functions, mixed second gradients, and sensitivity checks.

A Green column G(., y) solves the divergence-form system with the
mean-corrected point source (delta_y - L^{-d}) and is itself mean-free;
the extra constant in the source is what makes the problem solvable on the
torus and it drops out of every gradient.

The mixed second gradient table dd_G(b, e) is obtained by differencing two
Green columns in the source variable and taking the lattice gradient in the
field variable. Deterministic consequences tested elsewhere:

  * row/column square sums are bounded by 1 / lam^2,
  * sum_b dd_G(b, e) a(b) dd_G(b, e) = dd_G(e, e),
  * the single-edge derivative of the corrector gradient factors through
    dd_G times the local flux gradient (checked against finite differences).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .ensembles import CoefficientField
from .lattice import Edge, TorusLattice, direction_edge_field, gradient
from .solver import Corrector, SolveOptions, solve_corrector, solve_meanfree


@dataclass(frozen=True)
class GreenColumn:
    """Mean-free Green function for a fixed source site y."""

    y: tuple
    G: np.ndarray


@dataclass(frozen=True)
class MixedGradientRow:
    """All mixed second gradients dd_G(b, e) for one fixed source edge e."""

    e: Edge
    values: np.ndarray

    def square_sum(self) -> float:
        return float(np.sum(self.values * self.values))


@dataclass(frozen=True)
class MixedBoundsReport:
    lam: float
    bound: float
    max_row_square_sum: float
    max_col_square_sum: float
    max_symmetry_gap: float
    n_edges: int


def point_source(lattice: TorusLattice, y) -> np.ndarray:
    f = np.full(lattice.n_sites, -1.0 / lattice.n_sites)
    f[lattice.site_index(y)] += 1.0
    return f


def green_column(
    a: CoefficientField, y, opts: SolveOptions = SolveOptions()
) -> GreenColumn:
    """Solve for the mean-free Green column with source at site y."""
    lat = a.lattice
    y = tuple(int(c) % lat.L for c in (y if hasattr(y, "__len__") else lat.site_coords(y)))
    G = solve_meanfree(a, point_source(lat, y), opts)
    return GreenColumn(y=y, G=G)


def mixed_gradient_row(
    a: CoefficientField, e: Edge, opts: SolveOptions = SolveOptions()
) -> MixedGradientRow:
    """dd_G(b, e) over all edges b, for the fixed source edge e."""
    lat = a.lattice
    col_lo = green_column(a, e.base, opts)
    col_hi = green_column(a, e.head(lat), opts)
    values = gradient(col_hi.G - col_lo.G, lat)
    return MixedGradientRow(e=e, values=values)


def _all_green_columns(a: CoefficientField, opts: SolveOptions) -> np.ndarray:
    lat = a.lattice
    cols = np.empty((lat.n_sites, lat.n_sites))
    for s in range(lat.n_sites):
        cols[:, s] = solve_meanfree(a, point_source(lat, lat.site_coords(s)), opts)
    return cols


def mixed_gradient_table(a: CoefficientField, opts: SolveOptions = SolveOptions()) -> np.ndarray:
    """Full (n_edges, n_edges) table dd_G(b, e); one solve per site.

    Intended for small tori (L <= 16): the cost grows as L^d solves and the
    table as (d L^d)^2 entries.
    """
    lat = a.lattice
    cols = _all_green_columns(a, opts)
    table = np.empty((lat.n_edges, lat.n_edges))
    for s in range(lat.n_sites):
        coords = lat.site_coords(s)
        for i in range(lat.d):
            head = list(coords)
            head[i] = (head[i] + 1) % lat.L
            diff = cols[:, lat.site_index(head)] - cols[:, s]
            table[:, s * lat.d + i] = gradient(diff, lat)
    return table


def check_mixed_bounds(
    a: CoefficientField, opts: SolveOptions = SolveOptions()
) -> MixedBoundsReport:
    """Row and column square sums of the mixed-gradient table vs 1/lam^2."""
    table = mixed_gradient_table(a, opts)
    row_sums = np.sum(table * table, axis=0)  # fixed source edge e
    col_sums = np.sum(table * table, axis=1)  # fixed field edge b
    return MixedBoundsReport(
        lam=a.lam,
        bound=1.0 / a.lam**2,
        max_row_square_sum=float(np.max(row_sums)),
        max_col_square_sum=float(np.max(col_sums)),
        max_symmetry_gap=float(np.max(np.abs(table - table.T))),
        n_edges=a.lattice.n_edges,
    )


def sensitivity_green(
    a: CoefficientField,
    phi: Corrector,
    e: Edge,
    b: Edge,
    opts: SolveOptions = SolveOptions(),
) -> float:
    """Derivative of (grad phi + xi)(b) w.r.t. the conductance of edge e.

    Evaluates -dd_G(b, e) * (grad phi + xi)(e) from one mixed-gradient row.
    """
    lat = a.lattice
    row = mixed_gradient_row(a, e, opts)
    flux_grad = gradient(phi.phi, lat) + direction_edge_field(phi.xi, lat)
    return float(-row.values[b.index(lat)] * flux_grad[e.index(lat)])


def finite_difference_sensitivity(
    a: CoefficientField,
    xi,
    e: Edge,
    b: Edge,
    delta: float,
    opts: SolveOptions = SolveOptions(),
) -> float:
    """Independent single-edge finite difference of (grad phi + xi)(b)."""
    if delta <= 0:
        raise ValueError(f"delta must be positive, got {delta}")
    lat = a.lattice
    e_idx = e.index(lat)
    if a.values[e_idx] + delta > 1.0 + 1e-15:
        raise ValueError(
            f"perturbed conductance {a.values[e_idx] + delta} leaves the admissible "
            f"range [lambda, 1] on edge {e}"
        )
    base = solve_corrector(a, xi, opts)
    bumped = solve_corrector(a.perturbed(e_idx, delta), xi, opts)
    b_idx = b.index(lat)
    g0 = gradient(base.phi, lat)[b_idx]
    g1 = gradient(bumped.phi, lat)[b_idx]
    return float((g1 - g0) / delta)
