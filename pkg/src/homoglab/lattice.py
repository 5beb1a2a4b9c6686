"""Periodic lattice geometry and the discrete vector calculus on it.

The domain is the d-dimensional torus of side L: sites are integer tuples
modulo L, and every site x carries d directed edges [x, x+e_i], one per
axis. Wrap-around edges are ordinary edges under mod-L arithmetic, so a
single formula covers the whole lattice.

Conventions (these fix the serialization and enumeration order bit-exactly):
  * sites are indexed with axis 0 fastest:  index = x0 + L*x1 + L^2*x2 + ...
  * edges are indexed as  site_index * d + direction
  * site fields are flat float arrays of length L^d, edge fields of length
    d * L^d, both in the canonical order above.

All operations are pure functions of their inputs and never mutate them.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class FieldShapeError(ValueError):
    """A field's length does not match the lattice it is used with."""


@dataclass(frozen=True)
class TorusLattice:
    """Periodic lattice Z_L^d: dimension d >= 1, side length L >= 2."""

    d: int
    L: int

    def __post_init__(self):
        if self.d < 1:
            raise ValueError(f"dimension d must be >= 1, got {self.d}")
        if self.L < 2:
            raise ValueError(f"side length L must be >= 2, got {self.L}")

    @property
    def n_sites(self) -> int:
        return self.L**self.d

    @property
    def n_edges(self) -> int:
        return self.d * self.L**self.d

    @property
    def grid_shape(self) -> tuple:
        return (self.L,) * self.d

    def site_index(self, coords) -> int:
        """Flat index of a site given its coordinate tuple (reduced mod L)."""
        idx = 0
        for c in reversed([int(c) % self.L for c in coords]):
            idx = idx * self.L + c
        return idx

    def site_coords(self, index: int) -> tuple:
        """Coordinate tuple of a flat site index."""
        if not 0 <= index < self.n_sites:
            raise IndexError(f"site index {index} out of range for {self}")
        out = []
        for _ in range(self.d):
            out.append(index % self.L)
            index //= self.L
        return tuple(out)

    def edge_index(self, base, direction: int) -> int:
        """Flat index of the edge [base, base + e_direction]."""
        if not 0 <= direction < self.d:
            raise IndexError(f"direction {direction} out of range for d={self.d}")
        return self.site_index(base) * self.d + direction

    def torus_distance(self, coords) -> float:
        """Euclidean distance from the origin, minimized over periodic images."""
        total = 0.0
        for c in coords:
            c = int(c) % self.L
            total += min(c, self.L - c) ** 2
        return float(np.sqrt(total))


@dataclass(frozen=True)
class Edge:
    """The directed edge [base, base + e_dir], coordinates taken mod L."""

    base: tuple
    dir: int

    def head(self, lattice: TorusLattice) -> tuple:
        h = list(self.base)
        h[self.dir] = (h[self.dir] + 1) % lattice.L
        return tuple(h)

    def index(self, lattice: TorusLattice) -> int:
        return lattice.edge_index(self.base, self.dir)


def _check_site_field(u: np.ndarray, lattice: TorusLattice) -> np.ndarray:
    u = np.asarray(u, dtype=float)
    if u.shape != (lattice.n_sites,):
        raise FieldShapeError(
            f"site field has shape {u.shape}, lattice {lattice} needs ({lattice.n_sites},)"
        )
    return u


def _check_edge_field(g: np.ndarray, lattice: TorusLattice) -> np.ndarray:
    g = np.asarray(g, dtype=float)
    if g.shape != (lattice.n_edges,):
        raise FieldShapeError(
            f"edge field has shape {g.shape}, lattice {lattice} needs ({lattice.n_edges},)"
        )
    return g


def site_grid(u: np.ndarray, lattice: TorusLattice) -> np.ndarray:
    """View a flat site field as a d-dimensional grid (axis i = coordinate i)."""
    return np.reshape(u, lattice.grid_shape, order="F")


def site_flat(grid: np.ndarray) -> np.ndarray:
    """Inverse of site_grid."""
    return np.ravel(grid, order="F")


def gradient(u: np.ndarray, lattice: TorusLattice) -> np.ndarray:
    """Discrete gradient: result([x, x+e_i]) = u(x+e_i) - u(x), mod L."""
    u = _check_site_field(u, lattice)
    grid = site_grid(u, lattice)
    out = np.empty((lattice.n_sites, lattice.d))
    for i in range(lattice.d):
        out[:, i] = site_flat(np.roll(grid, -1, axis=i) - grid)
    return out.reshape(-1)


def divergence_star(g: np.ndarray, lattice: TorusLattice) -> np.ndarray:
    """Negative divergence: result(x) = sum_i g([x-e_i, x]) - g([x, x+e_i]).

    Adjoint of `gradient` under the plain lattice inner products; sums to
    zero over the torus for every edge field.
    """
    g = _check_edge_field(g, lattice)
    per_dir = g.reshape(lattice.n_sites, lattice.d)
    acc = np.zeros(lattice.grid_shape)
    for i in range(lattice.d):
        gi = site_grid(per_dir[:, i], lattice)
        acc += np.roll(gi, 1, axis=i) - gi
    return site_flat(acc)


def apply_operator(a: np.ndarray, u: np.ndarray, lattice: TorusLattice) -> np.ndarray:
    """Divergence-form operator: u -> divergence_star(a * gradient(u))."""
    a = _check_edge_field(a, lattice)
    return divergence_star(a * gradient(u, lattice), lattice)


def dirichlet_energy(a: np.ndarray, g: np.ndarray, lattice: TorusLattice) -> float:
    """Weighted quadratic form sum_b a(b) * g(b)^2."""
    a = _check_edge_field(a, lattice)
    g = _check_edge_field(g, lattice)
    return float(np.sum(a * g * g))


def direction_edge_field(xi, lattice: TorusLattice) -> np.ndarray:
    """Constant edge field carrying xi_i on every edge of direction i."""
    xi = np.asarray(xi, dtype=float)
    if xi.shape != (lattice.d,):
        raise FieldShapeError(
            f"direction has shape {xi.shape}, lattice {lattice} needs ({lattice.d},)"
        )
    return np.tile(xi, lattice.n_sites)


def check_direction(xi, lattice: TorusLattice) -> np.ndarray:
    """Validate |xi| <= 1 and the component count; returns xi as an array."""
    xi = np.asarray(xi, dtype=float)
    if xi.shape != (lattice.d,):
        raise FieldShapeError(
            f"direction has shape {xi.shape}, lattice {lattice} needs ({lattice.d},)"
        )
    norm = float(np.sqrt(np.sum(xi * xi)))
    if norm > 1.0 + 1e-12:
        raise ValueError(f"direction must satisfy |xi| <= 1, got |xi| = {norm}")
    return xi


def is_mean_free(u: np.ndarray, lattice: TorusLattice, rel: float = 1e-12) -> bool:
    u = _check_site_field(u, lattice)
    scale = float(np.max(np.abs(u))) if u.size else 0.0
    return abs(float(np.mean(u))) <= rel * max(scale, 1e-300)


def is_pinned(u: np.ndarray, lattice: TorusLattice, rel: float = 1e-12) -> bool:
    u = _check_site_field(u, lattice)
    scale = float(np.max(np.abs(u))) if u.size else 0.0
    return abs(float(u[0])) <= rel * max(scale, 1e-300)
