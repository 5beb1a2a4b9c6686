"""Iterative solution of the divergence-form lattice system.

The operator u -> divergence_star(a * gradient(u)) is symmetric positive
definite on the mean-free subspace. We run conjugate gradients there,
preconditioned by the exact inverse of the unit-conductance lattice
Laplacian applied via FFT; the preconditioned condition number is bounded
by 1/lam uniformly in L, so iteration counts do not grow with the torus.

Dot products are evaluated as np.sum(x * y) (numpy's pairwise reduction),
which fixes the floating-point reduction tree and makes solves bit-exactly
reproducible.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import rng
from .ensembles import CoefficientField
from .lattice import (
    TorusLattice,
    apply_operator,
    check_direction,
    direction_edge_field,
    divergence_star,
    gradient,
    site_flat,
    site_grid,
)


class SolverError(RuntimeError):
    """Iteration cap reached before the residual target."""

    def __init__(self, message: str, residual: float, iterations: int):
        super().__init__(message)
        self.residual = residual
        self.iterations = iterations


class IncompatibleRHSError(ValueError):
    """Right-hand side has nonzero mean and cannot be solved on the torus."""


@dataclass(frozen=True)
class SolveOptions:
    rel_tol: float = 1e-10
    max_iter: int = None  # None: derived from lam and rel_tol at solve time

    def __post_init__(self):
        if not 0.0 < self.rel_tol <= 1e-6:
            raise ValueError(f"rel_tol must lie in (0, 1e-6], got {self.rel_tol}")
        if self.max_iter is not None and self.max_iter < 1:
            raise ValueError(f"max_iter must be >= 1, got {self.max_iter}")

    def iteration_cap(self, lam: float) -> int:
        if self.max_iter is not None:
            return self.max_iter
        return int(np.ceil(50.0 * np.sqrt(1.0 / lam) * np.log(1.0 / self.rel_tol)))


@dataclass(frozen=True)
class Corrector:
    """Solution phi of divergence_star(a (gradient(phi) + xi)) = 0, phi(0) = 0."""

    phi: np.ndarray
    xi: np.ndarray
    residual: float
    iterations: int


def _dot(x: np.ndarray, y: np.ndarray) -> float:
    return float(np.sum(x * y))


def laplacian_symbol(lattice: TorusLattice) -> np.ndarray:
    """Fourier symbol of the unit-conductance operator, as a grid array."""
    sym = np.zeros(lattice.grid_shape)
    for i in range(lattice.d):
        k = np.arange(lattice.L)
        s = 4.0 * np.sin(np.pi * k / lattice.L) ** 2
        shape = [1] * lattice.d
        shape[i] = lattice.L
        sym = sym + s.reshape(shape)
    return sym


def _make_preconditioner(lattice: TorusLattice):
    sym = laplacian_symbol(lattice)
    flat0 = (0,) * lattice.d
    safe = sym.copy()
    safe[flat0] = 1.0

    def apply(r: np.ndarray) -> np.ndarray:
        rhat = np.fft.fftn(site_grid(r, lattice))
        rhat /= safe
        rhat[flat0] = 0.0
        return site_flat(np.real(np.fft.ifftn(rhat)))

    return apply


def _pcg(a: CoefficientField, f: np.ndarray, opts: SolveOptions):
    """Preconditioned CG for apply_operator(a, u) = f on the mean-free subspace."""
    lat = a.lattice
    f = f - np.mean(f)
    f_norm = float(np.sqrt(np.sum(f * f)))
    if f_norm == 0.0:
        return np.zeros(lat.n_sites), 0.0, 0
    precond = _make_preconditioner(lat)
    cap = opts.iteration_cap(a.lam)
    x = np.zeros(lat.n_sites)
    r = f.copy()
    z = precond(r)
    p = z.copy()
    rz = _dot(r, z)
    res = float(np.sqrt(np.sum(r * r))) / f_norm
    for it in range(1, cap + 1):
        q = apply_operator(a.values, p, lat)
        pq = _dot(p, q)
        if pq <= 0.0:
            raise SolverError(
                f"conjugate gradients broke down (p.Ap = {pq}) at iteration {it}",
                residual=res,
                iterations=it,
            )
        alpha = rz / pq
        x += alpha * p
        r -= alpha * q
        if it % 50 == 0:
            # mean drift from rounding breaks CG on the quotient space
            x -= np.mean(x)
            r -= np.mean(r)
        res = float(np.sqrt(np.sum(r * r))) / f_norm
        if res <= opts.rel_tol:
            x -= np.mean(x)
            return x, res, it
        z = precond(r)
        rz_new = _dot(r, z)
        beta = rz_new / rz
        p = z + beta * p
        rz = rz_new
    raise SolverError(
        f"no convergence within {cap} iterations (relative residual {res:.3e}, "
        f"target {opts.rel_tol:.3e})",
        residual=res,
        iterations=cap,
    )


def solve_meanfree(
    a: CoefficientField, f: np.ndarray, opts: SolveOptions = SolveOptions()
) -> np.ndarray:
    """Mean-free u with apply_operator(a, u) = f; f must sum to ~0."""
    lat = a.lattice
    f = np.asarray(f, dtype=float)
    if f.shape != (lat.n_sites,):
        raise ValueError(f"rhs has shape {f.shape}, lattice needs ({lat.n_sites},)")
    total = abs(float(np.sum(f)))
    if total > 1e-10 * max(float(np.sum(np.abs(f))), 1e-300):
        raise IncompatibleRHSError(
            f"rhs must be mean-free on the torus: |sum f| = {total:.3e} exceeds "
            f"1e-10 * sum|f| = {1e-10 * float(np.sum(np.abs(f))):.3e}"
        )
    u, _, _ = _pcg(a, f, opts)
    return u


def solve_corrector(
    a: CoefficientField, xi, opts: SolveOptions = SolveOptions()
) -> Corrector:
    """Solve the cell problem for direction xi and pin the result at the origin.

    The system is solved mean-free (compatible with the FFT preconditioner)
    and re-pinned by subtracting phi(0); gradients are unaffected.
    """
    lat = a.lattice
    xi = check_direction(xi, lat)
    rhs = -divergence_star(a.values * direction_edge_field(xi, lat), lat)
    u, res, iters = _pcg(a, rhs, opts)
    phi = u - u[0]
    _check_energy_bound(a, phi, xi)
    return Corrector(phi=phi, xi=xi, residual=res, iterations=iters)


def _check_energy_bound(a: CoefficientField, phi: np.ndarray, xi: np.ndarray):
    # at the solution, energy of (grad phi + xi) never exceeds that of xi alone
    lat = a.lattice
    g = gradient(phi, lat) + direction_edge_field(xi, lat)
    lhs = float(np.sum(a.values * g * g))
    rhs = float(np.sum(a.values * direction_edge_field(xi, lat) ** 2))
    if lhs > rhs * (1.0 + 1e-8) + 1e-12:
        raise SolverError(
            f"energy bound violated after solve: {lhs} > {rhs}; "
            "residual target too loose for this field",
            residual=lhs / max(rhs, 1e-300) - 1.0,
            iterations=0,
        )


def operator_condition_probe(
    a: CoefficientField, n_iter: int = 60, opts: SolveOptions = SolveOptions(rel_tol=1e-8)
) -> tuple:
    """Estimate (lambda_min, lambda_max) of the operator on the mean-free subspace.

    Power iteration for the top of the spectrum, inverse iteration (CG solves)
    for the bottom. Start vectors are fixed, so the probe is deterministic.
    """
    lat = a.lattice
    # generic start vectors (full spectral support), fixed by construction
    v = rng.uniforms(rng.stream_key(0, 0, rng.STREAM_PROBE_START), lat.n_sites) - 0.5
    v -= np.mean(v)
    v /= np.sqrt(np.sum(v * v))
    lam_max = 0.0
    for _ in range(n_iter):
        w = apply_operator(a.values, v, lat)
        w -= np.mean(w)
        lam_max = _dot(v, w)
        nw = float(np.sqrt(np.sum(w * w)))
        if nw == 0.0:
            break
        v = w / nw

    v = rng.uniforms(rng.stream_key(0, 1, rng.STREAM_PROBE_START), lat.n_sites) - 0.5
    v -= np.mean(v)
    v /= np.sqrt(np.sum(v * v))
    for _ in range(min(n_iter, 25)):
        w = solve_meanfree(a, v, opts)
        nw = float(np.sqrt(np.sum(w * w)))
        if nw == 0.0:
            break
        v = w / nw
        v -= np.mean(v)
        v /= np.sqrt(np.sum(v * v))
    lam_min = _dot(v, apply_operator(a.values, v, lat)) / _dot(v, v)
    return float(lam_min), float(lam_max)
