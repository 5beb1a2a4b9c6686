"""Effective coefficients and the Monte-Carlo experiments built on them.

The homogenized matrix of one field maps an imposed direction to the
averaged flux of its corrector. On top of that sit the experiments:

  * moment_estimate  -- moments of the corrector gradient at the origin,
                        the quantity whose size is expected not to grow
                        with the torus
  * variance_scan    -- sample variance of the effective coefficient
                        across torus sizes, fitted slope vs log L
                        (CLT scaling predicts slope -d)
  * decay_probe      -- Dirichlet energy of an interior-harmonic function
                        over nested balls (hole-filling decay)

Monte-Carlo samples are independent tasks keyed by sample index; reductions
run in index order, so results do not depend on worker scheduling.
"""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from .ensembles import CoefficientField, EnsembleSpec, SeedContext, sample
from .lattice import TorusLattice, direction_edge_field, gradient, site_flat, site_grid
from .solver import Corrector, SolveOptions, solve_corrector, solve_meanfree


class GeometryError(ValueError):
    """Probe geometry impossible on this torus."""


@dataclass(frozen=True)
class HomogenizedMatrix:
    matrix: np.ndarray  # (d, d), column i = averaged flux for direction e_i

    def quad(self, xi) -> float:
        xi = np.asarray(xi, dtype=float)
        return float(xi @ self.matrix @ xi)

    def bilinear(self, e0, e1) -> float:
        return float(np.asarray(e0, float) @ self.matrix @ np.asarray(e1, float))

    @property
    def symmetry_gap(self) -> float:
        return float(np.max(np.abs(self.matrix - self.matrix.T)))


def average_flux(a: CoefficientField, cor: Corrector) -> np.ndarray:
    """Volume-averaged flux vector (1/L^d) sum_x a (grad phi + xi) per direction."""
    lat = a.lattice
    flux = a.values * (gradient(cor.phi, lat) + direction_edge_field(cor.xi, lat))
    return flux.reshape(lat.n_sites, lat.d).mean(axis=0)


def homogenized_matrix(
    a: CoefficientField, opts: SolveOptions = SolveOptions()
) -> HomogenizedMatrix:
    """Assemble the full d x d effective matrix (one corrector per axis)."""
    lat = a.lattice
    A = np.empty((lat.d, lat.d))
    for i in range(lat.d):
        xi = np.zeros(lat.d)
        xi[i] = 1.0
        A[:, i] = average_flux(a, solve_corrector(a, xi, opts))
    return HomogenizedMatrix(matrix=A)


def energy_density(a: CoefficientField, cor: Corrector) -> float:
    """(1/L^d) sum_b (grad phi + xi) a (grad phi + xi)."""
    lat = a.lattice
    g = gradient(cor.phi, lat) + direction_edge_field(cor.xi, lat)
    return float(np.sum(g * a.values * g)) / lat.n_sites


def harmonic_mean(values: np.ndarray) -> float:
    return float(len(values) / np.sum(1.0 / values))


def arithmetic_mean(values: np.ndarray) -> float:
    return float(np.mean(values))


# ---------------------------------------------------------------------------
# Monte-Carlo plumbing


def _map_indexed(fn, items, workers: int):
    if workers <= 1 or len(items) <= 1:
        return [fn(it) for it in items]
    chunk = max(1, len(items) // (8 * workers))
    with ProcessPoolExecutor(max_workers=workers) as ex:
        return list(ex.map(fn, items, chunksize=chunk))


def _jackknife_se_of_transformed_mean(z: np.ndarray, transform) -> float:
    """SE of transform(mean(z)) by leave-one-out resampling."""
    n = len(z)
    if n < 2:
        return float("nan")
    total = np.sum(z)
    loo = (total - z) / (n - 1)
    theta = np.array([transform(m) for m in loo])
    return float(np.sqrt((n - 1) / n * np.sum((theta - np.mean(theta)) ** 2)))


def _jackknife_se_of_variance(z: np.ndarray) -> float:
    """SE of the unbiased sample variance by leave-one-out resampling."""
    n = len(z)
    if n < 3:
        return float("nan")
    s = np.sum(z)
    ss = np.sum(z * z)
    loo_mean = (s - z) / (n - 1)
    loo_var = (ss - z * z - (n - 1) * loo_mean**2) / (n - 2)
    return float(np.sqrt((n - 1) / n * np.sum((loo_var - np.mean(loo_var)) ** 2)))


def _moment_sample(args):
    spec, d, L, xi, p, master_seed, sample_index, opts = args
    lat = TorusLattice(d, L)
    a = sample(spec, lat, SeedContext(master_seed, sample_index))
    cor = solve_corrector(a, xi, opts)
    # gradient entries on the d edges leaving the origin
    g0 = gradient(cor.phi, lat)[: lat.d] + np.asarray(xi, float)
    return float(np.sum(np.abs(g0) ** (2.0 * p))), float(np.sum(g0 * g0))


@dataclass(frozen=True)
class MomentReport:
    p: float
    d: int
    L: int
    n_samples: int
    estimate: float  # E[sum_i |D_i phi + xi_i|^(2p)]^(1/p)
    se: float
    f2: float
    f2_se: float
    ratio: float  # estimate / f2; L-stable if the moment bound holds


def moment_estimate(
    spec: EnsembleSpec,
    lattice: TorusLattice,
    xi,
    p: float,
    n_samples: int,
    seed: SeedContext,
    opts: SolveOptions = SolveOptions(),
    workers: int = 1,
) -> MomentReport:
    """Monte-Carlo moments of the corrector gradient at the origin."""
    if p < 1:
        raise ValueError(f"moment exponent p must be >= 1, got {p}")
    if n_samples < 2:
        raise ValueError(f"need n_samples >= 2, got {n_samples}")
    spec.check()
    xi = tuple(float(c) for c in xi)
    tasks = [
        (spec, lattice.d, lattice.L, xi, p, seed.master_seed, seed.sample_index + t, opts)
        for t in range(n_samples)
    ]
    out = _map_indexed(_moment_sample, tasks, workers)
    z2p = np.array([o[0] for o in out])
    z2 = np.array([o[1] for o in out])
    estimate = float(np.mean(z2p) ** (1.0 / p))
    f2 = float(np.mean(z2))
    return MomentReport(
        p=p,
        d=lattice.d,
        L=lattice.L,
        n_samples=n_samples,
        estimate=estimate,
        se=_jackknife_se_of_transformed_mean(z2p, lambda m: m ** (1.0 / p)),
        f2=f2,
        f2_se=_jackknife_se_of_transformed_mean(z2, lambda m: m),
        ratio=estimate / f2,
    )


def _effective_sample(args):
    spec, d, L, e0, e1, master_seed, sample_index, opts = args
    lat = TorusLattice(d, L)
    a = sample(spec, lat, SeedContext(master_seed, sample_index))
    cor = solve_corrector(a, e1, opts)
    flux = average_flux(a, cor)
    zeta = float(np.asarray(e0, float) @ flux)
    ed = energy_density(a, cor)
    quad = float(np.asarray(e1, float) @ flux)
    weak_gap = abs(quad - ed) / max(abs(ed), 1e-300)
    # series/parallel bounds run over the edges of the imposed axis
    axis = int(np.argmax(np.abs(e1)))
    dir_vals = a.values[axis :: d]
    return zeta, ed, weak_gap, harmonic_mean(dir_vals), arithmetic_mean(dir_vals), quad


@dataclass(frozen=True)
class VarianceRow:
    L: int
    n_samples: int
    mean: float
    variance: float
    variance_se: float


@dataclass(frozen=True)
class VarianceReport:
    d: int
    rows: list
    slope: float  # fitted d(log Var)/d(log L); None when undefined
    slope_se: float
    max_weak_form_gap: float
    bounds_violations: int


def variance_scan(
    spec: EnsembleSpec,
    d: int,
    Ls,
    e0,
    e1,
    n_samples: int,
    seed: SeedContext,
    opts: SolveOptions = SolveOptions(),
    workers: int = 1,
) -> VarianceReport:
    """Sample variance of e0 . A_hom e1 across torus sizes, with slope fit.

    Each log-variance point is weighted by its inverse squared relative
    jackknife standard error; sizes whose variance vanishes make the slope
    undefined (reported as None).
    """
    spec.check()
    Ls = [int(L) for L in Ls]
    if len(set(Ls)) < 3:
        raise ValueError(f"need at least 3 distinct torus sizes for a slope fit, got {Ls}")
    e0 = tuple(float(c) for c in e0)
    e1 = tuple(float(c) for c in e1)
    rows = []
    max_gap = 0.0
    violations = 0
    # series/parallel bounds are only claimed for axis directions
    axis = sorted(abs(x) for x in e1) == [0.0] * (d - 1) + [1.0]
    for li, L in enumerate(Ls):
        tasks = [
            (spec, d, L, e0, e1, seed.master_seed, seed.sample_index + li * n_samples + t, opts)
            for t in range(n_samples)
        ]
        out = _map_indexed(_effective_sample, tasks, workers)
        zeta = np.array([o[0] for o in out])
        max_gap = max(max_gap, max(o[2] for o in out))
        if axis:
            for o in out:
                if not (o[3] * (1 - 1e-10) <= o[5] <= o[4] * (1 + 1e-10)):
                    violations += 1
        var = float(np.var(zeta, ddof=1))
        rows.append(
            VarianceRow(
                L=L,
                n_samples=n_samples,
                mean=float(np.mean(zeta)),
                variance=var,
                variance_se=_jackknife_se_of_variance(zeta),
            )
        )
    slope, slope_se = _fit_log_slope(rows)
    return VarianceReport(
        d=d,
        rows=rows,
        slope=slope,
        slope_se=slope_se,
        max_weak_form_gap=max_gap,
        bounds_violations=violations,
    )


def _fit_log_slope(rows):
    if any(r.variance <= 0.0 or not np.isfinite(r.variance_se) for r in rows):
        return None, None
    x = np.log([r.L for r in rows])
    y = np.log([r.variance for r in rows])
    rel = np.array([r.variance_se / r.variance for r in rows])
    w = 1.0 / rel**2
    xm = np.sum(w * x) / np.sum(w)
    ym = np.sum(w * y) / np.sum(w)
    sxx = np.sum(w * (x - xm) ** 2)
    slope = float(np.sum(w * (x - xm) * (y - ym)) / sxx)
    # w approximates 1/Var(log variance), so the usual WLS variance applies
    return slope, float(np.sqrt(1.0 / sxx))


# ---------------------------------------------------------------------------
# Hole-filling decay probe


@dataclass(frozen=True)
class DecayReport:
    rho0: int
    n_max: int
    radii: list
    energies: list
    ratios: list  # energies[n] / energies[n+1]
    alpha_fit: float  # decay exponent vs log radius; None if degenerate
    max_ratio: float


def decay_probe(
    a: CoefficientField,
    rho0: int,
    n_max: int,
    opts: SolveOptions = SolveOptions(),
) -> DecayReport:
    """Nested-ball Dirichlet energies of a dipole solution, harmonic inside.

    The dipole sources sit near the antipode of the origin, outside the
    largest ball, so the solution is a-harmonic in every ball probed.
    """
    lat = a.lattice
    if rho0 < 1:
        raise GeometryError(f"rho0 must be >= 1, got {rho0}")
    r_max = 2**n_max * rho0
    if r_max > lat.L / 2:
        raise GeometryError(
            f"largest ball radius 2^{n_max} * {rho0} = {r_max} exceeds L/2 = {lat.L / 2}"
        )
    src = (lat.L // 2,) * lat.d
    snk = ((lat.L // 2 + 1) % lat.L,) + (lat.L // 2,) * (lat.d - 1)
    for site in (src, snk):
        if lat.torus_distance(site) <= r_max:
            raise GeometryError(
                f"dipole site {site} lies inside the largest probed ball (r = {r_max})"
            )
    f = np.zeros(lat.n_sites)
    f[lat.site_index(src)] += 1.0
    f[lat.site_index(snk)] -= 1.0
    u = solve_meanfree(a, f, opts)
    g2 = gradient(u, lat) ** 2

    dist = np.array([lat.torus_distance(lat.site_coords(s)) for s in range(lat.n_sites)])
    idx_grid = site_grid(np.arange(lat.n_sites), lat)
    heads = [site_flat(np.roll(idx_grid, -1, axis=i)) for i in range(lat.d)]
    energies = []
    radii = []
    for n in range(n_max + 1):
        r = 2**n * rho0
        # an edge belongs to the ball when both endpoints do
        in_ball = np.zeros(lat.n_edges, dtype=bool)
        for i in range(lat.d):
            in_ball[i :: lat.d] = (dist <= r) & (dist[heads[i]] <= r)
        energies.append(float(np.sum(g2[in_ball])))
        radii.append(r)
    ratios = [
        energies[n] / energies[n + 1] if energies[n + 1] > 0 else float("nan")
        for n in range(n_max)
    ]
    if all(e > 0 for e in energies):
        x = np.log(np.array(radii, dtype=float))
        y = np.log(np.array(energies))
        alpha = float(np.polyfit(x, y, 1)[0])
    else:
        alpha = None
    return DecayReport(
        rho0=rho0,
        n_max=n_max,
        radii=radii,
        energies=energies,
        ratios=ratios,
        alpha_fit=alpha,
        max_ratio=float(np.nanmax(ratios)) if ratios else float("nan"),
    )
