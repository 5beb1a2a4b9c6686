"""Seedable generators of stationary random conductance fields.

Three ensembles are provided, each emitting one scalar conductance per edge
inside [lam, 1]:

  * iid_uniform        -- independent Uniform[lam, 1] per edge
  * bernoulli          -- independent two-point law {alpha, beta}
  * poisson_inclusions -- soft discs: a Poisson cloud of centers in the
                          continuous torus; edges whose midpoint falls in a
                          disc take the low value alpha, the rest beta

Sampling is counter-based (see rng): the value of any edge is a pure
function of (master_seed, sample_index, edge index), so identical inputs
give bit-identical fields regardless of evaluation order.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import rng
from .lattice import TorusLattice, site_grid, site_flat

KINDS = ("iid_uniform", "bernoulli", "poisson_inclusions")


class EnsembleSpecError(ValueError):
    """Invalid ensemble parameters; message lists every violated rule."""


@dataclass(frozen=True)
class SeedContext:
    master_seed: int
    sample_index: int = 0


@dataclass(frozen=True)
class EnsembleSpec:
    """Parameters of one conductance ensemble.

    alpha/beta/prob apply to the bernoulli kind, alpha/beta/intensity/radius
    to poisson_inclusions; unused parameters are ignored.
    """

    kind: str
    lam: float
    alpha: float = None
    beta: float = None
    prob: float = None
    intensity: float = None
    radius: float = None

    def validate(self) -> list:
        errors = []
        if self.kind not in KINDS:
            errors.append(f"kind: unknown ensemble kind {self.kind!r}, expected one of {KINDS}")
            return errors
        if not 0.0 < self.lam < 1.0:
            errors.append(f"lambda: must lie in the open interval (0, 1), got {self.lam}")
        if self.kind in ("bernoulli", "poisson_inclusions"):
            for name in ("alpha", "beta"):
                if getattr(self, name) is None:
                    errors.append(f"{name}: required for kind {self.kind!r}")
            if self.alpha is not None and self.beta is not None:
                if not self.alpha <= self.beta:
                    errors.append(f"alpha/beta: need alpha <= beta, got {self.alpha} > {self.beta}")
                if self.alpha < self.lam:
                    errors.append(
                        f"alpha: conductances must stay >= lambda, got alpha={self.alpha} < lambda={self.lam}"
                    )
                if self.beta > 1.0:
                    errors.append(f"beta: conductances must stay <= 1, got beta={self.beta}")
        if self.kind == "bernoulli":
            if self.prob is None:
                errors.append("prob: required for kind 'bernoulli'")
            elif not 0.0 <= self.prob <= 1.0:
                errors.append(f"prob: must lie in [0, 1], got {self.prob}")
        if self.kind == "poisson_inclusions":
            if self.intensity is None:
                errors.append("intensity: required for kind 'poisson_inclusions'")
            elif self.intensity < 0:
                errors.append(f"intensity: must be >= 0, got {self.intensity}")
            if self.radius is None:
                errors.append("radius: required for kind 'poisson_inclusions'")
            elif self.radius < 1.0:
                errors.append(f"radius: must be >= 1 lattice unit, got {self.radius}")
        return errors

    def check(self):
        errors = self.validate()
        if errors:
            raise EnsembleSpecError("; ".join(errors))

    @staticmethod
    def iid_uniform(lam: float) -> "EnsembleSpec":
        return EnsembleSpec(kind="iid_uniform", lam=lam)

    @staticmethod
    def bernoulli(lam: float, alpha: float, beta: float, prob: float) -> "EnsembleSpec":
        return EnsembleSpec(kind="bernoulli", lam=lam, alpha=alpha, beta=beta, prob=prob)

    @staticmethod
    def poisson_inclusions(
        lam: float, intensity: float, radius: float, alpha: float, beta: float
    ) -> "EnsembleSpec":
        return EnsembleSpec(
            kind="poisson_inclusions",
            lam=lam,
            alpha=alpha,
            beta=beta,
            intensity=intensity,
            radius=radius,
        )


@dataclass(frozen=True)
class CoefficientField:
    """One realized conductance field: values per edge, all in [lam, 1]."""

    lattice: TorusLattice
    values: np.ndarray
    lam: float

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float)
        if vals.shape != (self.lattice.n_edges,):
            raise ValueError(
                f"coefficient field has {vals.shape} values, lattice needs {self.lattice.n_edges}"
            )
        object.__setattr__(self, "values", vals)

    def perturbed(self, edge_index: int, delta: float) -> "CoefficientField":
        vals = self.values.copy()
        vals[edge_index] += delta
        return CoefficientField(self.lattice, vals, self.lam)


def constant_field(lattice: TorusLattice, value: float, lam: float = None) -> CoefficientField:
    if lam is None:
        lam = min(value, 0.999999)
    return CoefficientField(lattice, np.full(lattice.n_edges, float(value)), lam)


def _edge_midpoints(lattice: TorusLattice) -> np.ndarray:
    """(n_edges, d) midpoint coordinates, edge [x, x+e_i] at x + e_i/2."""
    coords = np.empty((lattice.n_sites, lattice.d))
    idx = np.arange(lattice.n_sites)
    for i in range(lattice.d):
        coords[:, i] = idx % lattice.L
        idx = idx // lattice.L
    mids = np.repeat(coords, lattice.d, axis=0)
    for i in range(lattice.d):
        mids[i :: lattice.d, i] += 0.5
    return mids


def sample(spec: EnsembleSpec, lattice: TorusLattice, seed: SeedContext) -> CoefficientField:
    """Draw one coefficient field; bit-identical for identical inputs."""
    spec.check()
    n = lattice.n_edges
    if spec.kind == "iid_uniform":
        key = rng.stream_key(seed.master_seed, seed.sample_index, rng.STREAM_EDGE_VALUES)
        u = rng.uniforms(key, n)
        values = spec.lam + (1.0 - spec.lam) * u
    elif spec.kind == "bernoulli":
        key = rng.stream_key(seed.master_seed, seed.sample_index, rng.STREAM_EDGE_VALUES)
        u = rng.uniforms(key, n)
        values = np.where(u < spec.prob, spec.alpha, spec.beta)
    else:  # poisson_inclusions
        count_key = rng.stream_key(seed.master_seed, seed.sample_index, rng.STREAM_POISSON_COUNT)
        n_points = rng.poisson_count(count_key, spec.intensity * lattice.n_sites)
        if n_points == 0:
            values = np.full(n, spec.beta)
        else:
            pts_key = rng.stream_key(seed.master_seed, seed.sample_index, rng.STREAM_POISSON_POINTS)
            centers = rng.uniforms(pts_key, n_points * lattice.d).reshape(n_points, lattice.d)
            centers *= lattice.L
            mids = _edge_midpoints(lattice)
            # displacement minimized over periodic images, one axis at a time
            covered = np.zeros(n, dtype=bool)
            for p in range(n_points):
                delta = np.abs(mids - centers[p])
                delta = np.minimum(delta, lattice.L - delta)
                covered |= np.sum(delta * delta, axis=1) <= spec.radius**2
            values = np.where(covered, spec.alpha, spec.beta)
    return CoefficientField(lattice, values, spec.lam)


def shift_field(field: CoefficientField, z) -> CoefficientField:
    """Translate: the returned field at edge [x, x+e_i] equals a([x+z, x+z+e_i])."""
    lat = field.lattice
    z = [int(c) for c in z]
    if len(z) != lat.d:
        raise ValueError(f"shift has {len(z)} components, lattice is {lat.d}-dimensional")
    per_dir = field.values.reshape(lat.n_sites, lat.d)
    out = np.empty_like(per_dir)
    axes = tuple(range(lat.d))
    shifts = tuple(-c for c in z)
    for i in range(lat.d):
        out[:, i] = site_flat(np.roll(site_grid(per_dir[:, i], lat), shifts, axis=axes))
    return CoefficientField(lat, out.reshape(-1), field.lam)


@dataclass(frozen=True)
class StationarityReport:
    n_samples: int
    per_edge_mean: np.ndarray
    per_edge_se: np.ndarray
    max_discrepancy_se: float
    threshold_se: float
    flagged: bool


def stationarity_probe(
    spec: EnsembleSpec,
    lattice: TorusLattice,
    n_samples: int,
    seed: SeedContext,
    threshold_se: float = 6.0,
) -> StationarityReport:
    """Compare per-edge empirical means; flag if any pair differs too much.

    The discrepancy statistic for edges (i, j) is
    |mean_i - mean_j| / sqrt(se_i^2 + se_j^2); the largest one over all pairs
    is reported, in units of its standard error.
    """
    if n_samples < 100:
        raise ValueError(f"stationarity probe needs n_samples >= 100, got {n_samples}")
    n = lattice.n_edges
    acc = np.zeros(n)
    acc2 = np.zeros(n)
    for t in range(n_samples):
        a = sample(spec, lattice, SeedContext(seed.master_seed, seed.sample_index + t)).values
        acc += a
        acc2 += a * a
    mean = acc / n_samples
    var = np.maximum(acc2 / n_samples - mean * mean, 0.0) * n_samples / max(n_samples - 1, 1)
    se = np.sqrt(var / n_samples)
    diff = np.abs(mean[:, None] - mean[None, :])
    denom = np.sqrt(se[:, None] ** 2 + se[None, :] ** 2)
    with np.errstate(invalid="ignore", divide="ignore"):
        stat = np.where(diff > 0, diff / np.maximum(denom, 1e-300), 0.0)
    max_stat = float(np.max(stat)) if n > 1 else 0.0
    return StationarityReport(
        n_samples=n_samples,
        per_edge_mean=mean,
        per_edge_se=se,
        max_discrepancy_se=max_stat,
        threshold_se=threshold_se,
        flagged=max_stat > threshold_se,
    )
