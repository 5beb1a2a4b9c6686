"""Exhaustive spectral-gap checks on tiny tori.

Every statistic here is evaluated on ALL 2^E configurations of a two-point
conductance law, so variances, oscillation sums, and higher moments are
exact up to solver tolerance and rounding; nothing is sampled.

The oscillation of a statistic at edge z is the spread obtained by flipping
that one edge between its two values with everything else held fixed. The
quantities reported:

  * Var(zeta) and the Efron-Stein majorant (1/4) sum_z E[osc_z^2]
  * E[(sum_z osc_z^q)^(2/q)] for each requested q (the spectral-gap
    right-hand side; decreasing in q by l^q nesting)
  * for the 2p-th moment extension: E[(zeta - E zeta)^(2p)] and
    E[(sum_z osc_z^q)^(2p/q)] together with their ratio
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .ensembles import CoefficientField
from .homogenize import average_flux, energy_density
from .lattice import TorusLattice, gradient
from .solver import SolveOptions, solve_corrector

MAX_EDGES = 20

STATISTICS = ("effective_11", "energy_density", "origin_gradient")


class EnumerationError(ValueError):
    """Lattice too large for exhaustive enumeration."""


def _check_two_point(alpha: float, beta: float, prob: float):
    if not 0.0 < alpha <= beta <= 1.0:
        raise ValueError(f"need 0 < alpha <= beta <= 1, got alpha={alpha}, beta={beta}")
    if not 0.0 <= prob <= 1.0:
        raise ValueError(f"prob must lie in [0, 1], got {prob}")


@dataclass(frozen=True)
class SGReport:
    statistic: str
    alpha: float
    beta: float
    prob: float
    d: int
    L: int
    n_edges: int
    n_configs: int
    mean: float
    variance: float
    efron_stein: float
    sg_rhs: dict  # q -> E[(sum_z osc_z^q)^(2/q)]


@dataclass(frozen=True)
class SGMomentReport:
    statistic: str
    p: int
    q: float
    n_configs: int
    central_moment: float  # E[(zeta - E zeta)^(2p)]
    osc_moment: float  # E[(sum_z osc_z^q)^(2p/q)]
    ratio: float  # central_moment / osc_moment: the empirical constant


def _statistic_value(name: str, a: CoefficientField, opts: SolveOptions) -> float:
    lat = a.lattice
    xi = np.zeros(lat.d)
    xi[0] = 1.0
    cor = solve_corrector(a, xi, opts)
    if name == "effective_11":
        return float(average_flux(a, cor)[0])
    if name == "energy_density":
        return energy_density(a, cor)
    if name == "origin_gradient":
        return float(gradient(cor.phi, lat)[0] + 1.0)
    raise ValueError(f"unknown statistic {name!r}, expected one of {STATISTICS}")


def enumerate_two_point(alpha, beta, prob, lattice, statistic, opts=SolveOptions()):
    """Statistic values and weights over all 2^E two-point configurations.

    Bit z of the configuration index set means edge z carries alpha.
    """
    n_edges = lattice.n_edges
    if n_edges > MAX_EDGES:
        raise EnumerationError(
            f"{n_edges} edges would require 2^{n_edges} configurations; "
            f"exhaustive enumeration is limited to {MAX_EDGES} edges"
        )
    lam = min(alpha, beta)
    n_configs = 1 << n_edges
    bit_positions = np.arange(n_edges)
    zeta = np.empty(n_configs)
    weights = np.empty(n_configs)
    for c in range(n_configs):
        bits = (c >> bit_positions) & 1
        vals = np.where(bits == 1, alpha, beta).astype(float)
        field = CoefficientField(lattice, vals, lam)
        zeta[c] = _statistic_value(statistic, field, opts)
        k = int(bits.sum())
        weights[c] = prob**k * (1.0 - prob) ** (n_edges - k)
    return zeta, weights


def _oscillations(zeta: np.ndarray, n_edges: int):
    """Yield (z, osc_z over all configs); osc is independent of the flipped bit."""
    c_all = np.arange(len(zeta))
    for z in range(n_edges):
        bit = 1 << z
        yield z, np.abs(zeta[c_all | bit] - zeta[c_all & ~bit])


def moment_pair_from_values(zeta, weights, n_edges, p, q):
    """(E[(zeta - E zeta)^(2p)], E[(sum_z osc^q)^(2p/q)], ratio) from a value table."""
    mean = float(np.sum(weights * zeta))
    central = float(np.sum(weights * (zeta - mean) ** (2 * p)))
    osc_q = np.zeros(len(zeta))
    for _, osc in _oscillations(zeta, n_edges):
        osc_q += osc**q
    osc_moment = float(np.sum(weights * osc_q ** (2.0 * p / q)))
    ratio = central / osc_moment if osc_moment > 0 else 0.0
    return central, osc_moment, ratio


def sg_bruteforce(
    alpha: float,
    beta: float,
    prob: float,
    lattice: TorusLattice,
    statistic: str = "effective_11",
    q_list=(1.25, 1.5, 2.0),
    opts: SolveOptions = SolveOptions(),
) -> SGReport:
    """Exact variance, Efron-Stein majorant, and spectral-gap right-hand sides."""
    _check_two_point(alpha, beta, prob)
    q_list = [float(q) for q in q_list]
    for q in q_list:
        if not 1.0 < q <= 2.0:
            raise ValueError(f"q must lie in (1, 2], got {q}")
    zeta, weights = enumerate_two_point(alpha, beta, prob, lattice, statistic, opts)
    mean = float(np.sum(weights * zeta))
    variance = float(np.sum(weights * (zeta - mean) ** 2))
    es = 0.0
    osc_q_sums = {q: np.zeros(len(zeta)) for q in q_list}
    for _, osc in _oscillations(zeta, lattice.n_edges):
        es += float(np.sum(weights * osc * osc))
        for q in q_list:
            osc_q_sums[q] += osc**q
    sg_rhs = {q: float(np.sum(weights * osc_q_sums[q] ** (2.0 / q))) for q in q_list}
    return SGReport(
        statistic=statistic,
        alpha=alpha,
        beta=beta,
        prob=prob,
        d=lattice.d,
        L=lattice.L,
        n_edges=lattice.n_edges,
        n_configs=len(zeta),
        mean=mean,
        variance=variance,
        efron_stein=0.25 * es,
        sg_rhs=sg_rhs,
    )


def sg_p_check(
    alpha: float,
    beta: float,
    prob: float,
    lattice: TorusLattice,
    statistic: str = "effective_11",
    p: int = 2,
    q: float = 2.0,
    opts: SolveOptions = SolveOptions(),
) -> SGMomentReport:
    """Exact 2p-th central moment against the q-oscillation moment."""
    if p < 1 or int(p) != p:
        raise ValueError(f"p must be an integer >= 1, got {p}")
    if not 1.0 < q <= 2.0:
        raise ValueError(f"q must lie in (1, 2], got {q}")
    _check_two_point(alpha, beta, prob)
    zeta, weights = enumerate_two_point(alpha, beta, prob, lattice, statistic, opts)
    central, osc_moment, ratio = moment_pair_from_values(zeta, weights, lattice.n_edges, p, q)
    return SGMomentReport(
        statistic=statistic,
        p=int(p),
        q=q,
        n_configs=len(zeta),
        central_moment=central,
        osc_moment=osc_moment,
        ratio=ratio,
    )
