"""Subcommand dispatch: validated config in, report document out.

The returned document has three blocks:

    science -- everything determined by (config, seed); byte-stable
    tables  -- named CSV-ready tables: {name: {"header": [...], "rows": [...]}}
    meta    -- timestamp, host, versions; excluded from determinism claims

Both the CLI and the HTTP service call `run_config`; neither adds compute.
"""

from __future__ import annotations

import datetime
import platform
import socket

import numpy as np

from . import __version__
from .config import RunConfig
from .ensembles import SeedContext, sample, stationarity_probe
from .green import check_mixed_bounds, green_column
from .homogenize import (
    average_flux,
    decay_probe,
    energy_density,
    homogenized_matrix,
    moment_estimate,
    variance_scan,
)
from .lattice import TorusLattice, gradient
from .solver import SolveOptions, solve_corrector
from .spectral_gap import sg_bruteforce, sg_p_check


def _solve_options(cfg: RunConfig) -> SolveOptions:
    return SolveOptions(rel_tol=cfg.solve.rel_tol, max_iter=cfg.solve.max_iter)


def _lattice(cfg: RunConfig) -> TorusLattice:
    return TorusLattice(cfg.lattice.d, cfg.lattice.L)


def _seed(cfg: RunConfig) -> SeedContext:
    return SeedContext(master_seed=cfg.master_seed, sample_index=0)


def _run_corrector(cfg: RunConfig) -> tuple:
    lat = _lattice(cfg)
    a = sample(cfg.ensemble.to_spec(), lat, _seed(cfg))
    cor = solve_corrector(a, cfg.resolved_xi(), _solve_options(cfg))
    g = gradient(cor.phi, lat)
    science = {
        "residual": cor.residual,
        "iterations": cor.iterations,
        "phi_origin": float(cor.phi[0]),
        "phi_min": float(np.min(cor.phi)),
        "phi_max": float(np.max(cor.phi)),
        "grad_phi_norm": float(np.sqrt(np.sum(g * g))),
        "energy_density": energy_density(a, cor),
        "flux_average": average_flux(a, cor).tolist(),
    }
    return science, {}


def _run_green(cfg: RunConfig) -> tuple:
    lat = _lattice(cfg)
    a = sample(cfg.ensemble.to_spec(), lat, _seed(cfg))
    y = tuple(cfg.source_site) if cfg.source_site is not None else (0,) * lat.d
    col = green_column(a, y, _solve_options(cfg))
    science = {
        "source_site": list(col.y),
        "mean": float(np.mean(col.G)),
        "value_at_source": float(col.G[lat.site_index(col.y)]),
        "min": float(np.min(col.G)),
        "max": float(np.max(col.G)),
        "l2_norm": float(np.sqrt(np.sum(col.G * col.G))),
    }
    return science, {}


def _run_check_green_bounds(cfg: RunConfig) -> tuple:
    lat = _lattice(cfg)
    opts = _solve_options(cfg)
    spec = cfg.ensemble.to_spec()
    rows = []
    for t in range(cfg.n_samples):
        a = sample(spec, lat, SeedContext(cfg.master_seed, t))
        rep = check_mixed_bounds(a, opts)
        rows.append([t, rep.max_row_square_sum, rep.max_col_square_sum, rep.max_symmetry_gap])
    bound = 1.0 / spec.lam**2
    max_row = max(r[1] for r in rows)
    max_col = max(r[2] for r in rows)
    tol = 1e-6
    science = {
        "n_fields": cfg.n_samples,
        "bound": bound,
        "tolerance": tol,
        "max_row_square_sum": max_row,
        "max_col_square_sum": max_col,
        "max_symmetry_gap": max(r[3] for r in rows),
        "all_within_bound": bool(max_row <= bound * (1 + tol) and max_col <= bound * (1 + tol)),
    }
    tables = {
        "fields": {
            "header": ["field_index", "max_row_square_sum", "max_col_square_sum", "max_symmetry_gap"],
            "rows": rows,
        }
    }
    return science, tables


def _run_homogenize(cfg: RunConfig) -> tuple:
    lat = _lattice(cfg)
    opts = _solve_options(cfg)
    spec = cfg.ensemble.to_spec()
    mats = []
    rows = []
    for t in range(cfg.n_samples):
        a = sample(spec, lat, SeedContext(cfg.master_seed, t))
        H = homogenized_matrix(a, opts)
        mats.append(H.matrix)
        rows.append([t] + [float(v) for v in H.matrix.reshape(-1)])
    stack = np.stack(mats)
    science = {
        "n_samples": cfg.n_samples,
        "d": lat.d,
        "L": lat.L,
        "mean_matrix": stack.mean(axis=0).tolist(),
        "sd_matrix": (stack.std(axis=0, ddof=1) if len(mats) > 1 else np.zeros_like(stack[0])).tolist(),
        "max_symmetry_gap": float(max(np.max(np.abs(m - m.T)) for m in mats)),
    }
    header = ["sample_index"] + [f"a_{i}{j}" for i in range(lat.d) for j in range(lat.d)]
    return science, {"samples": {"header": header, "rows": rows}}


def _run_moments(cfg: RunConfig) -> tuple:
    lat = _lattice(cfg)
    rep = moment_estimate(
        cfg.ensemble.to_spec(),
        lat,
        cfg.resolved_xi(),
        cfg.p,
        cfg.n_samples,
        _seed(cfg),
        _solve_options(cfg),
        workers=cfg.resolved_threads(),
    )
    science = {
        "p": rep.p,
        "d": rep.d,
        "L": rep.L,
        "n_samples": rep.n_samples,
        "estimate": rep.estimate,
        "se": rep.se,
        "f2": rep.f2,
        "f2_se": rep.f2_se,
        "ratio": rep.ratio,
    }
    return science, {}


def _run_variance_scan(cfg: RunConfig) -> tuple:
    rep = variance_scan(
        cfg.ensemble.to_spec(),
        cfg.lattice.d,
        cfg.lattice.Ls,
        cfg.resolved_e0(),
        cfg.resolved_e1(),
        cfg.n_samples,
        _seed(cfg),
        _solve_options(cfg),
        workers=cfg.resolved_threads(),
    )
    science = {
        "d": rep.d,
        "Ls": [r.L for r in rep.rows],
        "n_samples": cfg.n_samples,
        "slope": rep.slope,
        "slope_se": rep.slope_se,
        "max_weak_form_gap": rep.max_weak_form_gap,
        "bounds_violations": rep.bounds_violations,
    }
    rows = [[r.L, r.n_samples, r.mean, r.variance, r.variance_se] for r in rep.rows]
    return science, {
        "per_L": {"header": ["L", "n_samples", "mean", "variance", "variance_se"], "rows": rows}
    }


def _run_sg_check(cfg: RunConfig) -> tuple:
    lat = _lattice(cfg)
    spec = cfg.ensemble.to_spec()
    rep = sg_bruteforce(
        spec.alpha, spec.beta, spec.prob, lat, cfg.statistic, cfg.q_list, _solve_options(cfg)
    )
    science = {
        "statistic": rep.statistic,
        "alpha": rep.alpha,
        "beta": rep.beta,
        "prob": rep.prob,
        "n_edges": rep.n_edges,
        "n_configs": rep.n_configs,
        "mean": rep.mean,
        "variance": rep.variance,
        "efron_stein": rep.efron_stein,
        "efron_stein_dominates": bool(rep.variance <= rep.efron_stein * (1 + 1e-12)),
    }
    rows = [[q, rep.sg_rhs[q]] for q in sorted(rep.sg_rhs)]
    return science, {"per_q": {"header": ["q", "sg_rhs"], "rows": rows}}


def _run_sg_p_check(cfg: RunConfig) -> tuple:
    lat = _lattice(cfg)
    spec = cfg.ensemble.to_spec()
    rep = sg_p_check(
        spec.alpha, spec.beta, spec.prob, lat, cfg.statistic, cfg.sg_p, cfg.q, _solve_options(cfg)
    )
    science = {
        "statistic": rep.statistic,
        "p": rep.p,
        "q": rep.q,
        "n_configs": rep.n_configs,
        "central_moment": rep.central_moment,
        "osc_moment": rep.osc_moment,
        "ratio": rep.ratio,
    }
    return science, {}


def _run_decay(cfg: RunConfig) -> tuple:
    lat = _lattice(cfg)
    a = sample(cfg.ensemble.to_spec(), lat, _seed(cfg))
    rep = decay_probe(a, cfg.rho0, cfg.n_max, _solve_options(cfg))
    science = {
        "rho0": rep.rho0,
        "n_max": rep.n_max,
        "alpha_fit": rep.alpha_fit,
        "max_ratio": rep.max_ratio,
        "nondecreasing": bool(
            all(rep.energies[n] <= rep.energies[n + 1] for n in range(len(rep.energies) - 1))
        ),
    }
    rows = [
        [n, rep.radii[n], rep.energies[n], rep.ratios[n] if n < len(rep.ratios) else None]
        for n in range(len(rep.radii))
    ]
    return science, {
        "per_ball": {"header": ["n", "radius", "energy", "ratio_to_next"], "rows": rows}
    }


def _run_probe_stationarity(cfg: RunConfig) -> tuple:
    lat = _lattice(cfg)
    rep = stationarity_probe(cfg.ensemble.to_spec(), lat, cfg.n_samples, _seed(cfg))
    science = {
        "n_samples": rep.n_samples,
        "max_discrepancy_se": rep.max_discrepancy_se,
        "threshold_se": rep.threshold_se,
        "flagged": bool(rep.flagged),
        "mean_min": float(np.min(rep.per_edge_mean)),
        "mean_max": float(np.max(rep.per_edge_mean)),
    }
    return science, {}


_HANDLERS = {
    "corrector": _run_corrector,
    "green": _run_green,
    "check-green-bounds": _run_check_green_bounds,
    "homogenize": _run_homogenize,
    "moments": _run_moments,
    "variance-scan": _run_variance_scan,
    "sg-check": _run_sg_check,
    "sg-p-check": _run_sg_p_check,
    "decay": _run_decay,
    "probe-stationarity": _run_probe_stationarity,
}


def run_config(cfg: RunConfig) -> dict:
    """Execute one validated run configuration and build its report document."""
    handler = _HANDLERS[cfg.subcommand]
    science, tables = handler(cfg)
    return {
        "science": {
            "subcommand": cfg.subcommand,
            "config": cfg.canonical_dict(),
            "results": science,
        },
        "tables": tables,
        "meta": {
            "timestamp_utc": datetime.datetime.now(datetime.timezone.utc).isoformat(),
            "hostname": socket.gethostname(),
            "platform": platform.platform(),
            "package_version": __version__,
            "numpy_version": np.__version__,
        },
    }
