"""Run configuration: schema, defaults, and validation.

A run is described by one JSON document. Field types, numeric ranges, and
within-section invariants are enforced by the pydantic models, which report
every violation they find in one pass; rules that couple the subcommand to
other sections (sizes for variance-scan, enumeration limits, probe geometry)
are collected afterwards by `semantic_issues`, again all at once.
"""

from __future__ import annotations

from typing import List, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from .ensembles import EnsembleSpec
from .spectral_gap import MAX_EDGES, STATISTICS

SUBCOMMANDS = (
    "corrector",
    "green",
    "check-green-bounds",
    "homogenize",
    "moments",
    "variance-scan",
    "sg-check",
    "sg-p-check",
    "decay",
    "probe-stationarity",
)


class ConfigError(ValueError):
    """Invalid run configuration; `errors` lists every problem found."""

    def __init__(self, errors: List[dict]):
        self.errors = errors
        lines = [f"{e['path']}: {e['message']}" for e in errors]
        super().__init__("invalid configuration:\n  " + "\n  ".join(lines))


class EnsembleModel(BaseModel):
    model_config = ConfigDict(populate_by_name=True, extra="forbid")

    kind: str = "bernoulli"
    lam: float = Field(default=0.25, alias="lambda")
    alpha: Optional[float] = None
    beta: Optional[float] = None
    prob: Optional[float] = None
    intensity: Optional[float] = None
    radius: Optional[float] = None

    @field_validator("lam")
    @classmethod
    def _lam_range(cls, v):
        if not 0.0 < v < 1.0:
            raise ValueError(f"must lie in the open interval (0, 1), got {v}")
        return v

    @model_validator(mode="after")
    def _spec_invariants(self):
        issues = self.to_spec().validate()
        if issues:
            raise ValueError("; ".join(issues))
        return self

    def to_spec(self) -> EnsembleSpec:
        spec = EnsembleSpec(
            kind=self.kind,
            lam=self.lam,
            alpha=self.alpha,
            beta=self.beta,
            prob=self.prob,
            intensity=self.intensity,
            radius=self.radius,
        )
        if spec.kind == "bernoulli":
            # documented defaults: the contrast law alpha = lambda, beta = 1
            spec = EnsembleSpec(
                kind="bernoulli",
                lam=self.lam,
                alpha=self.alpha if self.alpha is not None else self.lam,
                beta=self.beta if self.beta is not None else 1.0,
                prob=self.prob if self.prob is not None else 0.5,
            )
        return spec


class LatticeModel(BaseModel):
    model_config = ConfigDict(extra="forbid")

    d: int = 2
    L: Optional[int] = 8
    Ls: Optional[List[int]] = None

    @field_validator("d")
    @classmethod
    def _d_range(cls, v):
        if v < 1:
            raise ValueError(f"dimension must be >= 1, got {v}")
        return v

    @field_validator("L")
    @classmethod
    def _L_range(cls, v):
        if v is not None and v < 2:
            raise ValueError(f"side length must be >= 2, got {v}")
        return v

    @field_validator("Ls")
    @classmethod
    def _Ls_range(cls, v):
        if v is not None:
            bad = [L for L in v if L < 2]
            if bad:
                raise ValueError(f"side lengths must be >= 2, got {bad}")
        return v


class SolveModel(BaseModel):
    model_config = ConfigDict(extra="forbid")

    rel_tol: float = 1e-10
    max_iter: Optional[int] = None

    @field_validator("rel_tol")
    @classmethod
    def _tol_range(cls, v):
        if not 0.0 < v <= 1e-6:
            raise ValueError(f"must lie in (0, 1e-6], got {v}")
        return v

    @field_validator("max_iter")
    @classmethod
    def _iter_range(cls, v):
        if v is not None and v < 1:
            raise ValueError(f"must be >= 1, got {v}")
        return v


class DirectionsModel(BaseModel):
    model_config = ConfigDict(extra="forbid")

    xi: Optional[List[float]] = None
    e0: Optional[List[float]] = None
    e1: Optional[List[float]] = None

    @field_validator("xi", "e0", "e1")
    @classmethod
    def _norm_bound(cls, v):
        if v is not None and float(np.linalg.norm(v)) > 1.0 + 1e-12:
            raise ValueError(f"must have Euclidean norm <= 1, got {float(np.linalg.norm(v))}")
        return v


class RunConfig(BaseModel):
    model_config = ConfigDict(populate_by_name=True, extra="forbid")

    subcommand: str
    ensemble: EnsembleModel = EnsembleModel()
    lattice: LatticeModel = LatticeModel()
    directions: DirectionsModel = DirectionsModel()
    solve: SolveModel = SolveModel()
    n_samples: int = 100
    master_seed: int = 0
    p: float = 2.0  # moment exponent
    q_list: List[float] = [1.25, 1.5, 2.0]
    q: float = 2.0
    sg_p: int = 2
    statistic: str = "effective_11"
    source_site: Optional[List[int]] = None
    rho0: int = 2
    n_max: int = 3
    threads: Optional[int] = None  # None: use available parallelism
    out: Optional[str] = None

    @field_validator("subcommand")
    @classmethod
    def _known_subcommand(cls, v):
        if v not in SUBCOMMANDS:
            raise ValueError(f"unknown subcommand {v!r}, expected one of {SUBCOMMANDS}")
        return v

    @field_validator("n_samples")
    @classmethod
    def _samples_range(cls, v):
        if v < 1:
            raise ValueError(f"must be >= 1, got {v}")
        return v

    @field_validator("p")
    @classmethod
    def _p_range(cls, v):
        if v < 1.0:
            raise ValueError(f"moment exponent must be >= 1, got {v}")
        return v

    @field_validator("q")
    @classmethod
    def _q_range(cls, v):
        if not 1.0 < v <= 2.0:
            raise ValueError(f"must lie in (1, 2], got {v}")
        return v

    @field_validator("q_list")
    @classmethod
    def _q_list_range(cls, v):
        bad = [q for q in v if not 1.0 < q <= 2.0]
        if bad:
            raise ValueError(f"q values must lie in (1, 2], got {bad}")
        return v

    @field_validator("sg_p")
    @classmethod
    def _sg_p_range(cls, v):
        if v < 1:
            raise ValueError(f"must be an integer >= 1, got {v}")
        return v

    @field_validator("statistic")
    @classmethod
    def _statistic_known(cls, v):
        if v not in STATISTICS:
            raise ValueError(f"unknown statistic {v!r}, expected one of {STATISTICS}")
        return v

    @field_validator("rho0")
    @classmethod
    def _rho0_range(cls, v):
        if v < 1:
            raise ValueError(f"must be >= 1, got {v}")
        return v

    @field_validator("threads")
    @classmethod
    def _threads_range(cls, v):
        if v is not None and v < 1:
            raise ValueError(f"must be >= 1, got {v}")
        return v

    def resolved_threads(self) -> int:
        import os

        return self.threads if self.threads is not None else max(1, os.cpu_count() or 1)

    def axis_direction(self, axis: int = 0) -> List[float]:
        v = [0.0] * self.lattice.d
        v[axis] = 1.0
        return v

    def resolved_xi(self) -> List[float]:
        return self.directions.xi if self.directions.xi is not None else self.axis_direction()

    def resolved_e0(self) -> List[float]:
        return self.directions.e0 if self.directions.e0 is not None else self.axis_direction()

    def resolved_e1(self) -> List[float]:
        return self.directions.e1 if self.directions.e1 is not None else self.axis_direction()

    def canonical_dict(self) -> dict:
        """Config echo for reports, with every default resolved."""
        data = self.model_dump(by_alias=True)
        spec = self.ensemble.to_spec()
        data["ensemble"] = {
            k: v
            for k, v in (
                ("kind", spec.kind),
                ("lambda", spec.lam),
                ("alpha", spec.alpha),
                ("beta", spec.beta),
                ("prob", spec.prob),
                ("intensity", spec.intensity),
                ("radius", spec.radius),
            )
            if v is not None
        }
        data["directions"] = {
            "xi": self.resolved_xi(),
            "e0": self.resolved_e0(),
            "e1": self.resolved_e1(),
        }
        return data


def semantic_issues(cfg: RunConfig) -> List[dict]:
    """Violations that couple the subcommand to other sections, all at once."""
    issues: List[tuple] = []
    d = cfg.lattice.d

    if cfg.subcommand == "variance-scan":
        Ls = cfg.lattice.Ls
        if not Ls:
            issues.append(("lattice.Ls", "variance-scan needs a list of torus sizes"))
        elif len(set(Ls)) < 3:
            issues.append(("lattice.Ls", f"need at least 3 distinct sizes for a slope fit, got {Ls}"))
    elif cfg.lattice.L is None:
        issues.append(("lattice.L", "a side length is required"))

    for name in ("xi", "e0", "e1"):
        vec = getattr(cfg.directions, name)
        if vec is not None and len(vec) != d:
            issues.append(
                (f"directions.{name}", f"has {len(vec)} components, lattice is {d}-dimensional")
            )

    if cfg.subcommand == "moments" and cfg.n_samples < 2:
        issues.append(("n_samples", "moments needs n_samples >= 2 for a standard error"))
    if cfg.subcommand == "probe-stationarity" and cfg.n_samples < 100:
        issues.append(("n_samples", f"probe-stationarity needs n_samples >= 100, got {cfg.n_samples}"))

    if cfg.subcommand in ("sg-check", "sg-p-check") and cfg.lattice.L is not None:
        n_edges = d * cfg.lattice.L**d
        if n_edges > MAX_EDGES:
            issues.append(
                ("lattice.L", f"{n_edges} edges exceed the exhaustive-enumeration limit of {MAX_EDGES}")
            )
        if cfg.ensemble.kind != "bernoulli":
            issues.append(("ensemble.kind", "spectral-gap enumeration needs the bernoulli (two-point) kind"))

    if cfg.subcommand == "decay" and cfg.lattice.L is not None:
        if 2**cfg.n_max * cfg.rho0 > cfg.lattice.L / 2:
            issues.append(
                ("n_max", f"largest ball radius 2^{cfg.n_max} * {cfg.rho0} exceeds L/2 = {cfg.lattice.L / 2}")
            )

    if cfg.source_site is not None and len(cfg.source_site) != d:
        issues.append(("source_site", f"has {len(cfg.source_site)} coordinates, lattice is {d}-dimensional"))

    seen = set()
    out = []
    for path, message in issues:
        if (path, message) not in seen:
            seen.add((path, message))
            out.append({"path": path, "message": message})
    return out


def validate_config_data(data: dict) -> RunConfig:
    """Validate an already-decoded configuration dict; raises ConfigError."""
    from pydantic import ValidationError

    try:
        cfg = RunConfig(**data)
    except ValidationError as err:
        raise ConfigError(
            [
                {"path": ".".join(str(p) for p in e["loc"]), "message": e["msg"]}
                for e in err.errors()
            ]
        ) from err
    issues = semantic_issues(cfg)
    if issues:
        raise ConfigError(issues)
    return cfg


def parse_config(text: str) -> RunConfig:
    """Parse and fully validate a JSON run configuration.

    Raises ConfigError carrying all problems found at the failing layer:
    JSON syntax errors with line/column, pydantic type and range errors with
    field paths, then cross-field issues.
    """
    import json

    try:
        data = json.loads(text)
    except json.JSONDecodeError as err:
        raise ConfigError(
            [{"path": f"line {err.lineno}, column {err.colno}", "message": err.msg}]
        ) from err
    if not isinstance(data, dict):
        raise ConfigError([{"path": "<root>", "message": "configuration must be a JSON object"}])
    return validate_config_data(data)
