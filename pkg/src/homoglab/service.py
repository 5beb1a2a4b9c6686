"""HTTP front end: every experiment subcommand behind one POST endpoint.

The service is a thin wrapper over `dispatch.run_config`; request bodies are
the same JSON documents the CLI accepts as --config files, and responses
are the full report documents (science / tables / meta).
"""

from __future__ import annotations

from fastapi import FastAPI, HTTPException
from pydantic import BaseModel

from . import __version__
from .config import SUBCOMMANDS, ConfigError, validate_config_data
from .dispatch import run_config
from .solver import SolverError

app = FastAPI(
    title="homoglab",
    version=__version__,
    description="Random-conductance lattice homogenization experiments",
)


class RunReport(BaseModel):
    science: dict
    tables: dict
    meta: dict


class HealthReport(BaseModel):
    status: str
    version: str
    subcommands: list


@app.get("/health", response_model=HealthReport)
def health():
    return HealthReport(status="ok", version=__version__, subcommands=list(SUBCOMMANDS))


@app.post("/run", response_model=RunReport)
def run(body: dict):
    try:
        cfg = validate_config_data(body)
    except ConfigError as err:
        raise HTTPException(status_code=422, detail=err.errors)
    try:
        return RunReport(**run_config(cfg))
    except SolverError as err:
        raise HTTPException(
            status_code=500,
            detail=[{"path": "solver", "message": str(err)}],
        )


@app.post("/run/{subcommand}", response_model=RunReport)
def run_named(subcommand: str, body: dict):
    if "subcommand" in body and body["subcommand"] != subcommand:
        raise HTTPException(
            status_code=422,
            detail=[
                {
                    "path": "subcommand",
                    "message": f"body says {body['subcommand']!r} but the path says {subcommand!r}",
                }
            ],
        )
    return run({**body, "subcommand": subcommand})
