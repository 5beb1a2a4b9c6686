"""Command-line client for the experiment service.

The CLI performs no numerics itself: it assembles a run configuration
(config file, overridden by flags), hands it to the service layer (in
process by default, over HTTP with --server), and writes the returned
report to disk as JSON plus one CSV per table.

Exit codes: 0 success, 2 invalid configuration, 1 runtime failure.
"""

from __future__ import annotations

import argparse
import json
import sys

from .config import SUBCOMMANDS, ConfigError
from .ensembles import SeedContext, sample
from .fieldio import FieldFormatError, dump_field, load_field
from .lattice import TorusLattice
from .reports import csv_text, json_text, write_text_atomic
from .solver import SolverError


def _add_run_parser(sub, name):
    p = sub.add_parser(name, help=f"run the {name} experiment")
    p.add_argument("--config", help="JSON run-configuration file")
    p.add_argument("--L", help="torus side length, or comma list for variance-scan")
    p.add_argument("--d", type=int, help="lattice dimension")
    p.add_argument("--lambda", dest="lam", type=float, help="ellipticity constant in (0,1)")
    p.add_argument("--seed", type=int, help="master seed")
    p.add_argument("--samples", type=int, help="number of Monte-Carlo samples")
    p.add_argument("--p", type=float, help="moment exponent")
    p.add_argument("--q", help="q value, or comma list for sg-check")
    p.add_argument("--out", help="output JSON path (CSV tables written alongside)")
    p.add_argument("--threads", type=int, help="worker processes for sample loops")
    p.add_argument("--server", help="run remotely against this service URL")
    return p


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="homoglab",
        description="Random-conductance lattice homogenization experiments",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name in SUBCOMMANDS:
        _add_run_parser(sub, name)

    serve = sub.add_parser("serve", help="start the HTTP service")
    serve.add_argument("--host", default="127.0.0.1")
    serve.add_argument("--port", type=int, default=8000)

    fdump = sub.add_parser("field-dump", help="sample a coefficient field to a binary dump")
    fdump.add_argument("--config", help="JSON run-configuration file (ensemble and lattice)")
    fdump.add_argument("--L", type=int)
    fdump.add_argument("--d", type=int)
    fdump.add_argument("--lambda", dest="lam", type=float)
    fdump.add_argument("--seed", type=int)
    fdump.add_argument("--out", required=True, help="output path for the binary dump")

    finfo = sub.add_parser("field-info", help="validate a binary field dump and print its header")
    finfo.add_argument("path")
    return parser


def _merge_overrides(data: dict, args) -> dict:
    data = dict(data)
    data.setdefault("ensemble", {})
    data.setdefault("lattice", {})
    if getattr(args, "d", None) is not None:
        data["lattice"]["d"] = args.d
    L = getattr(args, "L", None)
    if L is not None:
        parts = str(L).split(",")
        if len(parts) > 1:
            data["lattice"]["Ls"] = [int(v) for v in parts]
        elif data.get("subcommand") == "variance-scan":
            data["lattice"]["Ls"] = [int(parts[0])]
        else:
            data["lattice"]["L"] = int(parts[0])
    if getattr(args, "lam", None) is not None:
        data["ensemble"]["lambda"] = args.lam
    if getattr(args, "seed", None) is not None:
        data["master_seed"] = args.seed
    if getattr(args, "samples", None) is not None:
        data["n_samples"] = args.samples
    if getattr(args, "p", None) is not None:
        data["p"] = args.p
    q = getattr(args, "q", None)
    if q is not None:
        parts = [float(v) for v in str(q).split(",")]
        if len(parts) > 1:
            data["q_list"] = parts
        else:
            data["q"] = parts[0]
            data["q_list"] = parts
    if getattr(args, "threads", None) is not None:
        data["threads"] = args.threads
    if getattr(args, "out", None) is not None:
        data["out"] = args.out
    return data


def _load_config_file(path) -> dict:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            text = fh.read()
    except OSError as err:
        raise ConfigError([{"path": "--config", "message": str(err)}])
    try:
        data = json.loads(text)
    except json.JSONDecodeError as err:
        raise ConfigError(
            [{"path": f"line {err.lineno}, column {err.colno}", "message": err.msg}]
        )
    if not isinstance(data, dict):
        raise ConfigError([{"path": "<root>", "message": "configuration must be a JSON object"}])
    return data


def _emit_error(kind: str, errors) -> None:
    sys.stderr.write(json_text({"error": {"kind": kind, "details": errors}}))


def _run_remote(server: str, data: dict) -> dict:
    import httpx

    resp = httpx.post(server.rstrip("/") + "/run", json=data, timeout=None)
    if resp.status_code == 422:
        raise ConfigError(resp.json()["detail"])
    if resp.status_code != 200:
        raise RuntimeError(f"service returned {resp.status_code}: {resp.text}")
    return resp.json()


def _write_artifacts(document: dict, out_path: str) -> list:
    written = []
    write_text_atomic(out_path, json_text(document))
    written.append(out_path)
    stem = out_path[:-5] if out_path.endswith(".json") else out_path
    for name, table in document.get("tables", {}).items():
        path = f"{stem}.{name}.csv"
        write_text_atomic(path, csv_text(table["header"], table["rows"]))
        written.append(path)
    return written


def _cmd_run(args) -> int:
    data = _load_config_file(args.config) if args.config else {}
    data["subcommand"] = args.command
    data = _merge_overrides(data, args)
    if args.server:
        document = _run_remote(args.server, data)
    else:
        from .dispatch import run_config
        from .config import validate_config_data

        cfg = validate_config_data(data)
        document = run_config(cfg)
    out = data.get("out") or f"{args.command}.json"
    written = _write_artifacts(document, out)
    print(f"{args.command}: ok, wrote {', '.join(written)}")
    return 0


def _cmd_field_dump(args) -> int:
    data = _load_config_file(args.config) if args.config else {}
    data.setdefault("subcommand", "corrector")
    data = _merge_overrides(data, args)
    from .config import validate_config_data

    cfg = validate_config_data(data)
    lat = TorusLattice(cfg.lattice.d, cfg.lattice.L)
    a = sample(cfg.ensemble.to_spec(), lat, SeedContext(cfg.master_seed, 0))
    dump_field(a, args.out)
    print(f"field-dump: wrote {args.out} ({lat.n_edges} edges)")
    return 0


def _cmd_field_info(args) -> int:
    a = load_field(args.path)
    info = {
        "d": a.lattice.d,
        "L": a.lattice.L,
        "lambda": a.lam,
        "n_edges": a.lattice.n_edges,
        "min": float(a.values.min()),
        "max": float(a.values.max()),
    }
    sys.stdout.write(json_text(info))
    return 0


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "serve":
            import uvicorn

            from .service import app

            uvicorn.run(app, host=args.host, port=args.port)
            return 0
        if args.command == "field-dump":
            return _cmd_field_dump(args)
        if args.command == "field-info":
            return _cmd_field_info(args)
        return _cmd_run(args)
    except ConfigError as err:
        _emit_error("config", err.errors)
        return 2
    except FieldFormatError as err:
        _emit_error("field-format", [{"path": "file", "message": str(err)}])
        return 1
    except SolverError as err:
        _emit_error("solver", [{"path": "solver", "message": str(err)}])
        return 1
    except RuntimeError as err:
        _emit_error("runtime", [{"path": "run", "message": str(err)}])
        return 1


if __name__ == "__main__":
    sys.exit(main())
