"""HTTP service surface: endpoints, validation, parity with direct dispatch."""

import json

import pytest
from fastapi.testclient import TestClient

from homoglab.config import parse_config
from homoglab.dispatch import run_config
from homoglab.reports import json_text
from homoglab.service import app

client = TestClient(app)


def test_health():
    resp = client.get("/health")
    assert resp.status_code == 200
    body = resp.json()
    assert body["status"] == "ok"
    assert "corrector" in body["subcommands"]


def test_run_corrector_parity_with_direct_dispatch():
    body = {
        "subcommand": "corrector",
        "lattice": {"d": 2, "L": 6},
        "master_seed": 3,
    }
    resp = client.post("/run", json=body)
    assert resp.status_code == 200
    doc = resp.json()
    direct = run_config(parse_config(json.dumps(body)))
    assert json_text(doc["science"]) == json_text(direct["science"])
    assert set(doc.keys()) == {"science", "tables", "meta"}


def test_run_named_endpoint():
    resp = client.post("/run/sg-check", json={"lattice": {"d": 2, "L": 2}})
    assert resp.status_code == 200
    results = resp.json()["science"]["results"]
    assert results["n_configs"] == 256
    assert results["efron_stein_dominates"] is True


def test_run_named_endpoint_subcommand_mismatch():
    resp = client.post("/run/green", json={"subcommand": "corrector"})
    assert resp.status_code == 422
    assert "path says" in resp.json()["detail"][0]["message"]


def test_validation_error_lists_paths():
    resp = client.post(
        "/run",
        json={"subcommand": "moments", "n_samples": 0, "p": 0.5, "ensemble": {"lambda": 2.0}},
    )
    assert resp.status_code == 422
    paths = {e["path"] for e in resp.json()["detail"]}
    assert "n_samples" in paths and "p" in paths
    assert any("lam" in p for p in paths)


def test_solver_failure_maps_to_500():
    resp = client.post(
        "/run",
        json={
            "subcommand": "corrector",
            "lattice": {"d": 2, "L": 8},
            "solve": {"rel_tol": 1e-10, "max_iter": 1},
        },
    )
    assert resp.status_code == 500
    assert resp.json()["detail"][0]["path"] == "solver"


def test_variance_scan_over_http():
    resp = client.post(
        "/run/variance-scan",
        json={"lattice": {"d": 2, "Ls": [4, 6, 8]}, "n_samples": 10, "master_seed": 2},
    )
    assert resp.status_code == 200
    doc = resp.json()
    assert len(doc["tables"]["per_L"]["rows"]) == 3


def test_cli_against_live_server(tmp_path):
    # full remote path: real socket, real HTTP, CLI as a pure client
    import threading
    import time

    import httpx
    import uvicorn

    import homoglab.cli as cli

    config = uvicorn.Config(app, host="127.0.0.1", port=8731, log_level="error")
    server = uvicorn.Server(config)
    thread = threading.Thread(target=server.run, daemon=True)
    thread.start()
    try:
        for _ in range(100):
            time.sleep(0.05)
            try:
                if httpx.get("http://127.0.0.1:8731/health", timeout=1.0).status_code == 200:
                    break
            except httpx.HTTPError:
                continue
        else:
            pytest.fail("server did not come up")
        out = tmp_path / "live.json"
        code = cli.main(
            ["sg-check", "--server", "http://127.0.0.1:8731", "--L", "2", "--out", str(out)]
        )
        assert code == 0
        doc = json.loads(out.read_text())
        assert doc["science"]["results"]["n_configs"] == 256
        assert (tmp_path / "live.per_q.csv").exists()
        # invalid config over the wire still exits 2 with the error list
        code = cli.main(
            ["corrector", "--server", "http://127.0.0.1:8731", "--lambda", "1.5",
             "--out", str(tmp_path / "bad.json")]
        )
        assert code == 2
    finally:
        server.should_exit = True
        thread.join(timeout=5)


def test_cli_remote_mode_against_test_server(tmp_path, monkeypatch):
    # point the CLI's HTTP call at the in-process test client
    import homoglab.cli as cli

    class FakeHttpx:
        @staticmethod
        def post(url, json=None, timeout=None):
            assert url.endswith("/run")
            return client.post("/run", json=json)

    monkeypatch.setitem(__import__("sys").modules, "httpx", FakeHttpx)
    out = tmp_path / "remote.json"
    code = cli.main(
        ["corrector", "--server", "http://example.invalid", "--L", "4", "--out", str(out)]
    )
    assert code == 0
    doc = json.loads(out.read_text())
    assert doc["science"]["subcommand"] == "corrector"
