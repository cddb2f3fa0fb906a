"""Shared fixtures: real scenario outputs produced by the gpdf CLI.

The renderer is exercised against genuine scenario directories rather
than hand-written CSVs wherever possible, so the schema declarations in
this package stay honest against what the producing side actually
writes.  Small synthetic trees are built per-test for the failure-path
cases (schema mismatch, empty input).
"""
from __future__ import annotations

import json
import subprocess
import sys
from pathlib import Path

import pytest

# scenarios that together cover every CSV this package knows how to plot
SCENARIOS = ("dichotomy", "focusing-blowup", "defocusing-scatter")


@pytest.fixture(scope="session")
def scenario_root(tmp_path_factory) -> Path:
    """Directory tree of real scenario outputs (runs the gpdf CLI once)."""
    root = tmp_path_factory.mktemp("scenario-outputs")
    for name in SCENARIOS:
        cmd = [sys.executable, "-m", "gpdf.cli", "run", name,
               "--out", str(root / name), "--threads", "2"]
        proc = subprocess.run(cmd, capture_output=True, text=True)
        assert proc.returncode == 0, (
            f"scenario {name} failed:\n{proc.stdout}\n{proc.stderr}"
        )
    return root


@pytest.fixture(scope="session")
def rendered(scenario_root, tmp_path_factory):
    """(out_dir, stdout) from one full render over the scenario tree."""
    from gpdf_plots import cli

    out_dir = tmp_path_factory.mktemp("figures")
    import contextlib
    import io

    buf = io.StringIO()
    with contextlib.redirect_stdout(buf):
        status = cli.main(["--in", str(scenario_root), "--out", str(out_dir)])
    assert status == 0, buf.getvalue()
    return out_dir, buf.getvalue()


def make_manifest(out_dir: Path, scenario: str, extras: dict | None = None):
    """Write a minimal manifest covering every file already in out_dir."""
    import hashlib

    outputs = []
    for p in sorted(out_dir.iterdir()):
        if p.name == "manifest.json" or p.is_dir():
            continue
        outputs.append({
            "file": p.name,
            "sha256": hashlib.sha256(p.read_bytes()).hexdigest(),
        })
    doc = {"scenario": scenario, "outputs": outputs,
           "extras": extras or {}}
    (out_dir / "manifest.json").write_text(json.dumps(doc, indent=2))
