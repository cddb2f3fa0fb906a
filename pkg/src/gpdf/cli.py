"""Scenario runner: named end-to-end experiments with reproducible outputs.

Each scenario writes CSV files plus a JSON manifest recording every
effective parameter, output digests, and the outcome of the scenario's
own invariant checks; the process exit status reflects those checks so
the scenario set doubles as an executable acceptance suite.
"""
from __future__ import annotations

import argparse
import hashlib
import json
import math
import os
import sys
import time
from dataclasses import dataclass, field as dfield
from pathlib import Path
from typing import Any, Callable, Optional

import numpy as np
import scipy.fft

from . import __version__
from .blowup import (
    certificate_from_values,
    certify_blowup,
    instantaneous_blowup_sweep,
    lemma_sum_check,
    shell_blowup_bound,
)
from .dynamics import COMPLETED, SolverConfig, Trajectory, evolve
from .ensemble import (
    AtomicMeasure,
    GaussianProfile,
    atom_from_state,
    build_blowup_measure,
    estimate_RH1,
    log_moment,
    truncate_measure,
)
from .gaussians import gaussian_state
from .grid import BoxGrid, WaveFunction, constant_field, h_alpha_norm
from .hierarchy import (
    K_functional,
    TraceDiagnostics,
    hierarchy_residual,
    write_trace_diagnostics,
)
from .observables import ObservableLogger, write_csv as write_observables_csv
from .scattering import extract_scattering_state, write_scattering_csv

SCENARIOS = (
    "defocusing-scatter",
    "focusing-blowup",
    "dichotomy",
    "hierarchy-residual",
    "higher-energy",
    "lemma-sum",
)

OUT_ROOT_ENV = "GPDF_OUT_ROOT"


class ConfigError(ValueError):
    pass


def _parse_bool(s: str) -> bool:
    low = s.strip().lower()
    if low in ("true", "yes", "on", "1"):
        return True
    if low in ("false", "no", "off", "0"):
        return False
    raise ValueError(f"not a boolean: {s!r}")


def _parse_int_list(s: str) -> tuple[int, ...]:
    return tuple(int(p.strip()) for p in s.split(",") if p.strip())


def _parse_float_list(s: str) -> tuple[float, ...]:
    return tuple(float(p.strip()) for p in s.split(",") if p.strip())


# (section, key) -> (parser, default)
SCHEMA: dict[str, dict[str, tuple[Callable[[str], Any], Any]]] = {
    "grid": {
        "d": (int, 3),
        "L": (float, 16.0),
        "N": (int, 64),
    },
    "solver": {
        "lam": (int, 1),
        "dt_init": (float, 1e-3),
        "dt_policy": (str, "fixed"),
        "beta": (float, 2.0),
        "dt_min": (float, 1e-8),
        "dealias": (_parse_bool, False),
        "t_max": (float, 1.0),
        "blowup_h1_threshold": (float, 1e3),
        "resolution_guard": (float, 0.1),
    },
    "measure": {
        "r": (float, 1.5),
        "J": (int, 8),
        "sigma": (float, 2.0),
        "b": (float, 0.0),       # 0 means "derive from the profile"
        "c_l4": (float, 1.0),
    },
    "run": {
        "amplitude": (float, 1.0),
        "levels": (int, 5),
        "k": (int, 2),
        "k_max": (int, 32),
        "k_list": (_parse_int_list, (20, 40, 80)),
        "R_list": (_parse_float_list, ()),
        "alpha": (float, 1.0),
        "snapshot_count": (int, 20),
    },
}

SCENARIO_DEFAULTS: dict[str, dict[tuple[str, str], Any]] = {
    "defocusing-scatter": {
        ("grid", "L"): 32.0,
        ("solver", "dt_init"): 1e-2,
        ("solver", "t_max"): 8.0,
        ("run", "amplitude"): 0.1,
        ("measure", "sigma"): 1.0,
    },
    "focusing-blowup": {
        ("solver", "lam"): -1,
        ("solver", "dt_policy"): "adaptive",
        ("solver", "t_max"): 2.5,
        ("run", "amplitude"): 10.0,
        ("measure", "sigma"): 1.0,
    },
    "dichotomy": {
        ("measure", "r"): 2.0,
        ("measure", "J"): 6,
        ("run", "k_max"): 16,
    },
    "hierarchy-residual": {
        ("grid", "L"): 4.0,
        ("grid", "N"): 16,
        ("solver", "dt_init"): 1e-3,
        ("solver", "t_max"): 0.2,
        ("run", "amplitude"): 8.0,   # unit-modulus constant: 8 / 4^{3/2}
        ("run", "snapshot_count"): 20,
    },
    "higher-energy": {
        ("measure", "sigma"): 1.0,
        ("run", "amplitude"): 1.0,
    },
    "lemma-sum": {},
}


@dataclass(frozen=True)
class ScenarioConfig:
    scenario: str
    values: dict[str, dict[str, Any]]

    def get(self, section: str, key: str) -> Any:
        return self.values[section][key]

    def to_text(self) -> str:
        lines = [f"scenario = {self.scenario}", ""]
        for section in SCHEMA:
            lines.append(f"[{section}]")
            for key, val in self.values[section].items():
                if isinstance(val, tuple):
                    val = ",".join(str(v) for v in val)
                lines.append(f"{key} = {val}")
            lines.append("")
        return "\n".join(lines)

    def flat(self) -> dict[str, Any]:
        out: dict[str, Any] = {"scenario": self.scenario}
        for section, keys in self.values.items():
            for key, val in keys.items():
                out[f"{section}.{key}"] = list(val) if isinstance(val, tuple) else val
        return out


def parse_config(text: str, scenario: Optional[str] = None) -> ScenarioConfig:
    """Parse the sectioned key-value format, rejecting unknown keys.

    Defaults (global, then per-scenario) fill in everything not given; a
    top-level `scenario = name` line may supply the scenario when the
    caller does not.
    """
    section = None
    seen: dict[tuple[str, str], Any] = {}
    file_scenario = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("[") and line.endswith("]"):
            section = line[1:-1].strip()
            if section not in SCHEMA:
                raise ConfigError(f"line {lineno}: unknown section [{section}]")
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, _, val = line.partition("=")
        key, val = key.strip(), val.strip()
        if section is None:
            if key == "scenario":
                file_scenario = val
                continue
            raise ConfigError(f"line {lineno}: key {key!r} outside any section")
        if key not in SCHEMA[section]:
            raise ConfigError(f"line {lineno}: unknown key {key!r} in [{section}]")
        parser = SCHEMA[section][key][0]
        try:
            seen[(section, key)] = parser(val)
        except ValueError as exc:
            raise ConfigError(
                f"line {lineno}: bad value for {section}.{key}: {exc}"
            ) from None

    name = scenario or file_scenario
    if name is None:
        raise ConfigError("no scenario given (config line or command argument)")
    if name not in SCENARIOS:
        raise ConfigError(f"unknown scenario {name!r}; see list-scenarios")

    values: dict[str, dict[str, Any]] = {}
    overrides = SCENARIO_DEFAULTS[name]
    for section, keys in SCHEMA.items():
        values[section] = {}
        for key, (_, default) in keys.items():
            val = seen.get((section, key), overrides.get((section, key), default))
            values[section][key] = val
    return ScenarioConfig(scenario=name, values=values)


# ---------------------------------------------------------------------------
# manifest


@dataclass
class Assertion:
    name: str
    passed: bool
    detail: str


def _sha256(path: Path) -> str:
    h = hashlib.sha256()
    h.update(path.read_bytes())
    return h.hexdigest()


def write_manifest(
    out_dir: Path,
    cfg: ScenarioConfig,
    assertions: list[Assertion],
    extras: dict,
    wall_time: float,
    seed: Optional[int],
    threads: int,
) -> Path:
    outputs = []
    for p in sorted(out_dir.iterdir()):
        if p.name == "manifest.json" or p.is_dir():
            continue
        outputs.append({"file": p.name, "sha256": _sha256(p)})
    doc = {
        "scenario": cfg.scenario,
        "version": __version__,
        "config": cfg.flat(),
        "threads": threads,
        "seed": seed,
        "wall_time_s": round(wall_time, 3),
        "outputs": outputs,
        "assertions": [a.__dict__ for a in assertions],
        "passed": all(a.passed for a in assertions),
        **extras,
    }
    path = out_dir / "manifest.json"
    path.write_text(json.dumps(doc, indent=2, sort_keys=False) + "\n")
    return path


def check_manifest(path: Path) -> list[str]:
    """Re-verify output digests of a manifest; returns mismatch messages."""
    doc = json.loads(path.read_text())
    problems = []
    for entry in doc.get("outputs", []):
        f = path.parent / entry["file"]
        if not f.exists():
            problems.append(f"missing output {entry['file']}")
        elif _sha256(f) != entry["sha256"]:
            problems.append(f"digest mismatch for {entry['file']}")
    return problems


# ---------------------------------------------------------------------------
# scenario implementations


def _solver_config(cfg: ScenarioConfig, **over) -> SolverConfig:
    s = cfg.values["solver"]
    params = dict(
        lam=s["lam"], dt_init=s["dt_init"], dt_policy=s["dt_policy"],
        beta=s["beta"], dt_min=s["dt_min"], dealias=s["dealias"],
        t_max=s["t_max"], blowup_h1_threshold=s["blowup_h1_threshold"],
        resolution_guard=s["resolution_guard"],
    )
    params.update(over)
    return SolverConfig(**params)


def _grid(cfg: ScenarioConfig) -> BoxGrid:
    g = cfg.values["grid"]
    return BoxGrid(d=g["d"], L=g["L"], N=g["N"])


def _initial_state(cfg: ScenarioConfig) -> WaveFunction:
    return gaussian_state(
        _grid(cfg), cfg.get("measure", "sigma"), cfg.get("run", "amplitude")
    )


def _profile(cfg: ScenarioConfig) -> GaussianProfile:
    return GaussianProfile(_grid(cfg), cfg.get("measure", "sigma"))


def _check(assertions: list[Assertion], name: str, ok: bool, detail: str) -> None:
    assertions.append(Assertion(name=name, passed=bool(ok), detail=detail))


def _run_defocusing_scatter(cfg, out_dir, assertions):
    phi0 = _initial_state(cfg)
    run = extract_scattering_state(
        phi0,
        t_max=cfg.get("solver", "t_max"),
        levels=cfg.get("run", "levels"),
        config=_solver_config(cfg),
    )
    mu = AtomicMeasure((atom_from_state(1.0, phi0),))
    runs = [run]
    write_scattering_csv(out_dir / "scattering.csv", mu, runs)

    incs = [inc for _, inc in run.cauchy]
    _check(assertions, "cauchy_increments_decreasing",
           all(b < a for a, b in zip(incs, incs[1:])),
           f"increments {incs}")
    from .scattering import hierarchy_scatter_diag
    for k in (1, 2, 3):
        dks = [hierarchy_scatter_diag(mu, runs, k, t) for t in run.check_times]
        _check(assertions, f"D_{k}_decreasing",
               all(b <= a + 1e-12 for a, b in zip(dks, dks[1:])),
               f"D_{k} over checkpoints: {dks}")
        bounds = [hierarchy_scatter_diag(mu, runs, k, t, "bound")
                  for t in run.check_times]
        # near convergence the exact value meets the bound to leading
        # order, so allow relative roundoff slack in the comparison
        _check(assertions, f"D_{k}_below_telescoping_bound",
               all(d <= b * (1.0 + 1e-3) + 1e-15 for d, b in zip(dks, bounds)),
               f"exact {dks} vs bound {bounds}")
    anchor = hierarchy_scatter_diag(mu, runs, 3, run.check_times[-1])
    _check(assertions, "anchor_zero", anchor <= 1e-12, f"D_3(T_max) = {anchor}")
    return {"warnings": list(run.warnings), "termination": run.termination}


def _run_focusing_blowup(cfg, out_dir, assertions):
    phi0 = _initial_state(cfg)
    cert = certify_blowup(phi0)
    logger = ObservableLogger(lam=-1, every=10)
    traj = evolve(phi0, _solver_config(cfg), observers=[logger])
    write_observables_csv(out_dir / "observables.csv", logger.records)
    _check(assertions, "certificate_valid", cert.valid,
           f"E = {cert.E:.6g}, b = {cert.b:.6g}")
    flagged = traj.termination != COMPLETED
    _check(assertions, "failure_flag_raised", flagged, traj.termination)
    if cert.valid and flagged:
        _check(assertions, "flag_within_certificate_window",
               traj.t_final <= 1.2 * cert.T,
               f"t* = {traj.t_final:.6g}, T = {cert.T:.6g}")
    return {
        "certificate": {"E": cert.E, "b": cert.b, "c": cert.c,
                        "T": cert.T, "valid": cert.valid},
        "termination": traj.termination,
        "t_final": traj.t_final,
    }


def _run_dichotomy(cfg, out_dir, assertions):
    r = cfg.get("measure", "r")
    J = cfg.get("measure", "J")
    k_max = cfg.get("run", "k_max")
    profile = _profile(cfg)
    mu = build_blowup_measure(r, J, profile)

    ks = list(range(1, k_max + 1))
    lemma = lemma_sum_check(r, [k for k in ks if k >= 4])
    rows = [
        TraceDiagnostics(k=k, alpha=1.0, t=0.0,
                         value_log=log_moment(mu, "H1_norm2", k),
                         classification="e^(ck^r)")
        for k in ks
    ]
    write_trace_diagnostics(out_dir / "trace_diagnostics.csv", rows)

    s_max = max(a.h1 / 2.0**a.shell for a in mu.atoms)
    envelope_ok = all(
        row.value_log <= (lemma.c_fit + 2.0 * math.log(s_max)) * row.k**r + 1e-9
        for row in rows if row.k >= 4
    )
    _check(assertions, "trace_below_superexponential_envelope", envelope_ok,
           f"c_fit = {lemma.c_fit:.4f}, s_max = {s_max:.4f}")

    # Ratio test: Tr / R^{2k} must grow without bound for every R below the
    # support radius.  The growth only sets in once the outermost atom
    # dominates the moment sum, so probe at powers beyond that onset.
    h1_max = max(a.h1 for a in mu.atoms)
    top = max(mu.atoms, key=lambda a: a.h1)
    k_div = 4
    for a in mu.atoms:
        if a.h1 < top.h1:
            # onset at which the top atom exceeds this one by 30 log-units,
            # so the remaining contamination cannot mask the slow growth
            gap = (a.log_weight - top.log_weight + 30.0) / (
                2.0 * (math.log(top.h1) - math.log(a.h1))
            )
            k_div = max(k_div, int(math.ceil(gap)) + 1)
    diverges = True
    for R in (1.0, h1_max / 4.0, h1_max / 1.01):
        ratios = [log_moment(mu, "H1_norm2", k) - 2 * k * math.log(R)
                  for k in (k_div, k_div + 5, k_div + 10)]
        diverges &= all(b > a for a, b in zip(ratios, ratios[1:]))
    _check(assertions, "ratio_test_diverges_below_support_radius", diverges,
           f"H1_max = {h1_max:.4f}, divergence onset k = {k_div}")

    est = estimate_RH1(mu, k_max)
    _check(assertions, "growth_exponent_recovered",
           abs(est.exponent_family - (r - 1.0)) <= 0.15,
           f"family fit {est.exponent_family:.3f} vs r-1 = {r - 1.0:.3f} "
           f"(direct log-log fit {est.exponent_loglog:.3f})")

    R_list = cfg.get("run", "R_list")
    if not R_list:
        R_list = tuple(
            float(1.01 * profile.norms.rescaled(j).h1) for j in range(1, min(J, 6) + 1)
        )
    from .blowup import min_representable_sweep_k
    k_sweep = max(cfg.get("run", "k"), min_representable_sweep_k(mu))
    sweep = instantaneous_blowup_sweep(r, J, k_sweep, R_list, profile, mu=mu)
    sweep.write_csv(out_dir / "sweep.csv")
    traces = [row.log_trace_k for row in sweep.rows]
    windows = [row.min_window for row in sweep.rows]
    _check(assertions, "sweep_trace_strictly_increasing",
           all(b > a for a, b in zip(traces, traces[1:])), f"{traces}")
    _check(assertions, "sweep_window_strictly_decreasing",
           all(b < a for a, b in zip(windows, windows[1:])), f"{windows}")
    (out_dir / "measure_manifest.json").write_text(mu.manifest_text() + "\n")
    return {
        "sweep_k": k_sweep,
        "c_fit": lemma.c_fit,
        "exponent_family": est.exponent_family,
        "exponent_loglog": est.exponent_loglog,
        "R_H1_limit": est.limit,
    }


def _run_hierarchy_residual(cfg, out_dir, assertions):
    grid = _grid(cfg)
    lam = cfg.get("solver", "lam")
    amp = cfg.get("run", "amplitude")
    value = amp / grid.L ** (grid.d / 2.0)
    phi0 = WaveFunction(constant_field(grid, value))
    n_snap = cfg.get("run", "snapshot_count")
    t_max = cfg.get("solver", "t_max")
    marks = [i * t_max / n_snap for i in range(1, n_snap + 1)]

    orders = []
    residuals = {}
    for scale in (1, 2):
        sub = [t for t in marks]
        cfg_s = _solver_config(cfg, snapshot_interval=t_max / (n_snap * scale))
        traj = evolve(phi0, cfg_s)
        samples = hierarchy_residual(traj, lam, k=1)
        residuals[scale] = max(s.one_body_residual for s in samples)
    order = math.log2(residuals[1] / residuals[2])
    _check(assertions, "residual_second_order", order >= 1.9,
           f"max residual {residuals[1]:.3e} vs half-step {residuals[2]:.3e}, "
           f"order {order:.3f}")

    cfg_fine = _solver_config(cfg, snapshot_interval=t_max / n_snap)
    traj = evolve(phi0, cfg_fine)
    with open(out_dir / "residual.csv", "w", newline="") as fh:
        import csv as _csv
        wr = _csv.writer(fh)
        wr.writerow(["t", "one_body_residual", "k1_bound", "k2_bound"])
        for s1, s2 in zip(hierarchy_residual(traj, lam, 1),
                          hierarchy_residual(traj, lam, 2)):
            wr.writerow([f"{s1.t:.17g}", f"{s1.one_body_residual:.17g}",
                         f"{s1.k_body_bound:.17g}", f"{s2.k_body_bound:.17g}"])
    return {"order": order}


def _run_higher_energy(cfg, out_dir, assertions):
    phi0 = _initial_state(cfg).normalize()
    mu0 = AtomicMeasure((atom_from_state(1.0, phi0),), probability=True)
    traj = evolve(phi0, _solver_config(cfg))
    mu_t = mu0.map_states(lambda a: traj.final_state)
    rows = []
    drift_ok = True
    details = []
    for m in (1, 2, 3):
        k0 = K_functional(mu0, m)
        kt = K_functional(mu_t, m)
        rel = abs(kt.slot_product - k0.slot_product) / abs(k0.slot_product)
        drift_ok &= rel <= 1e-5
        details.append(f"m={m}: rel drift {rel:.2e}")
        rows.append((0.0, m, k0.slot_product, k0.energy_power))
        rows.append((traj.t_final, m, kt.slot_product, kt.energy_power))
    with open(out_dir / "kfunctional.csv", "w", newline="") as fh:
        import csv as _csv
        wr = _csv.writer(fh)
        wr.writerow(["t", "m", "slot_product", "energy_power"])
        for row in rows:
            wr.writerow([f"{row[0]:.17g}", row[1], f"{row[2]:.17g}",
                         f"{row[3]:.17g}"])
    _check(assertions, "k_functional_conserved", drift_ok, "; ".join(details))
    return {"termination": traj.termination}


def _run_lemma_sum(cfg, out_dir, assertions):
    r = cfg.get("measure", "r")
    k_list = cfg.get("run", "k_list")
    report = lemma_sum_check(r, k_list)
    report.write_csv(out_dir / "lemma.csv")
    _check(assertions, "finite_c", math.isfinite(report.c_fit),
           f"c_fit = {report.c_fit:.6g}")
    _check(assertions, "tail_below_one",
           all(row.tail_below_one for row in report.rows),
           f"tail logs {[round(row.tail_log, 2) for row in report.rows]}")
    return {"c_fit": report.c_fit}


RUNNERS = {
    "defocusing-scatter": _run_defocusing_scatter,
    "focusing-blowup": _run_focusing_blowup,
    "dichotomy": _run_dichotomy,
    "hierarchy-residual": _run_hierarchy_residual,
    "higher-energy": _run_higher_energy,
    "lemma-sum": _run_lemma_sum,
}


def run_scenario(
    cfg: ScenarioConfig,
    out_dir: Path,
    threads: int = 1,
    seed: Optional[int] = None,
) -> tuple[Path, bool]:
    """Execute a scenario; returns (manifest path, all-assertions-passed)."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    assertions: list[Assertion] = []
    start = time.perf_counter()
    with scipy.fft.set_workers(max(1, threads)):
        extras = RUNNERS[cfg.scenario](cfg, out_dir, assertions)
    wall = time.perf_counter() - start
    manifest = write_manifest(out_dir, cfg, assertions, {"extras": extras},
                              wall, seed, threads)
    return manifest, all(a.passed for a in assertions)


# ---------------------------------------------------------------------------
# entry point


def main(argv: Optional[list[str]] = None) -> int:
    parser = argparse.ArgumentParser(prog="gpdf")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run a named scenario")
    p_run.add_argument("scenario", choices=SCENARIOS)
    p_run.add_argument("--config", type=Path, default=None)
    p_run.add_argument("--out", type=Path, default=None)
    p_run.add_argument("--threads", type=int, default=1)
    p_run.add_argument("--seed", type=int, default=None)

    sub.add_parser("list-scenarios", help="print scenario names")

    p_check = sub.add_parser("check", help="re-verify a manifest's digests")
    p_check.add_argument("manifest", type=Path)

    args = parser.parse_args(argv)

    if args.command == "list-scenarios":
        for name in SCENARIOS:
            print(name)
        return 0

    if args.command == "check":
        problems = check_manifest(args.manifest)
        for p in problems:
            print(p, file=sys.stderr)
        print("ok" if not problems else f"{len(problems)} problem(s)")
        return 0 if not problems else 1

    text = args.config.read_text() if args.config else ""
    try:
        cfg = parse_config(text, args.scenario)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    out_dir = args.out
    if out_dir is None:
        root = os.environ.get(OUT_ROOT_ENV, "gpdf-out")
        out_dir = Path(root) / args.scenario
    manifest, passed = run_scenario(cfg, out_dir, threads=args.threads,
                                    seed=args.seed)
    doc = json.loads(Path(manifest).read_text())
    for a in doc["assertions"]:
        status = "PASS" if a["passed"] else "FAIL"
        print(f"[{status}] {a['name']}: {a['detail']}")
    print(f"manifest: {manifest}")
    if not passed:
        failed = [a["name"] for a in doc["assertions"] if not a["passed"]]
        print(f"failed invariants: {', '.join(failed)}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
