"""Command-line reproduction harness.

Subcommands
-----------
simulate   run a stochastic ensemble for a scenario and write observables
spectrum   simulate with momentum-frequency spectrum accumulation forced on
oracle     solve the same scenario exactly on a truncated number basis
optimize3  print the analytic three-site antibunching optimum for a given u
sweep      run simulate across a list of values of one scenario parameter

Scenarios come from --preset and/or a JSON --config file (the file is
deep-merged over the preset; --seed / --trajectories / --out override
both). The scenario layout is a nested dict with sections lattice, model,
drive, integration, observables; see resolve_scenario for the accepted
keys. All energies and rates are in loss-rate units.

Outputs land in --out (default "."): summary.json (validated against the
packaged JSON schema), observables.csv, and, when configured, tau.csv,
spectrum.csv, ridge.csv, or sweep.csv. CSV headers are fixed strings and
all floats are written with repr-faithful precision, so reruns with
deterministic reduction produce byte-identical bodies.

Sweep reproducibility: each sweep point runs with a seed derived from the
base seed and the point index alone, so extending the value list never
changes existing rows; a failing point is recorded in its row and the
sweep continues.
"""

from __future__ import annotations

import argparse
import copy
import json
import sys
import time
from dataclasses import dataclass, fields
from importlib import resources
from pathlib import Path

import numpy as np

from . import presets as presets_mod
from .analytic import (
    AnalyticError,
    optimal_detuning,
    optimal_hopping,
    optimality_residuals,
    solve_weak_drive_3site,
    weak_drive_g2,
)
from .integrator import (
    ConfigError,
    DivergenceError,
    IntegrationConfig,
    RecordDumpWriter,
    run_ensemble,
)
from .lattice import (
    Lattice,
    LatticeError,
    build_chain,
    build_lieb_2d,
    build_quasi1d_lieb,
    lattice_hash,
)
from .model import (
    DriveScheme,
    ModelError,
    ModelParams,
    drive_single,
    drive_two_site,
    drive_with_background,
)
from .observables import (
    MomentAccumulator,
    ObservableError,
    SpectrumAccumulator,
    oscillation_period,
    ridge_frequencies,
)
from .oracle import OracleError, g2_tau_regression, steady_state

SCHEMA_VERSION = 1
OBSERVABLES_HEADER = "site,n,n_stderr,n_imag,n_imag_stderr,g2,g2_stderr,g2_defined"
TAU_HEADER = "site,tau,g2,g2_stderr"
SPECTRUM_HEADER = "k_index,omega_index,k,omega,n_re,n_im"
RIDGE_HEADER = "k,centroid"
SWEEP_HEADER = "index,parameter,value,seed,status,site,n,n_stderr,g2,g2_stderr,message"

_USER_ERRORS = (
    ConfigError,
    LatticeError,
    ModelError,
    ObservableError,
    AnalyticError,
    OracleError,
)


class ScenarioError(ValueError):
    """Scenario dict rejected; the message names the offending field."""


# -- scenario resolution -----------------------------------------------------


@dataclass
class Scenario:
    lattice: Lattice
    model: ModelParams
    drive: DriveScheme
    integration: IntegrationConfig
    tau_grid: np.ndarray | None
    tau_sites: list
    spectrum: bool
    spectrum_window: str
    raw: dict


def _section(raw: dict, name: str, allowed: set) -> dict:
    sec = raw.get(name, {})
    if not isinstance(sec, dict):
        raise ScenarioError(f"{name}: expected an object")
    for key in sec:
        if key not in allowed:
            raise ScenarioError(f"{name}.{key}: unknown key")
    return sec


def _need(sec: dict, section: str, key: str):
    if key not in sec:
        raise ScenarioError(f"{section}.{key}: required")
    return sec[key]


def _amplitude(value, field: str) -> complex:
    if isinstance(value, (int, float)):
        return complex(value)
    if (
        isinstance(value, (list, tuple))
        and len(value) == 2
        and all(isinstance(v, (int, float)) for v in value)
    ):
        return complex(value[0], value[1])
    raise ScenarioError(f"{field}: expected a number or [re, im] pair")


def _build_lattice(raw: dict) -> Lattice:
    sec = _section(
        raw,
        "lattice",
        {"kind", "n_sites", "n_cells", "nx", "ny", "hopping", "smooth_edge", "smooth_edges"},
    )
    kind = _need(sec, "lattice", "kind")
    hopping = _amplitude(sec.get("hopping", 1.0), "lattice.hopping")
    try:
        if kind == "chain":
            return build_chain(int(_need(sec, "lattice", "n_sites")), hopping)
        if kind == "quasi1d":
            return build_quasi1d_lieb(
                int(_need(sec, "lattice", "n_cells")),
                hopping,
                smooth_edge=bool(sec.get("smooth_edge", True)),
            )
        if kind == "lieb2d":
            return build_lieb_2d(
                int(_need(sec, "lattice", "nx")),
                int(_need(sec, "lattice", "ny")),
                hopping,
                smooth_edges=bool(sec.get("smooth_edges", True)),
            )
    except LatticeError as exc:
        raise ScenarioError(f"lattice: {exc}") from exc
    raise ScenarioError(f"lattice.kind: unknown kind {kind!r}")


def _build_model(raw: dict) -> ModelParams:
    sec = _section(raw, "model", {"u", "gamma", "detuning", "site_detuning"})
    try:
        return ModelParams(
            u=float(_need(sec, "model", "u")),
            gamma=float(sec.get("gamma", 1.0)),
            detuning=sec.get("detuning", 0.0),
            site_detuning=dict(sec.get("site_detuning", {})),
        )
    except (ModelError, TypeError, ValueError) as exc:
        raise ScenarioError(f"model: {exc}") from exc


def _build_drive(raw: dict, lattice: Lattice) -> DriveScheme:
    sec = _section(
        raw, "drive", {"kind", "target", "targets", "amplitude", "background"}
    )
    kind = sec.get("kind", "none")
    try:
        if kind == "none":
            return DriveScheme(tuple([0j] * lattice.n_sites))
        amp = _amplitude(_need(sec, "drive", "amplitude"), "drive.amplitude")
        if kind == "single":
            return drive_single(lattice, _need(sec, "drive", "target"), amp)
        if kind == "with_background":
            return drive_with_background(
                lattice,
                _need(sec, "drive", "target"),
                amp,
                _amplitude(
                    _need(sec, "drive", "background"), "drive.background"
                ),
            )
        if kind == "two_site":
            return drive_two_site(
                lattice, list(_need(sec, "drive", "targets")), amp
            )
    except (ModelError, KeyError) as exc:
        raise ScenarioError(f"drive: {exc}") from exc
    raise ScenarioError(f"drive.kind: unknown kind {kind!r}")


def _build_integration(raw: dict) -> IntegrationConfig:
    allowed = {f.name for f in fields(IntegrationConfig)}
    sec = _section(raw, "integration", allowed)
    try:
        return IntegrationConfig(**sec)
    except (ConfigError, TypeError) as exc:
        raise ScenarioError(f"integration: {exc}") from exc


def resolve_scenario(raw: dict) -> Scenario:
    """Validate a nested scenario dict and construct all run inputs."""
    if not isinstance(raw, dict):
        raise ScenarioError("scenario: expected a JSON object")
    for key in raw:
        if key not in {"lattice", "model", "drive", "integration", "observables"}:
            raise ScenarioError(f"{key}: unknown section")
    lattice = _build_lattice(raw)
    model = _build_model(raw)
    drive = _build_drive(raw, lattice)
    integration = _build_integration(raw)
    sec = _section(
        raw,
        "observables",
        {"tau_max", "tau_sites", "spectrum", "spectrum_window"},
    )
    tau_grid = None
    tau_sites = list(sec.get("tau_sites", []))
    if sec.get("tau_max") is not None:
        tau_max = float(sec["tau_max"])
        if tau_max < 0:
            raise ScenarioError("observables.tau_max: must be non-negative")
        if not tau_sites:
            raise ScenarioError(
                "observables.tau_sites: required with tau_max"
            )
        n_lags = int(np.floor(tau_max / integration.sample_interval + 1e-9))
        tau_grid = np.arange(n_lags + 1) * integration.sample_interval
    for name in tau_sites:
        lattice.site_id(name)  # raises KeyError on unknown names
    return Scenario(
        lattice=lattice,
        model=model,
        drive=drive,
        integration=integration,
        tau_grid=tau_grid,
        tau_sites=tau_sites,
        spectrum=bool(sec.get("spectrum", False)),
        spectrum_window=str(sec.get("spectrum_window", "none")),
        raw=raw,
    )


def _deep_merge(base: dict, override: dict) -> dict:
    out = copy.deepcopy(base)
    for key, value in override.items():
        if (
            key in out
            and isinstance(out[key], dict)
            and isinstance(value, dict)
        ):
            out[key] = _deep_merge(out[key], value)
        else:
            out[key] = copy.deepcopy(value)
    return out


def _load_scenario_dict(args) -> dict:
    raw: dict = {}
    if args.preset:
        raw = presets_mod.preset_scenario(args.preset)
    if args.config:
        with open(args.config, "r", encoding="utf-8") as fh:
            try:
                user = json.load(fh)
            except json.JSONDecodeError as exc:
                raise ScenarioError(f"config file: {exc}") from exc
        raw = _deep_merge(raw, user)
    if not raw:
        raise ScenarioError("no scenario: pass --preset and/or --config")
    integ = raw.setdefault("integration", {})
    if args.seed is not None:
        integ["seed"] = args.seed
    if args.trajectories is not None:
        integ["n_trajectories"] = args.trajectories
    if getattr(args, "deterministic_reduction", False):
        integ["deterministic_reduction"] = True
    return raw


# -- output writing ----------------------------------------------------------


def _fmt(x) -> str:
    return format(float(x), ".17g")


def _fmt_any(x) -> str:
    try:
        return _fmt(x)
    except (TypeError, ValueError):
        return str(x).replace(",", ";")


def _json_num(x):
    x = float(x)
    return x if np.isfinite(x) else None


def _write_lines(path: Path, header: str, rows) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(header + "\n")
        for row in rows:
            fh.write(",".join(row) + "\n")


def _write_observables_csv(path: Path, occ, g2) -> None:
    rows = []
    for i, name in enumerate(occ.sites):
        rows.append(
            [
                name,
                _fmt(occ.n[i]),
                _fmt(occ.stderr[i]),
                _fmt(occ.imag[i]),
                _fmt(occ.imag_stderr[i]),
                _fmt(g2.g2[i]),
                _fmt(g2.stderr[i]),
                "true" if bool(g2.defined[i]) else "false",
            ]
        )
    _write_lines(path, OBSERVABLES_HEADER, rows)


def _write_tau_csv(path: Path, curves: dict) -> None:
    rows = []
    for site in curves:
        curve = curves[site]
        for i in range(len(curve.tau)):
            rows.append(
                [
                    site,
                    _fmt(curve.tau[i]),
                    _fmt(curve.g2[i]),
                    _fmt(curve.stderr[i]),
                ]
            )
    _write_lines(path, TAU_HEADER, rows)


def _write_spectrum_csv(path: Path, grid) -> None:
    rows = []
    for ki in range(len(grid.k)):
        for wi in range(len(grid.omega)):
            rows.append(
                [
                    str(ki),
                    str(wi),
                    _fmt(grid.k[ki]),
                    _fmt(grid.omega[wi]),
                    _fmt(grid.n_tilde[ki, wi].real),
                    _fmt(grid.n_tilde[ki, wi].imag),
                ]
            )
    _write_lines(path, SPECTRUM_HEADER, rows)


def _summary_schema() -> dict:
    text = (
        resources.files("liebpp").joinpath("summary.schema.json").read_text()
    )
    return json.loads(text)


def _validate_summary(doc: dict) -> None:
    try:
        import jsonschema
    except ImportError:
        return
    jsonschema.validate(doc, _summary_schema())


def _drive_summary(drive: DriveScheme, lattice: Lattice) -> dict:
    return {
        "support": [lattice.sites[i].name for i in drive.support],
        "amplitudes": {
            lattice.sites[i].name: [
                drive.amplitudes[i].real,
                drive.amplitudes[i].imag,
            ]
            for i in drive.support
        },
    }


def _model_summary(model: ModelParams) -> dict:
    return {
        "u": model.u,
        "gamma": model.gamma,
        "detuning": model.detuning,
        "site_detuning": dict(model.site_detuning),
    }


def _integration_summary(cfg: IntegrationConfig) -> dict:
    return {
        "dt": cfg.dt,
        "t_burn": cfg.t_burn,
        "t_end": cfg.t_end,
        "sample_interval": cfg.sample_interval,
        "n_trajectories": cfg.n_trajectories,
        "seed": cfg.seed,
        "scheme": cfg.scheme,
        "fixed_point_iters": cfg.fixed_point_iters,
        "deterministic_reduction": cfg.deterministic_reduction,
    }


def _site_entries(occ, g2) -> list:
    out = []
    for i, name in enumerate(occ.sites):
        out.append(
            {
                "name": name,
                "n": float(occ.n[i]),
                "n_stderr": _json_num(occ.stderr[i]),
                "n_imag": _json_num(occ.imag[i]),
                "n_imag_stderr": _json_num(occ.imag_stderr[i]),
                "g2": _json_num(g2.g2[i]),
                "g2_stderr": _json_num(g2.stderr[i]),
                "g2_defined": bool(g2.defined[i]),
            }
        )
    return out


def _write_summary(path: Path, doc: dict) -> None:
    _validate_summary(doc)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True, allow_nan=False)
        fh.write("\n")


# -- simulate ----------------------------------------------------------------


def _run_simulation(scenario: Scenario, dump_path=None):
    acc = MomentAccumulator(
        scenario.lattice,
        scenario.integration.sample_times(),
        tau_grid=scenario.tau_grid,
        tau_sites=scenario.tau_sites or None,
    )
    spec_acc = None
    if scenario.spectrum:
        spec_acc = SpectrumAccumulator(
            scenario.lattice,
            scenario.integration.sample_times(),
            window=scenario.spectrum_window,
        )
    writer = (
        RecordDumpWriter(dump_path, scenario.lattice, scenario.integration)
        if dump_path
        else None
    )
    try:
        for batch in run_ensemble(
            scenario.lattice,
            scenario.model,
            scenario.drive,
            scenario.integration,
        ):
            acc.add(batch)
            if spec_acc is not None:
                spec_acc.add(batch)
            if writer is not None:
                writer.append(batch)
    finally:
        if writer is not None:
            writer.close()
    return acc, spec_acc


def _cmd_simulate(args, command="simulate") -> int:
    raw = _load_scenario_dict(args)
    if command == "spectrum":
        raw.setdefault("observables", {})["spectrum"] = True
    scenario = resolve_scenario(raw)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    t0 = time.perf_counter()
    acc, spec_acc = _run_simulation(
        scenario, dump_path=getattr(args, "dump", None)
    )
    occ = acc.occupation()
    g2 = acc.g2_zero()
    _write_observables_csv(out_dir / "observables.csv", occ, g2)
    results: dict = {"sites": _site_entries(occ, g2)}
    if scenario.tau_grid is not None:
        curves = acc.g2_tau()
        _write_tau_csv(out_dir / "tau.csv", curves)
        periods = {}
        for site, curve in curves.items():
            try:
                periods[site] = oscillation_period(curve)
            except ObservableError:
                periods[site] = None
        results["oscillation_period"] = periods
    if spec_acc is not None:
        grid = spec_acc.result()
        _write_spectrum_csv(out_dir / "spectrum.csv", grid)
        try:
            ridge = ridge_frequencies(
                grid,
                scenario.model,
                hopping=float(
                    np.real(scenario.lattice.params["hopping"])
                ),
            )
            _write_lines(
                out_dir / "ridge.csv",
                RIDGE_HEADER,
                (
                    [_fmt(ridge.k[i]), _fmt(ridge.centroid[i])]
                    for i in range(len(ridge.k))
                ),
            )
            results["ridge"] = {
                "band": ridge.band,
                "spread": float(ridge.spread),
                "centroid_min": float(ridge.centroid.min()),
                "centroid_max": float(ridge.centroid.max()),
            }
        except ObservableError as exc:
            print(f"ridge extraction skipped: {exc}", file=sys.stderr)
    doc = {
        "schema_version": SCHEMA_VERSION,
        "command": command,
        "preset": args.preset,
        "seed": scenario.integration.seed,
        "n_trajectories": scenario.integration.n_trajectories,
        "diverged": acc.diverged,
        "deterministic_reduction": scenario.integration.deterministic_reduction,
        "lattice": {
            "kind": scenario.lattice.kind,
            "n_sites": scenario.lattice.n_sites,
            "site_names": scenario.lattice.names,
            "hash": lattice_hash(scenario.lattice),
        },
        "model": _model_summary(scenario.model),
        "drive": _drive_summary(scenario.drive, scenario.lattice),
        "integration": _integration_summary(scenario.integration),
        "results": results,
        "timing": {"wall_seconds": time.perf_counter() - t0},
    }
    _write_summary(out_dir / "summary.json", doc)
    for entry in results["sites"]:
        g2_text = (
            "undefined" if entry["g2"] is None else f"{entry['g2']:.4f}"
        )
        print(
            f"{entry['name']}: n={entry['n']:.5f} g2={g2_text}"
        )
    print(f"wrote {out_dir / 'summary.json'}")
    return 0


# -- oracle ------------------------------------------------------------------


def _cmd_oracle(args) -> int:
    raw = _load_scenario_dict(args)
    scenario = resolve_scenario(raw)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    t0 = time.perf_counter()
    ss = steady_state(
        scenario.lattice,
        scenario.model,
        scenario.drive,
        cutoff=args.cutoff,
        method=args.method,
        truncation_tol=args.truncation_tol,
    )
    rows = []
    defined = ss.n > 0
    for i, name in enumerate(ss.sites):
        rows.append(
            [
                name,
                _fmt(ss.n[i]),
                _fmt(0.0),
                _fmt(0.0),
                _fmt(0.0),
                _fmt(ss.g2[i]),
                _fmt(0.0),
                "true" if defined[i] else "false",
            ]
        )
    _write_lines(out_dir / "observables.csv", OBSERVABLES_HEADER, rows)
    results: dict = {
        "sites": [
            {
                "name": name,
                "n": float(ss.n[i]),
                "n_stderr": 0.0,
                "n_imag": 0.0,
                "n_imag_stderr": 0.0,
                "g2": _json_num(ss.g2[i]),
                "g2_stderr": 0.0,
                "g2_defined": bool(defined[i]),
            }
            for i, name in enumerate(ss.sites)
        ]
    }
    if scenario.tau_grid is not None:
        curves = {}
        from .observables import TauCurve

        for site in scenario.tau_sites:
            reg = g2_tau_regression(
                scenario.lattice,
                scenario.model,
                scenario.drive,
                site,
                scenario.tau_grid,
                cutoff=args.cutoff,
                method=args.method,
                truncation_tol=args.truncation_tol,
            )
            curves[site] = TauCurve(
                site=site,
                tau=reg.tau,
                g2=reg.g2,
                stderr=np.zeros_like(reg.g2),
            )
        _write_tau_csv(out_dir / "tau.csv", curves)
    doc = {
        "schema_version": SCHEMA_VERSION,
        "command": "oracle",
        "preset": args.preset,
        "seed": scenario.integration.seed,
        "n_trajectories": 0,
        "diverged": 0,
        "deterministic_reduction": False,
        "lattice": {
            "kind": scenario.lattice.kind,
            "n_sites": scenario.lattice.n_sites,
            "site_names": scenario.lattice.names,
            "hash": lattice_hash(scenario.lattice),
        },
        "model": _model_summary(scenario.model),
        "drive": _drive_summary(scenario.drive, scenario.lattice),
        "integration": _integration_summary(scenario.integration),
        "oracle": {
            "cutoff": args.cutoff,
            "method": ss.method,
            "residual": float(ss.residual),
            "top_population": float(ss.top_population),
            "min_eigenvalue": float(ss.min_eigenvalue),
        },
        "results": results,
        "timing": {"wall_seconds": time.perf_counter() - t0},
    }
    _write_summary(out_dir / "summary.json", doc)
    for i, name in enumerate(ss.sites):
        g2_text = "undefined" if not defined[i] else f"{ss.g2[i]:.5f}"
        print(f"{name}: n={ss.n[i]:.6f} g2={g2_text}")
    print(f"wrote {out_dir / 'summary.json'}")
    return 0


# -- optimize3 ---------------------------------------------------------------


def _cmd_optimize3(args) -> int:
    delta = optimal_detuning(args.u, args.gamma)
    hop = optimal_hopping(args.u, args.gamma)
    res = optimality_residuals(delta, hop, args.u, args.gamma)
    doc = {
        "u": args.u,
        "gamma": args.gamma,
        "detuning_opt": delta,
        "hopping_opt": hop,
        "residuals": [res[0], res[1]],
    }
    if args.f is not None:
        amps = solve_weak_drive_3site(
            delta, args.u, args.gamma, hop, args.f
        )
        doc["weak_drive_g2"] = weak_drive_g2(amps)
        doc["drive_amplitude"] = args.f
    text = json.dumps(doc, indent=2, sort_keys=True)
    if args.out:
        out_dir = Path(args.out)
        out_dir.mkdir(parents=True, exist_ok=True)
        (out_dir / "optimize3.json").write_text(text + "\n", encoding="utf-8")
        print(f"wrote {out_dir / 'optimize3.json'}")
    else:
        print(text)
    return 0


# -- sweep -------------------------------------------------------------------


def _set_path(raw: dict, dotted: str, value) -> None:
    keys = dotted.split(".")
    node = raw
    for key in keys[:-1]:
        node = node.setdefault(key, {})
        if not isinstance(node, dict):
            raise ScenarioError(f"sweep parameter {dotted}: bad path")
    node[keys[-1]] = value


def _point_seed(base_seed: int, index: int) -> int:
    seq = np.random.SeedSequence(entropy=base_seed, spawn_key=(index,))
    return int(seq.generate_state(1, np.uint64)[0] % (2**63))


def _cmd_sweep(args) -> int:
    if not args.config:
        raise ScenarioError("sweep: --config with a sweep spec is required")
    with open(args.config, "r", encoding="utf-8") as fh:
        spec = json.load(fh)
    for key in spec:
        if key not in {"preset", "base", "parameter", "values", "coupled", "site"}:
            raise ScenarioError(f"sweep.{key}: unknown key")
    parameter = spec.get("parameter")
    values = spec.get("values")
    if not parameter or not isinstance(values, list) or not values:
        raise ScenarioError(
            "sweep: 'parameter' (dotted path) and non-empty 'values' required"
        )
    coupled = list(spec.get("coupled", []))
    base: dict = {}
    if spec.get("preset"):
        base = presets_mod.preset_scenario(spec["preset"])
    if spec.get("base"):
        base = _deep_merge(base, spec["base"])
    if not base:
        raise ScenarioError("sweep: give 'preset' and/or 'base'")
    integ = base.setdefault("integration", {})
    if args.seed is not None:
        integ["seed"] = args.seed
    if args.trajectories is not None:
        integ["n_trajectories"] = args.trajectories
    if args.deterministic_reduction:
        integ["deterministic_reduction"] = True
    base_seed = int(integ.get("seed", 0))
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    rows = []
    for index, value in enumerate(values):
        seed = _point_seed(base_seed, index)
        raw = copy.deepcopy(base)
        _set_path(raw, parameter, value)
        for path in coupled:
            _set_path(raw, path, value)
        raw["integration"]["seed"] = seed
        try:
            scenario = resolve_scenario(raw)
            site = spec.get("site")
            if site is None:
                support = scenario.drive.support
                sid = support[0] if support else 0
                site = scenario.lattice.sites[sid].name
            sid = scenario.lattice.site_id(site)
            acc, _ = _run_simulation(scenario)
            occ = acc.occupation()
            g2 = acc.g2_zero()
            rows.append(
                [
                    str(index),
                    parameter,
                    _fmt_any(value),
                    str(seed),
                    "ok",
                    site,
                    _fmt(occ.n[sid]),
                    _fmt(occ.stderr[sid]),
                    _fmt(g2.g2[sid]),
                    _fmt(g2.stderr[sid]),
                    "",
                ]
            )
            print(f"point {index}: {parameter}={value} ok")
        except (
            *_USER_ERRORS,
            ScenarioError,
            DivergenceError,
            KeyError,
        ) as exc:
            rows.append(
                [
                    str(index),
                    parameter,
                    _fmt_any(value),
                    str(seed),
                    "failed",
                    "",
                    "nan",
                    "nan",
                    "nan",
                    "nan",
                    str(exc).replace(",", ";").replace("\n", " "),
                ]
            )
            print(f"point {index}: {parameter}={value} FAILED: {exc}")
    _write_lines(out_dir / "sweep.csv", SWEEP_HEADER, rows)
    print(f"wrote {out_dir / 'sweep.csv'}")
    return 0


# -- entry point -------------------------------------------------------------


def _add_common(p: argparse.ArgumentParser, with_dump=False) -> None:
    p.add_argument("--config", type=str, default=None, help="scenario JSON file")
    p.add_argument("--preset", type=str, default=None, help="named scenario")
    p.add_argument("--seed", type=int, default=None, help="base RNG seed")
    p.add_argument(
        "--trajectories", type=int, default=None, help="ensemble size"
    )
    p.add_argument("--out", type=str, default=".", help="output directory")
    p.add_argument(
        "--deterministic-reduction",
        action="store_true",
        dest="deterministic_reduction",
        help="fixed reduction order for byte-identical reruns",
    )
    if with_dump:
        p.add_argument(
            "--dump", type=str, default=None, help="raw record dump path"
        )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="liebpp",
        description="Stochastic phase-space simulator for driven-dissipative "
        "Lieb lattices",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_sim = sub.add_parser("simulate", help="run a stochastic ensemble")
    _add_common(p_sim, with_dump=True)
    p_sim.set_defaults(func=lambda a: _cmd_simulate(a, "simulate"))

    p_spec = sub.add_parser(
        "spectrum", help="simulate with spectrum accumulation forced on"
    )
    _add_common(p_spec, with_dump=True)
    p_spec.set_defaults(func=lambda a: _cmd_simulate(a, "spectrum"))

    p_or = sub.add_parser("oracle", help="exact small-lattice solution")
    _add_common(p_or)
    p_or.add_argument("--cutoff", type=int, default=6)
    p_or.add_argument(
        "--method",
        choices=["auto", "nullspace", "propagation"],
        default="auto",
    )
    p_or.add_argument("--truncation-tol", type=float, default=1e-6)
    p_or.set_defaults(func=_cmd_oracle)

    p_opt = sub.add_parser(
        "optimize3", help="analytic three-site antibunching optimum"
    )
    p_opt.add_argument("--u", type=float, required=True)
    p_opt.add_argument("--gamma", type=float, default=1.0)
    p_opt.add_argument(
        "--f", type=float, default=None, help="weak-drive prediction amplitude"
    )
    p_opt.add_argument("--out", type=str, default=None)
    p_opt.set_defaults(func=_cmd_optimize3)

    p_sw = sub.add_parser("sweep", help="scan one scenario parameter")
    _add_common(p_sw)
    p_sw.set_defaults(func=_cmd_sweep)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ScenarioError, *_USER_ERRORS, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except DivergenceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
