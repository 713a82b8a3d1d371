"""Command-line entry point: ``fitted-fvm solve|converge|compare --config <path> [--out <dir>]``.

Configs are JSON.  Data files are CSV and depend only on the config; run
metadata (timestamp, versions, timing) goes to a ``*.meta.json`` sidecar.
Exit status: 0 when every requested diagnostic passed, 1 when a diagnostic
failed, 2 for an invalid config or arguments.
"""

from __future__ import annotations

import argparse
import json
import os
import platform
import sys
import tempfile
import time
from datetime import datetime, timezone
from pathlib import Path

import jsonschema
import numpy as np

from . import __version__
from .experiments import (
    COMPARISON_PRESETS,
    make_mesh,
    run_analytic_convergence,
    run_comparison,
    run_mms_study,
    run_self_convergence,
    solution_csv,
    test_problem,
)
from .mesh import ConfigurationError
from .model import (
    BullSpread,
    Butterfly,
    Call,
    CashOrNothing,
    Constant,
    LinearInX,
    MarketModel,
    Put,
    SinusoidalInT,
)
from .solver import POSITIVITY_TOL, SolverConfig, solve_evolution

_NUM = {"type": "number"}
_POS = {"type": "number", "exclusiveMinimum": 0}
_RANGE = {"type": "array", "items": _NUM, "minItems": 2, "maxItems": 2}

_COEFF = {
    "oneOf": [
        _NUM,
        {
            "type": "object",
            "properties": {"kind": {"const": "constant"}, "value": _NUM},
            "required": ["kind", "value"],
            "additionalProperties": False,
        },
        {
            "type": "object",
            "properties": {"kind": {"const": "sinusoidal_t"}, "base": _NUM, "amplitude": _NUM, "frequency": _NUM},
            "required": ["kind", "base", "amplitude", "frequency"],
            "additionalProperties": False,
        },
        {
            "type": "object",
            "properties": {"kind": {"const": "linear_x"}, "slope": _NUM},
            "required": ["kind", "slope"],
            "additionalProperties": False,
        },
    ]
}

_PAYOFF = {
    "type": "object",
    "properties": {
        "kind": {"enum": ["call", "put", "cash_or_nothing", "bull_spread", "butterfly"]},
        "E": _POS,
        "E1": _POS,
        "E2": _POS,
        "S1": _POS,
        "S2": _POS,
        "S3": _POS,
    },
    "required": ["kind"],
    "additionalProperties": False,
}

_PROBLEM = {
    "oneOf": [
        {"type": "integer", "minimum": 1, "maximum": 4},
        {
            "type": "object",
            "properties": {"sigma": _COEFF, "r": _COEFF, "d": _COEFF, "p_m": _POS, "payoff": _PAYOFF},
            "required": ["sigma", "r", "d", "p_m", "payoff"],
            "additionalProperties": False,
        },
    ]
}

_NS = {"type": "array", "items": {"type": "integer", "minimum": 4}, "minItems": 1}

SCHEMA = {
    "type": "object",
    "properties": {
        "problem": _PROBLEM,
        "mesh": {
            "type": "object",
            "properties": {"family": {"enum": ["uniform", "graded"]}, "N": {"type": "integer", "minimum": 4}, "p": _POS},
            "additionalProperties": False,
        },
        "time": {
            "type": "object",
            "properties": {
                "theta": {"type": "number", "minimum": 0, "maximum": 1},
                "dt": {"oneOf": [_POS, {"const": "min_h"}]},
                "T": _POS,
            },
            "additionalProperties": False,
        },
        "study": {
            "type": "object",
            "properties": {
                "kind": {"enum": ["mms", "self", "analytic"]},
                "Ns": _NS,
                "fine_N": {"type": "integer", "minimum": 4},
                "fine_dt": _POS,
                "S_point": _POS,
            },
            "required": ["kind", "Ns"],
            "additionalProperties": False,
        },
        "preset": {"enum": sorted(COMPARISON_PRESETS)},
        "outputs": {
            "type": "object",
            "properties": {
                "solution_path": {"type": "string", "minLength": 1},
                "table_path": {"type": "string", "minLength": 1},
                "slices": {"oneOf": [{"enum": ["final", "all"]}, {"type": "integer", "minimum": 1}]},
            },
            "additionalProperties": False,
        },
        "diagnostics": {
            "type": "object",
            "properties": {
                "positivity": {"type": "boolean"},
                "m_matrix": {"type": "boolean"},
                "rc_inf": _RANGE,
                "rc_l2": _RANGE,
                "rc_point": _RANGE,
                "max_fitted_flips": {"type": "integer", "minimum": 0},
                "min_csds_flips": {"type": "integer", "minimum": 0},
            },
            "additionalProperties": False,
        },
    },
    "additionalProperties": False,
}


class ConfigError(Exception):
    def __init__(self, message: str, line: int | None = None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line is not None else message)


def _locate_line(text: str, path) -> int | None:
    """Best-effort line number of the JSON node at ``path`` (keys and indices)."""
    pos = 0
    found = None
    for key in path:
        if isinstance(key, int):
            continue  # array element: stay at its parent key
        idx = text.find(json.dumps(key), pos)
        if idx < 0:
            break
        pos = idx + 1
        found = idx
    if found is None:
        return 1
    return text.count("\n", 0, found) + 1


def load_config(path: str | Path) -> dict:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from exc
    try:
        cfg = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON: {exc.msg}", exc.lineno) from exc
    validator = jsonschema.Draft202012Validator(SCHEMA)
    errors = sorted(validator.iter_errors(cfg), key=lambda e: list(e.absolute_path))
    if errors:
        err = errors[0]
        where = "/".join(str(p) for p in err.absolute_path) or "<root>"
        raise ConfigError(f"{where}: {err.message}", _locate_line(text, list(err.absolute_path)))
    return cfg


# -- config to objects -------------------------------------------------------


def _coefficient(spec):
    if not isinstance(spec, dict):
        return Constant(float(spec))
    kind = spec["kind"]
    if kind == "constant":
        return Constant(float(spec["value"]))
    if kind == "sinusoidal_t":
        return SinusoidalInT(float(spec["base"]), float(spec["amplitude"]), float(spec["frequency"]))
    return LinearInX(float(spec["slope"]))


def _payoff(spec):
    kind = spec["kind"]
    need = {
        "call": ("E",),
        "put": ("E",),
        "cash_or_nothing": ("E",),
        "bull_spread": ("E1", "E2"),
        "butterfly": ("S1", "S2", "S3"),
    }[kind]
    missing = [k for k in need if k not in spec]
    if missing:
        raise ConfigurationError(f"payoff {kind} needs {', '.join(missing)}")
    args = [float(spec[k]) for k in need]
    cls = {"call": Call, "put": Put, "cash_or_nothing": CashOrNothing, "bull_spread": BullSpread, "butterfly": Butterfly}
    return cls[kind](*args)


def problem_from_config(cfg):
    """(model, payoff, default T) for the ``problem`` entry."""
    prob = cfg.get("problem", 1)
    if isinstance(prob, int):
        tp = test_problem(prob)
        return tp.model, tp.payoff, tp.T
    model = MarketModel(
        sigma=_coefficient(prob["sigma"]),
        r=_coefficient(prob["r"]),
        d=_coefficient(prob["d"]),
        p_m=float(prob["p_m"]),
    )
    return model, _payoff(prob["payoff"]), 1.0


# -- output ---------------------------------------------------------------------


def atomic_write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _write_meta(path: Path, command: str, cfg: dict, started: float, diagnostics: dict) -> None:
    meta = {
        "command": command,
        "config": cfg,
        "diagnostics": diagnostics,
        "created": datetime.now(timezone.utc).isoformat(),
        "elapsed_seconds": time.perf_counter() - started,
        "version": __version__,
        "python": platform.python_version(),
        "numpy": np.__version__,
    }
    atomic_write(path.with_name(path.name + ".meta.json"), json.dumps(meta, indent=2, default=str) + "\n")


def _in_range(values, bounds):
    lo, hi = bounds
    vals = [v for v in values if v is not None]
    return bool(vals) and all(lo <= v <= hi for v in vals)


# -- commands ----------------------------------------------------------------------


def cmd_solve(cfg: dict, out: Path) -> int:
    started = time.perf_counter()
    model, payoff, T_default = problem_from_config(cfg)
    mesh_cfg = cfg.get("mesh", {})
    mesh = make_mesh(mesh_cfg.get("family", "uniform"), mesh_cfg.get("N", 320), mesh_cfg.get("p", 2.0))
    tcfg = cfg.get("time", {})
    dt = tcfg.get("dt", 1e-3)
    if dt == "min_h":
        dt = float(mesh.steps.min())
    diag_cfg = cfg.get("diagnostics", {})
    outputs = cfg.get("outputs", {})
    slices = outputs.get("slices", "final")
    config = SolverConfig(
        T=tcfg.get("T", T_default),
        dt=dt,
        theta=tcfg.get("theta", 0.5),
        record_every=slices if isinstance(slices, int) else (1 if slices == "all" else None),
        check_positivity=diag_cfg.get("positivity", False),
        check_m_matrix=diag_cfg.get("m_matrix", False),
    )
    sol = solve_evolution(config, mesh, model, payoff)
    ks = [-1] if slices == "final" else list(range(len(sol.times)))
    path = out / outputs.get("solution_path", "solution.csv")
    atomic_write(path, solution_csv(sol, ks))

    dg = sol.diagnostics
    checks = {}
    if diag_cfg.get("positivity"):
        checks["positivity"] = dg.min_value >= -POSITIVITY_TOL
    if diag_cfg.get("m_matrix"):
        checks["m_matrix"] = dg.m_matrix_failures == 0
    info = {"min_value": dg.min_value, "steps": dg.steps, "m_matrix_failures": dg.m_matrix_failures, "checks": checks}
    _write_meta(path, "solve", cfg, started, info)
    for name, ok in checks.items():
        print(f"{name}: {'PASS' if ok else 'FAIL'}")
    return 0 if all(checks.values()) else 1


def cmd_converge(cfg: dict, out: Path) -> int:
    started = time.perf_counter()
    study = cfg.get("study")
    if study is None:
        raise ConfigurationError("converge needs a 'study' section")
    kind, Ns = study["kind"], study["Ns"]
    tcfg = cfg.get("time", {})
    theta = tcfg.get("theta", 0.5)
    prob = cfg.get("problem", 1)
    if not isinstance(prob, int):
        raise ConfigurationError("convergence studies take a test-problem id")
    if kind == "mms":
        mesh_cfg = cfg.get("mesh", {})
        table = run_mms_study(
            prob,
            mesh_cfg.get("family", "uniform"),
            Ns,
            dt=tcfg.get("dt", 1e-3),
            T=tcfg.get("T", 1.0),
            p=mesh_cfg.get("p", 2.0),
            theta=theta,
        )
    elif kind == "self":
        table = run_self_convergence(
            prob,
            Ns,
            fine_N=study.get("fine_N", 5120),
            fine_dt=study.get("fine_dt", 1e-4),
            dt=tcfg.get("dt"),
            theta=theta,
        )
    else:
        table = run_analytic_convergence(
            Ns, dt=tcfg.get("dt", 1e-4), S_point=study.get("S_point", 600.0), theta=theta
        )
    path = out / cfg.get("outputs", {}).get("table_path", "table.csv")
    atomic_write(path, table.to_csv())
    if table.e_point is not None:
        atomic_write(path.with_name(path.stem + "_pointwise.csv"), table.pointwise_csv())
    print(table)

    diag_cfg = cfg.get("diagnostics", {})
    checks = {}
    for key, series in (("rc_inf", table.rc_inf), ("rc_l2", table.rc_l2), ("rc_point", table.rc_point)):
        if key in diag_cfg:
            checks[key] = series is not None and _in_range(series, diag_cfg[key])
    _write_meta(path, "converge", cfg, started, {"checks": checks, "metadata": table.metadata})
    for name, ok in checks.items():
        print(f"{name}: {'PASS' if ok else 'FAIL'}")
    return 0 if all(checks.values()) else 1


def cmd_compare(cfg: dict, out: Path) -> int:
    started = time.perf_counter()
    preset = cfg.get("preset")
    if preset is None:
        raise ConfigurationError("compare needs a 'preset' entry")
    report = run_comparison(preset)
    paths = {s: out / f"{preset}_{s}.csv" for s in ("fitted", "csds")}
    for scheme, path in paths.items():
        atomic_write(path, report.scheme_csv(scheme))
    line = report.summary_line()
    summary = out / f"{preset}_summary.txt"
    atomic_write(summary, line + "\n")
    print(line)

    diag_cfg = cfg.get("diagnostics", {})
    checks = {}
    if diag_cfg.get("positivity", True):
        checks["fitted_positivity"] = report.fitted_min >= -POSITIVITY_TOL
    if "max_fitted_flips" in diag_cfg:
        checks["fitted_flips"] = report.fitted_flips <= diag_cfg["max_fitted_flips"]
    if "min_csds_flips" in diag_cfg:
        checks["csds_flips"] = report.csds_flips >= diag_cfg["min_csds_flips"]
    _write_meta(summary, "compare", cfg, started, {"checks": checks})
    for name, ok in checks.items():
        print(f"{name}: {'PASS' if ok else 'FAIL'}")
    return 0 if all(checks.values()) else 1


COMMANDS = {"solve": cmd_solve, "converge": cmd_converge, "compare": cmd_compare}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fitted-fvm", description=__doc__.splitlines()[0])
    parser.add_argument("command", choices=sorted(COMMANDS))
    parser.add_argument("--config", required=True, help="JSON run configuration")
    parser.add_argument("--out", default=".", help="output directory (default: current directory)")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
        return COMMANDS[args.command](cfg, Path(args.out))
    except ConfigError as exc:
        print(f"{args.config}: {exc}", file=sys.stderr)
        return 2
    except (ConfigurationError, ValueError) as exc:
        print(f"{args.config}: invalid configuration: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
