"""``plate-vi <config.json>``: solve, study, or export a mesh.

Errors are reported as one JSON line on stderr. Exit codes: 2 bad config,
3 solver failure, 4 file I/O failure.
"""
import argparse
import json
import logging
import os
import sys

import jsonschema
import numpy as np

from . import __version__
from .assembly import ProblemSpec
from .fields import CATALOG
from .harness import StudyError, get_benchmark, run_study, solve_on_mesh
from .io import fmt, study_csv, vtk_text
from .linalg import SolverError
from .mesh import unit_square_mesh

log = logging.getLogger("platevi")

EXIT_CONFIG, EXIT_SOLVER, EXIT_IO = 2, 3, 4

_FIELD = {
    "oneOf": [
        {"type": "number"},
        {"type": "string", "enum": sorted(CATALOG)},
        {"type": "object", "additionalProperties": False, "required": ["name"],
         "properties": {"name": {"type": "string", "enum": sorted(CATALOG)},
                        "params": {"type": "object", "additionalProperties": {"type": "number"}}}},
    ]
}
_POS_INT = {"type": "integer", "minimum": 1}

SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "required": ["command"],
    "properties": {
        "command": {"enum": ["solve", "study", "export-mesh"]},
        "domain": {"enum": ["unit_square"]},
        "n": {"oneOf": [_POS_INT, {"type": "array", "items": _POS_INT, "minItems": 1}]},
        "method": {"enum": ["c0ip", "mixed"]},
        "beta": {"type": "number", "exclusiveMinimum": 0},
        "sigma": {"type": "number", "exclusiveMinimum": 0},
        "y_d": _FIELD,
        "psi": _FIELD,
        "benchmark": {"type": "string"},
        "pdas": {"type": "object", "additionalProperties": False, "properties": {
            "c": {"type": "number", "exclusiveMinimum": 0},
            "max_iter": _POS_INT,
            "tol": {"type": "number", "exclusiveMinimum": 0}}},
        "output": {"type": "object", "additionalProperties": False, "properties": {
            "vtk": {"type": "string"}, "summary": {"type": "string"},
            "csv": {"type": "string"}, "figure": {"type": "string"}}},
        "record_timing": {"type": "boolean"},
        "threads": _POS_INT,
    },
    "allOf": [
        {"if": {"properties": {"command": {"const": "solve"}}},
         "then": {"required": ["n", "beta", "y_d", "psi"], "properties": {"n": _POS_INT}}},
        {"if": {"properties": {"command": {"const": "study"}}},
         "then": {"required": ["benchmark"]}},
        {"if": {"properties": {"command": {"const": "export-mesh"}}},
         "then": {"required": ["n"], "properties": {"n": _POS_INT}}},
    ],
}


class ConfigError(ValueError):
    pass


def load_config(path):
    """Read and validate a run configuration; raises ConfigError or OSError."""
    with open(path) as fh:
        text = fh.read()
    try:
        cfg = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON: {exc}") from None
    try:
        jsonschema.validate(cfg, SCHEMA)
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ConfigError(f"{where}: {exc.message}") from None
    if cfg["command"] == "solve":
        try:
            spec = problem_spec(cfg)
            spec.check_obstacle(unit_square_mesh(cfg["n"]))
        except (ValueError, TypeError) as exc:
            raise ConfigError(str(exc)) from None
    if cfg["command"] == "study":
        try:
            get_benchmark(cfg["benchmark"])
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
    return cfg


def problem_spec(cfg):
    kw = {"beta": cfg["beta"], "y_d": cfg["y_d"], "psi": cfg["psi"],
          "method": cfg.get("method", "c0ip")}
    if "sigma" in cfg:
        kw["sigma"] = cfg["sigma"]
    return ProblemSpec(**kw)


def _outputs(cfg):
    return {k: v for k, v in cfg.get("output", {}).items()}


def _check_writable(paths):
    for p in paths:
        d = os.path.dirname(os.path.abspath(p))
        if not os.path.isdir(d) or not os.access(d, os.W_OK):
            raise OSError(f"output directory not writable: {d}")


def _write(path, text):
    with open(path, "w", newline="\n") as fh:
        fh.write(text)


def run_solve(cfg):
    spec = problem_spec(cfg)
    mesh = unit_square_mesh(cfg["n"])
    ms = solve_on_mesh(mesh, spec, cfg.get("pdas"))
    sol, space = ms.solution, ms.space
    mult = np.zeros(mesh.num_vertices)
    act = np.zeros(mesh.num_vertices)
    interior = np.flatnonzero(space.vertex_dof_map >= 0)
    mult[interior] = sol.multiplier
    act[interior] = sol.active
    summary = {
        "command": "solve", "method": spec.method, "n": cfg["n"], "ndof": int(space.ndof),
        "iterations": int(sol.iterations), "active_count": sol.active_count,
        "kkt": {k: float(fmt(v)) for k, v in sol.kkt.as_dict().items()},
    }
    if cfg.get("record_timing"):
        summary["solve_seconds"] = ms.seconds
    files = {}
    out = _outputs(cfg)
    if "vtk" in out:
        files[out["vtk"]] = vtk_text(mesh, {
            "state": space.vertex_values(sol.state), "multiplier": mult,
            "active": act, "control": space.vertex_values(ms.control)},
            title=f"plate-vi solve {spec.method} n={cfg['n']}")
    line = json.dumps(summary, sort_keys=True)
    if "summary" in out:
        files[out["summary"]] = line + "\n"
    return line, files, None


def run_study_command(cfg):
    bench = get_benchmark(cfg["benchmark"])
    n = cfg.get("n")
    ns = [n] if isinstance(n, int) else n
    result = run_study(bench, method=cfg.get("method"), ns=ns, threads=cfg.get("threads"),
                       pdas=cfg.get("pdas"))
    if not cfg.get("record_timing"):
        for r in result.rows:
            r.solve_seconds = float("nan")
    files = {}
    out = _outputs(cfg)
    if "csv" in out:
        files[out["csv"]] = study_csv(result)
    summary = {"command": "study", "benchmark": result.benchmark, "method": result.method,
               "rows": len(result.rows),
               "rates": {k: (None if np.isnan(v) else float(fmt(v))) for k, v in result.rates.items()}}
    figure = (out["figure"], result) if "figure" in out else None
    return json.dumps(summary, sort_keys=True), files, figure


def run_export(cfg):
    mesh = unit_square_mesh(cfg["n"])
    files = {}
    out = _outputs(cfg)
    if "vtk" in out:
        files[out["vtk"]] = vtk_text(mesh, title=f"plate-vi mesh n={cfg['n']}")
    summary = {"command": "export-mesh", "n": cfg["n"], "vertices": int(mesh.num_vertices),
               "triangles": int(len(mesh.triangles))}
    return json.dumps(summary, sort_keys=True), files, None


COMMANDS = {"solve": run_solve, "study": run_study_command, "export-mesh": run_export}


def _fail(code, kind, message):
    print(json.dumps({"error": kind, "exit": code, "message": message}), file=sys.stderr)
    return code


def run(path):
    """Execute the configuration at ``path``; returns the exit status."""
    try:
        cfg = load_config(path)
    except ConfigError as exc:
        return _fail(EXIT_CONFIG, "config", str(exc))
    except OSError as exc:
        return _fail(EXIT_IO, "io", str(exc))
    try:
        _check_writable(_outputs(cfg).values())
    except OSError as exc:
        return _fail(EXIT_IO, "io", str(exc))
    try:
        line, files, figure = COMMANDS[cfg["command"]](cfg)
    except (SolverError, StudyError, ArithmeticError) as exc:
        return _fail(EXIT_SOLVER, "solver", str(exc))
    except ValueError as exc:
        return _fail(EXIT_CONFIG, "config", str(exc))
    # files are only written once the computation has succeeded
    try:
        for p, text in files.items():
            _write(p, text)
        if figure is not None:
            from .plotting import convergence_figure
            convergence_figure(figure[1], figure[0])
    except OSError as exc:
        return _fail(EXIT_IO, "io", str(exc))
    print(line)
    return 0


def main(argv=None):
    ap = argparse.ArgumentParser(prog="plate-vi", description=__doc__.splitlines()[0])
    ap.add_argument("config", help="JSON run configuration")
    ap.add_argument("-v", "--verbose", action="store_true")
    ap.add_argument("--version", action="version", version=f"plate-vi {__version__}")
    args = ap.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    return run(args.config)


if __name__ == "__main__":
    sys.exit(main())
