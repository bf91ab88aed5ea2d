"""Command-line entry point.

Every subcommand reads one YAML config document and writes its artifacts
into an output directory:

* ``check-phi``: build an integrand and run the structural checks
  (normalization window, almost-increasing, almost-decreasing).
* ``solve``: minimize one configured energy, write the minimizer and a
  one-row report.
* ``sweep``: run a decreasing exponent schedule against its limit energy,
  write the sweep CSV, and gate the exit code on the trend predicates.
* ``denoise``: load a graymap image as data, minimize a limit model, write
  the denoised graymap.

Flags are limited to ``--config``, ``--output-dir``, ``--seed`` and
``--quiet``; everything else lives in the config so runs are reproducible
artifacts.  Relative paths inside a config resolve against the config
file's directory.  Exit codes: 0 success, 1 a configured check or
predicate failed, 2 usage or config errors, 3 numerical failure
(artifacts are still written when possible).
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import yaml

from .errors import NumericalError
from .fields import (Grid, ScalarField, constant_field, norm_l1, norm_l2,
                     ramp_field, random_lipschitz_field, read_field_csv,
                     read_pgm, smoothstep_field, step_field, write_field_csv,
                     write_pgm)
from .phi import (DoublePhasePhi, PhiFunction, PowerPhi, VariableExponentPhi,
                  check_almost_decreasing, check_almost_increasing,
                  check_unit_normalization, power_compose)
from .solvers import (BoundaryValueSpec, DenoiseSpec, DoublePhaseLimitSpec,
                      SolveReport, SolverOpts, VariableExponentLimitSpec,
                      energy, solve_primal_dual, solve_smooth)
from .harness import (SweepConfig, SweepPredicates, run_sweep,
                      write_sweep_csv)

__all__ = [
    "ConfigError",
    "RunConfig",
    "parse_config",
    "serialize_config",
    "build_grid",
    "build_field",
    "build_phi",
    "build_opts",
    "main",
]


class ConfigError(ValueError):
    """A config document is malformed or inconsistent."""


@dataclass(frozen=True)
class RunConfig:
    """A parsed config: the subcommand, the document, and its origin.

    ``doc`` is the plain-dict YAML document with every key already
    validated against the subcommand's grammar; ``base_dir`` anchors
    relative paths mentioned inside the document.
    """

    command: str
    doc: dict
    base_dir: Path


def _mapping(value, context: str) -> dict:
    if value is None:
        return {}
    if not isinstance(value, dict):
        raise ConfigError(f"{context}: expected a mapping, got {type(value).__name__}")
    return value


def _take(section: dict, allowed: dict[str, bool], context: str) -> dict:
    """Reject unknown keys and enforce required ones; returns the section."""
    unknown = sorted(set(section) - set(allowed))
    if unknown:
        raise ConfigError(f"{context}: unknown keys {unknown}")
    missing = [k for k, required in allowed.items()
               if required and k not in section]
    if missing:
        raise ConfigError(f"{context}: missing required keys {missing}")
    return section


def _scalar(section: dict, key: str, context: str, cast=float, default=None):
    if key not in section:
        return default
    try:
        return cast(section[key])
    except (TypeError, ValueError):
        raise ConfigError(f"{context}: bad value for {key!r}: "
                          f"{section[key]!r}") from None


_COMMAND_SECTIONS = {
    "check-phi": {"grid": False, "phi": True, "checks": True, "io": False},
    "solve": {"grid": True, "data": True, "problem": True, "phi": False,
              "solver": False, "io": False},
    "sweep": {"grid": True, "data": True, "phi": True, "sweep": True,
              "predicates": False, "solver": False, "limit-solver": False,
              "io": False},
    "denoise": {"input": True, "model": True, "solver": False, "io": False},
}


def parse_config(path, command: str) -> RunConfig:
    """Load a YAML document and validate its top-level sections."""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    try:
        doc = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"{path}: invalid YAML: {exc}") from None
    doc = _mapping(doc, str(path))
    _take(doc, _COMMAND_SECTIONS[command], f"{path}")
    return RunConfig(command=command, doc=doc, base_dir=path.parent)


def serialize_config(config: RunConfig) -> str:
    """Render the validated document back to YAML (key-equivalent)."""
    return yaml.safe_dump(config.doc, sort_keys=True)


# --- builders ----------------------------------------------------------------

def build_grid(section, context: str = "grid") -> Grid:
    """Build a grid from ``shape`` (required) and ``h`` (default: the
    spacing that gives the longest axis unit length)."""
    section = _mapping(section, context)
    _take(section, {"shape": True, "h": False}, context)
    raw = section["shape"]
    if not isinstance(raw, (list, tuple)) or not raw:
        raise ConfigError(f"{context}: shape must be a nonempty list")
    try:
        shape = tuple(int(n) for n in raw)
    except (TypeError, ValueError):
        raise ConfigError(f"{context}: bad shape {raw!r}") from None
    h = _scalar(section, "h", context, default=1.0 / max(shape))
    return Grid(shape, h)


_FIELD_KEYS = {
    "constant": {"kind": True, "value": True},
    "step": {"kind": True, "low": True, "high": True, "position": False,
             "axis": False},
    "ramp": {"kind": True, "start": True, "stop": True, "axis": False},
    "smoothstep": {"kind": True, "low": True, "high": True, "start": True,
                   "width": True, "axis": False},
    "random-lipschitz": {"kind": True, "low": True, "high": True,
                         "seed": False, "knots": False},
    "file": {"kind": True, "path": True},
}


def build_field(section, grid: Grid | None, base_dir: Path,
                context: str = "field", seed: int = 0) -> ScalarField:
    """Build a scalar field from its config subsection.

    ``grid`` may be None only for ``kind: file``, where the file defines
    the grid; otherwise file-backed fields must be grid-compatible.
    ``seed`` is the fallback for random fields that omit their own.
    """
    section = _mapping(section, context)
    kind = section.get("kind")
    if kind not in _FIELD_KEYS:
        raise ConfigError(f"{context}: unknown field kind {kind!r} "
                          f"(expected one of {sorted(_FIELD_KEYS)})")
    _take(section, _FIELD_KEYS[kind], context)

    if kind == "file":
        path = base_dir / str(section["path"])
        field = read_pgm(path) if path.suffix.lower() == ".pgm" \
            else read_field_csv(path)
        if grid is not None and not field.grid.compatible(grid):
            raise ConfigError(f"{context}: {path} holds a "
                              f"{field.grid.shape} field, expected "
                              f"{grid.shape} at spacing {grid.h!r}")
        return field

    if grid is None:
        raise ConfigError(f"{context}: field kind {kind!r} needs a grid section")
    num = lambda key, default=None: _scalar(section, key, context, default=default)
    if kind == "constant":
        return constant_field(grid, num("value"))
    if kind == "step":
        return step_field(grid, num("low"), num("high"),
                          position=num("position", 0.5),
                          axis=int(num("axis", 0)))
    if kind == "ramp":
        return ramp_field(grid, num("start"), num("stop"),
                          axis=int(num("axis", 0)))
    if kind == "smoothstep":
        return smoothstep_field(grid, num("low"), num("high"), num("start"),
                                num("width"), axis=int(num("axis", 0)))
    return random_lipschitz_field(grid, num("low"), num("high"),
                                  seed=int(num("seed", seed)),
                                  knots=int(num("knots", 8)))


_PHI_KEYS = {
    "power": {"family": True, "exponent": True},
    "double-phase": {"family": True, "weight": True},
    "variable-exponent": {"family": True, "exponent": True},
    "power-compose": {"family": True, "base": True, "power": True},
}


def build_phi(section, grid: Grid | None, base_dir: Path,
              context: str = "phi", seed: int = 0) -> PhiFunction:
    """Build an integrand from its config subsection."""
    section = _mapping(section, context)
    family = section.get("family")
    if family not in _PHI_KEYS:
        raise ConfigError(f"{context}: unknown family {family!r} "
                          f"(expected one of {sorted(_PHI_KEYS)})")
    _take(section, _PHI_KEYS[family], context)
    if family == "power":
        return PowerPhi(_scalar(section, "exponent", context))
    if family == "double-phase":
        weight = build_field(section["weight"], grid, base_dir,
                             f"{context}.weight", seed)
        return DoublePhasePhi(weight)
    if family == "variable-exponent":
        exponent = build_field(section["exponent"], grid, base_dir,
                               f"{context}.exponent", seed)
        return VariableExponentPhi(exponent)
    base = build_phi(section["base"], grid, base_dir, f"{context}.base", seed)
    return power_compose(base, _scalar(section, "power", context))


_OPT_KEYS = {"algorithm": False, "max-iter": False, "tol": False,
             "smoothing": False, "step-init": False, "patience": False,
             "tau": False, "sigma": False, "trace": False}


def build_opts(section, seed: int, context: str = "solver") -> tuple[str, SolverOpts]:
    """Build (algorithm, SolverOpts) from a solver subsection."""
    section = _mapping(section, context)
    _take(section, _OPT_KEYS, context)
    algorithm = section.get("algorithm", "auto")
    if algorithm not in ("auto", "smooth", "primal-dual"):
        raise ConfigError(f"{context}: unknown algorithm {algorithm!r}")
    defaults = SolverOpts()
    opts = SolverOpts(
        max_iter=int(_scalar(section, "max-iter", context,
                             default=defaults.max_iter)),
        tol=_scalar(section, "tol", context, default=defaults.tol),
        grad_smoothing=_scalar(section, "smoothing", context, default=None),
        step_init=_scalar(section, "step-init", context,
                          default=defaults.step_init),
        patience=int(_scalar(section, "patience", context,
                             default=defaults.patience)),
        tau=_scalar(section, "tau", context, default=None),
        sigma=_scalar(section, "sigma", context, default=None),
        record_trace=bool(section.get("trace", False)),
        seed=seed)
    return algorithm, opts


def _io_names(doc: dict, defaults: dict[str, str]) -> dict[str, str]:
    section = _mapping(doc.get("io"), "io")
    _take(section, {k: False for k in defaults}, "io")
    return {k: str(section.get(k, v)) for k, v in defaults.items()}


def _say(quiet: bool, text: str) -> None:
    if not quiet:
        print(text)


# --- check-phi ----------------------------------------------------------------

_CHECK_KEYS = {"normalization": False, "increasing-exponent": True,
               "decreasing-exponent": True}


def cmd_check_phi(config: RunConfig, out_dir: Path, seed: int,
                  quiet: bool) -> int:
    doc = config.doc
    grid = build_grid(doc["grid"]) if "grid" in doc else None
    phi = build_phi(doc["phi"], grid, config.base_dir, seed=seed)
    checks = _take(_mapping(doc["checks"], "checks"), _CHECK_KEYS, "checks")
    p = _scalar(checks, "increasing-exponent", "checks")
    q = _scalar(checks, "decreasing-exponent", "checks")

    reports = []
    if bool(checks.get("normalization", True)):
        reports.append(check_unit_normalization(phi))
    reports.append(check_almost_increasing(phi, p))
    reports.append(check_almost_decreasing(phi, q))

    lines = []
    for rep in reports:
        status = "PASS" if rep.holds else "FAIL"
        detail = f"constant={rep.witness_constant!r}"
        if not rep.holds and rep.failure_sample is not None:
            node, t1, t2 = rep.failure_sample
            detail += f" node={node} t1={t1!r} t2={t2!r}"
        lines.append(f"{rep.condition}: {status} {detail}")
    report_path = out_dir / _io_names(doc, {"report": "phi_report.txt"})["report"]
    report_path.write_text("\n".join(lines) + "\n", encoding="ascii")
    for line in lines:
        _say(quiet, line)
    return 0 if all(rep.holds for rep in reports) else 1


# --- solve ---------------------------------------------------------------------

_PROBLEM_KEYS = {
    "denoise": {"kind": True, "power": True},
    "boundary": {"kind": True, "power": True},
    "double-phase-limit": {"kind": True, "weight": True},
    "variable-exponent-limit": {"kind": True, "exponent": True},
}


def _build_spec(doc: dict, grid: Grid, data: ScalarField, base_dir: Path,
                seed: int):
    problem = _mapping(doc["problem"], "problem")
    kind = problem.get("kind")
    if kind not in _PROBLEM_KEYS:
        raise ConfigError(f"problem: unknown kind {kind!r} "
                          f"(expected one of {sorted(_PROBLEM_KEYS)})")
    _take(problem, _PROBLEM_KEYS[kind], "problem")
    if kind in ("denoise", "boundary"):
        if "phi" not in doc:
            raise ConfigError(f"problem kind {kind!r} needs a phi section")
        phi = build_phi(doc["phi"], grid, base_dir, seed=seed)
        power = _scalar(problem, "power", "problem")
        return DenoiseSpec(phi, power, data) if kind == "denoise" \
            else BoundaryValueSpec(phi, power, data)
    if "phi" in doc:
        raise ConfigError(f"problem kind {kind!r} does not take a phi section")
    if kind == "double-phase-limit":
        weight = build_field(problem["weight"], grid, base_dir,
                             "problem.weight", seed)
        return DoublePhaseLimitSpec(weight, data)
    exponent = build_field(problem["exponent"], grid, base_dir,
                           "problem.exponent", seed)
    return VariableExponentLimitSpec(exponent, data)


def _dispatch_solve(spec, algorithm: str, opts: SolverOpts) -> SolveReport:
    if algorithm == "auto":
        algorithm = "smooth" if isinstance(spec, BoundaryValueSpec) \
            else "primal-dual"
    if algorithm == "primal-dual":
        return solve_primal_dual(spec, opts)
    return solve_smooth(spec, opts)


def _write_minimizer(field: ScalarField, path: Path,
                     value_range=None) -> None:
    if path.suffix.lower() == ".pgm":
        write_pgm(field, path, value_range=value_range)
    else:
        write_field_csv(field, path)


def _report_csv(path: Path, header: list[str], row: list[str]) -> None:
    path.write_text(",".join(header) + "\n" + ",".join(row) + "\n",
                    encoding="ascii")


def cmd_solve(config: RunConfig, out_dir: Path, seed: int, quiet: bool) -> int:
    doc = config.doc
    grid = build_grid(doc["grid"])
    data = build_field(doc["data"], grid, config.base_dir, "data", seed)
    spec = _build_spec(doc, grid, data, config.base_dir, seed)
    algorithm, opts = build_opts(doc.get("solver"), seed)
    names = _io_names(doc, {"minimizer": "minimizer.csv",
                            "report": "solve_report.csv"})

    report = _dispatch_solve(spec, algorithm, opts)
    _write_minimizer(report.minimizer, out_dir / names["minimizer"])
    _report_csv(out_dir / names["report"],
                ["energy", "iterations", "converged", "message"],
                [repr(report.energy), str(report.iterations),
                 "true" if report.converged else "false", report.message])
    _say(quiet, f"energy={report.energy!r} iterations={report.iterations} "
                f"converged={report.converged}")
    return 0 if report.converged else 3


# --- sweep ---------------------------------------------------------------------

_SWEEP_KEYS = {"kind": True, "schedule": True, "upper-exponent": False,
               "row-solver": False, "warm-start": False, "limit": False}
_PREDICATE_KEYS = {"tail": False, "base-slack": False,
                   "final-gap-ratio": False, "final-distance": False,
                   "final-distance-ratio": False, "monotone-slack": False}


def _build_predicates(section, data: ScalarField, kind: str) -> SweepPredicates:
    section = _take(_mapping(section, "predicates"), _PREDICATE_KEYS,
                    "predicates")
    if "final-distance" in section and "final-distance-ratio" in section:
        raise ConfigError("predicates: final-distance and "
                          "final-distance-ratio are mutually exclusive")
    defaults = SweepPredicates()
    final_distance = _scalar(section, "final-distance", "predicates",
                             default=None)
    ratio = _scalar(section, "final-distance-ratio", "predicates",
                    default=None)
    if ratio is not None:
        scale = norm_l2(data) if kind == "denoise" else norm_l1(data)
        final_distance = ratio * scale
    return SweepPredicates(
        tail=int(_scalar(section, "tail", "predicates",
                         default=defaults.tail)),
        base_slack=_scalar(section, "base-slack", "predicates",
                           default=defaults.base_slack),
        final_gap_ratio=_scalar(section, "final-gap-ratio", "predicates",
                                default=None),
        final_distance=final_distance,
        monotone_slack=_scalar(section, "monotone-slack", "predicates",
                               default=defaults.monotone_slack))


def _build_limit_spec(mode: str, kind: str, phi: PhiFunction,
                      data: ScalarField):
    if mode == "none":
        return None
    if mode != "auto":
        raise ConfigError(f"sweep: unknown limit mode {mode!r} "
                          "(expected auto or none)")
    if kind == "boundary":
        return None
    if isinstance(phi, DoublePhasePhi):
        return DoublePhaseLimitSpec(phi.weight, data)
    if isinstance(phi, VariableExponentPhi):
        return VariableExponentLimitSpec(phi.exponent, data)
    raise ConfigError("sweep: no limit form for this phi family; "
                      "set limit: none")


def cmd_sweep(config: RunConfig, out_dir: Path, seed: int, quiet: bool) -> int:
    doc = config.doc
    grid = build_grid(doc["grid"])
    data = build_field(doc["data"], grid, config.base_dir, "data", seed)
    phi = build_phi(doc["phi"], grid, config.base_dir, seed=seed)
    section = _take(_mapping(doc["sweep"], "sweep"), _SWEEP_KEYS, "sweep")
    kind = str(section.get("kind"))
    schedule = section.get("schedule")
    if not isinstance(schedule, (list, tuple)):
        raise ConfigError("sweep: schedule must be a list of exponents")
    _, row_opts = build_opts(doc.get("solver"), seed)
    _, limit_opts = build_opts(doc.get("limit-solver", doc.get("solver")),
                               seed, "limit-solver")
    limit_spec = _build_limit_spec(str(section.get("limit", "auto")), kind,
                                   phi, data)
    upper = _scalar(section, "upper-exponent", "sweep", default=None)

    sweep = SweepConfig(
        kind=kind, phi=phi, data=data,
        schedule=tuple(float(p) for p in schedule),
        limit_spec=limit_spec,
        upper_exponent=upper,
        row_solver=str(section.get("row-solver", "auto")),
        warm_start=bool(section.get("warm-start", True)),
        row_opts=row_opts, limit_opts=limit_opts,
        predicates=_build_predicates(doc.get("predicates"), data, kind))

    report = run_sweep(sweep)
    names = _io_names(doc, {"sweep": "sweep.csv",
                            "predicates": "predicates.txt"})
    write_sweep_csv(report, out_dir / names["sweep"])

    lines = [f"{name}: {'skipped' if value is None else ('PASS' if value else 'FAIL')}"
             for name, value in report.predicates.items()]
    (out_dir / names["predicates"]).write_text("\n".join(lines) + "\n",
                                               encoding="ascii")
    for row in report.rows:
        _say(quiet, f"p={row.p} powered={row.powered_energy!r} "
                    f"converged={row.converged}")
    if report.limit_report is not None:
        _say(quiet, f"limit energy={report.limit_energy!r}")
    for line in lines:
        _say(quiet, line)
    evaluated = [v for v in report.predicates.values() if v is not None]
    return 0 if all(evaluated) else 1


# --- denoise --------------------------------------------------------------------

_MODEL_KEYS = {
    "double-phase": {"kind": True, "weight": True},
    "variable-exponent": {"kind": True, "exponent": True},
}


def cmd_denoise(config: RunConfig, out_dir: Path, seed: int,
                quiet: bool) -> int:
    doc = config.doc
    data = read_pgm(config.base_dir / str(doc["input"]))
    model = _mapping(doc["model"], "model")
    kind = model.get("kind")
    if kind not in _MODEL_KEYS:
        raise ConfigError(f"model: unknown kind {kind!r} "
                          f"(expected one of {sorted(_MODEL_KEYS)})")
    _take(model, _MODEL_KEYS[kind], "model")
    if kind == "double-phase":
        weight = build_field(model["weight"], data.grid, config.base_dir,
                             "model.weight", seed)
        spec = DoublePhaseLimitSpec(weight, data)
    else:
        exponent = build_field(model["exponent"], data.grid, config.base_dir,
                               "model.exponent", seed)
        spec = VariableExponentLimitSpec(exponent, data)
    algorithm, opts = build_opts(doc.get("solver"), seed)
    if algorithm == "smooth":
        raise ConfigError("solver: denoise models are nonsmooth; "
                          "use primal-dual or auto")
    names = _io_names(doc, {"output": "denoised.pgm",
                            "report": "denoise_report.csv"})

    report = solve_primal_dual(spec, opts)
    input_energy = energy(spec, data)
    value_range = (float(data.values.min()), float(data.values.max()))
    _write_minimizer(report.minimizer, out_dir / names["output"],
                     value_range=value_range)
    _report_csv(out_dir / names["report"],
                ["input_energy", "output_energy", "iterations", "converged"],
                [repr(input_energy), repr(report.energy),
                 str(report.iterations),
                 "true" if report.converged else "false"])
    _say(quiet, f"input energy={input_energy!r} "
                f"output energy={report.energy!r} "
                f"iterations={report.iterations} converged={report.converged}")
    return 0 if report.converged else 3


# --- entry point -----------------------------------------------------------------

_COMMANDS = {
    "check-phi": cmd_check_phi,
    "solve": cmd_solve,
    "sweep": cmd_sweep,
    "denoise": cmd_denoise,
}


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="orlicztv",
        description="Generalized-Orlicz energy minimization experiments")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, helptext in (
            ("check-phi", "run structural checks on a configured integrand"),
            ("solve", "minimize one configured energy"),
            ("sweep", "run an exponent schedule against its limit energy"),
            ("denoise", "denoise a graymap image with a limit model")):
        cmd = sub.add_parser(name, help=helptext)
        cmd.add_argument("--config", required=True,
                         help="YAML config document")
        cmd.add_argument("--output-dir", default=".",
                         help="directory for artifacts (default: cwd)")
        cmd.add_argument("--seed", type=int, default=0,
                         help="seed for random fields without their own")
        cmd.add_argument("--quiet", action="store_true",
                         help="suppress progress output")
    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        config = parse_config(args.config, args.command)
        out_dir = Path(args.output_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        return _COMMANDS[args.command](config, out_dir, args.seed, args.quiet)
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3
    except (ConfigError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
