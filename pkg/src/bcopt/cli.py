"""Experiment runner: generate a problem, solve it, emit trace/image/summary.

Configs are flat TOML with two sections, for example::

    [problem]
    kind = "quadratic"      # quadratic | recon
    n_r = 32
    n_theta = 64
    n_det = 48

    [solver]
    name = "tron"           # lbfgsb | tron | spg
    scaled = true
    pg_rtol = 1e-6

Unknown sections or keys are rejected. Exit codes: 0 converged, 1 config
error, 2 budget exhausted or stalled.
"""

from __future__ import annotations

import argparse
import io
import json
import sys
import time
from pathlib import Path

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from . import ct
from .circulant import load_bcop, save_bcop
from .model import hessian_approx_bc
from .ops import ConfigurationError
from .scaling import build_scaling
from .solvers import SOLVERS, CGSettings, SolverConfig, SolverTrace

_PROBLEM_KEYS = {
    "kind": str,
    "n_r": int,
    "n_theta": int,
    "n_det": int,
    "r_max": float,
    "lambda": float,
    "delta": float,
    "noise_sigma": float,
    "noise_seed": int,
    "operator_cache": str,
}
# r_max sets the physical pixel size; 3.5 length units across 32 radial bins
# puts the fixed regularization weights in the same relative role they play
# at full scanner scale (see configs/ for the demo problems)
_PROBLEM_DEFAULTS = {
    "kind": "quadratic",
    "n_r": 32,
    "n_theta": 64,
    "n_det": 48,
    "r_max": 3.5,
    "delta": 0.1,
    "noise_sigma": 0.0,
}
_SOLVER_KEYS = {
    "name": str,
    "scaled": bool,
    "label": str,
    "max_iter": int,
    "pg_rtol": float,
    "cg_rtol": float,
    "cg_maxiter": int,
    "lbfgs_memory": int,
    "max_time": float,
}
_OUTPUT_KEYS = {"dir": str, "image_size": int}


class ConfigError(ValueError):
    pass


def _coerce(section, key, value, expected):
    if expected is float and isinstance(value, int) and not isinstance(value, bool):
        return float(value)
    if expected is not bool and isinstance(value, bool):
        raise ConfigError(f"[{section}] {key}: expected {expected.__name__}, got bool")
    if not isinstance(value, expected):
        raise ConfigError(
            f"[{section}] {key}: expected {expected.__name__}, "
            f"got {type(value).__name__}"
        )
    return value


def _check_section(name, raw, known):
    out = {}
    for key, value in raw.items():
        if key not in known:
            raise ConfigError(f"[{name}] unknown key {key!r}")
        out[key] = _coerce(name, key, value, known[key])
    return out


def parse_config(path) -> dict:
    text = Path(path).read_bytes()
    try:
        raw = tomllib.loads(text.decode())
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    for section in raw:
        if section not in ("problem", "solver", "output"):
            raise ConfigError(f"{path}: unknown section [{section}]")
    problem = dict(_PROBLEM_DEFAULTS)
    problem.update(_check_section("problem", raw.get("problem", {}), _PROBLEM_KEYS))
    if problem["kind"] not in ("quadratic", "recon"):
        raise ConfigError("[problem] kind must be quadratic or recon")
    solver = _check_section("solver", raw.get("solver", {}), _SOLVER_KEYS)
    if "name" not in solver:
        raise ConfigError("[solver] name is required")
    if solver["name"] not in SOLVERS:
        raise ConfigError(f"[solver] unknown solver {solver['name']!r}")
    output = _check_section("output", raw.get("output", {}), _OUTPUT_KEYS)
    return {"problem": problem, "solver": solver, "output": output}


def solver_label(solver: dict) -> str:
    if "label" in solver:
        return solver["label"]
    return solver["name"] + ("-scaled" if solver.get("scaled") else "")


def build_problem(problem: dict, seed=None) -> ct.CTProblem:
    grid = ct.PolarGrid(problem["n_r"], problem["n_theta"], problem["r_max"])
    phantom = ct.default_phantom(grid)
    noise_seed = seed if seed is not None else problem.get("noise_seed")
    projector = None
    cache = problem.get("operator_cache")
    try:
        if cache is not None and Path(cache).exists():
            projector = load_bcop(cache)
        built = ct.make_problem(
            grid,
            problem["n_det"],
            phantom,
            kind=problem["kind"],
            lam=problem.get("lambda"),
            delta=problem["delta"],
            noise_sigma=problem["noise_sigma"],
            noise_seed=noise_seed,
            projector=projector,
        )
    except ConfigurationError as exc:
        raise ConfigError(str(exc)) from exc
    if cache is not None and projector is None:
        Path(cache).parent.mkdir(parents=True, exist_ok=True)
        save_bcop(cache, built.A)
    return built


def build_solver_config(solver: dict, kind: str, max_time=None) -> SolverConfig:
    cfg = SolverConfig()
    cfg.scaled = bool(solver.get("scaled", False))
    cfg.pg_rtol = solver.get("pg_rtol", 1e-5 if kind == "quadratic" else 1e-7)
    cfg.max_iter = solver.get("max_iter", 200)
    cfg.lbfgs_memory = solver.get("lbfgs_memory", 5)
    cfg.cg = CGSettings(
        rtol=solver.get("cg_rtol"), maxiter=solver.get("cg_maxiter", 500)
    )
    cfg.max_time = max_time if max_time is not None else solver.get("max_time")
    return cfg


def execute(config: dict, seed=None, max_time=None):
    """Build the problem and run the configured solver; returns (result, extras)."""
    problem = build_problem(config["problem"], seed=seed)
    solver = config["solver"]
    cfg = build_solver_config(solver, config["problem"]["kind"], max_time=max_time)
    scaling = None
    if cfg.scaled:
        scaling = build_scaling(hessian_approx_bc(problem.model))
    solve = SOLVERS[solver["name"]]
    t0 = time.perf_counter()
    result = solve(problem.model, problem.x0, cfg, scaling=scaling)
    wall = time.perf_counter() - t0
    return result, problem, wall


def _write_run_outputs(out_dir: Path, config, result, problem, wall, image_size):
    out_dir.mkdir(parents=True, exist_ok=True)
    with open(out_dir / "trace.csv", "w") as fh:
        result.trace.write_csv(fh)
    img = ct.polar_to_cartesian(problem.grid, result.x, size=image_size)
    ct.write_pgm(out_dir / "image.pgm", img)
    ct.write_vector_csv(out_dir / "image.csv", result.x, header="pixel_value")
    summary = {
        "solver": config["solver"]["name"],
        "label": solver_label(config["solver"]),
        "scaled": bool(config["solver"].get("scaled", False)),
        "status": result.status,
        "iterations": result.trace.records[-1].iter,
        "final_f": result.f,
        "pg_ratio": result.pg_ratio,
        "cg_total": result.trace.cg_total,
        "wall_time_s": wall,
    }
    with open(out_dir / "summary.json", "w") as fh:
        json.dump(summary, fh, indent=2)
    return summary


def cmd_run(args) -> int:
    try:
        config = parse_config(args.config)
        result, problem, wall = execute(config, seed=args.seed, max_time=args.max_time)
    except (ConfigError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    out_dir = Path(args.out or config["output"].get("dir", "out"))
    image_size = config["output"].get("image_size", 256)
    summary = _write_run_outputs(out_dir, config, result, problem, wall, image_size)
    print(json.dumps(summary))
    return 0 if result.status == "converged" else 2


def cmd_compare(args) -> int:
    if len(args.config) < 2:
        print("error: compare needs at least two configs", file=sys.stderr)
        return 1
    try:
        configs = [parse_config(p) for p in args.config]
    except (ConfigError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    base = configs[0]["problem"]
    for path, config in zip(args.config[1:], configs[1:]):
        if config["problem"] != base:
            print(f"error: {path}: problem section differs from {args.config[0]}",
                  file=sys.stderr)
            return 1
    labels = [solver_label(c["solver"]) for c in configs]
    if len(set(labels)) != len(labels):
        print(f"error: duplicate solver labels {labels}", file=sys.stderr)
        return 1
    out_dir = Path(args.out or configs[0]["output"].get("dir", "out"))
    out_dir.mkdir(parents=True, exist_ok=True)
    all_converged = True
    traces: list[tuple[str, SolverTrace]] = []
    for config, label in zip(configs, labels):
        try:
            result, problem, wall = execute(config, seed=args.seed,
                                            max_time=args.max_time)
        except ConfigError as exc:
            print(f"error: {exc}", file=sys.stderr)
            return 1
        image_size = config["output"].get("image_size", 256)
        _write_run_outputs(out_dir / label, config, result, problem, wall, image_size)
        traces.append((label, result.trace))
        all_converged = all_converged and result.status == "converged"
        print(f"{label}: status={result.status} pg_ratio={result.pg_ratio:.3e} "
              f"cg_total={result.trace.cg_total}")
    with open(out_dir / "compare.csv", "w") as fh:
        first = True
        for label, trace in traces:
            buf = io.StringIO()
            trace.write_csv(buf, label=label)
            lines = buf.getvalue().splitlines(keepends=True)
            fh.writelines(lines if first else lines[1:])
            first = False
    return 0 if all_converged else 2


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="bcopt", description="scaled bound-constrained reconstruction experiments"
    )
    sub = parser.add_subparsers(dest="command", required=True)
    p_run = sub.add_parser("run", help="run one experiment config")
    p_run.add_argument("config")
    p_run.set_defaults(func=cmd_run)
    p_cmp = sub.add_parser("compare", help="run several configs on one problem")
    p_cmp.add_argument("config", nargs="+")
    p_cmp.set_defaults(func=cmd_compare)
    for p in (p_run, p_cmp):
        p.add_argument("--out", default=None, help="output directory")
        p.add_argument("--seed", type=int, default=None, help="noise seed override")
        p.add_argument("--max-time", type=float, default=None,
                       help="solver wall-clock budget in seconds")
    args = parser.parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
