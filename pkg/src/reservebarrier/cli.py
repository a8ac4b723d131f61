"""Command-line front end.

    reservebarrier solve    --config run.json
    reservebarrier value    --config run.json --x 0,0.05,0.1
    reservebarrier verify   --config run.json [--strict]
    reservebarrier simulate --config run.json [--seed N] [--n-paths N] [--dump-paths M]
    reservebarrier grid     --config run.json [--strict]
    reservebarrier scaling  --config run.json [--strict]

The config is one JSON object.  ``params`` holds the model parameters (exact
keys); the optional sections ``mc``, ``value``, ``verify``, ``simulate``,
``grid`` and ``scaling`` hold per-command settings.  Each run writes into
``<out>/<command>-<UTC timestamp>/`` a ``manifest.json`` plus its CSV/JSON
artifacts.  Exit codes: 0 ok, 1 internal or I/O error (or failed checks under
``--strict``), 2 invalid input.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
import time
from dataclasses import asdict
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__
from .barrier_solver import (
    barrier_gain_exact,
    cost_analytic,
    gain_analytic,
    solve_barrier,
    v1,
    v2,
    verify_conditions,
)
from .errors import (
    ConfigError,
    NegativeInitialState,
    NegativeState,
    ParameterError,
    SpecialCaseViolation,
)
from .model_core import g, params_from_mapping
from .monte_carlo import (
    McConfig,
    cost_gain_identity,
    generate_path,
    grid_from_functionals,
    scaling_experiment,
    simulate_functionals,
)
from .skorokhod_engine import reflect_path

log = logging.getLogger("reservebarrier")

SECTIONS = {"params", "mc", "value", "verify", "simulate", "grid", "scaling"}
MC_KEYS = {"n_paths", "dt", "tail_epsilon", "master_seed", "horizon_override", "workers"}
SECTION_KEYS = {
    "value": {"x"},
    "verify": {"grid_size"},
    "simulate": {"x0", "b", "dump_paths"},
    "grid": {"x0", "candidates", "multipliers"},
    "scaling": {"k1", "k2", "asset_sizes"},
}
DEFAULT_MULTIPLIERS = [0.5, 0.75, 1.0, 1.25, 1.5]
INPUT_ERRORS = (ParameterError, ConfigError, NegativeState, NegativeInitialState,
                SpecialCaseViolation)


def fmt(v) -> str:
    return f"{float(v):.17g}"


def write_csv(path: Path, header: list[str], rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([v if isinstance(v, str) else fmt(v) for v in row])


def _json_default(o):
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    raise TypeError(type(o).__name__)


def write_json(path: Path, obj) -> None:
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, default=_json_default)
        fh.write("\n")


def load_config(path: str) -> dict:
    with open(path) as fh:
        doc = json.load(fh)
    if not isinstance(doc, dict):
        raise ConfigError("config must be a JSON object")
    unknown = sorted(set(doc) - SECTIONS)
    if unknown:
        raise ConfigError(f"unknown config sections: {', '.join(unknown)}")
    if "params" not in doc:
        raise ConfigError("config needs a 'params' section")
    for name, allowed in {"mc": MC_KEYS, **SECTION_KEYS}.items():
        section = doc.get(name, {})
        if not isinstance(section, dict):
            raise ConfigError(f"section {name!r} must be an object")
        extra = sorted(set(section) - allowed)
        if extra:
            raise ConfigError(f"unknown keys in {name!r}: {', '.join(extra)}")
    return doc


def mc_config(doc: dict, args) -> McConfig:
    mc = dict(doc.get("mc", {}))
    if args.seed is not None:
        mc["master_seed"] = args.seed
    if getattr(args, "n_paths", None) is not None:
        mc["n_paths"] = args.n_paths
    if getattr(args, "workers", None) is not None:
        mc["workers"] = args.workers
    mc.setdefault("n_paths", 10_000)
    try:
        return McConfig(**mc)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad mc section: {exc}") from exc


class Run:
    """Output directory, artifact list and manifest bookkeeping for one command."""

    def __init__(self, command: str, out: str):
        stamp = datetime.now(timezone.utc).strftime("%Y%m%dT%H%M%S%fZ")
        base = Path(out) / f"{command}-{stamp}"
        path, i = base, 1
        while path.exists():
            path = Path(f"{base}-{i}")
            i += 1
        path.mkdir(parents=True)
        self.dir = path
        self.command = command
        self.artifacts: list[str] = []
        self.config: dict = {}
        self.results: dict = {}
        self.start = time.perf_counter()

    def file(self, name: str) -> Path:
        self.artifacts.append(name)
        return self.dir / name

    def write_manifest(self, error: str | None, exit_code: int) -> None:
        write_json(self.dir / "manifest.json", {
            "command": self.command,
            "version": __version__,
            "config": self.config,
            "artifacts": self.artifacts,
            "results": self.results,
            "duration_seconds": time.perf_counter() - self.start,
            "exit_code": exit_code,
            "error": error,
        })


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------

def cmd_solve(doc, args, run: Run) -> int:
    p = params_from_mapping(doc["params"])
    sol = solve_barrier(p)
    bound = 1e-12 * g(0.0, sol.roots) * sol.c / sol.r
    out = {**sol.to_dict(), "residual_bound": bound, "residual_ok": sol.residual <= bound}
    write_json(run.file("solve.json"), out)
    run.results = out
    for key in ("b", "r", "c", "gamma1", "gamma_bar1", "gamma2", "residual"):
        print(f"{key:>10} = {fmt(out[key])}")
    return 0 if out["residual_ok"] or not args.strict else 1


def _x_list(doc, args) -> list[float]:
    if args.x is not None:
        raw = [s for s in args.x.split(",") if s.strip()]
        try:
            return [float(s) for s in raw]
        except ValueError as exc:
            raise ConfigError(f"bad --x list: {exc}") from exc
    return [float(v) for v in doc.get("value", {}).get("x", [])]


def cmd_value(doc, args, run: Run) -> int:
    p = params_from_mapping(doc["params"])
    sol = solve_barrier(p)
    xs = np.asarray(_x_list(doc, args), dtype=float)
    run.config["value"] = {"x": xs.tolist()}
    if xs.size and np.any(xs < 0):
        raise NegativeState(f"x values must be >= 0, got {xs.min()}")
    rows = []
    if xs.size:
        rows = zip(xs, np.atleast_1d(v1(xs, sol, p)), np.atleast_1d(v2(xs, p, sol.roots)),
                   np.atleast_1d(gain_analytic(xs, sol, p)), np.atleast_1d(cost_analytic(xs, sol, p)))
    write_csv(run.file("values.csv"), ["x", "v1", "v2", "gain", "cost"], rows)
    run.results = {"b": sol.b, "rows": int(xs.size)}
    print(f"wrote {xs.size} rows to {run.dir / 'values.csv'}")
    return 0


def cmd_verify(doc, args, run: Run) -> int:
    p = params_from_mapping(doc["params"])
    sol = solve_barrier(p)
    grid_size = int(doc.get("verify", {}).get("grid_size", 101))
    report = verify_conditions(sol, p, grid_size)
    with open(run.file("report.json"), "w") as fh:
        fh.write(report.to_json(indent=2) + "\n")
    run.results = {"b": sol.b, "all_passed": report.all_passed}
    for c in report.checks:
        print(f"{'PASS' if c.passed else 'FAIL'}  {c.name:<20} residual={c.max_residual:.3e}  tol={c.tolerance:.1e}")
    return 0 if report.all_passed or not args.strict else 1


def _default_x0(section: dict, b_star: float) -> float:
    x0 = section.get("x0")
    return 0.5 * b_star if x0 is None else float(x0)


def cmd_simulate(doc, args, run: Run) -> int:
    p = params_from_mapping(doc["params"])
    cfg = mc_config(doc, args)
    section = doc.get("simulate", {})
    sol = solve_barrier(p)
    b = sol.b if section.get("b") is None else float(section["b"])
    x0 = _default_x0(section, sol.b)
    n_dump = args.dump_paths if args.dump_paths is not None else int(section.get("dump_paths", 0))
    run.config["mc"] = asdict(cfg)
    run.config["simulate"] = {"x0": x0, "b": b, "dump_paths": n_dump}

    fun = simulate_functionals(p, [b], x0, cfg)
    ident = cost_gain_identity(fun, 0)
    cols = fun.samples[:, 0]
    estimates = {
        "gain": ident.rhs,
        "cost": ident.lhs,
        "cost_plus_gain_minus_constant": ident.difference,
        "discounted_sales_lambda1": fun.summarize(cols[:, 0]),
        "discounted_purchases_lambda1": fun.summarize(cols[:, 1]),
        "discounted_purchases_lambda2": fun.summarize(cols[:, 2]),
        "discounted_holding_lambda1": fun.summarize(cols[:, 3]),
    }
    write_csv(run.file("estimates.csv"),
              ["quantity", "mean", "stderr", "n_paths", "dt", "T", "seed"],
              [(name, e.mean, e.std_error, str(e.n_paths), e.dt, e.horizon, str(e.master_seed))
               for name, e in estimates.items()])

    checks = {}
    if b == sol.b:
        analytic = float(gain_analytic(x0, sol, p))
        gap = abs(ident.rhs.mean - analytic)
        checks["gain_matches_closed_form"] = gap <= 3 * ident.rhs.std_error + 0.02 * abs(analytic)
        run.results["gain_analytic"] = analytic
        run.results["gain_exact_two_sided"] = float(barrier_gain_exact(x0, sol, p))
        run.results["cost_analytic"] = float(cost_analytic(x0, sol, p))
    checks["cost_gain_identity"] = abs(ident.difference.mean) <= 3 * ident.difference.std_error
    run.results.update({"b": b, "x0": x0, "checks": checks,
                        "gain_mc": ident.rhs.mean, "gain_se": ident.rhs.std_error})
    write_json(run.file("summary.json"), run.results)

    if n_dump > 0:
        (run.dir / "paths").mkdir()
        for i in range(min(n_dump, cfg.n_paths)):
            cp = reflect_path(generate_path(p, cfg, i, x0), b)
            with open(run.file(f"paths/path_{i:05d}.csv"), "w", newline="") as fh:
                cp.write_csv(fh)

    for name, e in estimates.items():
        print(f"{name:<32} {e.mean: .6g} +/- {e.std_error:.2g}")
    for name, ok in checks.items():
        print(f"{'PASS' if ok else 'FAIL'}  {name}")
    return 0 if all(checks.values()) or not args.strict else 1


def cmd_grid(doc, args, run: Run) -> int:
    p = params_from_mapping(doc["params"])
    cfg = mc_config(doc, args)
    section = doc.get("grid", {})
    sol = solve_barrier(p)
    if section.get("candidates") is not None:
        cand = [float(v) for v in section["candidates"]]
    else:
        cand = [m * sol.b for m in section.get("multipliers", DEFAULT_MULTIPLIERS)]
    x0 = _default_x0(section, sol.b)
    run.config["mc"] = asdict(cfg)
    run.config["grid"] = {"x0": x0, "candidates": cand}
    if not cand or any(c <= 0 for c in cand) or any(np.diff(cand) < 0):
        raise ConfigError("grid candidates must be positive and sorted")

    res = grid_from_functionals(simulate_functionals(p, cand, x0, cfg), sol.b)
    write_csv(run.file("grid.csv"), ["b", "cost_mean", "cost_stderr"],
              [(c, e.mean, e.std_error) for c, e in zip(res.candidates, res.costs)])
    run.results = {"b_star": sol.b, "argmin_index": res.argmin, "argmin_b": res.best,
                   "b_star_adjacent": res.b_star_adjacent}
    write_json(run.file("summary.json"), run.results)
    for i, (c, e) in enumerate(zip(res.candidates, res.costs)):
        mark = "  <- argmin" if i == res.argmin else ""
        print(f"b={c:.6g}  cost={e.mean:.6g} +/- {e.std_error:.2g}{mark}")
    print(f"analytic b*={sol.b:.6g} {'within' if res.b_star_adjacent else 'NOT within'} one cell of argmin")
    return 0 if res.b_star_adjacent or not args.strict else 1


def cmd_scaling(doc, args, run: Run) -> int:
    p = params_from_mapping(doc["params"])
    section = doc.get("scaling", {})
    try:
        k1, k2 = float(section["k1"]), float(section["k2"])
        sizes = [float(a) for a in section["asset_sizes"]]
    except KeyError as exc:
        raise ConfigError(f"scaling section needs {exc}") from exc
    res = scaling_experiment(p, k1, k2, sizes)
    write_csv(run.file("scaling.csv"), ["A", "b", "ratio"],
              zip(res.asset_sizes, res.barriers, res.ratios))
    run.results = {"spread": res.spread, "passed": res.passed}
    write_json(run.file("summary.json"), run.results)
    for a, b, r in zip(res.asset_sizes, res.barriers, res.ratios):
        print(f"A={a:.6g}  b={b:.12g}  b/A={r:.15g}")
    print(f"relative spread {res.spread:.3e} ({'PASS' if res.passed else 'FAIL'})")
    return 0 if res.passed or not args.strict else 1


COMMANDS = {
    "solve": cmd_solve,
    "value": cmd_value,
    "verify": cmd_verify,
    "simulate": cmd_simulate,
    "grid": cmd_grid,
    "scaling": cmd_scaling,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="reservebarrier",
                                     description="Optimal reserve barrier policy toolkit")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sp = sub.add_parser(name)
        sp.add_argument("--config", required=True, help="JSON configuration file")
        sp.add_argument("--out", default="runs", help="output root directory (default: runs)")
        sp.add_argument("--seed", type=int, default=None, help="override mc.master_seed")
        sp.add_argument("--strict", action="store_true",
                        help="exit nonzero when a reported check fails")
        sp.add_argument("-v", "--verbose", action="store_true")
        if name in ("simulate", "grid"):
            sp.add_argument("--n-paths", type=int, default=None)
            sp.add_argument("--workers", type=int, default=None)
        if name == "simulate":
            sp.add_argument("--dump-paths", type=int, default=None,
                            help="write the first M controlled paths as CSV")
        if name == "value":
            sp.add_argument("--x", default=None, help="comma-separated reserve levels")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        run = Run(args.command, args.out)
    except OSError as exc:
        print(f"error: cannot create output directory: {exc}", file=sys.stderr)
        return 1
    run.config = {"config_file": args.config, "seed_override": args.seed, "strict": args.strict}
    error, code = None, 1
    try:
        doc = load_config(args.config)
        run.config["document"] = doc
        code = COMMANDS[args.command](doc, args, run)
    except INPUT_ERRORS as exc:
        error, code = f"{type(exc).__name__}: {exc}", 2
    except json.JSONDecodeError as exc:
        error, code = f"ConfigError: invalid JSON: {exc}", 2
    except OSError as exc:
        error, code = f"{type(exc).__name__}: {exc}", 1
    except Exception as exc:  # noqa: BLE001 - reported in the manifest
        log.exception("internal error")
        error, code = f"{type(exc).__name__}: {exc}", 1
    finally:
        run.write_manifest(error, code)
    if error:
        print(f"error: {error}", file=sys.stderr)
    return code


if __name__ == "__main__":
    sys.exit(main())
