"""Batch experiment surface: configuration ingestion, runs, reports.

Subcommands
    run      execute the configured methods; write iterates.csv + summary.json
    compare  run every method on one scenario; write comparison.csv
    sweep    run a declared one-parameter sweep; write sweep.csv
    check    print a hypothesis report (geometry, growth, Holder) and exit

Configs are versioned JSON; unknown keys are rejected.  All CSV output
is byte-deterministic for a fixed config and seed: floats are written
in shortest round-trip form and wall-clock timings stay out of CSV
(summary.json carries them).
"""

from __future__ import annotations

import argparse
import concurrent.futures
import hashlib
import json
import math
import os
import sys
import time
from pathlib import Path

from .baselines import (FixedPointConfig, newton_classic_solve, picard_solve,
                        variant_solve)
from .errors import ConfigError, InsufficientRecords
from .grids import (SpaceTimeGrid, check_geometric_condition, interval_region,
                    rectangle_region, sides_region)
from .least_squares import LSConfig, TargetProblem, estimate_order, ls_solve
from .nonlinearity import beta_star, builtin, check_growth_H2, holder_seminorm_sample
from .profiles import build_state

SCHEMA_VERSION = 1

ITERATES_COLUMNS = [
    "method", "scenario", "config_hash", "k", "E", "sqrt_E", "lambda",
    "lambda_tilde", "F1_qT_norm", "Y1_LinfV", "y_LinfL1", "gprime_LinfLd",
    "inner_defect", "inner_cg_iters", "inner_converged", "init_defect_V",
    "term_defect_V", "step_delta",
]

COMPARISON_COLUMNS = ["method", "scenario", "config_hash", "iterations",
                      "sqrt2E_final", "status", "order"]

SWEEP_COLUMNS = ["index", "param_path", "param_value", "method", "scenario",
                 "config_hash", "status", "iterations", "sqrt2E_final",
                 "term_defect_V", "order"]

SUMMARY_SCHEMA = {
    "schema": str, "config_hash": str, "scenario": str, "seed": int,
    "geometry": (dict, type(None)), "methods": dict,
}
SUMMARY_METHOD_SCHEMA = {
    "status": str, "iterations": int, "E_final": (float, type(None)),
    "sqrt2E_final": (float, type(None)),
    "order": (float, type(None)), "order_fit_residual": (float, type(None)),
    "term_defect_V": (float, type(None)), "M_run": float, "wall_time_s": float,
}

METHOD_RUNNERS = {
    "least_squares": lambda prob, g, ls_cfg, fp_cfg: ls_solve(prob, g, ls_cfg),
    "newton_classic": lambda prob, g, ls_cfg, fp_cfg: newton_classic_solve(prob, g, ls_cfg),
    "picard": lambda prob, g, ls_cfg, fp_cfg: picard_solve(prob, g, fp_cfg),
    "variant": lambda prob, g, ls_cfg, fp_cfg: variant_solve(prob, g, fp_cfg),
}


# ---------------------------------------------------------------------------
# configuration loading and validation
# ---------------------------------------------------------------------------

def _fail(path, message):
    raise ConfigError(f"{path}: {message}")


def _expect_keys(d, path, required, optional=()):
    unknown = set(d) - set(required) - set(optional)
    if unknown:
        _fail(path, f"unknown keys {sorted(unknown)}")
    missing = [k for k in required if k not in d]
    if missing:
        _fail(path, f"missing keys {missing}")


def _number(d, path, key, default=None, positive=False, integer=False):
    if key not in d:
        if default is None and default is not False:
            _fail(path, f"missing key {key!r}")
        return default
    v = d[key]
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        _fail(f"{path}.{key}", "must be a number")
    if integer and int(v) != v:
        _fail(f"{path}.{key}", "must be an integer")
    if positive and v <= 0:
        _fail(f"{path}.{key}", "must be positive")
    return int(v) if integer else float(v)


def load_config(path) -> dict:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    try:
        cfg = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}:{exc.lineno}:{exc.colno}: invalid JSON ({exc.msg})") from exc
    if not isinstance(cfg, dict):
        raise ConfigError("config root must be an object")
    validate_config(cfg)
    return cfg


def validate_config(cfg: dict):
    _expect_keys(cfg, "config",
                 required=("schema_version", "scenario", "data", "nonlinearity", "methods"),
                 optional=("least_squares", "fixed_point", "inner", "output_dir",
                           "seed", "sweep"))
    if cfg["schema_version"] != SCHEMA_VERSION:
        _fail("config.schema_version", f"expected {SCHEMA_VERSION}")
    sc = cfg["scenario"]
    _expect_keys(sc, "scenario", required=("name", "dimension", "lengths", "nodes",
                                           "T", "nt", "region"),
                 optional=("x0", "cfl_factor", "smoothing"))
    if sc["dimension"] not in (1, 2):
        _fail("scenario.dimension", "must be 1 or 2")
    for key in ("lengths", "nodes"):
        if not isinstance(sc[key], list) or len(sc[key]) != sc["dimension"]:
            _fail(f"scenario.{key}", f"must be a list of {sc['dimension']} value(s)")
    _number(sc, "scenario", "T", positive=True)
    _number(sc, "scenario", "nt", positive=True, integer=True)
    region = sc["region"]
    if not isinstance(region, dict) or "type" not in region:
        _fail("scenario.region", "must be an object with a 'type'")
    rtype = region["type"]
    if rtype == "interval":
        _expect_keys(region, "scenario.region", required=("type", "a", "b"))
    elif rtype == "rectangle":
        _expect_keys(region, "scenario.region", required=("type", "x0", "x1", "y0", "y1"))
    elif rtype == "sides":
        _expect_keys(region, "scenario.region", required=("type", "sides", "eps"))
    else:
        _fail("scenario.region.type", f"unknown region type {rtype!r}")
    data = cfg["data"]
    _expect_keys(data, "data", required=("initial", "target"))
    nl = cfg["nonlinearity"]
    _expect_keys(nl, "nonlinearity", required=("name",), optional=("params",))
    methods = cfg["methods"]
    if not isinstance(methods, list) or not methods:
        _fail("config.methods", "must be a non-empty list")
    for m in methods:
        if m not in METHOD_RUNNERS:
            _fail("config.methods", f"unknown method {m!r}")
    if "least_squares" in cfg:
        _expect_keys(cfg["least_squares"], "least_squares", required=(),
                     optional=("m", "tol", "max_outer", "e_floor", "scan_points",
                               "refine_rel_width", "C", "init", "tol_A"))
    if "fixed_point" in cfg:
        _expect_keys(cfg["fixed_point"], "fixed_point", required=(),
                     optional=("tol", "step_tol", "max_outer", "e_floor"))
    if "inner" in cfg:
        _expect_keys(cfg["inner"], "inner", required=(),
                     optional=("eps_reg", "cg_tol", "cg_max_iter", "precondition"))
    if "sweep" in cfg:
        _expect_keys(cfg["sweep"], "sweep", required=("path", "values"))
        if not isinstance(cfg["sweep"]["values"], list) or not cfg["sweep"]["values"]:
            _fail("sweep.values", "must be a non-empty list")


def config_hash(cfg: dict) -> str:
    hashed = {k: v for k, v in cfg.items() if k != "output_dir"}
    canon = json.dumps(hashed, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canon.encode()).hexdigest()[:16]


# ---------------------------------------------------------------------------
# object construction
# ---------------------------------------------------------------------------

def build_grid(cfg: dict) -> SpaceTimeGrid:
    sc = cfg["scenario"]
    return SpaceTimeGrid(tuple(sc["lengths"]), tuple(sc["nodes"]),
                         T=float(sc["T"]), nt=int(sc["nt"]),
                         cfl_factor=float(sc.get("cfl_factor", 0.95)))


def build_region(cfg: dict, grid: SpaceTimeGrid):
    sc = cfg["scenario"]
    region = sc["region"]
    smoothing = bool(sc.get("smoothing", False))
    if region["type"] == "interval":
        return interval_region(grid, region["a"], region["b"], smoothing)
    if region["type"] == "rectangle":
        return rectangle_region(grid, region["x0"], region["x1"],
                                region["y0"], region["y1"], smoothing)
    return sides_region(grid, region["sides"], region["eps"], smoothing)


def build_problem(cfg: dict):
    grid = build_grid(cfg)
    region = build_region(cfg, grid)
    initial = build_state(grid, cfg["data"]["initial"])
    target = build_state(grid, cfg["data"]["target"])
    inner = cfg.get("inner", {})
    problem = TargetProblem(
        grid, region, initial, target,
        x0=cfg["scenario"].get("x0"),
        eps_reg=inner.get("eps_reg"),
        cg_tol=float(inner.get("cg_tol", 1e-8)),
        cg_max_iter=int(inner.get("cg_max_iter", 500)),
        precondition=bool(inner.get("precondition", False)),
    )
    nl = cfg["nonlinearity"]
    g = builtin(nl["name"], **nl.get("params", {}))
    ls_cfg = LSConfig(**cfg.get("least_squares", {}))
    fp_raw = dict(cfg.get("fixed_point", {}))
    fp_raw.setdefault("tol", ls_cfg.tol)
    fp_raw.setdefault("max_outer", ls_cfg.max_outer)
    fp_cfg = FixedPointConfig(**fp_raw)
    return problem, g, ls_cfg, fp_cfg


# ---------------------------------------------------------------------------
# report writing
# ---------------------------------------------------------------------------

def _fmt(v) -> str:
    if isinstance(v, bool):
        return str(v)
    if isinstance(v, float):
        return repr(float(v))
    return str(v)


def _write_csv(path, columns, rows):
    with open(path, "w") as fh:
        fh.write(",".join(columns) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(row[c]) for c in columns) + "\n")


def iterate_rows(result, scenario_name, chash):
    rows = []
    for rec in result.records:
        rows.append({
            "method": result.method, "scenario": scenario_name, "config_hash": chash,
            "k": rec.k, "E": rec.E, "sqrt_E": rec.sqrt_E, "lambda": rec.lam,
            "lambda_tilde": rec.lam_tilde, "F1_qT_norm": rec.F1_qT,
            "Y1_LinfV": rec.Y1_linf_V, "y_LinfL1": rec.y_linf_L1,
            "gprime_LinfLd": rec.gprime_linf_ld, "inner_defect": rec.inner_defect,
            "inner_cg_iters": rec.inner_cg_iters, "inner_converged": rec.inner_converged,
            "init_defect_V": rec.init_defect_V, "term_defect_V": rec.term_defect_V,
            "step_delta": rec.step_delta,
        })
    return rows


def _order_or_none(records):
    try:
        est = estimate_order(records)
        return est.order, est.fit_residual
    except InsufficientRecords:
        return None, None


def _json_number(v):
    return float(v) if v is not None and math.isfinite(v) else None


def method_summary(result, wall_time):
    order, fit = _order_or_none(result.records)
    last = result.records[-1]
    return {
        "status": result.status,
        "iterations": len(result.records) - 1,
        "E_final": _json_number(last.E),
        "sqrt2E_final": _json_number(math.sqrt(2 * last.E)) if math.isfinite(last.E) else None,
        "order": _json_number(order) if order is not None else None,
        "order_fit_residual": _json_number(fit) if fit is not None else None,
        "term_defect_V": _json_number(last.term_defect_V),
        "M_run": float(result.M_run),
        "wall_time_s": float(wall_time),
    }


def validate_summary(summary: dict):
    """Check summary.json against the published schema; raises on mismatch."""
    for key, typ in SUMMARY_SCHEMA.items():
        if key not in summary:
            raise ValueError(f"summary missing key {key!r}")
        if not isinstance(summary[key], typ):
            raise ValueError(f"summary key {key!r} has wrong type")
    for name, entry in summary["methods"].items():
        for key, typ in SUMMARY_METHOD_SCHEMA.items():
            if key not in entry:
                raise ValueError(f"summary.methods.{name} missing {key!r}")
            value = entry[key]
            if isinstance(typ, tuple):
                ok = isinstance(value, typ)
            else:
                ok = isinstance(value, typ) or (typ is float and isinstance(value, int))
            if not ok:
                raise ValueError(f"summary.methods.{name}.{key} has wrong type")


def geometry_summary(cfg, grid, region):
    x0 = cfg["scenario"].get("x0")
    if x0 is None:
        return None
    rep = check_geometric_condition(grid, region, x0)
    return {"holds": rep.holds, "T_min": rep.T_min, "gamma0": list(rep.gamma0),
            "covered": rep.covered, "time_ok": rep.time_ok}


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------

def _out_dir(cfg, args) -> Path:
    out = args.out or os.environ.get("WAVECONTROL_OUT") or cfg.get("output_dir", "out")
    path = Path(out)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _run_methods(cfg, methods, verbose=False):
    problem, g, ls_cfg, fp_cfg = build_problem(cfg)
    results = {}
    for name in methods:
        t0 = time.perf_counter()
        result = METHOD_RUNNERS[name](problem, g, ls_cfg, fp_cfg)
        wall = time.perf_counter() - t0
        results[name] = (result, wall)
        if verbose:
            for rec in result.records:
                print(f"  [{name}] k={rec.k} E={rec.E:.6e} lam={rec.lam:.4f} "
                      f"cg={rec.inner_cg_iters} defect={rec.inner_defect:.3e}")
    return problem, results


def cmd_run(cfg, args) -> int:
    out = _out_dir(cfg, args)
    chash = config_hash(cfg)
    name = cfg["scenario"]["name"]
    problem, results = _run_methods(cfg, cfg["methods"], args.verbose)

    rows = []
    for method in cfg["methods"]:
        rows.extend(iterate_rows(results[method][0], name, chash))
    _write_csv(out / "iterates.csv", ITERATES_COLUMNS, rows)

    if args.verbose:
        hist_rows = [{"method": m, "k": rec.k, "cg_iter": i, "rel_residual": v}
                     for m in cfg["methods"]
                     for rec in results[m][0].records
                     for i, v in enumerate(rec.inner_residuals)]
        _write_csv(out / "cg_history.csv",
                   ["method", "k", "cg_iter", "rel_residual"], hist_rows)

    summary = {
        "schema": "wavecontrol-summary-v1",
        "config_hash": chash,
        "scenario": name,
        "seed": int(cfg.get("seed", 0)),
        "geometry": geometry_summary(cfg, problem.grid, problem.region),
        "methods": {m: method_summary(r, w) for m, (r, w) in results.items()},
    }
    with open(out / "summary.json", "w") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
        fh.write("\n")

    print(f"scenario {name}  (config {chash})")
    widths = "{:<16s} {:>12s} {:>11s} {:>12s} {:>9s}"
    print(widths.format("method", "status", "iterations", "sqrt2E_final", "order"))
    for m, (r, w) in results.items():
        s = summary["methods"][m]
        order = "-" if s["order"] is None else f"{s['order']:.2f}"
        final = "-" if s["sqrt2E_final"] is None else f"{s['sqrt2E_final']:.3e}"
        print(widths.format(m, s["status"], str(s["iterations"]), final, order))
    return 0 if all(r.status == "converged" for r, _ in results.values()) else 2


def cmd_compare(cfg, args) -> int:
    out = _out_dir(cfg, args)
    chash = config_hash(cfg)
    name = cfg["scenario"]["name"]
    methods = list(METHOD_RUNNERS)
    problem, results = _run_methods(cfg, methods, args.verbose)
    rows = []
    for m in methods:
        result, wall = results[m]
        order, _ = _order_or_none(result.records)
        rows.append({
            "method": m, "scenario": name, "config_hash": chash,
            "iterations": len(result.records) - 1,
            "sqrt2E_final": math.sqrt(2 * result.records[-1].E),
            "status": result.status,
            "order": math.nan if order is None else order,
        })
    _write_csv(out / "comparison.csv", COMPARISON_COLUMNS, rows)
    for row in rows:
        print(f"{row['method']:<16s} {row['status']:>12s} it={row['iterations']:<4d} "
              f"sqrt2E={row['sqrt2E_final']:.3e}")
    return 0 if results["least_squares"][0].status == "converged" else 2


def _set_by_path(cfg, dotted, value):
    node = cfg
    parts = dotted.split(".")
    for p in parts[:-1]:
        if not isinstance(node, dict) or p not in node:
            raise ConfigError(f"sweep.path: {dotted!r} does not address a config entry")
        node = node[p]
    leaf = parts[-1]
    if not isinstance(node, dict) or leaf not in node:
        raise ConfigError(f"sweep.path: {dotted!r} does not address a config entry")
    node[leaf] = value


def _sweep_point(base_cfg, dotted, value, methods):
    import copy

    cfg = copy.deepcopy(base_cfg)
    cfg.pop("sweep", None)
    _set_by_path(cfg, dotted, value)
    validate_config(cfg)
    chash = config_hash(cfg)
    _, results = _run_methods(cfg, methods)
    rows = []
    for m in methods:
        result, _ = results[m]
        order, _fit = _order_or_none(result.records)
        last = result.records[-1]
        rows.append({
            "param_value": value, "method": m,
            "scenario": cfg["scenario"]["name"], "config_hash": chash,
            "status": result.status, "iterations": len(result.records) - 1,
            "sqrt2E_final": math.sqrt(2 * last.E),
            "term_defect_V": last.term_defect_V,
            "order": math.nan if order is None else order,
        })
    return rows


def cmd_sweep(cfg, args) -> int:
    if "sweep" not in cfg:
        print("config error: sweep: missing sweep declaration", file=sys.stderr)
        return 1
    out = _out_dir(cfg, args)
    dotted = cfg["sweep"]["path"]
    values = cfg["sweep"]["values"]
    methods = cfg["methods"]
    threads = args.threads or int(os.environ.get("WAVECONTROL_THREADS", "1"))

    if threads > 1:
        with concurrent.futures.ThreadPoolExecutor(max_workers=threads) as pool:
            futures = [pool.submit(_sweep_point, cfg, dotted, v, methods) for v in values]
            per_point = [f.result() for f in futures]
    else:
        per_point = [_sweep_point(cfg, dotted, v, methods) for v in values]

    rows = []
    for idx, point_rows in enumerate(per_point):
        for row in point_rows:
            row = dict(row)
            row["index"] = idx
            row["param_path"] = dotted
            rows.append(row)
    _write_csv(out / "sweep.csv", SWEEP_COLUMNS, rows)
    for row in rows:
        print(f"[{row['index']}] {row['param_path']}={row['param_value']} "
              f"{row['method']}: {row['status']} sqrt2E={row['sqrt2E_final']:.3e} "
              f"defect={row['term_defect_V']:.3e}")
    return 0 if all(r["status"] == "converged" for r in rows) else 2


def cmd_check(cfg, args) -> int:
    grid = build_grid(cfg)
    region = build_region(cfg, grid)
    nl = cfg["nonlinearity"]
    g = builtin(nl["name"], **nl.get("params", {}))
    C = float(cfg.get("least_squares", {}).get("C", 1.0))

    print(f"hypothesis report for scenario {cfg['scenario']['name']!r}")
    x0 = cfg["scenario"].get("x0")
    if x0 is None:
        print("  geometry: unknown (no observation point x0 configured)")
    else:
        rep = check_geometric_condition(grid, region, x0)
        verdict = "holds" if rep.holds else "fails"
        print(f"  geometry: {verdict}  T={grid.T} T_min={rep.T_min:.6g} "
              f"gamma0={list(rep.gamma0)} region_covers={rep.covered}")

    print(f"  nonlinearity {g.name!r}: Holder exponent s={g.s}")
    sampled = holder_seminorm_sample(g, g.s, R=10.0, n_samples=2000)
    if g.seminorm is None:
        print(f"    [g']_s declared: unknown; sampled lower bound {sampled:.6g}")
    else:
        ok = sampled <= g.seminorm + 1e-9
        print(f"    [g']_s declared {g.seminorm:.6g}, sampled lower bound "
              f"{sampled:.6g} ({'consistent' if ok else 'INCONSISTENT'})")

    if g.alpha is None or g.beta is None:
        print("    growth bound: unknown (no declared alpha/beta)")
    else:
        res = check_growth_H2(g, g.alpha, g.beta, R=1e6, n=4000)
        verdict = "holds" if res.holds else f"fails at r={res.witness:.6g}"
        print(f"    growth |g'| <= {g.alpha:.6g} + {g.beta:.6g} ln^(1/2)(1+|r|): {verdict}")
        if g.s > 0:
            bstar = beta_star(g.s, C)
            rel = "<" if g.beta < bstar else ">="
            tag = "ok" if g.beta < bstar else "WARNING: outside the guaranteed regime"
            print(f"    beta={g.beta:.6g} {rel} beta*(s)={bstar:.6g} for C={C} ({tag})")
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="wavecontrol",
                                     description="semilinear wave control experiments")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, fn in (("run", cmd_run), ("compare", cmd_compare),
                     ("sweep", cmd_sweep), ("check", cmd_check)):
        p = sub.add_parser(name)
        p.add_argument("--config", required=True)
        p.add_argument("--out", default=None)
        p.add_argument("--threads", type=int, default=None)
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--verbose", action="store_true")
        p.set_defaults(fn=fn)
    args = parser.parse_args(argv)
    try:
        cfg = load_config(args.config)
        if args.seed is not None:
            cfg["seed"] = args.seed
        return args.fn(cfg, args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
