"""Command-line front end.

Subcommands: solve-oneshot, solve-dp, certify-dp, census, warmstart-lqr,
reproduce, grid.  Every run writes a schema-versioned JSON report (identical
config + seed gives byte-identical output apart from the ``generated_at``
field) and, where applicable, a CSV lattice with header
``coord1,...,coordK,objective``.

Exit codes: 0 success, 2 validation failure, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import datetime
import json
import sys
from pathlib import Path

import numpy as np

from . import dp, landscape
from .diff import TOL_STAT, make_objective
from .expect import QuadratureEngine, Uniform, make_engine
from .feasible import Box
from .model import ControlProblem, PolicyParams
from .registry import registry_lookup, registry_names
from .smooth import ExprMap
from .solvers import projected_descent

SCHEMA_VERSION = 1


class ValidationError(Exception):
    pass


class NumericalFailure(Exception):
    pass


# ---------------------------------------------------------------------------
# config handling

_TOP_KEYS = {"problem", "flavor", "seed", "solver", "expectation", "census",
             "grid", "params", "anchors", "branch", "lqr"}
_SOLVER_KEYS = {"tol_stat", "max_iter", "starts"}
_EXPECT_KEYS = {"kind", "order", "mc_samples"}
_CENSUS_KEYS = {"lattice_per_dim", "random_starts"}
_GRID_KEYS = {"vary", "fix", "resolution"}
_LQR_KEYS = {"seeds", "scenario"}
_PROBLEM_KEYS = {"name", "n", "state_dim", "action_dim", "dynamics",
                 "stage_costs", "terminal_cost", "action_lower",
                 "action_upper", "x0", "eval_lower", "eval_upper", "noise"}


def _check_keys(d, allowed, where):
    unknown = set(d) - allowed
    if unknown:
        raise ValidationError(
            f"unknown config key(s) in {where}: {', '.join(sorted(unknown))}")


def load_config(path):
    try:
        with open(path) as fh:
            cfg = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ValidationError(f"cannot read config {path}: {exc}")
    if not isinstance(cfg, dict):
        raise ValidationError("config root must be an object")
    _check_keys(cfg, _TOP_KEYS, "config")
    for key, allowed in (("solver", _SOLVER_KEYS), ("expectation", _EXPECT_KEYS),
                         ("census", _CENSUS_KEYS), ("grid", _GRID_KEYS),
                         ("lqr", _LQR_KEYS)):
        if key in cfg:
            if not isinstance(cfg[key], dict):
                raise ValidationError(f"config section {key!r} must be an object")
            _check_keys(cfg[key], allowed, key)
    if isinstance(cfg.get("problem"), dict):
        _check_keys(cfg["problem"], _PROBLEM_KEYS, "problem")
    return cfg


def _build_inline_problem(spec):
    """Build a scalar-expression problem from an inline config object."""
    for req in ("n", "state_dim", "action_dim", "dynamics", "stage_costs",
                "terminal_cost", "action_lower", "action_upper"):
        if req not in spec:
            raise ValidationError(f"inline problem missing key {req!r}")
    n = int(spec["n"])
    N, M = int(spec["state_dim"]), int(spec["action_dim"])
    noise = None
    noise_dim = 0
    if spec.get("noise"):
        noise = []
        for item in spec["noise"]:
            if item.get("kind") != "uniform":
                raise ValidationError("inline noise supports kind 'uniform' only")
            noise.append(Uniform(item["lo"], item["hi"]))
        noise_dim = noise[0].dim
    darg = [("x", N), ("u", M)] + ([("w", noise_dim)] if noise else [])
    try:
        dynamics = [ExprMap([e] if isinstance(e, str) else e, darg)
                    for e in spec["dynamics"]]
        costs = [ExprMap([e], [("x", N), ("u", M)], scalar=True)
                 for e in spec["stage_costs"]]
        terminal = ExprMap([spec["terminal_cost"]], [("x", N)], scalar=True)
    except Exception as exc:
        raise ValidationError(f"inline problem expression error: {exc}")
    if len(dynamics) != n or len(costs) != n:
        raise ValidationError("inline problem needs n dynamics and n stage costs")
    eval_box = None
    if "eval_lower" in spec:
        eval_box = Box(spec["eval_lower"], spec["eval_upper"])
    return ControlProblem(
        name="inline", n=n, state_dim=N, action_dim=M, dynamics=dynamics,
        stage_costs=costs, terminal_cost=terminal,
        action_set=Box(spec["action_lower"], spec["action_upper"]),
        x0=np.asarray(spec["x0"], dtype=float) if "x0" in spec else None,
        noise=noise, noise_dim=noise_dim, eval_box=eval_box)


def _resolve_problem(args, cfg):
    src = cfg.get("problem", args.problem)
    if src is None and args.command == "warmstart-lqr":
        src = "lqr"
    if src is None:
        raise ValidationError("no problem given (positional name or config)")
    if isinstance(src, dict):
        if "name" in src and len(src) == 1:
            src = src["name"]
        else:
            return _build_inline_problem(src), None
    if src == "lqr":
        lqr_cfg = cfg.get("lqr", {})
        inst, truth = registry_lookup(
            "lqr", seed=args.seed if args.seed is not None else 0,
            scenario=lqr_cfg.get("scenario", "unconstrained"))
        return inst, truth
    try:
        return registry_lookup(src)
    except KeyError as exc:
        raise ValidationError(str(exc))


def _engine_for(problem, args, cfg):
    if not getattr(problem, "stochastic", False):
        return None
    ecfg = cfg.get("expectation", {})
    kind = ecfg.get("kind", "quadrature")
    order = args.quadrature_order or int(ecfg.get("order", 16))
    mc = args.mc_samples or int(ecfg.get("mc_samples", 100_000))
    return make_engine(problem, kind=kind, order=order, mc_samples=mc,
                       seed=args.seed or 0)


# ---------------------------------------------------------------------------
# JSON helpers

def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.floating, float)):
        f = float(obj)
        return f if np.isfinite(f) else repr(f)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    return obj


def _record_dict(r):
    return {"point": r.point, "value": r.value, "pg_norm": r.pg_norm,
            "kind": r.kind, "spurious": r.spurious}


# ---------------------------------------------------------------------------
# subcommands (each returns a results dict and optional CSV rows)

def _cmd_solve_oneshot(problem, truth, args, cfg):
    engine = _engine_for(problem, args, cfg)
    objective, gradient = make_objective(problem, engine=engine)
    feas = problem.param_set() if problem.parameterized else problem.input_set()
    scfg = cfg.get("solver", {})
    n_starts = args.starts or int(scfg.get("starts", 64))
    if n_starts <= 0:
        raise ValidationError("solver starts must be positive")
    rng = np.random.default_rng(args.seed or 0)
    starts = np.concatenate([feas.project(np.zeros((1, feas_dim(problem)))),
                             feas.sample(rng, n_starts - 1)], axis=0)
    tol = args.tol_stat or float(scfg.get("tol_stat", TOL_STAT))
    res = projected_descent(objective, gradient, starts, feas, tol_stat=tol,
                            max_iter=int(scfg.get("max_iter", 5000)))
    if not np.any(res.converged):
        raise NumericalFailure("no start reached the stationarity tolerance")
    vals = np.where(res.converged, res.value, np.inf)
    i = int(np.argmin(vals))
    return {"point": res.point[i], "value": float(res.value[i]),
            "pg_norm": float(res.pg_norm[i]),
            "converged_starts": int(np.sum(res.converged))}, None


def feas_dim(problem):
    if problem.parameterized:
        return sum(b.m for b in problem.policy_bases)
    return problem.n * problem.action_dim


def _dp_start_params(problem, cfg, args):
    if "params" in cfg:
        flat = np.asarray(cfg["params"], dtype=float)
        if flat.size != feas_dim(problem):
            raise ValidationError("config params has the wrong length")
        return PolicyParams.from_flat(problem, flat)
    z0 = problem.param_set().project(np.zeros((1, feas_dim(problem))))[0]
    return PolicyParams.from_flat(problem, z0)


def _cmd_solve_dp(problem, truth, args, cfg):
    if problem.parameterized:
        engine = _engine_for(problem, args, cfg) or QuadratureEngine()
        params = dp.dp_param_solve(problem, _dp_start_params(problem, cfg, args),
                                   engine)
        report = dp.dp_param_certify(problem, params, engine,
                                     seed=args.seed or 0)
        return {"params": params.flat, "verdict": report.verdict,
                "expected_objective": float(np.asarray(
                     engine.expected_objective(problem, params)))}, None
    if problem.state_dim != 1:
        raise ValidationError("tabular DP requires a one-dimensional state")
    anchors = None
    if cfg.get("anchors"):
        anchors = {int(k): np.asarray(v, dtype=float)
                   for k, v in cfg["anchors"].items()}
    run = dp.dp_tabular(problem, branch=cfg.get("branch", "global"),
                        anchors=anchors)
    induced = run.induced_inputs()
    objective, _ = make_objective(problem, parameterized=False)
    return {"induced_inputs": [u for u in induced],
            "induced_values": [float(np.asarray(objective(u[None, :])).ravel()[0])
                               for u in induced]}, None


def _cmd_certify_dp(problem, truth, args, cfg):
    if not problem.parameterized:
        raise ValidationError("certify-dp applies to parameterized problems")
    engine = _engine_for(problem, args, cfg) or QuadratureEngine()
    if "params" in cfg:
        params = _dp_start_params(problem, cfg, args)
    else:
        params = dp.dp_param_solve(problem, _dp_start_params(problem, cfg, args),
                                   engine)
    report = dp.dp_param_certify(problem, params, engine, seed=args.seed or 0)
    return {"params": params.flat, "verdict": report.verdict,
            "accepted": report.accepted,
            "stages": [{"stage": s.stage, "verdict": s.verdict,
                        "worst_pg": s.worst_pg, "detail": s.detail}
                       for s in report.stages]}, None


def _cmd_census(problem, truth, args, cfg):
    ccfg = cfg.get("census", {})
    lattice = int(ccfg.get("lattice_per_dim", 21))
    rand = args.starts if args.starts is not None \
        else int(ccfg.get("random_starts", 200))
    if lattice <= 0 and rand <= 0:
        raise ValidationError("census budget is empty")
    engine = _engine_for(problem, args, cfg)
    tol = args.tol_stat or float(cfg.get("solver", {}).get("tol_stat", TOL_STAT))
    records = landscape.enumerate_stationary(
        problem, engine=engine, lattice_per_dim=max(lattice, 1),
        random_starts=max(rand, 0), seed=args.seed or 0, tol_stat=tol)
    if not records:
        raise NumericalFailure("census found no verified stationary points")
    return {"count": len(records),
            "records": [_record_dict(r) for r in records]}, None


def _cmd_warmstart_lqr(problem, truth, args, cfg):
    lcfg = cfg.get("lqr", {})
    seeds = lcfg.get("seeds", list(range(20)))
    scenario = lcfg.get("scenario", "unconstrained")
    results = landscape.run_lqr_experiment(seeds, scenario=scenario,
                                           tol_stat=args.tol_stat or TOL_STAT)
    return {"scenario": scenario,
            "seeds": [{"seed": r.seed, "dp_cost": r.dp_cost,
                       "os_cost": r.os_cost, "dp_to_os": r.dp_to_os,
                       "os_to_dp": r.os_to_dp,
                       "dp_stationary": r.dp_stationary}
                      for r in results]}, None


def _match_points(records, expected, tol):
    matched, extras = landscape.match_records(records, expected, tol)
    return all(m is not None for m in matched)


def _cmd_reproduce(problem, truth, args, cfg):
    if truth is None:
        raise ValidationError("reproduce needs a registered problem name")
    name = getattr(problem, "name", "lqr")
    checks = {}
    if isinstance(problem, landscape.LqrInstance):
        res = landscape.run_lqr_experiment([problem.seed],
                                           scenario=problem.scenario)[0]
        checks["dp_solution_is_oneshot_stationary"] = res.dp_to_os == 0.0
        results = {"checks": checks, "seed_result": {
            "dp_to_os": res.dp_to_os, "os_to_dp": res.os_to_dp}}
        if not all(checks.values()):
            raise NumericalFailure("reproduction checks failed")
        return results, None

    order = 8 if problem.stochastic else 16
    engine = QuadratureEngine(order=args.quadrature_order or order) \
        if problem.stochastic else None
    records = landscape.enumerate_stationary(problem, engine=engine,
                                             seed=args.seed or 0)
    tol = truth.get("tol", 1e-3)
    minima = [r for r in records if r.is_local_min]
    if "minima" in truth:
        checks["census_finds_expected_minima"] = _match_points(
            minima, truth["minima"], tol)
    if "strict_minima" in truth:
        strict = [r for r in minima if r.kind == "strict-min"]
        ok, extras = landscape.match_records(strict, truth["strict_minima"], tol)
        checks["census_strict_minima_exact"] = (all(m is not None for m in ok)
                                                and not extras)
    if "stationary" in truth:
        checks["census_finds_expected_stationary"] = _match_points(
            records, truth["stationary"], tol)
    if "best" in truth:
        best = min(records, key=lambda r: r.value)
        checks["best_point_matches"] = bool(
            np.max(np.abs(best.point - np.asarray(truth["best"]))) <= tol)
    if problem.parameterized:
        eng = engine or QuadratureEngine()
        for key, expect_accept in (("dp_accepted", True), ("dp_rejected", False)):
            if key in truth:
                params = PolicyParams.from_flat(
                    problem, np.asarray(truth[key], dtype=float))
                rep = dp.dp_param_certify(problem, params, eng,
                                          seed=args.seed or 0)
                checks[f"certify_{key}"] = rep.accepted == expect_accept
    results = {"checks": checks,
               "records": [_record_dict(r) for r in records]}
    if not all(checks.values()):
        raise NumericalFailure(f"reproduction checks failed for {name}")
    return results, None


def _cmd_grid(problem, truth, args, cfg):
    if isinstance(problem, landscape.LqrInstance):
        raise ValidationError("grid is not available for lqr instances")
    gcfg = cfg.get("grid", {})
    engine = _engine_for(problem, args, cfg)
    objective, _ = make_objective(problem, engine=engine)
    d = feas_dim(problem)
    feas = problem.param_set() if problem.parameterized else problem.input_set()
    lo, hi = feas.bounding_box()
    res = int(gcfg.get("resolution", 201))
    if res <= 0:
        raise ValidationError("grid resolution must be positive")
    vary = gcfg.get("vary")
    if vary is None:
        vary = [{"index": i, "lo": float(lo[i]), "hi": float(hi[i]),
                 "count": res} for i in range(max(d - 2, 0), d)]
    fixed = {int(k): float(v) for k, v in gcfg.get("fix", {}).items()}
    idxs = [int(v["index"]) for v in vary]
    if any(i < 0 or i >= d for i in idxs + list(fixed)):
        raise ValidationError("grid coordinate index out of range")
    axes = [np.linspace(float(v.get("lo", lo[v["index"]])),
                        float(v.get("hi", hi[v["index"]])),
                        int(v.get("count", res))) for v in vary]
    mesh = np.meshgrid(*axes, indexing="ij")
    pts = np.zeros(mesh[0].shape + (d,))
    for i in range(d):
        if i in fixed:
            pts[..., i] = fixed[i]
    for ax, i in zip(mesh, idxs):
        pts[..., i] = ax
    flat = pts.reshape(-1, d)
    with np.errstate(over="ignore", invalid="ignore"):
        vals = np.asarray(objective(flat), dtype=float)
    header = [f"coord{j + 1}" for j in range(len(idxs))] + ["objective"]
    rows = [header]
    coords = flat[:, idxs]
    for c, v in zip(coords, vals):
        rows.append([repr(float(x)) for x in c] + [repr(float(v))])
    return {"rows": len(rows) - 1, "vary": idxs, "fix": fixed}, rows


_COMMANDS = {
    "solve-oneshot": _cmd_solve_oneshot,
    "solve-dp": _cmd_solve_dp,
    "certify-dp": _cmd_certify_dp,
    "census": _cmd_census,
    "warmstart-lqr": _cmd_warmstart_lqr,
    "reproduce": _cmd_reproduce,
    "grid": _cmd_grid,
}


def _build_parser():
    p = argparse.ArgumentParser(prog="ocland",
                                description="optimal-control landscape tools")
    p.add_argument("command", choices=sorted(_COMMANDS))
    p.add_argument("problem", nargs="?", default=None,
                   help=f"registered problem ({', '.join(registry_names())}) "
                        "unless given in the config")
    p.add_argument("--config", default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", default=".")
    p.add_argument("--format", choices=["json", "csv", "both"], default="json")
    p.add_argument("--tol-stat", type=float, default=None)
    p.add_argument("--starts", type=int, default=None)
    p.add_argument("--quadrature-order", type=int, default=None)
    p.add_argument("--mc-samples", type=int, default=None)
    return p


def run_command(argv=None):
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit:
        return 2
    report = {
        "schema_version": SCHEMA_VERSION,
        "command": args.command,
        "seed": args.seed,
        "tolerances": {"tol_stat": args.tol_stat or TOL_STAT},
        "config": {},
        "results": None,
        "errors": [],
    }
    csv_rows = None
    code = 0
    try:
        cfg = load_config(args.config) if args.config else {}
        report["config"] = cfg
        problem, truth = _resolve_problem(args, cfg)
        report["problem"] = getattr(problem, "name", "lqr") \
            if not isinstance(problem, landscape.LqrInstance) else "lqr"
        if args.command in ("census",) and problem is not None \
                and not isinstance(problem, landscape.LqrInstance) \
                and args.starts is not None and args.starts < 0:
            raise ValidationError("census budget must be nonnegative")
        results, csv_rows = _COMMANDS[args.command](problem, truth, args, cfg)
        report["results"] = results
    except ValidationError as exc:
        report["errors"].append({"code": "validation", "message": str(exc)})
        code = 2
    except NumericalFailure as exc:
        report["errors"].append({"code": "numerical", "message": str(exc)})
        code = 3
    except Exception as exc:  # evaluation/linear-algebra failures
        report["errors"].append({"code": "numerical",
                                 "message": f"{type(exc).__name__}: {exc}"})
        code = 3

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    # everything except generated_at is a pure function of config + seed
    report["generated_at"] = datetime.datetime.now(
        datetime.timezone.utc).isoformat()
    body = json.dumps(_jsonable(report), indent=2, sort_keys=True) + "\n"
    (out / "report.json").write_text(body)
    if csv_rows is not None and args.format in ("csv", "both"):
        (out / "grid.csv").write_text(
            "\n".join(",".join(r) for r in csv_rows) + "\n")
    return code


def main():
    sys.exit(run_command())


if __name__ == "__main__":
    main()
