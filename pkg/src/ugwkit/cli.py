"""Command line entry point.

Subcommands cover the individual solvers (uot, ugw, gw, flb, cgw, scale),
dataset generation (gen), and the experiment drivers (ratio-hist, perturb,
moons, graph-match, scale-bias, pu). Global flags: --seed, --out, --format,
--config. A config file holds key=value lines mirroring the flag names
(dashes or underscores); explicit flags win over the file. The process exits
0 only if every solve it ran converged.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys

import numpy as np

from . import __version__, app, geometry
from .conic import ConeMetricSpec, solve_cgw
from .flb import solve_flb
from .measures import MmSpace
from .scaling import scaling_bias_report
from .sinkhorn import uot_sinkhorn
from .ugw import UgwConfig, debiased_ugw, solve_ugw, tightness_diagnostics

__all__ = ["main"]


def _to_float(tok):
    tok = str(tok).strip().lower()
    if tok in ("inf", "+inf"):
        return math.inf
    return float(tok)


def _float_list(value):
    if isinstance(value, (list, tuple)):
        return [_to_float(v) for v in value]
    if isinstance(value, (int, float)):
        return [float(value)]
    return [_to_float(tok) for tok in str(value).split(",") if tok.strip()]


def _int_list(value):
    return [int(v) for v in _float_list(value)]


class _Opts:
    """Merged view of CLI flags and the optional config file."""

    def __init__(self, ns, config):
        self.ns = ns
        self.config = config

    def get(self, key, default=None):
        value = getattr(self.ns, key, None)
        if value is None:
            value = self.config.get(key, None)
        return default if value is None else value

    def num(self, key, default=None):
        value = self.get(key, default)
        return value if value is None else _to_float(value)

    def floats(self, key, default):
        return _float_list(self.get(key, default))

    def require(self, key):
        value = self.get(key)
        if value is None:
            _fail(f"missing required option --{key.replace('_', '-')}")
        return value


def _fail(message):
    print(f"error: {message}", file=sys.stderr)
    raise SystemExit(2)


def _load_space(opts, key, label):
    path = opts.require(key)
    weights = opts.get(f"{key}_weights")
    try:
        X = app.load_space(path, weights)
    except (OSError, ValueError) as exc:
        _fail(f"cannot load space from {path}: {exc}")
    if X.label is None:
        return MmSpace(X.dist, X.weights, label)
    return X


def _write_json(payload, path):
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=1)
    return path


# ---------------------------------------------------------------------------
# Subcommand handlers (each returns True when every solve converged)


def cmd_gen(opts, out_dir, seed, fmt):
    kind = opts.require("kind")
    n = int(opts.get("n", 50))
    extra = {}
    for key in ("n_outliers", "noise"):
        value = opts.get(key)
        if value is not None:
            extra[key] = int(value) if key == "n_outliers" else float(value)
    shape = geometry.gen_shape(kind, n, seed, **extra)
    if isinstance(shape, geometry.WeightedGraph):
        path = os.path.join(out_dir, f"gen_{kind}.json")
        _write_json(
            {"n": shape.n, "edges": [[int(i), int(j), float(w)] for i, j, w in shape.edges],
             "tags": shape.tags.tolist()},
            path,
        )
    elif fmt == "json":
        path = os.path.join(out_dir, f"gen_{kind}.json")
        _write_json({"points": shape.points.tolist(), "tags": shape.tags.tolist()}, path)
    else:
        path = os.path.join(out_dir, f"gen_{kind}.csv")
        np.savetxt(path, shape.points, delimiter=",")
        if np.any(shape.tags != 0):
            np.savetxt(os.path.join(out_dir, f"gen_{kind}_tags.csv"), shape.tags, fmt="%d")
    print(f"wrote {path}")
    return True


def cmd_uot(opts, out_dir, seed, fmt):
    cost = app.load_matrix(opts.require("cost"))
    mu = app.load_weights(opts.require("mu"))
    nu = app.load_weights(opts.require("nu"))
    rho1 = opts.num("rho", 1.0)
    rho2 = opts.num("rho2", rho1)
    res = uot_sinkhorn(
        cost, mu, nu, rho1, rho2,
        eps=opts.num("eps", 1e-2),
        tol_pot=opts.num("tol_pot", 1e-6),
        max_inner=int(opts.get("max_inner", 3000)),
    )
    app.save_plan(res.plan, os.path.join(out_dir, "uot_plan.csv"))
    summary = {
        "plan_mass": res.plan.mass,
        "iterations": res.iterations,
        "converged": res.converged,
        "residual": res.residual,
        "transport_cost": float(np.vdot(cost, res.plan.values)),
    }
    _write_json(summary, os.path.join(out_dir, "uot_summary.json"))
    print(f"uot: mass={summary['plan_mass']:.6g} iterations={res.iterations} "
          f"converged={res.converged}")
    return res.converged


def _run_quadratic(opts, out_dir, seed, name, balanced):
    X = _load_space(opts, "x", "x")
    Y = _load_space(opts, "y", "y")
    if balanced:
        rho1 = rho2 = math.inf
        if abs(X.mass - Y.mass) > 1e-9 * (1.0 + X.mass):
            print("warning: balanced mode with unequal total masses will not converge",
                  file=sys.stderr)
    else:
        rho1 = opts.num("rho", 1.0)
        rho2 = opts.num("rho2", rho1)
    cfg = UgwConfig(
        eps=opts.num("eps", 1e-2),
        rho1=rho1,
        rho2=rho2,
        max_outer=int(opts.get("max_outer", 3000)),
        max_inner=int(opts.get("max_inner", 3000)),
        tol_plan=opts.num("tol_plan", 1e-5),
        tol_pot=opts.num("tol_pot", 1e-9),
        seed=seed,
    )
    init_plan = None
    if opts.get("init", "product") == "flb":
        init_plan = solve_flb(X, Y, (rho1, rho2), eps=cfg.eps).plan.values
    sol = solve_ugw(X, Y, cfg, init_plan=init_plan)
    ok = sol.converged
    summary = {
        "cost_biconvex": sol.cost_biconvex,
        "cost_primal": sol.cost_primal,
        "mass_pi": sol.pi.mass,
        "iterations": sol.outer_iterations,
        "converged": sol.converged,
        "tightness": tightness_diagnostics(X, Y, sol, cfg),
    }
    if opts.get("debias", False):
        deb = debiased_ugw(X, Y, cfg, init_plan=init_plan)
        summary["debiased"] = {
            "value": deb.value,
            "converged": deb.converged,
            "cross": deb.cross,
            "self_x": deb.self_x,
            "self_y": deb.self_y,
        }
        ok = ok and deb.converged
    app.save_plan(sol.pi, os.path.join(out_dir, f"{name}_plan.csv"))
    _write_json(summary, os.path.join(out_dir, f"{name}_summary.json"))
    print(f"{name}: cost_biconvex={sol.cost_biconvex:.6g} mass={sol.pi.mass:.6g} "
          f"iterations={sol.outer_iterations} converged={sol.converged}")
    return ok


def cmd_ugw(opts, out_dir, seed, fmt):
    return _run_quadratic(opts, out_dir, seed, "ugw", balanced=False)


def cmd_gw(opts, out_dir, seed, fmt):
    return _run_quadratic(opts, out_dir, seed, "gw", balanced=True)


def cmd_flb(opts, out_dir, seed, fmt):
    X = _load_space(opts, "x", "x")
    Y = _load_space(opts, "y", "y")
    rho1 = opts.num("rho", 1.0)
    rho2 = opts.num("rho2", rho1)
    res = solve_flb(
        X, Y, (rho1, rho2),
        eps=opts.num("eps", 1e-2),
        tol_pot=opts.num("tol_pot", 1e-6),
        max_inner=int(opts.get("max_inner", 3000)),
    )
    app.save_plan(res.plan, os.path.join(out_dir, "flb_plan.csv"))
    summary = {
        "plan_mass": res.plan.mass,
        "iterations": res.iterations,
        "converged": res.converged,
        "residual": res.residual,
    }
    _write_json(summary, os.path.join(out_dir, "flb_summary.json"))
    print(f"flb: mass={summary['plan_mass']:.6g} converged={res.converged}")
    return res.converged


def cmd_cgw(opts, out_dir, seed, fmt):
    X = _load_space(opts, "x", "x")
    Y = _load_space(opts, "y", "y")
    rho = opts.num("rho", 1.0)
    res = solve_cgw(
        X, Y, ConeMetricSpec("gh", rho=rho),
        K=int(opts.get("grid_k", 10)),
        L=int(opts.get("grid_l", 10)),
        restarts=int(opts.get("restarts", 20)),
        seed=seed,
    )
    ok = True
    summary = {
        "cost": res.cost,
        "restart_costs": [entry["cost"] for entry in res.restart_log],
    }
    if opts.get("with_ugw", False):
        cfg = UgwConfig(eps=opts.num("eps", 1e-2), rho1=rho, rho2=rho,
                        tol_pot=opts.num("tol_pot", 1e-11), seed=seed)
        sol = solve_ugw(X, Y, cfg)
        ok = sol.converged
        denom = sol.primal_unregularized
        if abs(res.cost) < app.RATIO_FLOOR and abs(denom) < app.RATIO_FLOOR:
            summary["ratio_vs_ugw"] = 1.0
        else:
            summary["ratio_vs_ugw"] = res.cost / max(denom, app.RATIO_FLOOR)
        summary["ugw_primal"] = denom
    app.save_atoms(res.alpha.to_atoms(), os.path.join(out_dir, "cgw_plan.csv"))
    _write_json(summary, os.path.join(out_dir, "cgw_summary.json"))
    print(f"cgw: cost={res.cost:.6g} restarts={len(res.restart_log)}")
    return ok


def cmd_scale(opts, out_dir, seed, fmt):
    X = _load_space(opts, "x", "x")
    Y = _load_space(opts, "y", "y")
    rho = opts.num("rho", 1.0)
    kappas = opts.floats("kappas", (0.25, 0.5, 1.0, 2.0, 4.0))
    pi = np.outer(X.weights, Y.weights)
    reports = scaling_bias_report(X, Y, pi, rho, kappas)
    rows = [
        {
            "kappa": r.kappa,
            "theta_quadratic": r.theta_quadratic,
            "theta_linear": r.theta_linear,
            "foc_residual_quadratic": r.foc_residual_quadratic,
            "foc_residual_linear": r.foc_residual_linear,
        }
        for r in reports
    ]
    path = app.write_table(
        rows,
        ["kappa", "theta_quadratic", "theta_linear", "foc_residual_quadratic",
         "foc_residual_linear"],
        os.path.join(out_dir, "scale"),
        fmt,
    )
    print(f"wrote {path}")
    return True


def _driver(run, int_keys=(), float_keys=(), list_keys=(), int_list_keys=()):
    def handler(opts, out_dir, seed, fmt):
        kwargs = {}
        for key in int_keys:
            value = opts.get(key)
            if value is not None:
                kwargs[key] = int(value)
        for key in float_keys:
            value = opts.get(key)
            if value is not None:
                kwargs[key] = _to_float(value)
        for key in list_keys:
            value = opts.get(key)
            if value is not None:
                kwargs[key] = _float_list(value)
        for key in int_list_keys:
            value = opts.get(key)
            if value is not None:
                kwargs[key] = _int_list(value)
        result = run(out_dir=out_dir, seed=seed, fmt=fmt, **kwargs)
        for f in result["files"]:
            print(f"wrote {f}")
        return result["converged"]

    return handler


cmd_perturb = _driver(
    app.run_perturb,
    int_keys=("n", "grid_k", "grid_l", "restarts"),
    float_keys=("rho", "eps"),
    list_keys=("ts",),
)
cmd_ratio_hist = _driver(
    app.run_ratio_hist,
    int_keys=("trials", "grid_k", "grid_l", "restarts"),
    float_keys=("rho", "eps"),
    int_list_keys=("ns",),
)
cmd_moons = _driver(
    app.run_moons,
    int_keys=("n", "n_outliers", "max_outer"),
    float_keys=("eps",),
    list_keys=("rhos",),
    int_list_keys=("seeds",),
)
cmd_graph_match = _driver(
    app.run_graph_match,
    int_keys=("n", "n_outliers", "max_outer"),
    list_keys=("eps_grid", "rho_grid"),
)
cmd_scale_bias = _driver(
    app.run_scale_bias,
    int_keys=("n",),
    float_keys=("rho", "b_target"),
    list_keys=("kappas",),
)
cmd_pu = _driver(
    app.run_pu,
    int_keys=("folds", "n_pos", "n_unlabeled_pos", "n_unlabeled_neg", "max_outer"),
    float_keys=("eps",),
    list_keys=("rho_grid",),
)


# ---------------------------------------------------------------------------
# Parser assembly


def _build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=None, help="global RNG seed (default 0)")
    common.add_argument("--out", default=None, help="output directory (default .)")
    common.add_argument("--format", choices=("csv", "json"), default=None,
                        help="table format (default csv)")
    common.add_argument("--config", default=None,
                        help="key=value file mirroring the flag names")

    parser = argparse.ArgumentParser(prog="ugwkit", description=__doc__,
                                     parents=[common],
                                     formatter_class=argparse.RawDescriptionHelpFormatter)
    parser.add_argument("--version", action="version", version=f"ugwkit {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def solver_flags(p, tol=True):
        p.add_argument("--rho", default=None, help="marginal penalty (inf for balanced)")
        p.add_argument("--rho2", default=None, help="second-marginal penalty (default rho)")
        p.add_argument("--eps", default=None, help="entropic strength")
        if tol:
            p.add_argument("--tol-pot", default=None, help="potential stopping tolerance")
            p.add_argument("--max-inner", default=None, help="inner iteration cap")

    p = sub.add_parser("gen", parents=[common], help="sample a synthetic shape or graph")
    p.add_argument("--kind", choices=geometry.SHAPE_KINDS, default=None)
    p.add_argument("--n", default=None, help="number of points / nodes")
    p.add_argument("--n-outliers", default=None)
    p.add_argument("--noise", default=None)

    p = sub.add_parser("uot", parents=[common], help="unbalanced OT for a fixed cost matrix")
    p.add_argument("--cost", default=None, help="cost matrix CSV")
    p.add_argument("--mu", default=None, help="source weights, one float per line")
    p.add_argument("--nu", default=None, help="target weights, one float per line")
    solver_flags(p)

    for name, help_text in (("ugw", "unbalanced quadratic matching"),
                            ("gw", "balanced quadratic matching (rho = inf)")):
        p = sub.add_parser(name, parents=[common], help=help_text)
        p.add_argument("--x", default=None, help="first space (.json, or matrix CSV)")
        p.add_argument("--y", default=None, help="second space")
        p.add_argument("--x-weights", default=None, help="weights file for a CSV space")
        p.add_argument("--y-weights", default=None)
        if name == "ugw":
            p.add_argument("--rho", default=None)
            p.add_argument("--rho2", default=None)
        p.add_argument("--eps", default=None)
        p.add_argument("--max-outer", default=None)
        p.add_argument("--max-inner", default=None)
        p.add_argument("--tol-plan", default=None)
        p.add_argument("--tol-pot", default=None)
        p.add_argument("--init", choices=("product", "flb"), default=None,
                       help="initial plan (default product)")
        p.add_argument("--debias", action="store_const", const=True, default=None,
                       help="also report the debiased cost (three solves)")

    p = sub.add_parser("flb", parents=[common],
                       help="eccentricity-profile lower-bound matching")
    p.add_argument("--x", default=None)
    p.add_argument("--y", default=None)
    p.add_argument("--x-weights", default=None)
    p.add_argument("--y-weights", default=None)
    solver_flags(p)

    p = sub.add_parser("cgw", parents=[common], help="conic grid matching")
    p.add_argument("--x", default=None)
    p.add_argument("--y", default=None)
    p.add_argument("--x-weights", default=None)
    p.add_argument("--y-weights", default=None)
    p.add_argument("--rho", default=None)
    p.add_argument("--grid-k", default=None)
    p.add_argument("--grid-l", default=None)
    p.add_argument("--restarts", default=None)
    p.add_argument("--with-ugw", action="store_const", const=True, default=None,
                   help="also solve the quadratic problem and report the ratio")
    p.add_argument("--eps", default=None, help="entropic strength for --with-ugw")
    p.add_argument("--tol-pot", default=None, help="potential tolerance for --with-ugw")

    p = sub.add_parser("scale", parents=[common], help="optimal-scale comparison table")
    p.add_argument("--x", default=None)
    p.add_argument("--y", default=None)
    p.add_argument("--x-weights", default=None)
    p.add_argument("--y-weights", default=None)
    p.add_argument("--rho", default=None)
    p.add_argument("--kappas", default=None, help="comma-separated mass multipliers")

    p = sub.add_parser("ratio-hist", parents=[common],
                       help="histogram of conic/quadratic cost ratios")
    p.add_argument("--ns", default=None, help="comma-separated sizes")
    p.add_argument("--trials", default=None)
    p.add_argument("--rho", default=None)
    p.add_argument("--eps", default=None)
    p.add_argument("--grid-k", default=None)
    p.add_argument("--grid-l", default=None)
    p.add_argument("--restarts", default=None)

    p = sub.add_parser("perturb", parents=[common],
                       help="cost ratio along a drift of the second space")
    p.add_argument("--n", default=None)
    p.add_argument("--ts", default=None, help="comma-separated drift magnitudes")
    p.add_argument("--rho", default=None)
    p.add_argument("--eps", default=None)
    p.add_argument("--grid-k", default=None)
    p.add_argument("--grid-l", default=None)
    p.add_argument("--restarts", default=None)

    p = sub.add_parser("moons", parents=[common],
                       help="outlier mass across the marginal-penalty grid")
    p.add_argument("--n", default=None)
    p.add_argument("--n-outliers", default=None)
    p.add_argument("--rhos", default=None)
    p.add_argument("--eps", default=None)
    p.add_argument("--seeds", default=None, help="comma-separated seeds")
    p.add_argument("--max-outer", default=None)

    p = sub.add_parser("graph-match", parents=[common],
                       help="community-graph plans over the (eps, rho) grid")
    p.add_argument("--n", default=None)
    p.add_argument("--n-outliers", default=None)
    p.add_argument("--eps-grid", default=None)
    p.add_argument("--rho-grid", default=None, help="comma list; inf allowed")
    p.add_argument("--max-outer", default=None)

    p = sub.add_parser("scale-bias", parents=[common],
                       help="optimal-scale bias table on a synthetic instance")
    p.add_argument("--n", default=None)
    p.add_argument("--rho", default=None)
    p.add_argument("--kappas", default=None)
    p.add_argument("--b-target", default=None)

    p = sub.add_parser("pu", parents=[common],
                       help="positive-unlabeled pipeline on synthetic folds")
    p.add_argument("--folds", default=None)
    p.add_argument("--n-pos", default=None)
    p.add_argument("--n-unlabeled-pos", default=None)
    p.add_argument("--n-unlabeled-neg", default=None)
    p.add_argument("--eps", default=None)
    p.add_argument("--rho-grid", default=None)
    p.add_argument("--max-outer", default=None)

    return parser


_HANDLERS = {
    "gen": cmd_gen,
    "uot": cmd_uot,
    "ugw": cmd_ugw,
    "gw": cmd_gw,
    "flb": cmd_flb,
    "cgw": cmd_cgw,
    "scale": cmd_scale,
    "ratio-hist": cmd_ratio_hist,
    "perturb": cmd_perturb,
    "moons": cmd_moons,
    "graph-match": cmd_graph_match,
    "scale-bias": cmd_scale_bias,
    "pu": cmd_pu,
}


def main(argv=None):
    parser = _build_parser()
    ns = parser.parse_args(argv)
    config = {}
    if ns.config is not None:
        try:
            config = app.read_config(ns.config)
        except (OSError, ValueError) as exc:
            _fail(str(exc))
    opts = _Opts(ns, config)
    seed = int(opts.get("seed", 0))
    out_dir = str(opts.get("out", "."))
    fmt = str(opts.get("format", "csv"))
    os.makedirs(out_dir, exist_ok=True)
    ok = _HANDLERS[ns.command](opts, out_dir, seed, fmt)
    return 0 if ok else 1


if __name__ == "__main__":
    sys.exit(main())
