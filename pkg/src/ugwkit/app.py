"""Experiment drivers, serialization, and the PU-learning predictor.

Every driver writes plot-ready data files (CSV or JSON rows) plus a JSON
manifest holding the seed and the resolved configuration, so a run can be
reproduced exactly from its manifest. Solver failures inside a driver are
recorded per trial and the driver keeps going; the aggregate convergence
flag feeds the CLI exit code.
"""

from __future__ import annotations

import ast
import csv
import json
import math
import os
from dataclasses import asdict

import numpy as np

from . import geometry
from .conic import ConeMetricSpec, solve_cgw
from .measures import MmSpace, TransportPlan
from .scaling import scaling_bias_report
from .ugw import UgwConfig, debiased_ugw, distortion_cost, solve_ugw

__all__ = [
    "pu_predict",
    "space_to_dict",
    "space_from_dict",
    "save_space",
    "load_space",
    "save_plan",
    "load_weights",
    "load_matrix",
    "read_config",
    "write_table",
    "write_manifest",
    "cgw_ugw_ratio",
    "run_perturb",
    "run_ratio_hist",
    "run_moons",
    "run_graph_match",
    "run_scale_bias",
    "run_pu",
]

RATIO_FLOOR = 1e-9


# ---------------------------------------------------------------------------
# PU prediction


def pu_predict(plan, positive_ratio):
    """Label target atoms by their received marginal mass.

    The top ceil(r*m) atoms of the column marginal, in descending mass with
    lower index winning ties, get +1; the rest -1.
    """
    if not 0 < positive_ratio <= 1:
        raise ValueError("positive_ratio must be in (0, 1]")
    p2 = plan.col_marginal if isinstance(plan, TransportPlan) else np.asarray(plan, float)
    if p2.ndim == 2:
        p2 = p2.sum(axis=0)
    m = p2.size
    if m == 0:
        raise ValueError("empty plan")
    n_pos = math.ceil(positive_ratio * m)
    order = np.argsort(-p2, kind="stable")
    labels = -np.ones(m, dtype=int)
    labels[order[:n_pos]] = 1
    return labels


# ---------------------------------------------------------------------------
# Serialization


def space_to_dict(X):
    return {"dist": X.dist.tolist(), "weights": X.weights.tolist(), "label": X.label}


def space_from_dict(d):
    return MmSpace(np.asarray(d["dist"], float), np.asarray(d["weights"], float), d.get("label"))


def save_space(X, path):
    with open(path, "w") as fh:
        json.dump(space_to_dict(X), fh)
    return path


def load_space(path, weights_path=None):
    """Load an MmSpace from JSON, or from a CSV matrix plus a weights file."""
    if str(path).endswith(".json"):
        with open(path) as fh:
            return space_from_dict(json.load(fh))
    dist = load_matrix(path)
    if weights_path is None:
        raise ValueError("CSV spaces need a separate weights file")
    return MmSpace(dist, load_weights(weights_path))


def load_matrix(path):
    return np.loadtxt(path, delimiter=",", ndmin=2)


def load_weights(path):
    return np.loadtxt(path, ndmin=1)


def save_plan(plan, path):
    values = plan.values if isinstance(plan, TransportPlan) else np.asarray(plan)
    np.savetxt(path, values, delimiter=",")
    return path


def save_atoms(atoms, path):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["i", "r", "j", "s", "mass"])
        writer.writerows(atoms.tolist())
    return path


# ---------------------------------------------------------------------------
# Config and tables


def _parse_value(text):
    text = text.strip()
    low = text.lower()
    if low in ("true", "false"):
        return low == "true"
    if low in ("inf", "+inf"):
        return math.inf
    try:
        return ast.literal_eval(text)
    except (ValueError, SyntaxError):
        return text


def read_config(path):
    """key=value lines; '#' starts a comment, keys use flag spelling."""
    out = {}
    with open(path) as fh:
        for line in fh:
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"malformed config line: {line!r}")
            key, value = line.split("=", 1)
            out[key.strip().replace("-", "_")] = _parse_value(value)
    return out


def write_table(rows, fieldnames, path_base, fmt="csv"):
    """Write dict rows as CSV or a JSON array; returns the path written."""
    if fmt == "json":
        path = path_base + ".json"
        with open(path, "w") as fh:
            json.dump(rows, fh, indent=1)
        return path
    path = path_base + ".csv"
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=fieldnames)
        writer.writeheader()
        for row in rows:
            writer.writerow(row)
    return path


def write_manifest(out_dir, name, seed, config, files):
    from . import __version__

    manifest = {
        "driver": name,
        "seed": seed,
        "config": config,
        "version": __version__,
        "files": [os.path.basename(f) for f in files],
    }
    path = os.path.join(out_dir, f"{name}_manifest.json")
    with open(path, "w") as fh:
        json.dump(manifest, fh, indent=1)
    return path


# ---------------------------------------------------------------------------
# Shared experiment pieces


def _cloud_space(points, label=None):
    return geometry.space_from_points(geometry.PointCloud(points), label=label)


def _random_pair(rng, n):
    X = _cloud_space(rng.normal(size=(n, 2)), "x")
    Y = _cloud_space(rng.normal(size=(n, 2)), "y")
    return X, Y


def cgw_ugw_ratio(X, Y, rho, eps, K=10, L=10, restarts=20, seed=0, cfg=None):
    """CGW cost over the eps-free UGW primal, with the 0/0 guard at 1.

    Both solvers see the same rho. When numerator and denominator both sit
    below the floor the spaces are matched exactly and the ratio is 1 by
    convention. The default config tightens tol_pot so the outer loop can
    certify its plan tolerance at small eps.
    """
    cfg = cfg or UgwConfig(eps=eps, rho1=rho, rho2=rho, tol_pot=1e-11)
    sol = solve_ugw(X, Y, cfg)
    denom = sol.primal_unregularized
    res = solve_cgw(X, Y, ConeMetricSpec("gh", rho=rho), K=K, L=L, restarts=restarts, seed=seed)
    num = res.cost
    if abs(num) < RATIO_FLOOR and abs(denom) < RATIO_FLOOR:
        ratio = 1.0
    else:
        ratio = num / max(denom, RATIO_FLOOR)
    return ratio, sol, res


# ---------------------------------------------------------------------------
# Drivers


def run_perturb(
    out_dir=".",
    seed=0,
    n=3,
    ts=(0.0, 1e-3, 1e-2, 1e-1, 0.5),
    rho=0.1,
    eps=1e-3,
    grid_k=10,
    grid_l=10,
    restarts=20,
    fmt="csv",
):
    """Ratio of the grid matching cost to the quadratic cost as the second
    space drifts away from the first along a fixed random direction.

    The quadratic side is the debiased value: near t = 0 the raw primal is
    dominated by the entropic bias (order eps^2), which the two self terms
    cancel to second order in t, so the reported ratio tracks the true one
    all the way down to identical spaces (where it is 1 by the floor rule).
    """
    rng = np.random.default_rng(seed)
    base = rng.normal(size=(n, 2))
    delta = rng.normal(size=(n, 2))
    X = _cloud_space(base, "x")
    cfg = UgwConfig(eps=eps, rho1=rho, rho2=rho, tol_pot=1e-11)
    spec = ConeMetricSpec("gh", rho=rho)
    rows = []
    ok = True
    for t in ts:
        Y = _cloud_space(base + t * delta, "y")
        try:
            deb = debiased_ugw(X, Y, cfg)
            res = solve_cgw(X, Y, spec, K=grid_k, L=grid_l, restarts=restarts, seed=seed)
            num, denom = res.cost, deb.value
            if abs(num) < RATIO_FLOOR and abs(denom) < RATIO_FLOOR:
                ratio = 1.0
            else:
                ratio = num / max(denom, RATIO_FLOOR)
            rows.append(
                {
                    "t": t,
                    "ratio": ratio,
                    "ugw_debiased": denom,
                    "ugw_cross": deb.cross,
                    "cgw_cost": res.cost,
                    "converged": deb.converged,
                    "error": "",
                }
            )
            ok = ok and deb.converged
        except Exception as exc:  # recorded, driver keeps going
            rows.append(
                {"t": t, "ratio": "", "ugw_debiased": "", "ugw_cross": "", "cgw_cost": "",
                 "converged": False, "error": str(exc)}
            )
            ok = False
    config = {"n": n, "ts": list(ts), "rho": rho, "eps": eps, "grid_k": grid_k,
              "grid_l": grid_l, "restarts": restarts}
    files = [
        write_table(rows,
                    ["t", "ratio", "ugw_debiased", "ugw_cross", "cgw_cost", "converged", "error"],
                    os.path.join(out_dir, "perturb"), fmt)
    ]
    write_manifest(out_dir, "perturb", seed, config, files)
    return {"rows": rows, "converged": ok, "files": files}


def run_ratio_hist(
    out_dir=".",
    seed=0,
    ns=(2, 3, 5),
    trials=50,
    rho=0.1,
    eps=1e-3,
    grid_k=10,
    grid_l=10,
    restarts=20,
    fmt="csv",
):
    """Histogram of grid-to-quadratic cost ratios over random pairs."""
    rows = []
    ratios = {n: [] for n in ns}
    ok = True
    for n in ns:
        for trial in range(trials):
            rng = np.random.default_rng([seed, n, trial])
            X, Y = _random_pair(rng, n)
            try:
                ratio, sol, _ = cgw_ugw_ratio(
                    X, Y, rho, eps, K=grid_k, L=grid_l, restarts=restarts,
                    seed=seed * 1000 + trial,
                )
                ratios[n].append(ratio)
                rows.append({"n": n, "trial": trial, "ratio": ratio,
                             "converged": sol.converged, "error": ""})
                ok = ok and sol.converged
            except Exception as exc:
                rows.append({"n": n, "trial": trial, "ratio": "", "converged": False,
                             "error": str(exc)})
                ok = False
    bins = np.arange(0.95, 1.31, 0.01)
    hist_rows = []
    for n in ns:
        counts, edges = np.histogram(ratios[n], bins=bins)
        overflow = sum(1 for r in ratios[n] if r >= bins[-1])
        underflow = sum(1 for r in ratios[n] if r < bins[0])
        for lo, hi, cnt in zip(edges[:-1], edges[1:], counts):
            hist_rows.append({"n": n, "bin_lo": round(lo, 4), "bin_hi": round(hi, 4),
                              "count": int(cnt)})
        hist_rows.append({"n": n, "bin_lo": round(bins[-1], 4), "bin_hi": "inf",
                          "count": overflow})
        hist_rows.append({"n": n, "bin_lo": "-inf", "bin_hi": round(bins[0], 4),
                          "count": underflow})
    config = {"ns": list(ns), "trials": trials, "rho": rho, "eps": eps,
              "grid_k": grid_k, "grid_l": grid_l, "restarts": restarts}
    files = [
        write_table(rows, ["n", "trial", "ratio", "converged", "error"],
                    os.path.join(out_dir, "ratio_hist_trials"), fmt),
        write_table(hist_rows, ["n", "bin_lo", "bin_hi", "count"],
                    os.path.join(out_dir, "ratio_hist"), fmt),
    ]
    write_manifest(out_dir, "ratio_hist", seed, config, files)
    return {"rows": rows, "hist": hist_rows, "ratios": ratios, "converged": ok, "files": files}


def run_moons(
    out_dir=".",
    seed=0,
    seeds=None,
    n=30,
    n_outliers=3,
    rhos=(10.0, 1.0, 0.1, 0.01),
    eps=1e-2,
    tol_pot=1e-11,
    max_outer=3000,
    fmt="csv",
):
    """Mass assigned to far-away outlier points as the marginal penalty drops.

    X carries the outliers, Y is a clean draw; the row marginal of the plan
    restricted to outlier atoms is reported per rho.
    """
    if seeds is None:
        seeds = [seed]
    rows = []
    ok = True
    for sd in seeds:
        cloud = geometry.gen_shape("two_moons_outliers", n, sd, n_outliers=n_outliers)
        clean = geometry.gen_shape("two_moons_outliers", n, sd + 10_000, n_outliers=0)
        X = geometry.space_from_points(cloud, label="moons+outliers")
        Y = geometry.space_from_points(clean, label="moons")
        outlier_idx = np.nonzero(cloud.tags[X.kept] == -1)[0]
        for rho in rhos:
            try:
                cfg = UgwConfig(eps=eps, rho1=rho, rho2=rho, tol_pot=tol_pot,
                                max_outer=max_outer)
                sol = solve_ugw(X, Y, cfg)
                p1 = sol.pi.row_marginal
                mass = float(p1[outlier_idx].sum())
                share = sol.pi.mass / X.n
                rows.append(
                    {
                        "seed": sd,
                        "rho": rho,
                        "outlier_mass": mass,
                        "per_point_share": share,
                        "mass_over_share": mass / share if share > 0 else math.inf,
                        "plan_mass": sol.pi.mass,
                        "converged": sol.converged,
                        "error": "",
                    }
                )
                ok = ok and sol.converged
            except Exception as exc:
                rows.append({"seed": sd, "rho": rho, "outlier_mass": "", "per_point_share": "",
                             "mass_over_share": "", "plan_mass": "", "converged": False,
                             "error": str(exc)})
                ok = False
    config = {"seeds": list(seeds), "n": n, "n_outliers": n_outliers,
              "rhos": list(rhos), "eps": eps, "tol_pot": tol_pot, "max_outer": max_outer}
    files = [
        write_table(
            rows,
            ["seed", "rho", "outlier_mass", "per_point_share", "mass_over_share",
             "plan_mass", "converged", "error"],
            os.path.join(out_dir, "moons"),
            fmt,
        )
    ]
    write_manifest(out_dir, "moons", seed, config, files)
    return {"rows": rows, "converged": ok, "files": files}


def run_graph_match(
    out_dir=".",
    seed=0,
    n=20,
    n_outliers=2,
    eps_grid=(1e-2, 1e-1),
    rho_grid=(0.1, 1.0, math.inf),
    tol_pot=1e-11,
    max_outer=3000,
    fmt="csv",
):
    """Plans between a community graph with outliers and a clean one, across
    the regularization grid (rho = inf runs the balanced mode)."""
    g = geometry.gen_shape("community_graph", n, seed, n_outliers=n_outliers)
    g_clean = geometry.gen_shape("community_graph", n, seed + 10_000, n_outliers=0)
    X = geometry.space_from_graph(g, label="graph+outliers")
    Y = geometry.space_from_graph(g_clean, label="graph")
    rows = []
    ok = True
    files = []
    for eps in eps_grid:
        for rho in rho_grid:
            tag = f"eps{eps:g}_rho{'inf' if math.isinf(rho) else format(rho, 'g')}"
            try:
                cfg = UgwConfig(eps=eps, rho1=rho, rho2=rho, tol_pot=tol_pot,
                                max_outer=max_outer)
                sol = solve_ugw(X, Y, cfg)
                plan_file = os.path.join(out_dir, f"graph_match_plan_{tag}.csv")
                save_plan(sol.pi, plan_file)
                files.append(plan_file)
                rows.append(
                    {
                        "eps": eps,
                        "rho": "inf" if math.isinf(rho) else rho,
                        "cost_biconvex": sol.cost_biconvex,
                        "plan_mass": sol.pi.mass,
                        "iterations": sol.outer_iterations,
                        "converged": sol.converged,
                        "plan_file": os.path.basename(plan_file),
                        "error": "",
                    }
                )
                ok = ok and sol.converged
            except Exception as exc:
                rows.append({"eps": eps, "rho": "inf" if math.isinf(rho) else rho,
                             "cost_biconvex": "", "plan_mass": "", "iterations": "",
                             "converged": False, "plan_file": "", "error": str(exc)})
                ok = False
    config = {"n": n, "n_outliers": n_outliers, "eps_grid": list(eps_grid),
              "rho_grid": ["inf" if math.isinf(r) else r for r in rho_grid],
              "tol_pot": tol_pot, "max_outer": max_outer}
    files.insert(
        0,
        write_table(
            rows,
            ["eps", "rho", "cost_biconvex", "plan_mass", "iterations", "converged",
             "plan_file", "error"],
            os.path.join(out_dir, "graph_match"),
            fmt,
        ),
    )
    write_manifest(out_dir, "graph_match", seed, config, files)
    return {"rows": rows, "converged": ok, "files": files}


def run_scale_bias(
    out_dir=".",
    seed=0,
    n=5,
    rho=0.1,
    kappas=(0.25, 0.5, 1.0, 2.0, 4.0),
    b_target=0.55,
    fmt="csv",
):
    """Optimal-scale comparison table on kappa-rescaled probability measures.

    The instance's distance matrices are normalized so the product plan's
    distortion hits b_target, which puts the theta crossover near kappa = 1
    for the default rho.
    """
    rng = np.random.default_rng(seed)
    X, Y = _random_pair(rng, n)
    pi = np.outer(X.weights, Y.weights)
    b0 = distortion_cost(X.dist, Y.dist, pi)
    if b0 > 0 and b_target:
        # the distortion functional is quadratic in the squared distances,
        # every term picks up c^2 when both matrices are scaled by c
        c = (b_target / b0) ** 0.5
        X = MmSpace(c * X.dist, X.weights, "x")
        Y = MmSpace(c * Y.dist, Y.weights, "y")
    reports = scaling_bias_report(X, Y, pi, rho, kappas)
    rows = [asdict(r) for r in reports]
    for row in rows:
        row["theta_gap"] = row["theta_quadratic"] - row["theta_linear"]
    config = {"n": n, "rho": rho, "kappas": list(kappas), "b_target": b_target}
    files = [
        write_table(
            rows,
            ["kappa", "theta_quadratic", "theta_linear", "foc_residual_quadratic",
             "foc_residual_linear", "theta_gap"],
            os.path.join(out_dir, "scale_bias"),
            fmt,
        )
    ]
    write_manifest(out_dir, "scale_bias", seed, config, files)
    return {"rows": rows, "reports": reports, "converged": True, "files": files}


def run_pu(
    out_dir=".",
    seed=0,
    folds=3,
    n_pos=20,
    n_unlabeled_pos=30,
    n_unlabeled_neg=15,
    eps=2.0**-9,
    rho_grid=tuple(2.0**-k for k in range(5, 11)),
    tol_pot=1e-11,
    max_outer=3000,
    fmt="csv",
):
    """Positive-unlabeled pipeline on synthetic two-cluster folds.

    Positives and the positive part of the unlabeled pool come from one
    Gaussian cluster, negatives from a shifted one. The plan's column
    marginal ranks the unlabeled points; accuracy is measured against the
    generating labels across the rho validation grid.
    """
    rows = []
    ok = True
    r = n_unlabeled_pos / (n_unlabeled_pos + n_unlabeled_neg)
    for fold in range(folds):
        rng = np.random.default_rng([seed, fold])
        pos = rng.normal(0.0, 0.3, size=(n_pos, 2))
        upos = rng.normal(0.0, 0.3, size=(n_unlabeled_pos, 2))
        uneg = rng.normal(2.5, 0.3, size=(n_unlabeled_neg, 2))
        unlabeled = np.vstack([upos, uneg])
        truth = np.concatenate([np.ones(n_unlabeled_pos, int), -np.ones(n_unlabeled_neg, int)])
        X = _cloud_space(pos, "positives")
        Y = _cloud_space(unlabeled, "unlabeled")
        for rho in rho_grid:
            try:
                cfg = UgwConfig(eps=eps, rho1=rho, rho2=rho, tol_pot=tol_pot,
                                max_outer=max_outer)
                sol = solve_ugw(X, Y, cfg)
                labels = pu_predict(sol.pi, r)
                acc = float(np.mean(labels == truth))
                rows.append({"fold": fold, "rho": rho, "accuracy": acc,
                             "converged": sol.converged, "error": ""})
                ok = ok and sol.converged
            except Exception as exc:
                rows.append({"fold": fold, "rho": rho, "accuracy": "", "converged": False,
                             "error": str(exc)})
                ok = False
    config = {"folds": folds, "n_pos": n_pos, "n_unlabeled_pos": n_unlabeled_pos,
              "n_unlabeled_neg": n_unlabeled_neg, "eps": eps, "rho_grid": list(rho_grid),
              "tol_pot": tol_pot, "max_outer": max_outer, "positive_ratio": r}
    files = [
        write_table(rows, ["fold", "rho", "accuracy", "converged", "error"],
                    os.path.join(out_dir, "pu"), fmt)
    ]
    write_manifest(out_dir, "pu", seed, config, files)
    return {"rows": rows, "converged": ok, "files": files}
