"""Command-line interface: spectrum / hiatus / existence / regcheck / eigfun.

Exit codes: 0 success, 1 configuration or runtime error, 2 no bound
states (a valid physical answer), 3 asymptotic-fit failure.  JSON and CSV
outputs embed the config hash, tool version, and tolerance set; all
floating-point values are printed with 17 significant digits.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import __version__, hiatus as hi, regcheck as rc
from .bs_operator import AssemblyError
from .config import ConfigError, load_config
from .geometry import GeometryError, HiatusCurve, ParallelOffset, Recess
from .kernels import KernelDomainError
from .quadrature import MeshError
from .spectral import SpectralError, curvature_norm_bound, \
    find_bound_states, generalized_no_bind_length, psi_eval, thresholds

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_NO_BOUND_STATES = 2
EXIT_FIT_FAILURE = 3


# ---------------------------------------------------------------------------
# output helpers (17 significant digits everywhere)

def _g17(x):
    return "%.17g" % float(x)


def _mark_floats(obj):
    """Recursively wrap floats in sentinel strings for exact formatting."""
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (float, np.floating)):
        if not np.isfinite(obj):
            return None
        return "\x00" + _g17(obj) + "\x00"
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, dict):
        return {str(k): _mark_floats(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple, np.ndarray)):
        return [_mark_floats(v) for v in np.asarray(obj).tolist()
                if True] if isinstance(obj, np.ndarray) \
            else [_mark_floats(v) for v in obj]
    return obj


def dump_json(obj, path):
    text = json.dumps(_mark_floats(obj), indent=2, sort_keys=True)
    text = text.replace('"\\u0000', "").replace('\\u0000"', "")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(text + "\n")


def write_csv(path, header, rows):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(
                _g17(v) if isinstance(v, (float, np.floating)) else str(v)
                for v in row) + "\n")


def _provenance(cfg):
    return {
        "tool": "leakywire",
        "version": __version__,
        "config_sha256": cfg.config_sha256,
        "config": cfg.echo(),
    }


# ---------------------------------------------------------------------------
# subcommands

def cmd_spectrum(cfg, out_dir, verbose=False):
    curve = cfg.build_curve()
    res = find_bound_states(
        curve, cfg.alpha, n_panels=cfg.mesh["n_panels"],
        order=cfg.mesh["order"], basis=cfg.mesh["basis"],
        trig_modes=cfg.mesh["trig_modes"], bracket=cfg.solver["bracket"],
        branch_count=cfg.solver["branch_count"],
        rel_tol=cfg.solver["rel_tol"],
        cluster_tol=cfg.solver["cluster_tol"])
    payload = {
        "provenance": _provenance(cfg),
        "curve": res.curve,
        "alpha": res.alpha,
        "bracket": list(res.bracket),
        "metadata": res.metadata,
        "states": [
            {"lambda": st.lam, "kappa": st.kappa,
             "multiplicity": st.multiplicity,
             "branches": list(st.branches), "residual": st.residual}
            for st in res.states
        ],
    }
    dump_json(payload, out_dir + "/spectrum.json")
    if verbose:
        print(f"{len(res.states)} bound state(s); "
              f"wrote {out_dir}/spectrum.json", file=sys.stderr)
    return EXIT_OK if res.states else EXIT_NO_BOUND_STATES


def cmd_existence(cfg, out_dir, verbose=False):
    curve = cfg.build_curve()
    th = thresholds(cfg.alpha)
    D = curvature_norm_bound(curve, n_panels=min(cfg.mesh["n_panels"], 128),
                             order=cfg.mesh["order"])
    L = curve.length
    no_bind_len = generalized_no_bind_length(cfg.alpha, D)
    payload = {
        "provenance": _provenance(cfg),
        "curve": curve.label,
        "length": L,
        "alpha": cfg.alpha,
        "thresholds": {
            "no_bind_below_length": th.L_no_bind,
            "exists_above_length": th.L_exists,
            "threshold_ratio": th.ratio,
            "xi0": th.xi0,
            "psi1": th.psi1,
        },
        "curvature_norm_bound": D,
        "generalized_no_bind_length": no_bind_len,
        "verdict": {
            "existence_guaranteed": bool(L > th.L_exists),
            "no_bind_guaranteed": bool(L < no_bind_len),
        },
    }
    dump_json(payload, out_dir + "/existence.json")
    if verbose:
        print(f"thresholds for alpha={cfg.alpha}: "
              f"({th.L_no_bind:.6g}, {th.L_exists:.6g})", file=sys.stderr)
    return EXIT_OK


def _resolve_eps_grid(cfg, L):
    grid = cfg.hiatus["eps_grid"]
    if grid is None:
        grid = list(hi.default_eps_grid(
            L, n=cfg.hiatus["eps_count"], lo=cfg.hiatus["eps_min_frac"],
            hi=cfg.hiatus["eps_max_frac"]))
    zeros = [e for e in grid if e == 0.0]
    return [e for e in grid if e > 0.0], bool(zeros)


def cmd_hiatus(cfg, out_dir, verbose=False):
    curve = cfg.build_curve()
    s0 = cfg.hiatus["s0"]
    if s0 is None:
        raise ConfigError("hiatus.s0: required for the hiatus command")
    pos_grid, include_zero = _resolve_eps_grid(cfg, curve.length)
    if pos_grid:
        # precondition: the widest gap must stay inside the curve
        HiatusCurve(base=curve, s0=s0, epsilon=max(pos_grid))
    warnings = []
    rows = []
    fits_payload = []
    res = None
    if pos_grid:
        res = hi.sweep(curve, cfg.alpha, s0, eps_grid=pos_grid,
                       n_panels=cfg.mesh["n_panels"],
                       order=cfg.mesh["order"],
                       state_index=cfg.hiatus["state_index"],
                       bracket=cfg.solver["bracket"],
                       rel_tol=cfg.solver["rel_tol"])
        for j in res.broken:
            warnings.append(f"branch {j} lost tracking at some eps")
        m = res.lambdas.shape[1]
        if include_zero:
            for j in range(m):
                rows.append((0.0, j, res.lambda_L, 0.0, 1.0))
        for ie, eps in enumerate(res.eps_grid):
            for j in range(m):
                lam = res.lambdas[ie, j]
                if np.isfinite(lam):
                    rows.append((eps, j, lam, lam - res.lambda_L,
                                 res.overlaps[ie, j]))
        try:
            fits = hi.fit_sweep(res)
        except hi.HiatusError as exc:
            dump_json({"provenance": _provenance(cfg),
                       "error": str(exc), "warnings": warnings},
                      out_dir + "/hiatus_fit.json")
            write_csv(out_dir + "/hiatus_sweep.csv",
                      ("eps", "member", "lambda", "shift", "overlap"), rows)
            print(f"hiatus: fit failed: {exc}", file=sys.stderr)
            return EXIT_FIT_FAILURE
        for j, f in enumerate(fits):
            fits_payload.append({
                "member": j, "c1": f.c1, "c2": f.c2,
                "residual": f.residual,
                "predicted_slope": f.predicted_slope,
                "fitted_slope": f.fitted_slope,
                "relative_error": f.relative_error,
            })
    else:
        # eps = 0 only: reduces to the unperturbed spectrum
        sres = find_bound_states(
            curve, cfg.alpha, n_panels=cfg.mesh["n_panels"],
            order=cfg.mesh["order"], bracket=cfg.solver["bracket"],
            rel_tol=cfg.solver["rel_tol"], s0=s0)
        st = sres.states[cfg.hiatus["state_index"]]
        for j in range(st.multiplicity):
            rows.append((0.0, j, st.lam, 0.0, 1.0))
    write_csv(out_dir + "/hiatus_sweep.csv",
              ("eps", "member", "lambda", "shift", "overlap"), rows)
    payload = {
        "provenance": _provenance(cfg),
        "s0": s0,
        "warnings": warnings,
        "fits": fits_payload,
    }
    if res is not None:
        p = res.prediction
        payload.update({
            "lambda_L": res.lambda_L,
            "kappa_L": p.kappa_L,
            "phi_at_s0": list(p.phi_values),
            "predicted_slopes": list(p.slopes),
            "eps_grid": list(res.eps_grid),
        })
    dump_json(payload, out_dir + "/hiatus_fit.json")
    if verbose:
        print(f"wrote {out_dir}/hiatus_sweep.csv and hiatus_fit.json",
              file=sys.stderr)
    return EXIT_OK


def cmd_regcheck(cfg, out_dir, workers=1, verbose=False):
    curve = cfg.build_curve()
    L = curve.length
    kappa = cfg.regcheck["kappa"]
    d_grid = cfg.regcheck["d_grid"]
    if d_grid is None:
        d0 = cfg.regcheck["d_max"] or 5e-3 * L
        d_grid = list(rc.default_d_grid(L, n=cfg.regcheck["d_count"],
                                        d0=d0))
    points = [frac * L for frac in cfg.regcheck["points"]]
    families = [ParallelOffset(), Recess()]
    funcs = rc.dictionary(L)
    tasks = [(fam, f, s) for fam in families for f in funcs for s in points]

    def one(task):
        fam, f, s = task
        direct = rc.q_apply_direct(curve, kappa, f, s)
        run = rc.q_apply_via_family(fam, curve, kappa, f, s, d_grid=d_grid)
        ct, ct_pred = rc.counterterm_coefficient(
            fam, curve, kappa, f, s, d_grid=[d * 0.1 for d in d_grid])
        return direct, run, ct, ct_pred

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(one, tasks))
    else:
        results = [one(t) for t in tasks]

    csv_rows, summary = [], []
    for (fam, f, s), (direct, run, ct, ct_pred) in zip(tasks, results):
        name = type(fam).__name__
        for d, v in zip(run.d_grid, run.values):
            csv_rows.append((name, f.name, s, d, v, run.extrapolated,
                             run.error_estimate))
        summary.append({
            "family": name, "f": f.name, "s": s,
            "direct": direct,
            "extrapolated": run.extrapolated,
            "error_estimate": run.error_estimate,
            "observed_order": run.observed_order,
            "converged": run.converged,
            "agrees_with_direct":
                bool(abs(direct - run.extrapolated) <= run.error_estimate),
            "counterterm_coefficient": ct,
            "counterterm_predicted": ct_pred,
        })
    write_csv(out_dir + "/regcheck.csv",
              ("family", "f", "s", "d", "value", "extrapolated",
               "error_estimate"), csv_rows)
    dump_json({"provenance": _provenance(cfg), "kappa": kappa,
               "d_grid": list(d_grid), "rows": summary},
              out_dir + "/regcheck.json")
    n_bad = sum(not row["agrees_with_direct"] for row in summary)
    if verbose or n_bad:
        print(f"regcheck: {len(summary)} rows, {n_bad} disagree",
              file=sys.stderr)
    return EXIT_OK


def cmd_eigfun(cfg, out_dir, verbose=False):
    curve = cfg.build_curve()
    res = find_bound_states(
        curve, cfg.alpha, n_panels=cfg.mesh["n_panels"],
        order=cfg.mesh["order"], bracket=cfg.solver["bracket"],
        branch_count=cfg.solver["branch_count"],
        rel_tol=cfg.solver["rel_tol"],
        cluster_tol=cfg.solver["cluster_tol"])
    if not res.states:
        dump_json({"provenance": _provenance(cfg), "states": []},
                  out_dir + "/eigfun.json")
        return EXIT_NO_BOUND_STATES
    idx = cfg.eigfun["state_index"]
    if idx >= len(res.states):
        raise ConfigError(
            f"eigfun.state_index: only {len(res.states)} states found")
    st = res.states[idx]
    member = cfg.eigfun["member"]
    if member >= st.multiplicity:
        raise ConfigError(
            f"eigfun.member: state has multiplicity {st.multiplicity}")
    L = curve.length
    n = cfg.eigfun["grid_points"]
    half = cfg.eigfun["half_width"] or 0.25 * L
    sample = curve.point(np.linspace(0.0, L, 512))
    center = np.asarray(cfg.eigfun["center"], float) \
        if cfg.eigfun["center"] is not None else sample.mean(axis=0)
    axis = np.linspace(-half, half, n)
    X, Y, Z = np.meshgrid(axis, axis, axis, indexing="ij")
    pts = center + np.column_stack([X.ravel(), Y.ravel(), Z.ravel()])
    dmin = np.min(np.linalg.norm(pts[:, None, :] - sample[None, :, :],
                                 axis=-1), axis=1)
    keep = dmin >= cfg.eigfun["min_distance"]
    vals = psi_eval(st, pts[keep], member=member,
                    min_distance=cfg.eigfun["min_distance"])
    rows = [(p[0], p[1], p[2], v) for p, v in zip(pts[keep], vals)]
    write_csv(out_dir + "/eigfun.csv", ("x", "y", "z", "psi"), rows)
    if verbose:
        print(f"evaluated psi at {len(rows)} points "
              f"({np.sum(~keep)} excluded near the curve)", file=sys.stderr)
    return EXIT_OK


# ---------------------------------------------------------------------------
# entry point

def build_parser():
    ap = argparse.ArgumentParser(
        prog="leakywire",
        description="Bound states of a 3D Schrodinger operator with an "
                    "attractive delta interaction on a curve.")
    ap.add_argument("command",
                    choices=("spectrum", "hiatus", "existence", "regcheck",
                             "eigfun"))
    ap.add_argument("--config", required=True, help="TOML config path")
    ap.add_argument("--out", default=".", help="output directory")
    ap.add_argument("--workers", type=int, default=None,
                    help="override [workers] from the config")
    ap.add_argument("--verbose", action="store_true")
    return ap


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
        os.makedirs(args.out, exist_ok=True)
        workers = args.workers if args.workers is not None else cfg.workers
        if workers < 1:
            raise ConfigError("--workers: must be >= 1")
        if args.command == "spectrum":
            return cmd_spectrum(cfg, args.out, verbose=args.verbose)
        if args.command == "existence":
            return cmd_existence(cfg, args.out, verbose=args.verbose)
        if args.command == "hiatus":
            return cmd_hiatus(cfg, args.out, verbose=args.verbose)
        if args.command == "regcheck":
            return cmd_regcheck(cfg, args.out, workers=workers,
                                verbose=args.verbose)
        return cmd_eigfun(cfg, args.out, verbose=args.verbose)
    except (ConfigError, GeometryError, SpectralError, hi.HiatusError,
            rc.RegularizationError, AssemblyError, MeshError,
            KernelDomainError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
