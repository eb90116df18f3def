"""Command-line front end.

    python3 -m warpflow.cli --config run.ini [--out DIR] [--seed N] [--mode NAME]
    python3 -m warpflow.cli --mode soliton-shoot --sweep [--rmax R]
    python3 -m warpflow.cli --mode report --out RUN_DIR

Exit codes: 0 pass, 2 config error, 3 numerical failure, 4 assertion failure.
"""

import argparse
import csv
import json
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import analysis, columns, fd_oracle, flow_s1, flow_surface, soliton
from .config import MODES, RunConfig, parse_config
from .errors import InvalidConfig, MissingArtifacts, WarpflowError
from .state import BaseKind

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_ASSERT = 0, 2, 3, 4


def threads():
    try:
        return max(1, int(os.environ.get("WARPFLOW_THREADS", "1")))
    except ValueError:
        return 1


def _clean(obj):
    """JSON-safe copy: numpy scalars/arrays to Python, non-finite floats to strings."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return x if math.isfinite(x) else repr(x)
    if hasattr(obj, "value") and isinstance(getattr(obj, "value"), str):
        return obj.value
    return obj


def write_json(path, obj):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(_clean(obj), fh, indent=2, sort_keys=True)
        fh.write("\n")


def write_csv(path, header, rows):
    bad = columns.undocumented(Path(path).name, header)
    if bad:
        raise AssertionError(f"undocumented CSV columns {bad}")
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for row in rows:
            w.writerow([repr(float(x)) if isinstance(x, (float, np.floating)) else x for x in row])


def _per_fiber(name, n):
    return [f"{name}_{a + 1}" for a in range(n)]


def monitor_rows(records):
    A = len(records[0].vmin)
    scalar = ["Q", "P", "Qcal", "Pcal", "F_max", "B_const", "L_min_on_Omega", "Omega_extent",
              "rm_max", "sigma_fl_max", "v_neck", "kappa0", "kappa1", "neck_halfwidth_cells",
              "typeI_ratio", "vmin_sq_over_Tt", "kappa0_rescaled", "kappa1_rescaled", "Sigma_fl_rescaled"]
    vec = ["vmin", "vmax", "grad_sq_max", "chi_max", "Z_max"]
    header = ["t"] + [c for v in vec for c in _per_fiber(v, A)] + scalar
    rows = []
    for r in records:
        row = [r.t]
        for v in vec:
            row += list(getattr(r, v))
        row += [getattr(r, s) for s in scalar]
        rows.append(row)
    return header, rows


def _checks_failed(summary):
    return [k for k, c in summary.get("checks", {}).items() if not c["pass"]]


def _data_key(cfg: RunConfig):
    fibers = [f.__dict__ for f in cfg.fibers]
    return json.dumps(_clean({"mode": cfg.mode, "fibers": fibers, "base": cfg.base_metric,
                              "amp": cfg.base_amp}), sort_keys=True)


def run_s1_mode(cfg: RunConfig, out: Path):
    traj = flow_s1.run_s1(cfg.s1_config())
    summary = analysis.analyze_s1(traj)
    summary["mode"] = cfg.mode
    summary["data_key"] = _data_key(cfg)
    if traj.records:
        header, rows = monitor_rows(traj.records)
        write_csv(out / "monitors.csv", header, rows)
    snaps = out / "snapshots"
    snaps.mkdir(exist_ok=True)
    for i, s in enumerate(traj.snapshots):
        flow_s1.write_snapshot(snaps / f"snap_{i:05d}.txt", s)
    return summary


def run_surface_mode(cfg: RunConfig, out: Path):
    traj = flow_surface.run_surface(cfg.surface_config())
    summary = analysis.analyze_surface(traj)
    summary["mode"] = cfg.mode
    summary["data_key"] = _data_key(cfg)
    arr = traj.series.as_arrays()
    A = arr["vmin"].shape[1]
    header = ["t", "area", "area_rate", "gauss_bonnet", "f_upper_max", "f_lower_min",
              "R_check_min"] + _per_fiber("vmin", A) + ["C0_needed", "C1_needed"]
    rows = [[arr["t"][i], arr["area"][i], arr["area_rate"][i], arr["gauss_bonnet"][i],
             arr["f_upper_max"][i], arr["f_lower_min"][i], arr["R_check_min"][i],
             *arr["vmin"][i], arr["C0_needed"][i], arr["C1_needed"][i]] for i in range(arr["t"].size)]
    write_csv(out / "series.csv", header, rows)
    snaps = out / "snapshots"
    snaps.mkdir(exist_ok=True)
    for i, s in enumerate(traj.snapshots):
        flow_surface.write_snapshot(snaps / f"snap_{i:05d}.txt", s)
    return summary


def _sweep_one(args):
    v0, r_max, f1 = args
    return soliton.classify_sweep([v0], r_max, f1)["rows"][0]


def soliton_mode(cfg: RunConfig, out: Path):
    if not cfg.sweep and cfg.v0 is None:
        raise InvalidConfig("soliton-shoot needs --v0 or --sweep")
    summary = {"mode": cfg.mode, "checks": {}}
    if cfg.sweep:
        vals = list(cfg.sweep)
        n = min(threads(), len(vals))
        if n > 1:
            with ProcessPoolExecutor(n) as ex:
                rows = list(ex.map(_sweep_one, [(v, cfg.r_max, cfg.f1) for v in vals]))
        else:
            rows = soliton.classify_sweep(vals, cfg.r_max, cfg.f1)["rows"]
        unexpected = [r["v0"] for r in rows if r["classification"] == "Cylinder"
                      and abs(r["v0"] - soliton.SQRT2) > soliton.CYLINDER_WINDOW]
        cylinders = [r["v0"] for r in rows if r["classification"] == "Cylinder"]
        summary["sweep"] = {"r_max": cfg.r_max, "f1": cfg.f1, "rows": rows,
                            "cylinders": cylinders, "unexpected_cylinders": unexpected,
                            "note": "ODE sweep is numerical evidence, not a proof of rigidity"}
        write_csv(out / "sweep.csv", list(columns.SCHEMA["sweep.csv"]),
                  [[r[c] for c in columns.SCHEMA["sweep.csv"]] for r in rows])
        summary["checks"]["sweep_no_cylinders"] = analysis.check(
            "8", not unexpected, unexpected_cylinders=unexpected)
        cyl = soliton.shoot(soliton.SQRT2, 20.0, f1=0.5)
        worst = max(cyl.residuals.values())
        summary["cylinder"] = cyl.as_dict()
        summary["checks"]["cylinder_residuals"] = analysis.check(
            "8", cyl.classification is soliton.Classification.CYLINDER and worst <= 1e-8
            and cyl.normalization_residual <= 1e-8, max_residual=worst,
            normalization_residual=cyl.normalization_residual)
    if cfg.v0 is not None:
        shot = soliton.shoot(cfg.v0, cfg.r_max, f1=cfg.f1)
        summary["shot"] = shot.as_dict()
        soliton.write_profiles_csv(shot, out / "profiles.csv")
    return summary


def oracle_mode(cfg: RunConfig, out: Path):
    base = BaseKind.CIRCLE if cfg.oracle_base == "circle" else BaseKind.TORUS
    rep = fd_oracle.oracle_sweep(cfg.oracle_n_states, cfg.seed, cfg.oracle_M, cfg.oracle_h,
                                 cfg.oracle_tol, base)
    write_json(out / "oracle.json", rep)
    return {"mode": cfg.mode, "oracle": rep,
            "checks": {"oracle_equivalence": analysis.check("1", rep["pass"],
                                                            max_rel_error=rep["max_rel_error"])}}


def report(run_dir):
    """Aggregate every summary.json below ``run_dir`` into a verdict document."""
    run_dir = Path(run_dir)
    paths = sorted(p for p in run_dir.rglob("summary.json")) if run_dir.is_dir() else []
    if not paths:
        raise MissingArtifacts(f"no summary.json under {run_dir}")
    entries = []
    for p in paths:
        with open(p, encoding="utf-8") as fh:
            s = json.load(fh)
        for name, c in s.get("checks", {}).items():
            entries.append({"run": str(p.parent.relative_to(run_dir)), "check": name, **c})
    # refinement pairs: same data at two resolutions
    groups = {}
    for p in paths:
        with open(p, encoding="utf-8") as fh:
            s = json.load(fh)
        if "data_key" in s and "M" in s:
            groups.setdefault(s["data_key"], []).append((s["M"], s, str(p.parent.relative_to(run_dir))))
    for runs in groups.values():
        if len(runs) < 2:
            continue
        runs.sort(key=lambda x: x[0])
        (Ma, a, ra), (Mb, b, rb) = runs[-2], runs[-1]
        if "neck_floor" in a and "neck_floor" in b:
            c = analysis.floor_stability(a["neck_floor"], b["neck_floor"])
            entries.append({"run": f"{ra} vs {rb}", "check": "neck_floor_stability", **c})
        if a.get("fitted_constants") and b.get("fitted_constants"):
            ok = all(analysis.constants_stable(a["fitted_constants"][k], b["fitted_constants"][k])
                     for k in a["fitted_constants"])
            entries.append({"run": f"{ra} vs {rb}", "check": "fitted_constants_stability",
                            **analysis.check("7a", ok, coarse=a["fitted_constants"],
                                             fine=b["fitted_constants"])})
    criteria = {}
    for e in entries:
        c = criteria.setdefault(e["criterion"], {"pass": True, "checks": []})
        c["pass"] = c["pass"] and e["pass"]
        c["checks"].append(e)
    verdict = "PASS" if all(c["pass"] for c in criteria.values()) else "FAIL"
    doc = {
        "verdict": verdict,
        "criteria": {k: {"verdict": "PASS" if v["pass"] else "FAIL", "checks": v["checks"]}
                     for k, v in sorted(criteria.items())},
        "failed": sorted(k for k, v in criteria.items() if not v["pass"]),
        "not_evaluated": [k for k in analysis.ALL_CRITERIA if k not in criteria],
    }
    return doc


def run_command(cfg: RunConfig, out=None):
    """Run one configured mode; returns (exit status, summary)."""
    out = Path(out or cfg.out)
    if cfg.mode == "report":
        doc = report(cfg.run_dir or out)
        target = Path(cfg.run_dir or out)
        write_json(target / "verdict.json", doc)
        return (EXIT_OK if doc["verdict"] == "PASS" else EXIT_ASSERT), doc
    out.mkdir(parents=True, exist_ok=True)
    handler = {
        "run-s1": run_s1_mode,
        "run-surface": run_surface_mode,
        "soliton-shoot": soliton_mode,
        "oracle-check": oracle_mode,
    }[cfg.mode]
    summary = handler(cfg, out)
    summary["failed_checks"] = _checks_failed(summary)
    write_json(out / "summary.json", summary)
    return (EXIT_ASSERT if summary["failed_checks"] else EXIT_OK), summary


def build_parser():
    p = argparse.ArgumentParser(prog="warpflow", description=__doc__.splitlines()[0])
    p.add_argument("--config", help="INI run configuration")
    p.add_argument("--out", help="output directory (run directory for --mode report)")
    p.add_argument("--seed", type=int, help="seed for random oracle states")
    p.add_argument("--mode", choices=MODES)
    p.add_argument("--v0", type=float, help="soliton-shoot: axis value v(0)")
    p.add_argument("--sweep", action="store_true",
                   help="soliton-shoot: sweep v0 over 0.6, 0.8, ..., 3.0")
    p.add_argument("--rmax", type=float, help="soliton-shoot: integration radius (≤ 100)")
    return p


def config_from_args(args):
    if args.config:
        cfg = parse_config(args.config)
        if args.mode:
            cfg.mode = args.mode
    elif args.mode:
        cfg = RunConfig(mode=args.mode)
    else:
        raise InvalidConfig("either --config or --mode is required")
    if args.out:
        cfg.out = args.out
        if cfg.mode == "report":
            cfg.run_dir = args.out
    if args.seed is not None:
        cfg.seed = args.seed
    if args.v0 is not None:
        if not args.v0 > 0:
            raise InvalidConfig("--v0 must be > 0")
        cfg.v0 = args.v0
    if args.sweep:
        cfg.sweep = tuple(soliton.default_sweep())
        cfg.sweep = tuple(v for v in cfg.sweep if abs(v - soliton.SQRT2) > soliton.CYLINDER_WINDOW)
    if args.rmax is not None:
        if not 0 < args.rmax <= 100:
            raise InvalidConfig("--rmax must lie in (0, 100]")
        cfg.r_max = args.rmax
    if cfg.mode in ("run-s1", "run-surface") and not cfg.fibers:
        raise InvalidConfig(f"mode {cfg.mode} needs a --config with [fiber.N] sections")
    return cfg


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        cfg = config_from_args(args)
        status, doc = run_command(cfg)
    except InvalidConfig as exc:
        errs = getattr(exc, "errors", None) or [str(exc)]
        for e in errs:
            print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except MissingArtifacts as exc:
        print(f"missing artifacts: {exc}", file=sys.stderr)
        return exc.exit_code
    except WarpflowError as exc:
        print(f"numerical failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return exc.exit_code
    if cfg.mode == "report":
        for cid, c in doc["criteria"].items():
            print(f"criterion {cid}: {c['verdict']}")
        print(f"verdict: {doc['verdict']}")
        if doc["not_evaluated"]:
            print(f"not evaluated by these runs: {', '.join(doc['not_evaluated'])} (see tests/test_acceptance.py)")
    else:
        failed = doc.get("failed_checks", [])
        for name, c in doc.get("checks", {}).items():
            print(f"[{'PASS' if c['pass'] else 'FAIL'}] {name} (criterion {c['criterion']})")
        print(f"wrote {cfg.out}" + (f"; failed: {', '.join(failed)}" if failed else ""))
    return status


if __name__ == "__main__":
    sys.exit(main())
