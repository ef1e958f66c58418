"""Command line driver: ``scales``, ``solve``, ``verify``, ``sweep`` and ``oracle``."""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from .config import RunConfig
from .eig2d import assemble_from_grid, dense_oracle_2d, first_eig_2d
from .errors import ConfigError, GroundStateError, SweepTooSmall
from .families import build_family, family_N1, sweep_params
from .grid import build_grid
from .pipeline import jsonable, load_instance, report_bytes, run_pipeline, run_scales
from .potential import Potential
from .scales import compute_L1
from .sturm1d import column_systems, first_eig_batch

OUTPUT_ENV = "GROUNDSTATE_OUTPUT_DIR"
SWEEP_FAMILIES = ("constant", "triangle_example", "trapezoid", "triangle_affine")


def _load(path: str, output: str | None = None) -> RunConfig:
    cfg = RunConfig.load(path)
    out = output or os.environ.get(OUTPUT_ENV) or cfg.output_dir
    cfg.output_dir = out
    return cfg


def cmd_scales(args) -> int:
    cfg = _load(args.config)
    stage = run_scales(load_instance(cfg), cfg)
    _emit(stage.scales.to_dict())
    return 0


def cmd_run(args, solve_only: bool) -> int:
    cfg = _load(args.config, args.output)
    result = run_pipeline(cfg, write=True, solve_only=solve_only)
    if not cfg.output_dir:
        sys.stdout.write(report_bytes(result.report).decode())
    else:
        s = result.report["summary"]
        print(f"{cfg.output_dir}: {s['passed']} passed, {s['failed']} failed, {s['skipped']} skipped")
    return result.exit_code


def sweep_one(task):
    family, value, taper = task
    params = sweep_params(family, value, taper)
    domain, height = build_family(family, params)
    l1 = compute_L1(domain, Potential(height, domain))
    return {"N1": family_N1(family, params), "L1": l1.L1, "L1_tilde": l1.L1_tilde, **params}


def fit_slope(N1, L1) -> float:
    """Ordinary least-squares slope of ``log L1`` against ``log N1``."""
    x, y = np.log(np.asarray(N1, float)), np.log(np.asarray(L1, float))
    return float(np.polyfit(x, y, 1)[0])


def sweep_scaling(family: str, values, taper: float = 0.5, workers: int = 1):
    """``(rows, slope)`` for ``L1`` across a family; rows are ordered as ``values``."""
    if family not in SWEEP_FAMILIES:
        raise ConfigError(f"sweep family must be one of {SWEEP_FAMILIES}")
    values = [float(v) for v in values]
    if len(values) < 3:
        raise SweepTooSmall(f"need at least 3 parameter values, got {len(values)}")
    tasks = [(family, v, taper) for v in values]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(sweep_one, tasks))
    else:
        rows = [sweep_one(t) for t in tasks]
    return rows, fit_slope([r["N1"] for r in rows], [r["L1"] for r in rows])


def cmd_sweep(args) -> int:
    values = [v for v in args.params.split(",") if v.strip()]
    rows, slope = sweep_scaling(args.family, values, args.taper, args.workers)
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=list(rows[0]), lineterminator="\n")
    w.writeheader()
    w.writerows(rows)
    out = args.output or os.environ.get(OUTPUT_ENV)
    summary = {"family": args.family, "slope": slope, "rows": rows}
    if out:
        d = Path(out)
        d.mkdir(parents=True, exist_ok=True)
        (d / f"sweep_{args.family}.csv").write_text(buf.getvalue())
        (d / f"sweep_{args.family}.json").write_text(json.dumps(summary, sort_keys=True, indent=2) + "\n")
    sys.stdout.write(buf.getvalue())
    print(f"slope {slope:.4f}")
    return 0


def cmd_oracle(args) -> int:
    """Dense eigendecomposition against the iterative solver, and Sturm bisection against dense 1D."""
    cfg = _load(args.config)
    inst = load_instance(cfg)
    spacing = cfg.spacing or args.spacing
    grid = build_grid(inst.domain, inst.potential, spacing=spacing)
    op = assemble_from_grid(grid)
    lam_dense, _ = dense_oracle_2d(op)
    lam_iter = first_eig_2d(op, preconditioner=cfg.preconditioner).lam
    systems, _, _, _ = column_systems(inst.domain, inst.potential, grid.lattice.xs, spacing, grid.lattice.y0)
    systems = [s for s in systems if s is not None and s.n >= 1]
    bis = first_eig_batch(systems)
    dense = np.array([np.linalg.eigvalsh(s.dense())[0] for s in systems])
    out = {
        "unknowns": op.n,
        "lambda_iterative": lam_iter,
        "lambda_dense": lam_dense,
        "lambda_diff": abs(lam_iter - lam_dense),
        "columns": len(systems),
        "mu_max_diff": float(np.max(np.abs(bis - dense))),
    }
    _emit(out)
    return 0 if out["lambda_diff"] <= 1e-8 and out["mu_max_diff"] <= 1e-9 else 2


def _emit(obj):
    sys.stdout.write(json.dumps(jsonable(obj), sort_keys=True, indent=2) + "\n")


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="groundstate", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)
    s = sub.add_parser("scales", help="compute L1, the orientation and L2")
    s.add_argument("config")
    s.set_defaults(func=cmd_scales)
    for name, only in (("solve", True), ("verify", False)):
        s = sub.add_parser(name, help="solve the ground state" + ("" if only else " and run every check"))
        s.add_argument("config")
        s.add_argument("-o", "--output", help=f"output directory (overrides {OUTPUT_ENV})")
        s.set_defaults(func=lambda a, only=only: cmd_run(a, only))
    s = sub.add_parser("sweep", help="L1 across a family and the log-log slope")
    s.add_argument("family", choices=SWEEP_FAMILIES)
    s.add_argument("params", help="comma-separated N1 values")
    s.add_argument("--taper", type=float, default=0.5)
    s.add_argument("--workers", type=int, default=1)
    s.add_argument("-o", "--output")
    s.set_defaults(func=cmd_sweep)
    s = sub.add_parser("oracle", help="dense versus iterative eigenvalues")
    s.add_argument("config")
    s.add_argument("--spacing", type=float, default=0.1)
    s.set_defaults(func=cmd_oracle)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except GroundStateError as exc:
        sys.stderr.write(json.dumps(exc.to_dict(), sort_keys=True) + "\n")
        return 1
    except (ValueError, KeyError, TypeError) as exc:
        err = {"error": "ExecutionError", "message": f"{type(exc).__name__}: {exc}"}
        sys.stderr.write(json.dumps(err, sort_keys=True) + "\n")
        return 1


if __name__ == "__main__":
    sys.exit(main())
