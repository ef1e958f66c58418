"""Run every built-in suite instance through the full pipeline and tabulate the measured constants."""

import argparse
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from groundstate.config import RunConfig
from groundstate.families import suite
from groundstate.pipeline import run_pipeline

COLUMNS = ("instance", "L1", "L2", "lambda", "mu", "C_meas", "passed", "failed", "skipped", "seconds")


def run_one(task):
    name, cfg, out = task
    t0 = time.perf_counter()
    res = run_pipeline(RunConfig(name=name, output_dir=str(out / name) if out else None, **cfg), write=bool(out))
    r = res.report
    c_meas = next(c["measured"]["C_meas"] for c in r["checks"] if c["name"] == "eigenvalue_sandwich")
    failed = [c["name"] for c in r["checks"] if c["verdict"] == "fail"]
    row = (name, r["scales"]["L1"], r["scales"]["L2"], r["eigen"]["lambda"], r["eigen"]["mu"], c_meas,
           r["summary"]["passed"], r["summary"]["failed"], r["summary"]["skipped"], time.perf_counter() - t0)
    return row, failed


def main():
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("-o", "--output", type=Path, help="write per-instance artifacts under this directory")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--only", nargs="*", help="subset of instance names")
    args = p.parse_args()
    instances = suite()
    names = args.only or list(instances)
    tasks = [(n, instances[n], args.output) for n in names]
    if args.workers > 1:
        with ProcessPoolExecutor(args.workers) as pool:
            results = list(pool.map(run_one, tasks))
    else:
        results = [run_one(t) for t in tasks]
    print(",".join(COLUMNS))
    for row, _ in results:
        print(",".join(f"{v:.6g}" if isinstance(v, float) else str(v) for v in row))
    for (row, failed) in results:
        if failed:
            print(f"# {row[0]} failed: {', '.join(failed)}")


if __name__ == "__main__":
    main()
