"""History reconstruction of E, B against the grid solver at interior probes.

Runs the cross-check configuration in memory, keeps the particle history over
the whole run and compares both field solutions at the final time.

    python scripts/cross_check.py [--probes 10] [--nodes-per-cell 1.5] [--csv out.csv]
"""
import argparse
import time
from pathlib import Path

import numpy as np

from vmlab.runner import compare_fields, interior_probes, load_config, run_simulation, write_comparison_csv

HERE = Path(__file__).resolve().parent


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--config", default=HERE / "configs" / "cross_check.ini")
    ap.add_argument("--probes", type=int, default=10)
    ap.add_argument("--nodes-per-cell", type=float, default=1.5)
    ap.add_argument("--tol", type=float, default=0.05)
    ap.add_argument("--csv", default=None)
    args = ap.parse_args()
    cfg = load_config(args.config)
    t0 = time.perf_counter()
    art = run_simulation(cfg, out_dir=False, keep_history=True)
    print(f"run: {cfg.n_steps} steps, {len(art.history.snapshots[0].w)} particles, "
          f"{time.perf_counter() - t0:.1f} s", flush=True)
    cmp = compare_fields(cfg, interior_probes(cfg, args.probes), args.nodes_per_cell, art=art)
    for x, err in zip(cmp.probes, cmp.errors):
        print(f"x=({x[0]: .3f},{x[1]: .3f},{x[2]: .3f})  rel_err={err:.3e}")
    ok = cmp.max_error <= args.tol
    print(f"t={cmp.t:.4f} max_rel_err={cmp.max_error:.3e} median={np.median(cmp.errors):.3e} "
          f"{'PASS' if ok else 'FAIL'}  ({time.perf_counter() - t0:.0f} s)")
    if args.csv:
        write_comparison_csv(args.csv, cmp)
    return 0 if ok else 1


if __name__ == "__main__":
    raise SystemExit(main())
