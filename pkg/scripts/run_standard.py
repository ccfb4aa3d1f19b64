"""Standard conservation run: 16^3 cells, 32^3-point phase lattice, 200 steps.

    python scripts/run_standard.py [--out runs/standard]
"""
import argparse
import time
from pathlib import Path

from vmlab.runner import load_config, run_simulation

HERE = Path(__file__).resolve().parent


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--config", default=HERE / "configs" / "standard.ini")
    ap.add_argument("--out", default=None)
    args = ap.parse_args()
    cfg = load_config(args.config)
    out = Path(args.out or cfg.directory)
    t0 = time.perf_counter()
    art = run_simulation(cfg, out)
    print((out / "summary.txt").read_text(), end="")
    print(f"wall time {time.perf_counter() - t0:.1f} s, artifacts in {out}")
    return 0 if art.passed else 1


if __name__ == "__main__":
    raise SystemExit(main())
