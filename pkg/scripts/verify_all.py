"""Run every stand-alone lemma campaign and print a one-line verdict each.

    python scripts/verify_all.py [--out runs/verify] [--workers N]
"""
import argparse
import time
from pathlib import Path

from vmlab.lemma_lab import LEMMAS, SweepSpec, run_campaign


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", default="runs/verify")
    ap.add_argument("--workers", type=int, default=1)
    args = ap.parse_args()
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    failed = []
    for lemma in LEMMAS:
        t0 = time.perf_counter()
        rep = run_campaign(SweepSpec.default(lemma), args.workers)
        stem = lemma.replace(".", "_")
        rep.to_csv(out / f"{stem}_samples.csv")
        rep.write_verdict(out / f"{stem}_verdict.csv")
        print(f"{rep.summary_line()}  ({time.perf_counter() - t0:.1f} s)", flush=True)
        if rep.passed is False:
            failed.append(lemma)
    print("all campaigns pass" if not failed else f"failed: {', '.join(failed)}")
    return 1 if failed else 0


if __name__ == "__main__":
    raise SystemExit(main())
