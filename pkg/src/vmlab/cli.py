"""``vmx`` command line: run, verify, fields-compare, report.

Exit codes: 0 all enabled checks pass, 1 a check failed, 2 execution error.
``VMX_WORKERS`` overrides the worker count.
"""
from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path

from . import __version__
from .lemma_lab import LEMMAS, SweepSpec, load_sweep_spec, run_campaign
from .runner import (RunArtifacts, compare_fields, effective_workers, emit_report, load_config, load_probes,
                     run_simulation, write_comparison_csv)


def _env_workers(default: int = 1) -> int:
    env = os.environ.get("VMX_WORKERS")
    if not env:
        return default
    n = int(env)
    if n < 1:
        raise ValueError("VMX_WORKERS must be >= 1")
    return n


def cmd_run(args) -> int:
    cfg = load_config(args.config)
    out = Path(args.out) if args.out else Path(cfg.directory)
    art = run_simulation(cfg, out)
    print((out / "summary.txt").read_text(), end="")
    if art.failure:
        print(f"run halted: {art.failure}", file=sys.stderr)
        return 2
    return 0 if art.passed else 1


def _campaign_specs(campaign, lemma):
    if campaign and Path(campaign).is_file():
        spec = load_sweep_spec(campaign)
        if lemma and spec.lemma != lemma:
            raise ValueError(f"{campaign} describes lemma {spec.lemma}, not {lemma}")
        return [spec]
    target = lemma or campaign
    if target == "all":
        return [SweepSpec.default(L) for L in LEMMAS]
    if target in LEMMAS:
        return [SweepSpec.default(target)]
    if campaign and not lemma:
        raise ValueError(f"{campaign!r} is neither a sweep file nor one of: all, {', '.join(LEMMAS)}")
    raise ValueError(f"unknown lemma {target!r}; choose from all, {', '.join(LEMMAS)}")


def cmd_verify(args) -> int:
    specs = _campaign_specs(args.campaign, args.lemma)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    workers = _env_workers(args.workers)
    failed = False
    for spec in specs:
        rep = run_campaign(spec, workers)
        stem = spec.lemma.replace(".", "_")
        rep.to_csv(out / f"{stem}_samples.csv")
        rep.write_verdict(out / f"{stem}_verdict.csv")
        print(rep.summary_line(), flush=True)
        failed |= rep.passed is False
    return 1 if failed else 0


def cmd_fields_compare(args) -> int:
    run_dir = Path(args.run_dir)
    cfg = load_config(run_dir / "config.ini")
    probes = load_probes(args.probes, cfg)
    cmp = compare_fields(cfg, probes, args.nodes_per_cell, effective_workers(cfg))
    write_comparison_csv(run_dir / "fields_compare.csv", cmp)
    for x, err in zip(cmp.probes, cmp.errors):
        print(f"x=({x[0]: .4f},{x[1]: .4f},{x[2]: .4f})  rel_err={err:.4e}")
    ok = cmp.max_error <= args.tol
    print(f"t={cmp.t:.6g} max_rel_err={cmp.max_error:.4e} tol={args.tol:g} {'PASS' if ok else 'FAIL'}")
    return 0 if ok else 1


def cmd_report(args) -> int:
    art = RunArtifacts.load(args.run_dir)
    out = Path(args.out) if args.out else Path(args.run_dir)
    emit_report(art, out)
    print((out / "summary.txt").read_text(), end="")
    if art.failure:
        return 2
    return 0 if art.passed else 1


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="vmx", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=f"vmx {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run a simulation from an INI config")
    p.add_argument("config")
    p.add_argument("--out", help="output directory (default: [output] directory)")
    p.set_defaults(fn=cmd_run)

    p = sub.add_parser("verify", help="run a lemma campaign: a sweep file, a lemma id, or 'all'")
    p.add_argument("campaign", nargs="?", help="sweep spec file, lemma id, or 'all'")
    p.add_argument("--lemma", choices=LEMMAS + ("all",))
    p.add_argument("--out", default="vmx_verify")
    p.add_argument("--workers", type=int, default=1)
    p.set_defaults(fn=cmd_verify)

    p = sub.add_parser("fields-compare", help="history reconstruction vs grid fields at probes")
    p.add_argument("run_dir")
    p.add_argument("probes", help="CSV of x,y,z rows or a number of seeded interior probes")
    p.add_argument("--nodes-per-cell", type=float, default=1.5)
    p.add_argument("--tol", type=float, default=0.05)
    p.set_defaults(fn=cmd_fields_compare)

    p = sub.add_parser("report", help="regenerate the report of a run directory")
    p.add_argument("run_dir")
    p.add_argument("--out")
    p.set_defaults(fn=cmd_report)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except Exception as exc:  # any execution failure maps to exit code 2
        print(f"vmx {args.command}: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
