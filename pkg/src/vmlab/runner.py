"""Run configuration, the particle/field loop, persisted artifacts and reports.

A run directory holds::

    config.ini          canonical echo of the configuration (defaults filled)
    series.csv          one row per diagnostic time
    verdicts.csv        one row per enabled check
    provenance.json     config hash, code version, status
    snapshots/          grid snapshots at the diagnostic cadence plus index.csv
    summary.txt         plain-text report
    FAILED              present only when the run halted early
"""
from __future__ import annotations

import configparser
import csv
import hashlib
import io
import json
import os
import re
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from . import __version__
from .diagnostics import (DiagnosticSeries, PInfinityTracker, SnapshotDiagnostics, criterion_monitor,
                          moment_rate, snapshot_diagnostics)
from .fields import (FieldGrid, FourierField, OutOfBoxError, constraint_residuals, div_B, max_stable_dt,
                     node_fields, read_snapshot, sample_fields, write_snapshot)
from .glassey_strauss import FieldData, HistoryBuffer, default_shell_rule, reconstruct_fields, write_probe_csv
from .kinetic import bump_initial_data, sample_lattice
from .lemma_lab import _moment_growth_audit, inequality_audits
from .pic import InstabilityError, closing_snapshot, ensemble_of, initialize, step
from .quadrature import LightConeSampler, SphereRule

CHECKS = ("conservation", "criterion", "inequalities", "moments")


class ConfigError(ValueError):
    pass


class ParticleEscapeError(RuntimeError):
    pass


# ---------------------------------------------------------------- configuration

def _vec(raw: str) -> Tuple[float, float, float]:
    parts = [float(x) for x in raw.replace(",", " ").split()]
    if len(parts) != 3:
        raise ValueError("expected three numbers")
    return tuple(parts)


def _floats(raw: str) -> Tuple[float, ...]:
    return tuple(float(x) for x in raw.replace(",", " ").split())


def _pairs(raw: str) -> Tuple[Tuple[float, float], ...]:
    out = []
    for item in raw.split(","):
        if item.strip():
            a, e = item.split(":")
            out.append((float(a), float(e)))
    return tuple(out)


def _words(raw: str) -> Tuple[str, ...]:
    return tuple(w for w in raw.replace(",", " ").split())


def _bool(raw: str) -> bool:
    v = raw.strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ValueError("expected a boolean")


def _fmt_value(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, tuple):
        if v and isinstance(v[0], tuple):
            return ", ".join(f"{a!r}:{e!r}" for a, e in v)
        return ", ".join(repr(x) if isinstance(x, float) else str(x) for x in v)
    return str(v)


# section -> key -> (parser, default); attribute names equal the keys
SCHEMA: Dict[str, Dict[str, tuple]] = {
    "grid": {"cells": (int, 16), "half_width": (float, 2.0), "periodic": (_bool, True)},
    "time": {"dt": (float, None), "cfl": (float, 0.9), "n_steps": (int, 200)},
    "particles": {"n_x": (int, 8), "n_p": (int, 4)},
    "initial": {"kind": (str, "bump"), "amplitude": (float, 1.0), "radius_x": (float, 1.0),
                "radius_p": (float, 1.0), "center_x": (_vec, (0.0, 0.0, 0.0)),
                "center_p": (_vec, (0.0, 0.0, 0.0))},
    "diagnostics": {"cadence": (int, 10), "sphere_theta": (int, 8), "sphere_phi": (int, 16),
                    "binning": (str, "ngp"), "moment_orders": (_floats, (2.0,)),
                    "alphas": (_floats, (0.2, 0.5)), "a_eps": (_pairs, ((1.0, 0.1), (2.0, 0.05))),
                    "local_radius": (float, 1.0)},
    "verify": {"checks": (_words, CHECKS), "energy_tol": (float, 1e-2), "mass_tol": (float, 1e-12),
               "continuity_tol": (float, 1e-10), "divb_tol": (float, 1e-12),
               "growth_limit": (float, 10.0), "audit_tolerance": (float, 1.5)},
    "history": {"horizon": (float, 0.0)},
    "output": {"directory": (str, "vmx_out")},
    "run": {"seed": (int, 0), "workers": (int, 1)},
}


@dataclass
class RunConfig:
    cells: int = 16
    half_width: float = 2.0
    periodic: bool = True
    dt: Optional[float] = None
    cfl: float = 0.9
    n_steps: int = 200
    n_x: int = 8
    n_p: int = 4
    kind: str = "bump"
    amplitude: float = 1.0
    radius_x: float = 1.0
    radius_p: float = 1.0
    center_x: Tuple[float, float, float] = (0.0, 0.0, 0.0)
    center_p: Tuple[float, float, float] = (0.0, 0.0, 0.0)
    cadence: int = 10
    sphere_theta: int = 8
    sphere_phi: int = 16
    binning: str = "ngp"
    moment_orders: Tuple[float, ...] = (2.0,)
    alphas: Tuple[float, ...] = (0.2, 0.5)
    a_eps: Tuple[Tuple[float, float], ...] = ((1.0, 0.1), (2.0, 0.05))
    local_radius: float = 1.0
    checks: Tuple[str, ...] = CHECKS
    energy_tol: float = 1e-2
    mass_tol: float = 1e-12
    continuity_tol: float = 1e-10
    divb_tol: float = 1e-12
    growth_limit: float = 10.0
    audit_tolerance: float = 1.5
    horizon: float = 0.0
    directory: str = "vmx_out"
    seed: int = 0
    workers: int = 1

    def __post_init__(self):
        if self.dt is None:
            self.dt = float(self.cfl * self.h / np.sqrt(3.0))
        self.validate()

    @property
    def h(self) -> float:
        return 2.0 * self.half_width / self.cells

    @property
    def t_final(self) -> float:
        return self.n_steps * self.dt

    def validate(self) -> None:
        if self.cells < 4:
            raise ConfigError("cells: need at least 4 cells per side")
        if not self.half_width > 0:
            raise ConfigError("half_width: must be positive")
        bound = max_stable_dt(self.h)
        if not 0 < self.dt <= bound * (1 + 1e-12):
            raise ConfigError(f"dt: {self.dt!r} violates the stability bound dt <= h/sqrt(3) = {bound!r}")
        if self.n_steps < 0:
            raise ConfigError("n_steps: must be >= 0")
        if self.cadence < 1:
            raise ConfigError("cadence: must be >= 1")
        if self.n_steps % self.cadence:
            raise ConfigError(f"cadence: {self.cadence} does not divide n_steps = {self.n_steps}")
        if not 0 <= self.horizon <= self.t_final * (1 + 1e-12):
            raise ConfigError(f"horizon: {self.horizon!r} must lie in [0, n_steps*dt = {self.t_final!r}]")
        if self.kind != "bump":
            raise ConfigError(f"kind: unknown initial data {self.kind!r} (available: bump)")
        if min(self.n_x, self.n_p) < 1:
            raise ConfigError("n_x, n_p: lattice sizes must be >= 1")
        if self.amplitude < 0 or min(self.radius_x, self.radius_p) <= 0:
            raise ConfigError("initial: amplitude must be >= 0 and radii positive")
        reach = self.radius_x + float(np.linalg.norm(self.center_x, np.inf))
        if reach >= self.half_width:
            raise ConfigError(f"radius_x: support reaches {reach!r}, outside the box half-width {self.half_width!r}")
        if self.binning not in ("ngp", "cic"):
            raise ConfigError(f"binning: {self.binning!r} is not ngp or cic")
        unknown = set(self.checks) - set(CHECKS)
        if unknown:
            raise ConfigError(f"checks: unknown {sorted(unknown)}; available {list(CHECKS)}")
        if self.workers < 1:
            raise ConfigError("workers: must be >= 1")

    def echo(self) -> str:
        """Canonical INI text with every key present."""
        lines = []
        for section, keys in SCHEMA.items():
            lines.append(f"[{section}]")
            for key in keys:
                lines.append(f"{key} = {_fmt_value(getattr(self, key))}")
            lines.append("")
        return "\n".join(lines)

    def digest(self) -> str:
        return hashlib.sha256(self.echo().encode()).hexdigest()

    def initial_data(self):
        return bump_initial_data(self.amplitude, self.radius_x, self.radius_p, self.center_x, self.center_p)


def _line_of(text: str, section: str, key: Optional[str]) -> int:
    current = None
    for i, line in enumerate(text.splitlines(), 1):
        m = re.match(r"\s*\[([^\]]+)\]", line)
        if m:
            current = m.group(1).strip()
            if key is None and current == section:
                return i
            continue
        if current == section and key is not None and re.match(rf"\s*{re.escape(key)}\s*[=:]", line, re.I):
            return i
    return 0


def parse_config(text: str, source: str = "<string>") -> RunConfig:
    cp = configparser.ConfigParser(strict=True, interpolation=None)
    try:
        cp.read_string(text, source=source)
    except configparser.Error as exc:
        line = getattr(exc, "lineno", None)
        if line is None and getattr(exc, "errors", None):
            line = exc.errors[0][0]
        where = f"{source}: line {line}: " if line else f"{source}: "
        raise ConfigError(where + str(exc).splitlines()[0]) from exc
    kw = {}
    for section in cp.sections():
        if section not in SCHEMA:
            raise ConfigError(f"{source}: line {_line_of(text, section, None)}: unknown section [{section}]")
        for key, raw in cp.items(section):
            line = _line_of(text, section, key)
            if key not in SCHEMA[section]:
                raise ConfigError(f"{source}: line {line}: unknown key {key!r} in [{section}]")
            parser = SCHEMA[section][key][0]
            try:
                kw[key] = parser(raw)
            except ValueError as exc:
                raise ConfigError(f"{source}: line {line}: {key} = {raw!r}: {exc}") from exc
    try:
        return RunConfig(**kw)
    except ConfigError as exc:
        key = str(exc).split(":")[0]
        sect = next((s for s, keys in SCHEMA.items() if key in keys), None)
        line = _line_of(text, sect, key) if sect else 0
        raise ConfigError(f"{source}: line {line}: {exc}" if line else f"{source}: {exc}") from exc


def load_config(path) -> RunConfig:
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"{path}: no such config file")
    return parse_config(path.read_text(), str(path))


def effective_workers(cfg: RunConfig) -> int:
    env = os.environ.get("VMX_WORKERS")
    if env:
        try:
            n = int(env)
        except ValueError:
            raise ConfigError(f"VMX_WORKERS={env!r} is not an integer") from None
        if n < 1:
            raise ConfigError("VMX_WORKERS must be >= 1")
        return n
    return cfg.workers


# ---------------------------------------------------------------- artifacts

@dataclass
class Verdict:
    name: str
    bound: str
    value: float
    threshold: float
    passed: bool


@dataclass
class RunArtifacts:
    config: RunConfig
    series: DiagnosticSeries
    snapshots: List[Tuple[int, float, str]]
    verdicts: List[Verdict]
    provenance: Dict[str, str]
    out_dir: Optional[Path] = None
    failure: Optional[str] = None
    last_good_time: Optional[float] = None
    history: Optional[HistoryBuffer] = None
    diagnostics: List[SnapshotDiagnostics] = field(default_factory=list)
    final_grid: Optional[FieldGrid] = None

    @property
    def passed(self) -> bool:
        return self.failure is None and all(v.passed for v in self.verdicts)

    @classmethod
    def load(cls, run_dir) -> "RunArtifacts":
        run_dir = Path(run_dir)
        for name in ("config.ini", "provenance.json", "series.csv"):
            if not (run_dir / name).exists():
                raise FileNotFoundError(f"{run_dir / name}: missing run artifact")
        cfg = load_config(run_dir / "config.ini")
        prov = json.loads((run_dir / "provenance.json").read_text())
        series = DiagnosticSeries.from_csv(run_dir / "series.csv")
        verdicts = []
        if (run_dir / "verdicts.csv").exists():
            with open(run_dir / "verdicts.csv", newline="") as fh:
                for r in list(csv.reader(fh))[1:]:
                    verdicts.append(Verdict(r[0], r[1], float(r[2]), float(r[3]), r[4] == "1"))
        snaps = []
        index = run_dir / "snapshots" / "index.csv"
        if index.exists():
            with open(index, newline="") as fh:
                for r in list(csv.reader(fh))[1:]:
                    snaps.append((int(r[0]), float(r[1]), r[2]))
        last = prov.get("last_good_time")
        return cls(cfg, series, snaps, verdicts,
                   {"config_hash": prov["config_hash"], "code_version": prov["code_version"]},
                   run_dir, prov.get("failure"), None if last is None else float(last))

    def snapshot_grid(self, i: int) -> FieldGrid:
        return read_snapshot(self.out_dir / "snapshots" / self.snapshots[i][2])


def _write_provenance(art: RunArtifacts, status: str) -> None:
    data = dict(art.provenance, status=status, failure=art.failure,
                last_good_time=art.last_good_time)
    (art.out_dir / "provenance.json").write_text(json.dumps(data, indent=1, sort_keys=True) + "\n")


def _flush(art: RunArtifacts) -> None:
    art.series.to_csv(art.out_dir / "series.csv")
    with open(art.out_dir / "snapshots" / "index.csv", "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(["step", "t", "file"])
        for s, t, f in art.snapshots:
            wr.writerow([s, f"{t:.17g}", f])
    _write_provenance(art, "running")


# ---------------------------------------------------------------- the loop

def _extra_channels(snap, continuity: float, k_orders: Sequence[float]) -> Dict[str, float]:
    g = snap.grid
    nodal = node_fields(g)
    e = ensemble_of(snap)
    E = sample_fields(g, snap.x, nodal)[0] if len(e) else np.zeros((0, 3))
    Emag = np.sqrt(np.sum(nodal[:3] ** 2, axis=0))
    gauss, _ = constraint_residuals(g)
    ch = {
        "continuity": continuity,
        "div_B": float(np.max(np.abs(div_B(g.B, g.h)))),
        "gauss_defect": gauss,
        "field_energy": g.field_energy(),
    }
    for k in k_orders:
        ch[f"E_L{k + 3:g}"] = float((np.sum(Emag ** (k + 3)) * g.h**3) ** (1 / (k + 3)))
        ch[f"m_{k:g}_rate"] = moment_rate(e, E, k) if len(e) else 0.0
    return ch


def _check_inside(x: np.ndarray, half_width: float, t: float) -> None:
    if len(x) and np.max(np.abs(x)) >= half_width:
        i = int(np.argmax(np.max(np.abs(x), axis=1)))
        raise ParticleEscapeError(f"particle {i} left the box at t={t:.6g}: x={x[i].tolist()}")


def run_simulation(cfg: RunConfig, out_dir=None, keep_history: Optional[bool] = None) -> RunArtifacts:
    """Run the leapfrog loop with diagnostics every ``cadence`` steps.

    Particle escape or a non-finite state halts the run; the partial artifacts
    are flushed and a ``FAILED`` marker written. ``out_dir=False`` keeps
    everything in memory.
    """
    write = out_dir is not False
    out = Path(out_dir if out_dir not in (None, False) else cfg.directory)
    art = RunArtifacts(cfg, DiagnosticSeries(), [], [],
                       {"config_hash": cfg.digest(), "code_version": __version__},
                       out if write else None)
    if write:
        (out / "snapshots").mkdir(parents=True, exist_ok=True)
        (out / "config.ini").write_text(cfg.echo())
        marker = out / "FAILED"
        if marker.exists():
            marker.unlink()
    init = cfg.initial_data()
    ens = sample_lattice(init, cfg.n_x, cfg.n_p)
    grid = FieldGrid.cube(cfg.cells, cfg.half_width, periodic=cfg.periodic)
    rule = SphereRule.gauss_product(cfg.sphere_theta, cfg.sphere_phi)
    tracker = PInfinityTracker()
    keep = cfg.horizon > 0 if keep_history is None else keep_history
    first_kept = cfg.n_steps - int(round(cfg.horizon / cfg.dt)) if cfg.horizon > 0 else 0
    state = initialize(ens, grid, cfg.dt)
    if keep:
        art.history = HistoryBuffer(cfg.dt, grid)
    worst_continuity = 0.0

    def record(snap, n):
        nonlocal worst_continuity
        e = ensemble_of(snap, ens)
        d = snapshot_diagnostics(e, snap.grid, tracker, rule, cfg.binning, cfg.moment_orders,
                                 cfg.alphas, a_eps=cfg.a_eps, local_radius=cfg.local_radius)
        ch = dict(d.channels)
        ch.update(_extra_channels(snap, worst_continuity, cfg.moment_orders))
        worst_continuity = 0.0
        art.series.append(snap.t, **ch)
        art.diagnostics.append(d)
        art.last_good_time = snap.t
        if write:
            name = f"grid_{n:06d}.vmxg"
            write_snapshot(out / "snapshots" / name, snap.grid)
            art.snapshots.append((n, snap.t, name))
            _flush(art)

    try:
        for n in range(cfg.n_steps):
            rec = step(state)
            if not cfg.periodic:
                _check_inside(state.x, cfg.half_width, state.t)
            worst_continuity = max(worst_continuity, rec.continuity)
            if keep and n >= first_kept:
                art.history.append(rec.snapshot)
            if n % cfg.cadence == 0:
                record(rec.snapshot, n)
        final = closing_snapshot(state)
        if keep:
            art.history.append(final)
        record(final, cfg.n_steps)
        art.final_grid = state.grid
    except (ParticleEscapeError, InstabilityError, OutOfBoxError, FloatingPointError) as exc:
        art.failure = f"{type(exc).__name__}: {exc}"
    art.verdicts = evaluate_run(art)
    if write:
        emit_report(art)
        if art.failure:
            (out / "FAILED").write_text(f"{art.failure}\nlast_good_time = {art.last_good_time!r}\n")
        _write_provenance(art, "failed" if art.failure else "complete")
    return art


def _max_rel_drift(x: np.ndarray) -> float:
    if len(x) == 0 or x[0] == 0:
        return 0.0
    return float(np.max(np.abs(x - x[0])) / abs(x[0]))


def evaluate_run(art: RunArtifacts) -> List[Verdict]:
    cfg, s = art.config, art.series
    out: List[Verdict] = []
    if len(s) == 0:
        return out
    if "conservation" in cfg.checks:
        e = _max_rel_drift(s.column("energy"))
        m = _max_rel_drift(s.column("mass"))
        c = float(np.max(s.column("continuity")))
        b = float(np.max(s.column("div_B")))
        out += [Verdict("energy_drift", "max |E(t)-E(0)|/E(0)", e, cfg.energy_tol, e <= cfg.energy_tol),
                Verdict("mass_drift", "max |M(t)-M(0)|/M(0)", m, cfg.mass_tol, m <= cfg.mass_tol),
                Verdict("continuity", "max_step |d_t rho + div j|", c, cfg.continuity_tol, c <= cfg.continuity_tol),
                Verdict("div_B", "max |div B|", b, cfg.divb_tol, b <= cfg.divb_tol)]
    if "criterion" in cfg.checks:
        _, v = criterion_monitor(s, cfg.growth_limit)
        ratio = v.sup / v.initial if v.initial > 0 else 0.0
        out.append(Verdict("criterion_sup", "monotone and sup < growth_limit * initial", ratio,
                           cfg.growth_limit, v.passed))
    if "inequalities" in cfg.checks and len(art.diagnostics) >= 2:
        audits, exact = inequality_audits(art.diagnostics, cfg.alphas, cfg.a_eps)
        out.append(Verdict("sigma_le_2_I1", "cell sigma_-1 <= 2 I_1 (violations)", float(exact), 0.0, exact == 0))
        for a in audits:
            later = a.second_half_max / a.fitted_constant if a.fitted_constant > 0 else 0.0
            out.append(Verdict(a.name, f"second-half max ratio <= {cfg.audit_tolerance:g} x fitted C",
                               later, cfg.audit_tolerance, later <= cfg.audit_tolerance))
    if "moments" in cfg.checks and len(s) >= 3:
        for k in cfg.moment_orders:
            a = _moment_growth_audit(s.times, s.column(f"m_{k:g}"), s.column(f"E_L{k + 3:g}"),
                                     cfg.amplitude, k)
            later = a.second_half_max / a.fitted_constant if a.fitted_constant > 0 else a.second_half_max
            out.append(Verdict(a.name, "moment growth: second-half ratio / fitted C", later,
                               cfg.audit_tolerance, a.passed))
    return out


# ---------------------------------------------------------------- report

def _verdict_rows(verdicts: Sequence[Verdict]) -> str:
    buf = io.StringIO()
    wr = csv.writer(buf, lineterminator="\n")
    wr.writerow(["name", "bound", "value", "threshold", "passed"])
    for v in verdicts:
        wr.writerow([v.name, v.bound, f"{v.value:.17g}", f"{v.threshold:.17g}", int(v.passed)])
    return buf.getvalue()


def summary_text(art: RunArtifacts) -> str:
    s = art.series
    lines = [f"config_hash  {art.provenance['config_hash']}",
             f"code_version {art.provenance['code_version']}",
             f"status       {'FAILED' if art.failure else 'complete'}"]
    if art.failure:
        lines.append(f"failure      {art.failure}")
        lt = "none" if art.last_good_time is None else f"{art.last_good_time:.6g}"
        lines.append(f"last_good_t  {lt}")
    lines += ["", "criterion_sup trajectory", f"{'t':>12s} {'sigma_L2':>14s} {'criterion_sup':>14s}"]
    if len(s) and "sigma_L2" in s.channels:
        sup = np.maximum.accumulate(s.column("sigma_L2"))
        for t, sig, c in zip(s.times, s.column("sigma_L2"), sup):
            lines.append(f"{t:12.6f} {sig:14.8g} {c:14.8g}")
    lines += ["", "checks", f"{'name':<34s} {'value':>14s} {'threshold':>12s}  verdict"]
    for v in art.verdicts:
        lines.append(f"{v.name:<34s} {v.value:14.6g} {v.threshold:12.4g}  {'PASS' if v.passed else 'FAIL'}")
    overall = "PASS" if art.passed else "FAIL"
    lines += ["", f"overall {overall}", ""]
    return "\n".join(lines)


def emit_report(art: RunArtifacts, out_dir=None) -> List[Path]:
    """Write ``series.csv``, ``verdicts.csv`` and ``summary.txt``; a pure function of ``art``."""
    out = Path(out_dir) if out_dir is not None else art.out_dir
    if out is None:
        raise ValueError("no output directory")
    try:
        out.mkdir(parents=True, exist_ok=True)
        paths = [out / "series.csv", out / "verdicts.csv", out / "summary.txt"]
        art.series.to_csv(paths[0])
        paths[1].write_text(_verdict_rows(art.verdicts))
        paths[2].write_text(summary_text(art))
    except OSError as exc:
        raise OSError(f"cannot write report under {out}: {exc}") from exc
    return paths


# ---------------------------------------------------------------- Glassey-Strauss cross-check

@dataclass
class FieldsComparison:
    t: float
    probes: np.ndarray
    E_gs: np.ndarray
    B_gs: np.ndarray
    E_fd: np.ndarray
    B_fd: np.ndarray
    scale: float

    @property
    def errors(self) -> np.ndarray:
        """Per probe: largest component error of E and B over the largest grid field value."""
        e = np.maximum(np.abs(self.E_gs - self.E_fd).max(axis=1), np.abs(self.B_gs - self.B_fd).max(axis=1))
        return e / self.scale

    @property
    def max_error(self) -> float:
        return float(self.errors.max()) if len(self.probes) else 0.0


def interior_probes(cfg: RunConfig, n: int, fraction: float = 0.8) -> np.ndarray:
    """``n`` seeded points uniformly inside ``fraction`` of the initial support ball."""
    rng = np.random.default_rng(cfg.seed)
    d = rng.standard_normal((n, 3))
    d /= np.linalg.norm(d, axis=1, keepdims=True)
    r = fraction * cfg.radius_x * rng.random(n) ** (1 / 3)
    return np.asarray(cfg.center_x) + r[:, None] * d


def compare_fields(cfg: RunConfig, probes: np.ndarray, nodes_per_cell: float = 1.5,
                   workers: int = 1, art: Optional[RunArtifacts] = None) -> FieldsComparison:
    """Reconstruct E, B at the final time from the particle history and compare with the grid.

    The run is repeated in memory (it is deterministic) unless ``art`` carries a history.
    """
    if art is None or art.history is None:
        art = run_simulation(cfg, out_dir=False, keep_history=True)
    if art.failure:
        raise RuntimeError(f"run failed: {art.failure}")
    H, g = art.history, art.final_grid
    data = FieldData.from_grid(H.snapshots[0].grid)
    sampler = LightConeSampler(cfg.dt, default_shell_rule(g.h, nodes_per_cell), H.horizon)
    probes = np.atleast_2d(np.asarray(probes, dtype=float))

    def one(x):
        return reconstruct_fields(H, data, H.t_max, x, sampler)[0]

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as ex:
            recs = list(ex.map(one, probes))
    else:
        recs = [one(x) for x in probes]
    FE, FB = FourierField.electric(g), FourierField.magnetic(g)
    scale = max(float(np.abs(g.E).max()), float(np.abs(g.B).max()))
    cmp = FieldsComparison(H.t_max, probes, np.array([r.E for r in recs]), np.array([r.B for r in recs]),
                           FE(probes), FB(probes), scale if scale > 0 else 1.0)
    cmp.records = recs
    return cmp


def write_comparison_csv(path, cmp: FieldsComparison) -> None:
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(["x1", "x2", "x3", "E1_gs", "E2_gs", "E3_gs", "B1_gs", "B2_gs", "B3_gs",
                     "E1_fd", "E2_fd", "E3_fd", "B1_fd", "B2_fd", "B3_fd", "rel_err"])
        for i, x in enumerate(cmp.probes):
            row = list(x) + list(cmp.E_gs[i]) + list(cmp.B_gs[i]) + list(cmp.E_fd[i]) + list(cmp.B_fd[i])
            wr.writerow([f"{v:.17g}" for v in row] + [f"{cmp.errors[i]:.17g}"])


def load_probes(spec: str, cfg: RunConfig) -> np.ndarray:
    """A CSV file of ``x, y, z`` rows, or an integer count of seeded interior probes."""
    if re.fullmatch(r"\d+", spec.strip()):
        return interior_probes(cfg, int(spec))
    rows = []
    with open(spec, newline="") as fh:
        for r in csv.reader(fh):
            if not r or r[0].strip().startswith("#"):
                continue
            try:
                rows.append([float(v) for v in r[:3]])
            except ValueError:
                continue  # header
    if not rows:
        raise ValueError(f"{spec}: no probe rows")
    return np.array(rows)


__all__ = ["RunConfig", "ConfigError", "load_config", "parse_config", "run_simulation", "RunArtifacts",
           "Verdict", "emit_report", "compare_fields", "interior_probes", "load_probes",
           "write_comparison_csv", "write_probe_csv", "FieldsComparison", "ParticleEscapeError",
           "effective_workers"]
