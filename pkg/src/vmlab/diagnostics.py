"""Cell-level and global diagnostics of a particle ensemble.

Particles are binned to node-centred cells of a :class:`FieldGrid` either by
nearest node (``ngp``) or with the trilinear deposition weights (``cic``; then
the zeroth moment equals the deposited charge density). All cell values are
densities, i.e. sums divided by the cell volume.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numba
import numpy as np

from .fields import FieldGrid, OutOfBoxError, _cic, _flat_index, _grid_coords
from .kinetic import Ensemble, lorentz_factor, velocity_of_momentum
from .quadrature import SphereRule

COARSE_RULE = (8, 16)


@dataclass
class CellDensity:
    index: Tuple[int, int, int]
    p: np.ndarray
    w: np.ndarray
    volume: float

    def __post_init__(self):
        if not self.volume > 0:
            raise ValueError("cell volume must be positive")


@dataclass
class BinnedEnsemble:
    """Particles grouped by cell (CSR layout over the non-empty cells)."""

    shape: Tuple[int, int, int]
    h: float
    origin: np.ndarray
    cells: np.ndarray        # flat node index of each non-empty cell
    start: np.ndarray        # CSR pointers into p / w
    p: np.ndarray
    w: np.ndarray
    t: float = 0.0

    @property
    def volume(self) -> float:
        return self.h**3

    def __len__(self) -> int:
        return len(self.cells)

    def cell(self, i: int) -> CellDensity:
        sl = slice(self.start[i], self.start[i + 1])
        idx = tuple(int(v) for v in np.unravel_index(self.cells[i], self.shape))
        return CellDensity(idx, self.p[sl], self.w[sl], self.volume)

    def cell_centres(self) -> np.ndarray:
        idx = np.array(np.unravel_index(self.cells, self.shape)).T
        return self.origin + idx * self.h

    def to_grid(self, values: np.ndarray) -> np.ndarray:
        out = np.zeros(int(np.prod(self.shape)))
        out[self.cells] = values
        return out.reshape(self.shape)


def bin_ensemble(e: Ensemble, grid: FieldGrid, binning: str = "ngp") -> BinnedEnsemble:
    """Group particles by cell; out-of-box particles raise on non-periodic grids."""
    if len(e) == 0:
        return BinnedEnsemble(grid.shape, grid.h, grid.origin, np.zeros(0, dtype=np.int64),
                              np.zeros(1, dtype=np.int64), np.zeros((0, 3)), np.zeros(0), e.t)
    u = _grid_coords(grid, e.x)
    if binning == "ngp":
        flat = _flat_index(grid.shape, np.floor(u + 0.5).astype(np.int64))
        p, w = e.p, e.w
    elif binning == "cic":
        idx, lam = _cic(u)
        flat = _flat_index(grid.shape, idx).ravel()
        w = (lam * e.w[:, None]).ravel()
        p = np.repeat(e.p, 8, axis=0)
        keep = w != 0
        flat, w, p = flat[keep], w[keep], p[keep]
    else:
        raise ValueError(f"unknown binning {binning!r}")
    order = np.argsort(flat, kind="stable")
    flat, p, w = flat[order], p[order], w[order]
    cells, counts = np.unique(flat, return_counts=True)
    start = np.concatenate([[0], np.cumsum(counts)]).astype(np.int64)
    return BinnedEnsemble(grid.shape, grid.h, grid.origin, cells, start, p, w, e.t)


# ---------------------------------------------------------------- sigma_{-1}

def _objective(c, v, omega):
    """``F(w) = sum c / (1 + v.w)`` and its Euclidean gradient, for ``omega`` of shape (m, 3)."""
    a = 1.0 + omega @ v.T
    F = (c / a).sum(axis=1)
    G = -((c / a**2) @ v)
    return F, G


@numba.njit(cache=True)
def _F(c, v, om):
    f = 0.0
    for k in range(c.shape[0]):
        f += c[k] / (1.0 + v[k, 0] * om[0] + v[k, 1] * om[1] + v[k, 2] * om[2])
    return f


@numba.njit(cache=True)
def _ascend_one(c, v, om, iters):
    """Projected gradient ascent on the sphere with backtracking; never decreases F."""
    F = _F(c, v, om)
    step = 0.5
    g = np.zeros(3)
    cand = np.zeros(3)
    for _ in range(iters):
        g[:] = 0.0
        for k in range(c.shape[0]):
            a = 1.0 + v[k, 0] * om[0] + v[k, 1] * om[1] + v[k, 2] * om[2]
            s = c[k] / (a * a)
            g[0] -= s * v[k, 0]
            g[1] -= s * v[k, 1]
            g[2] -= s * v[k, 2]
        gw = g[0] * om[0] + g[1] * om[1] + g[2] * om[2]
        g[0] -= gw * om[0]
        g[1] -= gw * om[1]
        g[2] -= gw * om[2]
        gn = np.sqrt(g[0] ** 2 + g[1] ** 2 + g[2] ** 2)
        if gn <= 1e-15 * F:
            break
        improved = False
        trial = min(step, 0.5)
        while trial > 1e-14:
            for d in range(3):
                cand[d] = om[d] + trial * g[d] / gn
            nrm = np.sqrt(cand[0] ** 2 + cand[1] ** 2 + cand[2] ** 2)
            for d in range(3):
                cand[d] /= nrm
            Fc = _F(c, v, cand)
            if Fc > F:
                F = Fc
                om[:] = cand
                improved = True
                break
            trial *= 0.5
        if not improved:
            break
        step = 2.0 * trial
    return F


@numba.njit(cache=True)
def _sigma_kernel(start, p, w, nodes, vol, refine, n_seeds, iters, n_spikes):
    ncell = start.shape[0] - 1
    out = np.zeros(ncell)
    arg = np.zeros((ncell, 3))
    for i in range(ncell):
        lo = start[i]
        hi = start[i + 1]
        m = hi - lo
        if m == 0:
            arg[i, 2] = 1.0
            continue
        v = np.empty((m, 3))
        c = np.empty(m)
        peak = np.zeros(m)
        for k in range(m):
            px = p[lo + k, 0]
            py = p[lo + k, 1]
            pz = p[lo + k, 2]
            gam = np.sqrt(1.0 + px * px + py * py + pz * pz)
            v[k, 0] = px / gam
            v[k, 1] = py / gam
            v[k, 2] = pz / gam
            c[k] = w[lo + k] / gam
            sp = np.sqrt(v[k, 0] ** 2 + v[k, 1] ** 2 + v[k, 2] ** 2)
            if sp > 0.0:
                peak[k] = c[k] / (1.0 - sp)
        # anti-velocity seeds of the particles with the largest single-particle peak
        strong = np.argsort(-peak)[:n_spikes]
        nmov = 0
        for k in strong:
            if peak[k] > 0.0:
                nmov += 1
        ncand = nodes.shape[0] + nmov
        cand = np.empty((ncand, 3))
        cand[: nodes.shape[0]] = nodes
        j = nodes.shape[0]
        for k in strong:
            if peak[k] > 0.0:
                sp = np.sqrt(v[k, 0] ** 2 + v[k, 1] ** 2 + v[k, 2] ** 2)
                cand[j, 0] = -v[k, 0] / sp
                cand[j, 1] = -v[k, 1] / sp
                cand[j, 2] = -v[k, 2] / sp
                j += 1
        F = np.empty(ncand)
        for q in range(ncand):
            F[q] = _F(c, v, cand[q])
        order = np.argsort(-F)
        best = F[order[0]]
        barg = cand[order[0]].copy()
        if refine:
            for r in range(min(n_seeds, ncand)):
                om = cand[order[r]].copy()
                Fr = _ascend_one(c, v, om, iters)
                if Fr > best:
                    best = Fr
                    barg = om
        out[i] = best / vol
        arg[i] = barg
    return out, arg


def _sigma_eval(start, p, w, rule: SphereRule, vol: float, refine: bool = True):
    return _sigma_kernel(np.asarray(start, dtype=np.int64), np.ascontiguousarray(p, dtype=float),
                         np.ascontiguousarray(w, dtype=float), np.ascontiguousarray(rule.nodes),
                         float(vol), bool(refine), 4, 200, 32)


def sigma_minus1(cell: CellDensity, rule: Optional[SphereRule] = None, refine: bool = True,
                 return_argmax: bool = False):
    """Max over unit ``w`` of ``(1/h^3) sum_k w_k / (sqrt(1+p_k^2) (1 + v_k.w))``.

    The coarse ``rule`` and the anti-velocity directions ``-v_k/|v_k|`` seed a
    monotone gradient ascent on the sphere from the best few candidates.
    """
    rule = rule or SphereRule.gauss_product(*COARSE_RULE)
    val, arg = _sigma_eval([0, len(cell.w)], cell.p, cell.w, rule, cell.volume, refine)
    return (float(val[0]), arg[0]) if return_argmax else float(val[0])


def sigma_minus1_cells(b: BinnedEnsemble, rule: Optional[SphereRule] = None, refine: bool = True) -> np.ndarray:
    rule = rule or SphereRule.gauss_product(*COARSE_RULE)
    if len(b) == 0:
        return np.zeros(0)
    return _sigma_eval(b.start, b.p, b.w, rule, b.volume, refine)[0]


def sigma_scan(cell: CellDensity, rule: SphereRule) -> float:
    """Plain maximum over the nodes of ``rule`` (a lower bound of the true max)."""
    if len(cell.w) == 0:
        return 0.0
    v = velocity_of_momentum(cell.p)
    c = (cell.w / lorentz_factor(cell.p))[None, :]
    F, _ = _objective(c, v, rule.nodes)
    return float(F.max()) / cell.volume


@dataclass
class SigmaAudit:
    n_cells: int
    max_rel_gap: float          # refined vs fine scan (>= 0 means refined is larger)
    max_rel_below_scan: float   # how far refined falls below the fine scan, should be <= tol
    max_rel_restart: float      # refined vs refinement restarted from the fine-scan optimum
    passed: bool


def audit_sigma_max(b: BinnedEnsemble, coarse: Tuple[int, int] = COARSE_RULE, factor: int = 10,
                    tol: float = 1e-6, max_cells: Optional[int] = None) -> SigmaAudit:
    """Check the refined maximum against a ``factor``-times finer node scan."""
    coarse_rule = SphereRule.gauss_product(*coarse)
    fine_rule = SphereRule.gauss_product(coarse[0] * factor, coarse[1] * factor)
    n = len(b) if max_cells is None else min(len(b), max_cells)
    below = gap = restart = 0.0
    for i in range(n):
        cell = b.cell(i)
        ref = sigma_minus1(cell, coarse_rule)
        scan = sigma_scan(cell, fine_rule)
        if scan <= 0:
            continue
        gap = max(gap, (ref - scan) / scan)
        below = max(below, (scan - ref) / scan)
        v = velocity_of_momentum(cell.p)
        c = (cell.w / lorentz_factor(cell.p))[None, :]
        F, _ = _objective(c, v, fine_rule.nodes)
        om = fine_rule.nodes[int(np.argmax(F))].copy()
        Fr = _ascend_one(c[0], v, om, 200) / cell.volume
        restart = max(restart, (Fr - ref) / ref)
    return SigmaAudit(n, gap, below, restart, below <= tol and restart <= tol)


def sigma_L2_norm(b: BinnedEnsemble, rule: Optional[SphereRule] = None, refine: bool = True) -> float:
    """``(sum_cells sigma^2 h^3)^(1/2)``."""
    if len(b) == 0:
        return 0.0
    s = sigma_minus1_cells(b, rule, refine)
    return float(np.sqrt(np.sum(s**2) * b.volume))


# ---------------------------------------------------------------- moments

def I_theta(cell: CellDensity, theta: float) -> float:
    """``(1/h^3) sum w (1+p^2)^(theta/2)``."""
    if theta < 0:
        raise ValueError("theta must be >= 0")
    return float(np.sum(cell.w * (1.0 + np.sum(cell.p**2, axis=1)) ** (theta / 2))) / cell.volume


def I_theta_cells(b: BinnedEnsemble, theta: float) -> np.ndarray:
    if theta < 0:
        raise ValueError("theta must be >= 0")
    if len(b) == 0:
        return np.zeros(0)
    vals = b.w * (1.0 + np.sum(b.p**2, axis=1)) ** (theta / 2)
    return np.add.reduceat(vals, b.start[:-1]) / b.volume


def I_theta_Lq(b: BinnedEnsemble, theta: float, q: float) -> float:
    """``(sum_cells I_theta^q h^3)^(1/q)``."""
    if q < 1:
        raise ValueError("q must be >= 1")
    vals = I_theta_cells(b, theta)
    return float((np.sum(vals**q) * b.volume) ** (1.0 / q)) if len(vals) else 0.0


def moment_mk(e: Ensemble, k: float) -> float:
    """``1 + sum w (1+p^2)^(k/2)``."""
    if k < 0:
        raise ValueError("k must be >= 0")
    return 1.0 + float(np.sum(e.w * (1.0 + np.sum(e.p**2, axis=1)) ** (k / 2)))


def moment_rate(e: Ensemble, E_at_particles: np.ndarray, k: float) -> float:
    """Exact ``d m_k/dt = k sum w (1+p^2)^((k-1)/2) v.E``."""
    v = velocity_of_momentum(e.p)
    return float(k * np.sum(e.w * (1.0 + np.sum(e.p**2, axis=1)) ** ((k - 1) / 2)
                            * np.sum(v * E_at_particles, axis=1)))


@dataclass
class PInfinityTracker:
    """Running ``10 + max |p|`` over everything seen so far."""

    value: float = 10.0

    def update(self, e: Ensemble) -> float:
        if len(e):
            self.value = max(self.value, 10.0 + float(np.max(np.linalg.norm(e.p, axis=1))))
        return self.value


def P_infinity(history: Iterable[Ensemble]) -> float:
    tr = PInfinityTracker()
    seen = False
    for e in history:
        tr.update(e)
        seen = True
    if not seen:
        raise ValueError("history is empty")
    return tr.value


def total_energy(e: Ensemble, grid: FieldGrid, tol: float = 1e-9) -> float:
    """Kinetic ``sum w sqrt(1+p^2)`` plus field ``(h^3/2) sum |E|^2 + |B|^2``."""
    if abs(e.t - grid.t) > tol * max(1.0, abs(e.t)):
        raise ValueError(f"time mismatch: ensemble t={e.t:.9g}, grid t={grid.t:.9g}")
    return float(np.sum(e.w * lorentz_factor(e.p))) + grid.field_energy()


def local_field_energy(grid: FieldGrid, R: float) -> float:
    """Field energy on nodes with ``|x| <= R`` (components averaged to nodes)."""
    from .fields import node_fields
    nodal = node_fields(grid)
    X = grid.coords()
    mask = np.sum(X**2, axis=0) <= R**2
    return 0.5 * grid.h**3 * float(np.sum(nodal[:, mask] ** 2))


# ---------------------------------------------------------------- series

class SeriesError(ValueError):
    pass


@dataclass
class DiagnosticSeries:
    """Named scalar channels on strictly increasing times.

    ``criterion_sup`` is maintained as the running max of ``sigma_L2``.
    """

    times: List[float] = field(default_factory=list)
    channels: Dict[str, List[float]] = field(default_factory=dict)

    def append(self, t: float, **values: float) -> None:
        if self.times and not t > self.times[-1]:
            raise SeriesError(f"time {t!r} not after {self.times[-1]!r}")
        if self.times and set(values) - {"criterion_sup"} != set(self.channels) - {"criterion_sup"}:
            raise SeriesError("channel set changed between rows")
        self.times.append(float(t))
        for k, v in values.items():
            if k == "criterion_sup":
                continue
            self.channels.setdefault(k, []).append(float(v))
        if "sigma_L2" in values:
            prev = self.channels.get("criterion_sup", [-np.inf])[-1]
            self.channels.setdefault("criterion_sup", []).append(max(prev, float(values["sigma_L2"])))

    def __len__(self) -> int:
        return len(self.times)

    def column(self, name: str) -> np.ndarray:
        return np.asarray(self.channels[name])

    def names(self) -> List[str]:
        return sorted(self.channels)

    def to_csv(self, path) -> None:
        names = self.names()
        with open(path, "w", newline="") as fh:
            wr = csv.writer(fh)
            wr.writerow(["t"] + names)
            for i, t in enumerate(self.times):
                wr.writerow([f"{t:.17g}"] + [f"{self.channels[n][i]:.17g}" for n in names])

    @classmethod
    def from_csv(cls, path) -> "DiagnosticSeries":
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
        s = cls()
        if not rows:
            return s
        names = rows[0][1:]
        for r in rows[1:]:
            s.times.append(float(r[0]))
            for n, v in zip(names, r[1:]):
                s.channels.setdefault(n, []).append(float(v))
        for n in names:
            s.channels.setdefault(n, [])
        return s


@dataclass
class CriterionVerdict:
    sup: float
    initial: float
    monotone: bool
    bounded: bool
    growth_limit: float

    @property
    def passed(self) -> bool:
        return self.monotone and self.bounded


def criterion_monitor(series: DiagnosticSeries, growth_limit: float = 10.0):
    """Ensure the running sup channel exists and judge it: monotone and below ``growth_limit`` x start."""
    if "sigma_L2" not in series.channels:
        raise SeriesError("sigma_L2 channel missing")
    sig = series.column("sigma_L2")
    sup = np.maximum.accumulate(sig) if len(sig) else sig
    series.channels["criterion_sup"] = list(map(float, sup))
    if len(sup) == 0:
        return series, CriterionVerdict(0.0, 0.0, True, True, growth_limit)
    monotone = bool(np.all(np.diff(sup) >= 0))
    bounded = bool(sup[-1] < growth_limit * sup[0]) if sup[0] > 0 else bool(sup[-1] == 0)
    return series, CriterionVerdict(float(sup[-1]), float(sup[0]), monotone, bounded, growth_limit)


# ---------------------------------------------------------------- fitted-constant audits

@dataclass
class AuditResult:
    name: str
    fitted_constant: float
    second_half_max: float
    max_violation: float     # how far the second half exceeds the fitted constant (ratio - C, >= 0)
    passed: bool
    tolerance: float = 1.5


def fitted_constant_audit(name: str, lhs: Sequence[float], rhs: Sequence[float],
                          tolerance: float = 1.5) -> AuditResult:
    """Fit ``C = max(lhs/rhs)`` on the first half; the second half must stay below ``tolerance * C``."""
    lhs = np.asarray(lhs, dtype=float)
    rhs = np.asarray(rhs, dtype=float)
    if lhs.shape != rhs.shape or len(lhs) < 2:
        raise ValueError("need matching series of length >= 2")
    if np.any(rhs <= 0):
        raise ValueError("envelope must be positive")
    r = lhs / rhs
    half = len(r) // 2
    C = float(r[:half].max())
    later = float(r[half:].max())
    return AuditResult(name, C, later, max(0.0, later - C), later <= tolerance * C if C > 0 else later <= 0,
                       tolerance)


def exact_bound_check(sigma: np.ndarray, I1: np.ndarray, rel_tol: float = 1e-12) -> int:
    """Violations of ``sigma_{-1} <= 2 I_1`` per cell."""
    return int(np.sum(np.asarray(sigma) > 2.0 * np.asarray(I1) * (1 + rel_tol)))


def lemma_moment_envelope(P_inf: float, m_4alpha: float, alpha: float) -> float:
    """Right side shape ``P^(2(1-alpha) - 1/2) m_{4 alpha}^(1/2)`` for ``q = 2``."""
    return P_inf ** (2 * (1 - alpha) - 0.5) * m_4alpha**0.5


def cell_moment_envelope(I_a1: np.ndarray, a: float, eps: float) -> np.ndarray:
    """``1 + I_{a+1}^((2 + eps a)/(2 + a))`` per cell."""
    return 1.0 + np.asarray(I_a1) ** ((2 + eps * a) / (2 + a))


def global_moment_envelope(t: float, Iq: float, a: float, eps: float) -> float:
    """``1 + t^3 + ||I_{a+1}||_q^q`` with ``q = 2 (2 + eps a)/(2 + a)``."""
    q = 2 * (2 + eps * a) / (2 + a)
    return 1.0 + t**3 + Iq**q


def write_verdict_csv(path, results: Sequence[AuditResult], extra: Sequence[Tuple[str, str, float, float, bool]] = ()) -> None:
    """Rows ``(channel, bound, fitted_constant, max_violation, passed)``."""
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(["channel", "bound", "fitted_constant", "max_violation", "passed"])
        for r in results:
            wr.writerow([r.name, f"ratio<= {r.tolerance}*C", f"{r.fitted_constant:.17g}",
                         f"{r.max_violation:.17g}", int(r.passed)])
        for row in extra:
            name, bound, c, viol, ok = row
            wr.writerow([name, bound, f"{c:.17g}", f"{viol:.17g}", int(ok)])


# ---------------------------------------------------------------- snapshot bundle

@dataclass
class SnapshotDiagnostics:
    """Everything monitored at one time, plus per-cell arrays for the inequality audits."""

    t: float
    channels: Dict[str, float]
    sigma_cells: np.ndarray
    I1_cells: np.ndarray
    I_cells: Dict[float, np.ndarray]


def snapshot_diagnostics(e: Ensemble, grid: FieldGrid, p_tracker: PInfinityTracker,
                         rule: Optional[SphereRule] = None, binning: str = "ngp",
                         moments: Sequence[float] = (2.0,), alphas: Sequence[float] = (0.2, 0.5),
                         theta_q: Sequence[Tuple[float, float]] = ((2.0, 1.5),),
                         a_eps: Sequence[Tuple[float, float]] = ((1.0, 0.1), (2.0, 0.05)),
                         local_radius: Optional[float] = None) -> SnapshotDiagnostics:
    b = bin_ensemble(e, grid, binning)
    sig = sigma_minus1_cells(b, rule)
    I1 = I_theta_cells(b, 1.0)
    I0 = I_theta_cells(b, 0.0)
    P = p_tracker.update(e)
    ch = {
        "sigma_L2": float(np.sqrt(np.sum(sig**2) * b.volume)),
        "P_inf": P,
        "mass": float(np.sum(e.w)),
        "energy": total_energy(e, grid),
        "rho_Linf": float(I0.max()) if len(I0) else 0.0,
    }
    for k in moments:
        ch[f"m_{k:g}"] = moment_mk(e, k)
    for alpha in alphas:
        ch[f"m_{4 * alpha:g}"] = moment_mk(e, 4 * alpha)
    I_cells = {}
    for theta, q in theta_q:
        ch[f"I_{theta:g}_L{q:g}"] = I_theta_Lq(b, theta, q)
    for a, eps in a_eps:
        th = a + 1
        I_cells[th] = I_theta_cells(b, th)
        q = 2 * (2 + eps * a) / (2 + a)
        ch[f"I_{th:g}_L{q:.6g}"] = float((np.sum(I_cells[th] ** q) * b.volume) ** (1 / q)) if len(b) else 0.0
    if local_radius is not None:
        ch["local_field_energy"] = local_field_energy(grid, local_radius)
    return SnapshotDiagnostics(e.t, ch, sig, I1, I_cells)
