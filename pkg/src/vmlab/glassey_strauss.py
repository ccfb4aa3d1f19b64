"""Retarded field representation: kernels, history buffer and light-cone reconstruction.

With ``w = y/|y|`` and ``L = E + v x B`` the fields split into

* data terms ``E_D`` (Kirchhoff formula for the initial fields) and ``E_DT``
  (shell ``|y| = t`` integral of ``f0``),
* ``E_flat``: cone integral of ``f`` with weight ``|y|^-2``,
* ``E_sharp``: cone integral of ``L f`` with weight ``|y|^-1``,

and likewise for ``B``. Cone integrals carry the factor ``1/(4 pi)`` that goes
with ``div E = rho``. The density at a retarded point is the trilinear
interpolant of node-binned particle sums, so momentum integrals are exact sums
over the particles binned to the 8 surrounding nodes.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numba
import numpy as np

from .fields import FieldGrid, FourierField, _cic, _flat_index
from .kinetic import lorentz_factor, velocity_of_momentum
from .quadrature import FOUR_PI, HorizonError, LightConeSampler, SphereRule

TERMS = ("D", "DT", "flat", "sharp")


# ---------------------------------------------------------------- kernels

@dataclass
class KernelSet:
    """Kernel values; vectors ``(..., 3)`` and ``sharp`` matrices ``(..., 3, 3)``."""

    E_DT: np.ndarray
    B_DT: np.ndarray
    E_flat: np.ndarray
    B_flat: np.ndarray
    E_sharp: np.ndarray
    B_sharp: np.ndarray


def _check_unit(omega: np.ndarray) -> None:
    dev = np.abs(np.linalg.norm(omega, axis=-1) - 1.0)
    if np.any(dev > 1e-12):
        raise ValueError(f"omega must be a unit vector (|omega| - 1 = {dev.max():.3g})")


def _cross_matrix(w: np.ndarray) -> np.ndarray:
    z = np.zeros(w.shape[:-1])
    return np.stack([np.stack([z, -w[..., 2], w[..., 1]], -1),
                     np.stack([w[..., 2], z, -w[..., 0]], -1),
                     np.stack([-w[..., 1], w[..., 0], z], -1)], -2)


def eval_kernels(omega, p) -> KernelSet:
    """All six kernels at unit ``omega`` and momentum ``p`` (broadcasting over leading axes)."""
    omega = np.asarray(omega, dtype=float)
    p = np.asarray(p, dtype=float)
    _check_unit(omega)
    omega, p = np.broadcast_arrays(omega, p)
    v = velocity_of_momentum(p)
    gam = lorentz_factor(p)[..., None]
    vw = np.sum(v * omega, axis=-1, keepdims=True)
    a = 1.0 + vw
    vxw = np.cross(v, omega)
    E_DT = (omega - vw * v) / a
    B_DT = -vxw / a
    E_flat = (v + omega) / (gam**2 * a**2)
    B_flat = -vxw / (gam**2 * a**2)
    eye = np.eye(3)
    pref = (1.0 / (gam * a**2))[..., None]
    E_sharp = pref * (a[..., None] * eye + (vw * omega - v)[..., :, None] * v[..., None, :]
                      - (v + omega)[..., :, None] * omega[..., None, :])
    B_sharp = _cross_matrix(omega) @ E_sharp
    return KernelSet(E_DT, B_DT, E_flat, B_flat, E_sharp, B_sharp)


def apply_sharp(omega, p, z) -> Tuple[np.ndarray, np.ndarray]:
    """``(K_E_sharp z, K_B_sharp z)`` without forming matrices."""
    omega = np.asarray(omega, dtype=float)
    p = np.asarray(p, dtype=float)
    z = np.asarray(z, dtype=float)
    v = velocity_of_momentum(p)
    gam = lorentz_factor(p)[..., None]
    vw = np.sum(v * omega, axis=-1, keepdims=True)
    a = 1.0 + vw
    Ez = (a * z + (vw * omega - v) * np.sum(v * z, -1, keepdims=True)
          - (v + omega) * np.sum(omega * z, -1, keepdims=True)) / (gam * a**2)
    return Ez, np.cross(omega, Ez)


def sharp_rearranged(omega, p, z) -> np.ndarray:
    """``K_E_sharp z`` written through ``w - (v.w) v`` and ``v + w`` (used by the bound)."""
    v = velocity_of_momentum(np.asarray(p, dtype=float))
    gam = lorentz_factor(np.asarray(p, dtype=float))[..., None]
    vw = np.sum(v * omega, axis=-1, keepdims=True)
    a = 1.0 + vw
    perp = omega - vw * v
    return (a * z - np.sum(perp * z, -1, keepdims=True) * (v + omega)
            - a * np.sum(v * z, -1, keepdims=True) * v) / (gam * a**2)


KERNEL_BOUND_CONSTANTS = {"E_DT": np.sqrt(2.0), "B_DT": np.sqrt(2.0),
                          "E_flat": np.sqrt(2.0), "B_flat": np.sqrt(2.0),
                          "E_sharp": 4.0, "B_sharp": 3.0}


@dataclass
class KernelBoundReport:
    n_samples: int
    fitted: Dict[str, float]
    reference: Dict[str, float]
    violations: Dict[str, int]

    @property
    def margins(self) -> Dict[str, float]:
        return {k: self.reference[k] - self.fitted[k] for k in self.fitted}

    @property
    def ok(self) -> bool:
        return all(v == 0 for v in self.violations.values())


def random_unit_vectors(n: int, rng) -> np.ndarray:
    z = rng.standard_normal((n, 3))
    return z / np.linalg.norm(z, axis=1, keepdims=True)


def check_kernel_bounds(n_samples: int, rng=None, p_max: float = 1e3, chunk: int = 200_000) -> KernelBoundReport:
    """Smallest constants ``C`` making the angular kernel bounds hold on random samples.

    Bound shapes: DT ``C (1+v.w)^-1/2``; flat ``C (1+p^2)^-1 (1+v.w)^-3/2``;
    sharp ``C (1+p^2)^-1/2 (1+v.w)^-1`` in operator norm. Half the momenta are
    placed near the anti-aligned direction ``p ~ -|p| w`` where ``1 + v.w`` is smallest.
    """
    if n_samples < 1:
        raise ValueError("n_samples must be >= 1")
    rng = np.random.default_rng(rng)
    fitted = {k: 0.0 for k in KERNEL_BOUND_CONSTANTS}
    viol = {k: 0 for k in KERNEL_BOUND_CONSTANTS}
    done = 0
    while done < n_samples:
        m = min(chunk, n_samples - done)
        w = random_unit_vectors(m, rng)
        mag = p_max * rng.random(m) ** 3
        d = random_unit_vectors(m, rng)
        half = m // 2
        d[:half] = -w[:half] + 0.05 * rng.random((half, 1)) * random_unit_vectors(half, rng)
        d /= np.linalg.norm(d, axis=1, keepdims=True)
        p = mag[:, None] * d
        K = eval_kernels(w, p)
        v = velocity_of_momentum(p)
        a = 1.0 + np.sum(v * w, axis=1)
        one_p2 = 1.0 + np.sum(p * p, axis=1)
        ratios = {
            "E_DT": np.linalg.norm(K.E_DT, axis=1) * np.sqrt(a),
            "B_DT": np.linalg.norm(K.B_DT, axis=1) * np.sqrt(a),
            "E_flat": np.linalg.norm(K.E_flat, axis=1) * one_p2 * a**1.5,
            "B_flat": np.linalg.norm(K.B_flat, axis=1) * one_p2 * a**1.5,
            "E_sharp": np.linalg.norm(K.E_sharp, ord=2, axis=(1, 2)) * np.sqrt(one_p2) * a,
            "B_sharp": np.linalg.norm(K.B_sharp, ord=2, axis=(1, 2)) * np.sqrt(one_p2) * a,
        }
        for k, r in ratios.items():
            fitted[k] = max(fitted[k], float(r.max()))
            viol[k] += int(np.sum(r > KERNEL_BOUND_CONSTANTS[k] * (1 + 1e-12)))
        done += m
    return KernelBoundReport(n_samples, fitted, dict(KERNEL_BOUND_CONSTANTS), viol)


# ---------------------------------------------------------------- cone gather

@numba.njit(cache=True)
def _gather_kernel(points, omegas, pw, pw2, start, cw, owner, P, L, has_L,
                   nx, ny, nz, ox, oy, oz, h, periodic):
    out = np.zeros((6, 3))
    for i in range(points.shape[0]):
        wx = omegas[i, 0]
        wy = omegas[i, 1]
        wz = omegas[i, 2]
        ux = (points[i, 0] - ox) / h
        uy = (points[i, 1] - oy) / h
        uz = (points[i, 2] - oz) / h
        ix = int(np.floor(ux))
        iy = int(np.floor(uy))
        iz = int(np.floor(uz))
        fx = ux - ix
        fy = uy - iy
        fz = uz - iz
        for c in range(8):
            dx = (c >> 2) & 1
            dy = (c >> 1) & 1
            dz = c & 1
            lam = (fx if dx else 1.0 - fx) * (fy if dy else 1.0 - fy) * (fz if dz else 1.0 - fz)
            if lam == 0.0:
                continue
            jx = ix + dx
            jy = iy + dy
            jz = iz + dz
            if periodic:
                jx %= nx
                jy %= ny
                jz %= nz
            elif jx < 0 or jy < 0 or jz < 0 or jx >= nx or jy >= ny or jz >= nz:
                continue
            node = (jx * ny + jy) * nz + jz
            for e in range(start[node], start[node + 1]):
                k = owner[e]
                px = P[k, 0]
                py = P[k, 1]
                pz = P[k, 2]
                gam = np.sqrt(1.0 + px * px + py * py + pz * pz)
                vx = px / gam
                vy = py / gam
                vz = pz / gam
                vw = vx * wx + vy * wy + vz * wz
                a = 1.0 + vw
                cf = pw[i] * lam * cw[e]
                # v x w
                cx = vy * wz - vz * wy
                cy = vz * wx - vx * wz
                cz = vx * wy - vy * wx
                s1 = cf / a
                out[0, 0] += s1 * (wx - vw * vx)
                out[0, 1] += s1 * (wy - vw * vy)
                out[0, 2] += s1 * (wz - vw * vz)
                out[1, 0] -= s1 * cx
                out[1, 1] -= s1 * cy
                out[1, 2] -= s1 * cz
                s2 = cf / (gam * gam * a * a)
                out[2, 0] += s2 * (vx + wx)
                out[2, 1] += s2 * (vy + wy)
                out[2, 2] += s2 * (vz + wz)
                out[3, 0] -= s2 * cx
                out[3, 1] -= s2 * cy
                out[3, 2] -= s2 * cz
                if has_L:
                    zx = L[k, 0]
                    zy = L[k, 1]
                    zz = L[k, 2]
                    vzd = vx * zx + vy * zy + vz * zz
                    wzd = wx * zx + wy * zy + wz * zz
                    s3 = pw2[i] * lam * cw[e] / (gam * a * a)
                    kx = a * zx + (vw * wx - vx) * vzd - (vx + wx) * wzd
                    ky = a * zy + (vw * wy - vy) * vzd - (vy + wy) * wzd
                    kz = a * zz + (vw * wz - vz) * vzd - (vz + wz) * wzd
                    out[4, 0] += s3 * kx
                    out[4, 1] += s3 * ky
                    out[4, 2] += s3 * kz
                    out[5, 0] += s3 * (wy * kz - wz * ky)
                    out[5, 1] += s3 * (wz * kx - wx * kz)
                    out[5, 2] += s3 * (wx * ky - wy * kx)
    return out


@dataclass
class Snapshot:
    """Particles (and optionally fields) at one history time.

    ``L`` is the Lorentz force ``E + v x B`` at each particle; ``grid`` the
    field grid at this time. Node binning is built lazily.
    """

    t: float
    x: np.ndarray
    p: np.ndarray
    w: np.ndarray
    L: Optional[np.ndarray] = None
    grid: Optional[FieldGrid] = None
    _bins: Optional[tuple] = field(default=None, repr=False)

    def bins(self, g: FieldGrid):
        if self._bins is None:
            n = len(self.w)
            if n == 0:
                start = np.zeros(int(np.prod(g.shape)) + 1, dtype=np.int64)
                self._bins = (start, np.zeros(0), np.zeros(0, dtype=np.int32))
                return self._bins
            u = (self.x - g.origin) / g.h
            idx, lam = _cic(u)
            flat = _flat_index(g.shape, idx).ravel()
            cw = (lam * self.w[:, None]).ravel() / g.cell_volume
            owner = np.repeat(np.arange(n, dtype=np.int32), 8)
            keep = cw != 0
            flat, cw, owner = flat[keep], cw[keep], owner[keep]
            order = np.argsort(flat, kind="stable")
            flat, cw, owner = flat[order], cw[order], owner[order]
            counts = np.bincount(flat, minlength=int(np.prod(g.shape)))
            start = np.concatenate([[0], np.cumsum(counts)]).astype(np.int64)
            # particle data stays unexpanded; the kernel looks it up through ``owner``
            self._bins = (start, np.ascontiguousarray(cw), np.ascontiguousarray(owner))
        return self._bins

    def gather(self, g: FieldGrid, points, omegas, pw, pw2) -> np.ndarray:
        start, cw, owner = self.bins(g)
        P = np.ascontiguousarray(self.p, dtype=float).reshape(-1, 3)
        L = np.ascontiguousarray(self.L, dtype=float).reshape(-1, 3) if self.L is not None else P
        return _gather_kernel(np.ascontiguousarray(points), np.ascontiguousarray(omegas),
                              np.ascontiguousarray(pw), np.ascontiguousarray(pw2),
                              start, cw, owner, P, L, self.L is not None,
                              g.shape[0], g.shape[1], g.shape[2],
                              g.origin[0], g.origin[1], g.origin[2], g.h, g.periodic)


class MissingFieldError(ValueError):
    pass


@dataclass
class HistoryBuffer:
    """Append-only, uniformly spaced snapshots on a fixed binning grid."""

    dt: float
    grid: FieldGrid
    snapshots: List[Snapshot] = field(default_factory=list)

    @property
    def t_min(self) -> float:
        return self.snapshots[0].t

    @property
    def t_max(self) -> float:
        return self.snapshots[-1].t

    @property
    def horizon(self) -> float:
        return self.t_max - self.t_min if self.snapshots else -np.inf

    def __len__(self) -> int:
        return len(self.snapshots)

    def append(self, snap: Snapshot) -> None:
        if self.snapshots:
            gap = snap.t - self.t_max
            if not abs(gap - self.dt) <= 1e-9 * max(1.0, abs(self.dt)):
                raise ValueError(f"snapshot spacing {gap:.6g} differs from dt={self.dt:.6g}")
        self.snapshots.append(snap)

    def sources_at(self, tau: float):
        """``[(weight, snapshot)]`` giving linear interpolation in time at ``tau``."""
        if not self.snapshots:
            raise HorizonError("history is empty")
        r = (tau - self.t_min) / self.dt
        n = len(self.snapshots) - 1
        if r < -1e-9 or r > n + 1e-9:
            raise HorizonError(f"retarded time {tau:.6g} outside history [{self.t_min:.6g}, {self.t_max:.6g}]")
        k = int(round(r))
        if abs(r - k) < 1e-9:
            return [(1.0, self.snapshots[k])]
        k = int(np.floor(r))
        a = r - k
        return [(1.0 - a, self.snapshots[k]), (a, self.snapshots[k + 1])]

    def gather(self, tau, points, omegas, pw, pw2) -> np.ndarray:
        out = np.zeros((6, 3))
        for a, snap in self.sources_at(tau):
            out += a * snap.gather(self.grid, points, omegas, pw, pw2)
        return out

    def initial_gather(self, points, omegas, pw) -> np.ndarray:
        return self.snapshots[0].gather(self.grid, points, omegas, pw, np.zeros_like(pw))

    def scaled_fields(self, factor: float) -> "HistoryBuffer":
        """Copy with every stored force ``L`` and field grid multiplied by ``factor``."""
        snaps = []
        for s in self.snapshots:
            g = None
            if s.grid is not None:
                g = s.grid.copy()
                g.E *= factor
                g.B *= factor
            snaps.append(Snapshot(s.t, s.x, s.p, s.w, None if s.L is None else s.L * factor, g))
        return HistoryBuffer(self.dt, self.grid, snaps)

    def superpose(self, other: "HistoryBuffer") -> "HistoryBuffer":
        """History whose density is the sum of both (forces kept per particle)."""
        if len(other) != len(self):
            raise ValueError("histories must have equal length")
        snaps = []
        for s, o in zip(self.snapshots, other.snapshots):
            L = None
            if s.L is not None or o.L is not None:
                L = np.concatenate([s.L if s.L is not None else np.zeros_like(s.x),
                                    o.L if o.L is not None else np.zeros_like(o.x)])
            snaps.append(Snapshot(s.t, np.concatenate([s.x, o.x]), np.concatenate([s.p, o.p]),
                                  np.concatenate([s.w, o.w]), L))
        return HistoryBuffer(self.dt, self.grid, snaps)


@dataclass
class ColdHistory:
    """Analytic beam ``f = rho(t, x) delta(p - p0)`` with optional force field ``L(t, x)``."""

    density: Callable[[float, np.ndarray], np.ndarray]
    momentum: np.ndarray = field(default_factory=lambda: np.zeros(3))
    force: Optional[Callable[[float, np.ndarray], np.ndarray]] = None
    dt: float = 0.01
    t_min: float = 0.0
    t_max: float = np.inf

    @property
    def horizon(self) -> float:
        return self.t_max - self.t_min

    def _sums(self, tau, points, omegas, pw, pw2) -> np.ndarray:
        if tau < self.t_min - 1e-12 or tau > self.t_max + 1e-12:
            raise HorizonError(f"retarded time {tau:.6g} outside history")
        rho = np.asarray(self.density(tau, points), dtype=float)
        p = np.broadcast_to(np.asarray(self.momentum, dtype=float), omegas.shape)
        K = eval_kernels(omegas, p)
        c = (pw * rho)[:, None]
        out = np.zeros((6, 3))
        out[0] = np.sum(c * K.E_DT, 0)
        out[1] = np.sum(c * K.B_DT, 0)
        out[2] = np.sum(c * K.E_flat, 0)
        out[3] = np.sum(c * K.B_flat, 0)
        if self.force is not None:
            L = np.asarray(self.force(tau, points), dtype=float)
            Ez, Bz = apply_sharp(omegas, p, L)
            c2 = (pw2 * rho)[:, None]
            out[4] = np.sum(c2 * Ez, 0)
            out[5] = np.sum(c2 * Bz, 0)
        return out

    def gather(self, tau, points, omegas, pw, pw2) -> np.ndarray:
        return self._sums(tau, points, omegas, pw, pw2)

    def initial_gather(self, points, omegas, pw) -> np.ndarray:
        return self._sums(self.t_min, points, omegas, pw, np.zeros_like(pw))


# ---------------------------------------------------------------- reconstruction

def default_shell_rule(h: float, nodes_per_cell: float = 1.5, n_min: int = 16, n_max: int = 96):
    """Shell rules whose node spacing tracks the binning spacing ``h``."""
    cache: Dict[int, SphereRule] = {}

    def rule(s: float) -> SphereRule:
        n = int(np.clip(np.ceil(nodes_per_cell * np.pi * s / h), n_min, n_max))
        if n not in cache:
            cache[n] = SphereRule.gauss_product(n, 2 * n)
        return cache[n]
    return rule


def _history_sampler(history, sampler: Optional[LightConeSampler]) -> LightConeSampler:
    if sampler is not None:
        return sampler
    h = history.grid.h if isinstance(history, HistoryBuffer) else 0.1
    return LightConeSampler(history.dt, default_shell_rule(h), history.horizon)


def _cone_terms(history, t: float, x: np.ndarray, sampler: LightConeSampler) -> np.ndarray:
    """Raw ``(flat, sharp)`` sums at one probe: array ``(4, 3)`` of E_flat, B_flat, E_sharp, B_sharp."""
    if t - history.t_min > history.horizon * (1 + 1e-12) + 1e-12:
        raise HorizonError(f"t - t_min = {t - history.t_min:.6g} exceeds horizon {history.horizon:.6g}")
    s_nodes, s_weights = sampler.shells(t - history.t_min)
    acc = np.zeros((6, 3))
    for s, ws in zip(s_nodes, s_weights):
        if ws == 0:
            continue
        # the s = 0 shell matters: the flat kernel has non-zero sphere mean for v != 0
        rule = sampler.rule_for(s)
        pts = x[None, :] + s * rule.nodes
        pw = ws * rule.weights
        acc += history.gather(t - s, pts, rule.nodes, pw, pw * s)
    return np.array([-acc[2], acc[3], -acc[4], acc[5]]) / FOUR_PI


def field_flat(history, t: float, x, sampler: Optional[LightConeSampler] = None):
    """``(E_flat, B_flat)`` at probe(s) ``x``."""
    sampler = _history_sampler(history, sampler)
    xs = np.atleast_2d(np.asarray(x, dtype=float))
    res = np.array([_cone_terms(history, t, xi, sampler)[:2] for xi in xs])
    return (res[0, 0], res[0, 1]) if np.ndim(x) == 1 else (res[:, 0], res[:, 1])


def field_sharp(history, t: float, x, sampler: Optional[LightConeSampler] = None):
    """``(E_sharp, B_sharp)`` at probe(s) ``x``; needs the stored forces."""
    if isinstance(history, HistoryBuffer) and any(s.L is None for s in history.snapshots):
        raise MissingFieldError("history lacks stored forces for the sharp term")
    sampler = _history_sampler(history, sampler)
    xs = np.atleast_2d(np.asarray(x, dtype=float))
    res = np.array([_cone_terms(history, t, xi, sampler)[2:] for xi in xs])
    return (res[0, 0], res[0, 1]) if np.ndim(x) == 1 else (res[:, 0], res[:, 1])


@dataclass
class FieldData:
    """Initial fields and their time derivatives as spectral interpolants."""

    E0: FourierField
    B0: FourierField
    Et0: FourierField
    Bt0: FourierField

    @classmethod
    def from_grid(cls, g: FieldGrid, include_current: bool = True) -> "FieldData":
        """``E_t = curl B - j`` and ``B_t = -curl E`` at the grid time."""
        E0 = FourierField.electric(g)
        B0 = FourierField.magnetic(g)
        Et0 = B0.curl()
        if include_current:
            Et0 = Et0 - FourierField.current(g)
        Bt0 = E0.curl().scale(-1.0)
        return cls(E0, B0, Et0, Bt0)


def data_terms(data: FieldData, t: float, x: np.ndarray, rule: SphereRule):
    """Kirchhoff terms ``E_D``, ``B_D`` at one probe.

    ``d/dt (t M_t u) = M_t u + t M_t[(w . grad) u]`` with ``M_t`` the sphere mean.
    """
    x = np.asarray(x, dtype=float)
    if t == 0:
        return data.E0(x[None])[0], data.B0(x[None])[0]
    pts = x[None, :] + t * rule.nodes
    wm = rule.weights / FOUR_PI
    out = []
    for u, ut in ((data.E0, data.Et0), (data.B0, data.Bt0)):
        val = u(pts)
        dirn = np.einsum("nij,nj->ni", u.gradient(pts), rule.nodes)
        out.append(wm @ val + t * (wm @ dirn) + t * (wm @ ut(pts)))
    return out[0], out[1]


def dt_terms(history, t: float, x: np.ndarray, rule: SphereRule):
    """Shell integral of the initial density: ``(E_DT, B_DT)``."""
    if t == 0:
        return np.zeros(3), np.zeros(3)
    pts = x[None, :] + t * rule.nodes
    acc = history.initial_gather(pts, rule.nodes, rule.weights)
    return -t * acc[0] / FOUR_PI, t * acc[1] / FOUR_PI


@dataclass
class FieldReconstruction:
    t: float
    x: np.ndarray
    E: np.ndarray
    B: np.ndarray
    terms: Dict[str, Tuple[np.ndarray, np.ndarray]]


def reconstruct_fields(history, initial_data: FieldData, t: float, x,
                       sampler: Optional[LightConeSampler] = None,
                       data_rule: Optional[SphereRule] = None) -> List[FieldReconstruction]:
    """Sum of data, DT, flat and sharp terms at each probe, with the breakdown."""
    if isinstance(initial_data, FieldGrid):
        initial_data = FieldData.from_grid(initial_data)
    sampler = _history_sampler(history, sampler)
    data_rule = data_rule or SphereRule.gauss_product(48, 96)
    tau = t - history.t_min
    has_force = not (isinstance(history, HistoryBuffer) and any(s.L is None for s in history.snapshots))
    if isinstance(history, ColdHistory):
        has_force = history.force is not None
    out = []
    for xi in np.atleast_2d(np.asarray(x, dtype=float)):
        ED, BD = data_terms(initial_data, tau, xi, data_rule)
        EDT, BDT = dt_terms(history, tau, xi, sampler.rule_for(tau) if tau > 0 else data_rule)
        cone = _cone_terms(history, t, xi, sampler)
        terms = {"D": (ED, BD), "DT": (EDT, BDT), "flat": (cone[0], cone[1]),
                 "sharp": (cone[2], cone[3]) if has_force else (np.zeros(3), np.zeros(3))}
        E = sum(v[0] for v in terms.values())
        B = sum(v[1] for v in terms.values())
        out.append(FieldReconstruction(t, xi, E, B, terms))
    return out


def write_probe_csv(path, recs: Sequence[FieldReconstruction]) -> None:
    """One row per probe and term (plus ``total``)."""
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(["t", "x1", "x2", "x3", "component", "E1", "E2", "E3", "B1", "B2", "B3"])
        for r in recs:
            rows = [("total", (r.E, r.B))] + list(r.terms.items())
            for name, (E, B) in rows:
                wr.writerow([f"{r.t:.17g}", *(f"{v:.17g}" for v in r.x), name,
                             *(f"{v:.17g}" for v in E), *(f"{v:.17g}" for v in B)])
