"""Staggered-grid Maxwell solver, charge-conserving deposition and field sampling.

Layout (offsets in cell units from node ``origin + i h``)::

    rho          (0, 0, 0)
    E_x, j_x     (1/2, 0, 0)     and cyclic
    B_x          (0, 1/2, 1/2)   and cyclic

Stencils wrap periodically. In ``periodic=False`` mode the stencils still
wrap, but particles must stay inside the interpolation region and an optional
damping layer absorbs outgoing radiation (which breaks exact conservation).
"""
from __future__ import annotations

import csv
import struct
import zlib
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence, Tuple

import numba
import numpy as np

from .kinetic import Ensemble, velocity_of_momentum

E_OFFSETS = np.array([[0.5, 0, 0], [0, 0.5, 0], [0, 0, 0.5]])
B_OFFSETS = np.array([[0, 0.5, 0.5], [0.5, 0, 0.5], [0.5, 0.5, 0]])
SNAPSHOT_MAGIC = b"VMXG"
SNAPSHOT_VERSION = 1


class StabilityError(ValueError):
    pass


class OutOfBoxError(ValueError):
    pass


class SnapshotError(IOError):
    pass


@dataclass
class FieldGrid:
    shape: Tuple[int, int, int]
    h: float
    origin: np.ndarray
    E: np.ndarray
    B: np.ndarray
    rho: np.ndarray
    j: np.ndarray
    t: float = 0.0
    periodic: bool = True
    damping_cells: int = 0
    damping_strength: float = 0.0

    @classmethod
    def zeros(cls, shape, h: float, origin=(0.0, 0.0, 0.0), **kw) -> "FieldGrid":
        shape = tuple(int(n) for n in shape)
        if len(shape) != 3 or min(shape) < 2:
            raise ValueError("grid needs three dimensions of at least 2 nodes")
        if not h > 0:
            raise ValueError("spacing must be positive")
        z3 = np.zeros((3,) + shape)
        return cls(shape, float(h), np.asarray(origin, dtype=float), z3.copy(), z3.copy(),
                   np.zeros(shape), z3.copy(), **kw)

    @classmethod
    def cube(cls, n: int, half_width: float, **kw) -> "FieldGrid":
        """``n^3`` periodic box covering ``[-half_width, half_width)^3``."""
        h = 2 * half_width / n
        return cls.zeros((n, n, n), h, (-half_width,) * 3, **kw)

    @property
    def conservative(self) -> bool:
        return self.damping_cells == 0 or self.damping_strength == 0

    @property
    def lengths(self) -> np.ndarray:
        return self.h * np.array(self.shape, dtype=float)

    @property
    def cell_volume(self) -> float:
        return self.h**3

    def copy(self) -> "FieldGrid":
        return replace(self, origin=self.origin.copy(), E=self.E.copy(), B=self.B.copy(),
                       rho=self.rho.copy(), j=self.j.copy())

    def coords(self, offset=(0.0, 0.0, 0.0)) -> np.ndarray:
        """Positions of the points ``origin + (i + offset) h``, shape ``(3, nx, ny, nz)``."""
        axes = [self.origin[d] + (np.arange(self.shape[d]) + offset[d]) * self.h for d in range(3)]
        return np.array(np.meshgrid(*axes, indexing="ij"))

    def field_energy(self) -> float:
        return 0.5 * self.h**3 * float(np.sum(self.E**2) + np.sum(self.B**2))


def _fwd(a, axis, h):
    return (np.roll(a, -1, axis=axis) - a) / h


def _bwd(a, axis, h):
    return (a - np.roll(a, 1, axis=axis)) / h


def curl_E(E: np.ndarray, h: float) -> np.ndarray:
    """Curl of an edge field, located at face (B) points."""
    return np.array([
        _fwd(E[2], 1, h) - _fwd(E[1], 2, h),
        _fwd(E[0], 2, h) - _fwd(E[2], 0, h),
        _fwd(E[1], 0, h) - _fwd(E[0], 1, h),
    ])


def curl_B(B: np.ndarray, h: float) -> np.ndarray:
    """Curl of a face field, located at edge (E) points."""
    return np.array([
        _bwd(B[2], 1, h) - _bwd(B[1], 2, h),
        _bwd(B[0], 2, h) - _bwd(B[2], 0, h),
        _bwd(B[1], 0, h) - _bwd(B[0], 1, h),
    ])


def div_E(E: np.ndarray, h: float) -> np.ndarray:
    return _bwd(E[0], 0, h) + _bwd(E[1], 1, h) + _bwd(E[2], 2, h)


def div_B(B: np.ndarray, h: float) -> np.ndarray:
    return _fwd(B[0], 0, h) + _fwd(B[1], 1, h) + _fwd(B[2], 2, h)


def grad_node(phi: np.ndarray, h: float) -> np.ndarray:
    """Gradient of a nodal scalar, located at edge points."""
    return np.array([_fwd(phi, d, h) for d in range(3)])


def max_stable_dt(h: float) -> float:
    return h / np.sqrt(3.0)


def _damping_factor(g: FieldGrid, dt: float) -> Optional[np.ndarray]:
    if g.conservative:
        return None
    prof = []
    for n in g.shape:
        i = np.arange(n, dtype=float)
        depth = np.maximum(g.damping_cells - np.minimum(i, n - 1 - i), 0.0) / g.damping_cells
        prof.append(depth**2)
    sig = g.damping_strength * (prof[0][:, None, None] + prof[1][None, :, None] + prof[2][None, None, :])
    return np.exp(-sig * dt)


def step_maxwell(g: FieldGrid, dt: float) -> FieldGrid:
    """One leapfrog step: half B, full E with ``g.j`` as the mid-step current, half B."""
    if dt > max_stable_dt(g.h) * (1 + 1e-12):
        raise StabilityError(f"dt={dt:.6g} violates stability; need dt <= h/sqrt(3) = {max_stable_dt(g.h):.6g}")
    out = g.copy()
    out.B -= 0.5 * dt * curl_E(out.E, g.h)
    out.E += dt * (curl_B(out.B, g.h) - out.j)
    out.B -= 0.5 * dt * curl_E(out.E, g.h)
    damp = _damping_factor(g, dt)
    if damp is not None:
        out.E *= damp
        out.B *= damp
    out.t = g.t + dt
    return out


def plane_wave_frequency(k: Sequence[float], h: float, dt: float) -> float:
    """Frequency solving the discrete dispersion relation of the leapfrog scheme."""
    s = np.sqrt(np.sum((np.sin(np.asarray(k) * h / 2) / h) ** 2))
    return 2.0 / dt * np.arcsin(dt * s)


# ---------------------------------------------------------------- deposition

def _grid_coords(g: FieldGrid, x: np.ndarray, offset=(0.0, 0.0, 0.0)) -> np.ndarray:
    """Continuous index coordinates of positions relative to the shifted lattice."""
    u = (np.asarray(x, dtype=float).reshape(-1, 3) - g.origin) / g.h - np.asarray(offset)
    if not g.periodic:
        n = np.array(g.shape) - 1
        bad = np.any((u < 0) | (u > n), axis=1)
        if np.any(bad):
            i = int(np.flatnonzero(bad)[0])
            raise OutOfBoxError(f"position {np.asarray(x).reshape(-1, 3)[i].tolist()} outside grid box")
    return u


def _cic(u: np.ndarray):
    """Corner indices ``(n, 8, 3)`` and weights ``(n, 8)`` of trilinear weighting."""
    i0 = np.floor(u).astype(np.int64)
    f = u - i0
    corners = np.array([[a, b, c] for a in (0, 1) for b in (0, 1) for c in (0, 1)])
    idx = i0[:, None, :] + corners[None]
    w = np.prod(np.where(corners[None] == 1, f[:, None, :], 1.0 - f[:, None, :]), axis=2)
    return idx, w


def _flat_index(shape, idx: np.ndarray) -> np.ndarray:
    idx = np.mod(idx, np.array(shape))
    return np.ravel_multi_index(tuple(np.moveaxis(idx, -1, 0)), shape)


def _scatter(shape, idx: np.ndarray, vals: np.ndarray) -> np.ndarray:
    flat = _flat_index(shape, idx).ravel()
    n = int(np.prod(shape))
    return np.bincount(flat, weights=vals.ravel(), minlength=n).reshape(shape)


def deposit_rho(g: FieldGrid, x: np.ndarray, w: np.ndarray) -> np.ndarray:
    if len(w) == 0:
        return np.zeros(g.shape)
    idx, wc = _cic(_grid_coords(g, x))
    return _scatter(g.shape, idx, wc * w[:, None]) / g.cell_volume


def deposit_current_instant(g: FieldGrid, x: np.ndarray, p: np.ndarray, w: np.ndarray) -> np.ndarray:
    """``sum w v S(x - x_k) / h^3`` at the edge points (not charge-conserving)."""
    j = np.zeros((3,) + g.shape)
    if len(w) == 0:
        return j
    v = velocity_of_momentum(p)
    for d in range(3):
        idx, wc = _cic(_grid_coords(g, x, E_OFFSETS[d]))
        j[d] = _scatter(g.shape, idx, wc * (w * v[:, d])[:, None]) / g.cell_volume
    return j


@numba.njit(cache=True)
def _esirkepov_kernel(u0, u1, coef, nx, ny, nz, periodic):
    """Sequential accumulation of the charge-conserving current (fixed order)."""
    j = np.zeros((3, nx, ny, nz))
    dims = (nx, ny, nz)
    S0 = np.zeros((3, 4))
    dS = np.zeros((3, 4))
    W = np.zeros((4, 4, 4))
    base = np.zeros(3, dtype=np.int64)
    idx = np.zeros(3, dtype=np.int64)
    for k in range(u0.shape[0]):
        for d in range(3):
            lo = min(u0[k, d], u1[k, d])
            base[d] = int(np.floor(lo))
            for m in range(4):
                node = base[d] + m
                s0 = max(0.0, 1.0 - abs(u0[k, d] - node))
                s1 = max(0.0, 1.0 - abs(u1[k, d] - node))
                S0[d, m] = s0
                dS[d, m] = s1 - s0
        for d in range(3):
            a = (d + 1) % 3
            b = (d + 2) % 3
            for m in range(4):
                for ma in range(4):
                    for mb in range(4):
                        W[m, ma, mb] = dS[d, m] * (S0[a, ma] * S0[b, mb]
                                                   + 0.5 * dS[a, ma] * S0[b, mb]
                                                   + 0.5 * S0[a, ma] * dS[b, mb]
                                                   + dS[a, ma] * dS[b, mb] / 3.0)
            for ma in range(4):
                for mb in range(4):
                    acc = 0.0
                    for m in range(4):
                        acc -= W[m, ma, mb] * coef[k]
                        if acc == 0.0:
                            continue
                        idx[d] = base[d] + m
                        idx[a] = base[a] + ma
                        idx[b] = base[b] + mb
                        inside = True
                        for q in range(3):
                            if periodic:
                                idx[q] = idx[q] % dims[q]
                            elif idx[q] < 0 or idx[q] >= dims[q]:
                                inside = False
                        if inside:
                            j[d, idx[0], idx[1], idx[2]] += acc
    return j


def deposit_current_esirkepov(g: FieldGrid, x_old: np.ndarray, x_new: np.ndarray, w: np.ndarray,
                              dt: float) -> np.ndarray:
    """Charge-conserving current for straight moves ``x_old -> x_new`` over ``dt``.

    Discrete continuity ``(rho_new - rho_old)/dt + div j = 0`` holds per node
    for the trilinear ``rho``. Moves must be shorter than one cell per axis.
    """
    if len(w) == 0:
        return np.zeros((3,) + g.shape)
    if dt <= 0:
        raise ValueError("dt must be positive")
    u0 = _grid_coords(g, x_old)
    u1 = _grid_coords(g, x_new)
    if np.any(np.abs(u1 - u0) >= 1.0):
        raise ValueError("particle moved a full cell or more in one step")
    coef = np.asarray(w, dtype=float) / (g.h**2 * dt)
    return _esirkepov_kernel(np.ascontiguousarray(u0), np.ascontiguousarray(u1), coef,
                             g.shape[0], g.shape[1], g.shape[2], g.periodic)


def deposit_sources(e: Ensemble, g: FieldGrid, x_old: Optional[np.ndarray] = None,
                    dt: Optional[float] = None) -> FieldGrid:
    """Grid copy carrying ``rho`` of ``e`` and a current.

    With ``x_old`` and ``dt`` the current is the charge-conserving one for the
    move ``x_old -> e.x``; otherwise the instantaneous ``sum w v S``.
    """
    out = g.copy()
    out.rho = deposit_rho(g, e.x, e.w)
    if x_old is not None:
        if dt is None:
            raise ValueError("dt required with x_old")
        out.j = deposit_current_esirkepov(g, x_old, e.x, e.w, dt)
    else:
        out.j = deposit_current_instant(g, e.x, e.p, e.w)
    return out


# ---------------------------------------------------------------- constraints

def _l2(a: np.ndarray, h: float) -> float:
    return float(np.sqrt(h**3 * np.sum(a**2)))


def gauss_defect(g: FieldGrid, neutralize: bool = True) -> np.ndarray:
    """``div E - (rho - mean rho)`` at nodes (mean subtracted for the periodic box)."""
    background = g.rho.mean() if neutralize else 0.0
    return div_E(g.E, g.h) - (g.rho - background)


def constraint_residuals(g: FieldGrid, neutralize: bool = True) -> Tuple[float, float]:
    """L2 norms of the Gauss defect and of ``div B``."""
    return _l2(gauss_defect(g, neutralize), g.h), _l2(div_B(g.B, g.h), g.h)


def _wavenumbers(g: FieldGrid):
    return [2 * np.pi * np.fft.fftfreq(n, d=g.h) for n in g.shape]


def coulomb_field(g: FieldGrid, mode: str = "discrete") -> np.ndarray:
    """Electrostatic field of ``rho - mean rho`` at the edge points.

    ``discrete`` solves the grid Poisson problem exactly (zero Gauss defect);
    ``spectral`` samples the continuum periodic Coulomb field of the
    trigonometric interpolant of ``rho``.
    """
    rho_hat = np.fft.fftn(g.rho)
    k = np.meshgrid(*_wavenumbers(g), indexing="ij")
    if mode == "discrete":
        sym = [2 * np.sin(kd * g.h / 2) / g.h for kd in k]
        k2 = sum(s**2 for s in sym)
        k2[0, 0, 0] = 1.0
        phi_hat = rho_hat / k2
        phi_hat[0, 0, 0] = 0.0
        return -grad_node(np.real(np.fft.ifftn(phi_hat)), g.h)
    if mode == "spectral":
        k2 = sum(kd**2 for kd in k)
        k2[0, 0, 0] = 1.0
        E = np.zeros((3,) + g.shape)
        for d in range(3):
            kd = k[d].copy()
            n = g.shape[d]
            if n % 2 == 0:
                kd[(slice(None),) * d + (n // 2,)] = 0.0
            shift = np.exp(1j * sum(k[a] * E_OFFSETS[d][a] * g.h for a in range(3)))
            Ehat = -1j * kd * rho_hat / k2 * shift
            Ehat[0, 0, 0] = 0.0
            E[d] = np.real(np.fft.ifftn(Ehat))
        return E
    raise ValueError(f"unknown mode {mode!r}")


def vector_potential_B(g: FieldGrid, A: np.ndarray) -> np.ndarray:
    """Face field ``curl A`` for an edge-located potential (discretely divergence-free)."""
    return curl_E(A, g.h)


# ---------------------------------------------------------------- sampling

def node_fields(g: FieldGrid) -> np.ndarray:
    """E and B averaged to nodes, shape ``(6, nx, ny, nz)``."""
    out = np.empty((6,) + g.shape)
    for d in range(3):
        out[d] = 0.5 * (g.E[d] + np.roll(g.E[d], 1, axis=d))
        a, b = (d + 1) % 3, (d + 2) % 3
        Bd = g.B[d]
        out[3 + d] = 0.25 * (Bd + np.roll(Bd, 1, axis=a) + np.roll(Bd, 1, axis=b)
                             + np.roll(np.roll(Bd, 1, axis=a), 1, axis=b))
    return out


def gather_nodes(g: FieldGrid, arrays: np.ndarray, x: np.ndarray) -> np.ndarray:
    """Trilinear interpolation of nodal ``arrays`` (leading component axis) at ``x``."""
    idx, wc = _cic(_grid_coords(g, x))
    flat = _flat_index(g.shape, idx)
    vals = arrays.reshape(arrays.shape[0], -1)[:, flat]
    return np.einsum("cnk,nk->nc", vals, wc)


def sample_fields(g: FieldGrid, x: np.ndarray, nodal: Optional[np.ndarray] = None):
    """E and B at ``x`` with the deposition's trilinear shape."""
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    nodal = node_fields(g) if nodal is None else nodal
    out = gather_nodes(g, nodal, x.reshape(-1, 3))
    E, B = out[:, :3], out[:, 3:]
    return (E[0], B[0]) if single else (E, B)


def grid_sampler(g: FieldGrid):
    """Field sampler ``(t, x) -> (E, B)`` frozen at the grid's current fields."""
    nodal = node_fields(g)

    def sampler(t, x):
        return sample_fields(g, x, nodal)
    return sampler


# ---------------------------------------------------------------- spectral fields

@dataclass
class FourierField:
    """Trigonometric interpolant of periodic grid data, evaluable anywhere.

    The represented function is the real part of the exponential sum, so
    derivatives and propagation act mode by mode, including the Nyquist modes.

    ``coeffs[c]`` are referenced to ``origin``: value ``sum_k c_k exp(i k.(x - origin))``.
    """

    coeffs: np.ndarray
    h: float
    origin: np.ndarray
    shape: Tuple[int, int, int]
    chunk_size: int = 4_000_000

    @classmethod
    def from_arrays(cls, arrays: np.ndarray, offsets: np.ndarray, h: float, origin) -> "FourierField":
        arrays = np.asarray(arrays, dtype=float)
        if arrays.ndim == 3:
            arrays = arrays[None]
            offsets = np.atleast_2d(offsets)
        shape = arrays.shape[1:]
        ks = [2 * np.pi * np.fft.fftfreq(n, d=h) for n in shape]
        K = np.meshgrid(*ks, indexing="ij")
        coeffs = np.empty(arrays.shape, dtype=complex)
        for c in range(arrays.shape[0]):
            phase = np.exp(-1j * sum(K[d] * offsets[c][d] * h for d in range(3)))
            coeffs[c] = np.fft.fftn(arrays[c]) / arrays[c].size * phase
        return cls(coeffs, float(h), np.asarray(origin, dtype=float), tuple(shape))

    @classmethod
    def electric(cls, g: FieldGrid) -> "FourierField":
        return cls.from_arrays(g.E, E_OFFSETS, g.h, g.origin)

    @classmethod
    def magnetic(cls, g: FieldGrid) -> "FourierField":
        return cls.from_arrays(g.B, B_OFFSETS, g.h, g.origin)

    @classmethod
    def current(cls, g: FieldGrid) -> "FourierField":
        return cls.from_arrays(g.j, E_OFFSETS, g.h, g.origin)

    def wavenumbers(self, drop_nyquist: bool = False):
        ks = []
        for n in self.shape:
            k = 2 * np.pi * np.fft.fftfreq(n, d=self.h)
            if drop_nyquist and n % 2 == 0:
                k[n // 2] = 0.0
            ks.append(k)
        return ks

    def _with(self, coeffs) -> "FourierField":
        return FourierField(coeffs, self.h, self.origin, self.shape, self.chunk_size)

    def __add__(self, other: "FourierField") -> "FourierField":
        return self._with(self.coeffs + other.coeffs)

    def __sub__(self, other: "FourierField") -> "FourierField":
        return self._with(self.coeffs - other.coeffs)

    def scale(self, a: float) -> "FourierField":
        return self._with(self.coeffs * a)

    def derivative(self, axis: int) -> "FourierField":
        k = self.wavenumbers()[axis]
        shp = [1, 1, 1]
        shp[axis] = -1
        return self._with(self.coeffs * (1j * k.reshape(shp))[None])

    def curl(self) -> "FourierField":
        if self.coeffs.shape[0] != 3:
            raise ValueError("curl needs a 3-component field")
        c = self.coeffs
        k = self.wavenumbers()
        K = np.meshgrid(*k, indexing="ij")
        ik = [1j * kd for kd in K]
        return self._with(np.array([ik[1] * c[2] - ik[2] * c[1],
                                    ik[2] * c[0] - ik[0] * c[2],
                                    ik[0] * c[1] - ik[1] * c[0]]))

    def __call__(self, x: np.ndarray) -> np.ndarray:
        """Values at points ``(n, 3)``, shape ``(n, ncomp)``."""
        x = np.asarray(x, dtype=float).reshape(-1, 3)
        ks = self.wavenumbers()
        nmodes = int(np.prod(self.shape))
        flat = self.coeffs.reshape(self.coeffs.shape[0], -1).T
        out = np.empty((len(x), self.coeffs.shape[0]))
        step = max(1, self.chunk_size // nmodes)
        for s in range(0, len(x), step):
            xs = x[s:s + step] - self.origin
            A = [np.exp(1j * xs[:, d, None] * ks[d][None, :]) for d in range(3)]
            M = (A[0][:, :, None, None] * A[1][:, None, :, None] * A[2][:, None, None, :]).reshape(len(xs), -1)
            out[s:s + step] = np.real(M @ flat)
        return out

    def gradient(self, x: np.ndarray) -> np.ndarray:
        """Jacobian at points, shape ``(n, ncomp, 3)``."""
        return np.stack([self.derivative(d)(x) for d in range(3)], axis=-1)


def propagate_vacuum(E0: FourierField, B0: FourierField, t: float,
                     Et0: Optional[FourierField] = None, Bt0: Optional[FourierField] = None):
    """Exact wave-equation evolution of spectral data.

    Each field solves ``u_tt = Laplace u``; the initial time derivatives
    default to the source-free Maxwell values ``curl B0`` and ``-curl E0``.
    """
    Et0 = E0._with(B0.curl().coeffs) if Et0 is None else Et0
    Bt0 = B0._with(-E0.curl().coeffs) if Bt0 is None else Bt0
    K = np.meshgrid(*E0.wavenumbers(), indexing="ij")
    kappa = np.sqrt(sum(k**2 for k in K))
    cos = np.cos(kappa * t)
    safe = np.where(kappa > 0, kappa, 1.0)
    sinc = np.where(kappa > 0, np.sin(kappa * t) / safe, t)
    E = E0._with(E0.coeffs * cos + Et0.coeffs * sinc)
    B = B0._with(B0.coeffs * cos + Bt0.coeffs * sinc)
    return E, B


# ---------------------------------------------------------------- IO

_HEADER = struct.Struct("<4sHIII2sd3ddB")


def write_snapshot(path, g: FieldGrid) -> None:
    """Flat float64 arrays (E, B, rho, j) behind a self-describing header and CRC32."""
    header = _HEADER.pack(SNAPSHOT_MAGIC, SNAPSHOT_VERSION, *g.shape, b"f8", g.h,
                          *g.origin, g.t, int(g.periodic))
    payload = np.concatenate([g.E.ravel(), g.B.ravel(), g.rho.ravel(), g.j.ravel()]).astype("<f8").tobytes()
    crc = zlib.crc32(header + payload)
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(payload)
        fh.write(struct.pack("<I", crc))


def read_snapshot(path) -> FieldGrid:
    with open(path, "rb") as fh:
        raw = fh.read()
    if len(raw) < _HEADER.size + 4:
        raise SnapshotError("snapshot truncated")
    magic, version, nx, ny, nz, dtype, h, ox, oy, oz, t, periodic = _HEADER.unpack_from(raw)
    if magic != SNAPSHOT_MAGIC:
        raise SnapshotError("not a grid snapshot")
    if version != SNAPSHOT_VERSION or dtype != b"f8":
        raise SnapshotError(f"unsupported snapshot version {version} / dtype {dtype!r}")
    n = nx * ny * nz
    expected = _HEADER.size + 10 * n * 8 + 4
    if len(raw) != expected:
        raise SnapshotError(f"snapshot size {len(raw)} != expected {expected}")
    (crc,) = struct.unpack_from("<I", raw, expected - 4)
    if zlib.crc32(raw[:expected - 4]) != crc:
        raise SnapshotError("checksum mismatch")
    data = np.frombuffer(raw, dtype="<f8", count=10 * n, offset=_HEADER.size)
    shape = (nx, ny, nz)
    g = FieldGrid.zeros(shape, h, (ox, oy, oz), t=t, periodic=bool(periodic))
    g.E = data[:3 * n].reshape((3,) + shape).copy()
    g.B = data[3 * n:6 * n].reshape((3,) + shape).copy()
    g.rho = data[6 * n:7 * n].reshape(shape).copy()
    g.j = data[7 * n:].reshape((3,) + shape).copy()
    return g


def write_residual_csv(path, rows) -> None:
    """Rows of ``(t, gauss_defect_l2, div_b_l2)``."""
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(["t", "div_E_minus_rho", "div_B"])
        for r in rows:
            wr.writerow([f"{float(v):.17g}" for v in r])
