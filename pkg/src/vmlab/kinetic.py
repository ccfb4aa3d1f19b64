"""Phase-space data model and characteristic transport.

Units are c = m = q = 1. Positions ``x`` and momenta ``p`` are stored as
``(n, 3)`` float arrays; a weighted particle carries the phase-space measure
``w`` of the lattice cell it was sampled from, so that sums over particles
approximate integrals of the density ``f(t, x, p)``.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable, Optional, Tuple

import numpy as np

FieldSampler = Callable[[float, np.ndarray], Tuple[np.ndarray, np.ndarray]]


class PushError(RuntimeError):
    """Raised when the field sampler fails at an integrator stage."""


def _require_finite(name: str, a: np.ndarray) -> None:
    if not np.all(np.isfinite(a)):
        raise ValueError(f"{name} contains non-finite components")


def lorentz_factor(p: np.ndarray) -> np.ndarray:
    p = np.asarray(p, dtype=float)
    return np.sqrt(1.0 + np.sum(p * p, axis=-1))


def velocity_of_momentum(p: np.ndarray) -> np.ndarray:
    """Relativistic velocity ``p / sqrt(1 + |p|^2)``; always ``|v| < 1``."""
    p = np.asarray(p, dtype=float)
    _require_finite("momentum", p)
    return p / lorentz_factor(p)[..., None]


def momentum_of_velocity(v: np.ndarray) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    _require_finite("velocity", v)
    v2 = np.sum(v * v, axis=-1)
    if np.any(v2 >= 1.0):
        raise ValueError("velocity must satisfy |v| < 1")
    return v / np.sqrt(1.0 - v2)[..., None]


def lorentz_force(E: np.ndarray, B: np.ndarray, v: np.ndarray) -> np.ndarray:
    """``E + v x B`` for broadcastable ``(..., 3)`` arrays."""
    E = np.asarray(E, dtype=float)
    B = np.asarray(B, dtype=float)
    v = np.asarray(v, dtype=float)
    for name, a in (("E", E), ("B", B), ("v", v)):
        _require_finite(name, a)
    return E + np.cross(v, B)


@dataclass
class ParticleState:
    x: np.ndarray
    p: np.ndarray
    w: float = 1.0

    def __post_init__(self):
        self.x = np.asarray(self.x, dtype=float).reshape(3)
        self.p = np.asarray(self.p, dtype=float).reshape(3)
        if self.w < 0:
            raise ValueError("particle weight must be non-negative")

    @property
    def v(self) -> np.ndarray:
        return velocity_of_momentum(self.p)


@dataclass
class Ensemble:
    """Weighted phase-space samples of ``f`` at time ``t``.

    ``f_sup`` and the support radii come from the analytic initial data, not
    from the particles.
    """

    x: np.ndarray
    p: np.ndarray
    w: np.ndarray
    t: float = 0.0
    f_sup: float = 0.0
    support_radius_x: float = np.inf
    support_radius_p: float = np.inf

    def __post_init__(self):
        self.x = np.asarray(self.x, dtype=float).reshape(-1, 3)
        self.p = np.asarray(self.p, dtype=float).reshape(-1, 3)
        self.w = np.asarray(self.w, dtype=float).reshape(-1)
        if not (len(self.x) == len(self.p) == len(self.w)):
            raise ValueError("x, p and w must have the same length")
        if np.any(self.w < 0):
            raise ValueError("weights must be non-negative")
        if not np.all(np.isfinite(self.p)):
            raise ValueError("momenta must be finite")

    @classmethod
    def empty(cls, t: float = 0.0) -> "Ensemble":
        return cls(np.zeros((0, 3)), np.zeros((0, 3)), np.zeros(0), t=t)

    def __len__(self) -> int:
        return len(self.w)

    @property
    def v(self) -> np.ndarray:
        return velocity_of_momentum(self.p)

    @property
    def total_weight(self) -> float:
        return float(np.sum(self.w))

    def particle(self, i: int) -> ParticleState:
        return ParticleState(self.x[i].copy(), self.p[i].copy(), float(self.w[i]))

    def copy(self) -> "Ensemble":
        return replace(self, x=self.x.copy(), p=self.p.copy(), w=self.w.copy())

    def scaled(self, factor: float) -> "Ensemble":
        return replace(self, x=self.x.copy(), p=self.p.copy(), w=self.w * factor)


def smooth_bump(r: np.ndarray) -> np.ndarray:
    """C^2 compactly supported profile ``(1 - r^2)^3`` on ``r < 1``."""
    r = np.asarray(r, dtype=float)
    return np.where(r < 1.0, (1.0 - np.minimum(r, 1.0) ** 2) ** 3, 0.0)


@dataclass
class InitialData:
    """Analytic initial density with declared compact support.

    ``E0``/``B0`` are pointwise field evaluators; ``None`` means the runner
    solves for a Gauss-consistent ``E0`` on its grid (and ``B0 = 0``).
    """

    f0: Callable[[np.ndarray, np.ndarray], np.ndarray]
    support_radius_x: float
    support_radius_p: float
    f_sup: float
    center_x: np.ndarray = field(default_factory=lambda: np.zeros(3))
    center_p: np.ndarray = field(default_factory=lambda: np.zeros(3))
    E0: Optional[Callable[[np.ndarray], np.ndarray]] = None
    B0: Optional[Callable[[np.ndarray], np.ndarray]] = None

    def __post_init__(self):
        self.center_x = np.asarray(self.center_x, dtype=float)
        self.center_p = np.asarray(self.center_p, dtype=float)


def bump_initial_data(amplitude: float = 1.0, radius_x: float = 1.0, radius_p: float = 1.0,
                      center_x=(0.0, 0.0, 0.0), center_p=(0.0, 0.0, 0.0)) -> InitialData:
    """Product of smooth bumps in x and p: ``A b(|x-c|/Rx) b(|p-q|/Rp)``."""
    cx = np.asarray(center_x, dtype=float)
    cp = np.asarray(center_p, dtype=float)

    def f0(x, p):
        rx = np.linalg.norm(np.asarray(x) - cx, axis=-1) / radius_x
        rp = np.linalg.norm(np.asarray(p) - cp, axis=-1) / radius_p
        return amplitude * smooth_bump(rx) * smooth_bump(rp)

    return InitialData(f0=f0, support_radius_x=radius_x + float(np.linalg.norm(cx)),
                       support_radius_p=radius_p + float(np.linalg.norm(cp)),
                       f_sup=float(amplitude), center_x=cx, center_p=cp)


def sample_lattice(init: InitialData, n_x: int, n_p: int, t: float = 0.0) -> Ensemble:
    """Deterministic cell-centred phase-space lattice sampling of ``f0``.

    The lattice covers the cubes circumscribing the declared supports; points
    where ``f0`` vanishes are dropped.
    """
    rx = init.support_radius_x - float(np.linalg.norm(init.center_x))
    rp = init.support_radius_p - float(np.linalg.norm(init.center_p))
    hx = 2.0 * rx / n_x
    hp = 2.0 * rp / n_p
    gx = -rx + hx * (np.arange(n_x) + 0.5)
    gp = -rp + hp * (np.arange(n_p) + 0.5)
    X = np.stack(np.meshgrid(gx, gx, gx, indexing="ij"), axis=-1).reshape(-1, 3) + init.center_x
    P = np.stack(np.meshgrid(gp, gp, gp, indexing="ij"), axis=-1).reshape(-1, 3) + init.center_p
    xs = np.repeat(X, len(P), axis=0)
    ps = np.tile(P, (len(X), 1))
    w = init.f0(xs, ps) * hx**3 * hp**3
    keep = w > 0
    return Ensemble(xs[keep], ps[keep], w[keep], t=t, f_sup=init.f_sup,
                    support_radius_x=init.support_radius_x,
                    support_radius_p=init.support_radius_p)


def _sample(sampler: FieldSampler, t: float, x: np.ndarray, stage: str):
    try:
        E, B = sampler(t, x)
    except Exception as exc:  # noqa: BLE001 - re-raised with context
        raise PushError(f"field sampler failed at stage {stage}, t={t:.6g}: {exc}") from exc
    E = np.broadcast_to(np.asarray(E, dtype=float), x.shape)
    B = np.broadcast_to(np.asarray(B, dtype=float), x.shape)
    if not (np.all(np.isfinite(E)) and np.all(np.isfinite(B))):
        raise PushError(f"field sampler returned non-finite values at stage {stage}, t={t:.6g}")
    return E, B


def _rhs(sampler, t, x, p, stage):
    v = p / lorentz_factor(p)[:, None]
    E, B = _sample(sampler, t, x, stage)
    return v, E + np.cross(v, B)


def rk4_step(x: np.ndarray, p: np.ndarray, t: float, dt: float, sampler: FieldSampler):
    """Classical RK4 for ``dX/dt = V``, ``dP/dt = E + V x B``."""
    k1x, k1p = _rhs(sampler, t, x, p, "k1")
    k2x, k2p = _rhs(sampler, t + dt / 2, x + dt / 2 * k1x, p + dt / 2 * k1p, "k2")
    k3x, k3p = _rhs(sampler, t + dt / 2, x + dt / 2 * k2x, p + dt / 2 * k2p, "k3")
    k4x, k4p = _rhs(sampler, t + dt, x + dt * k3x, p + dt * k3p, "k4")
    xn = x + dt / 6 * (k1x + 2 * k2x + 2 * k3x + k4x)
    pn = p + dt / 6 * (k1p + 2 * k2p + 2 * k3p + k4p)
    return xn, pn


def boris_kick(p: np.ndarray, E: np.ndarray, B: np.ndarray, dt: float) -> np.ndarray:
    """Boris momentum update over ``dt`` with fields held fixed.

    Exactly preserves ``|p|`` when ``E = 0``.
    """
    p_minus = p + 0.5 * dt * E
    t_vec = 0.5 * dt * B / lorentz_factor(p_minus)[:, None]
    p_prime = p_minus + np.cross(p_minus, t_vec)
    s_vec = 2.0 * t_vec / (1.0 + np.sum(t_vec * t_vec, axis=1))[:, None]
    p_plus = p_minus + np.cross(p_prime, s_vec)
    return p_plus + 0.5 * dt * E


def boris_step(x: np.ndarray, p: np.ndarray, t: float, dt: float, sampler: FieldSampler):
    """Time-centred drift-kick-drift step with a Boris kick at ``t + dt/2``."""
    xh = x + 0.5 * dt * p / lorentz_factor(p)[:, None]
    E, B = _sample(sampler, t + 0.5 * dt, xh, "boris")
    pn = boris_kick(p, E, B, dt)
    xn = xh + 0.5 * dt * pn / lorentz_factor(pn)[:, None]
    return xn, pn


_STEPPERS = {"rk4": rk4_step, "boris": boris_step}


def advance(x, p, t, dt, sampler, method="rk4"):
    if not np.isfinite(dt):
        raise ValueError("dt must be finite")
    if dt == 0 or len(x) == 0:
        return x.copy(), p.copy()
    try:
        stepper = _STEPPERS[method]
    except KeyError:
        raise ValueError(f"unknown integrator {method!r}; choose from {sorted(_STEPPERS)}") from None
    return stepper(x, p, t, dt, sampler)


def push_characteristic(s: ParticleState, field_sampler: FieldSampler, dt: float,
                        t: float = 0.0, method: str = "rk4") -> ParticleState:
    xn, pn = advance(s.x[None, :], s.p[None, :], t, dt, field_sampler, method)
    return ParticleState(xn[0], pn[0], s.w)


def transport_ensemble(e: Ensemble, field_sampler: FieldSampler, dt: float,
                       method: str = "rk4") -> Ensemble:
    """Advance every particle by one step; weights and ``f_sup`` are untouched.

    Negative ``dt`` integrates backwards in time.
    """
    xn, pn = advance(e.x, e.p, e.t, dt, field_sampler, method)
    return replace(e, x=xn, p=pn, w=e.w.copy(), t=e.t + dt)


def flow_jacobian(x: np.ndarray, p: np.ndarray, t: float, dt: float, sampler: FieldSampler,
                  eps: float = 1e-6, method: str = "rk4") -> np.ndarray:
    """Central finite-difference Jacobian of the one-step map at one point."""
    z = np.concatenate([np.asarray(x, float), np.asarray(p, float)])
    J = np.empty((6, 6))
    for j in range(6):
        dz = np.zeros(6)
        dz[j] = eps
        zp, zm = z + dz, z - dz
        xp, pp = advance(zp[None, :3], zp[None, 3:], t, dt, sampler, method)
        xm, pm = advance(zm[None, :3], zm[None, 3:], t, dt, sampler, method)
        J[:, j] = (np.concatenate([xp[0], pp[0]]) - np.concatenate([xm[0], pm[0]])) / (2 * eps)
    return J


def uniform_fields(E=(0.0, 0.0, 0.0), B=(0.0, 0.0, 0.0)) -> FieldSampler:
    E = np.asarray(E, dtype=float)
    B = np.asarray(B, dtype=float)

    def sampler(t, x):
        n = len(x)
        return np.broadcast_to(E, (n, 3)), np.broadcast_to(B, (n, 3))

    return sampler
