"""Self-consistent particle/field leapfrog.

State at step ``n``: positions ``x^n``, momenta ``p^(n-1/2)``, fields
``E^n, B^n``. One step kicks with the fields at ``x^n``, drifts, deposits the
charge-conserving current ``j^(n+1/2)`` and advances Maxwell. The momentum
``p^n`` reported for step ``n`` is the mean of the two half-step momenta.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .fields import (FieldGrid, coulomb_field, deposit_current_esirkepov, deposit_current_instant,
                     deposit_rho, div_E, node_fields, sample_fields, step_maxwell)
from .glassey_strauss import Snapshot
from .kinetic import Ensemble, boris_kick, lorentz_factor, velocity_of_momentum


class InstabilityError(FloatingPointError):
    pass


@dataclass
class PICState:
    x: np.ndarray
    p_half: np.ndarray
    w: np.ndarray
    grid: FieldGrid
    step: int
    dt: float

    @property
    def t(self) -> float:
        return self.grid.t


@dataclass
class StepRecord:
    """Particle data at the time the step started, plus the continuity defect of the step."""

    snapshot: Snapshot
    continuity: float


def initialize(e: Ensemble, grid: FieldGrid, dt: float, solve_gauss: bool = True) -> PICState:
    """Deposit ``rho``, solve the Gauss law for ``E^0`` and back-kick ``p`` by ``dt/2``."""
    g = grid.copy()
    g.t = e.t
    g.rho = deposit_rho(g, e.x, e.w)
    g.j = deposit_current_instant(g, e.x, e.p, e.w)
    if solve_gauss:
        g.E = coulomb_field(g, "discrete")
    E, B = sample_fields(g, e.x) if len(e) else (np.zeros((0, 3)), np.zeros((0, 3)))
    p_half = boris_kick(e.p, E, B, -0.5 * dt) if len(e) else e.p.copy()
    return PICState(e.x.copy(), p_half, e.w.copy(), g, 0, dt)


def _snapshot(state: PICState, p_new: np.ndarray, E: np.ndarray, B: np.ndarray) -> Snapshot:
    p_now = 0.5 * (state.p_half + p_new)
    L = E + np.cross(velocity_of_momentum(p_now), B) if len(p_now) else np.zeros((0, 3))
    return Snapshot(state.t, state.x.copy(), p_now, state.w, L, state.grid.copy())


def step(state: PICState) -> StepRecord:
    """Advance ``state`` in place by one step; returns the record of the starting time."""
    dt = state.dt
    g = state.grid
    if len(state.w):
        E, B = sample_fields(g, state.x, node_fields(g))
        p_new = boris_kick(state.p_half, E, B, dt)
    else:
        E = B = np.zeros((0, 3))
        p_new = state.p_half.copy()
    snap = _snapshot(state, p_new, E, B)
    x_new = state.x + dt * velocity_of_momentum(p_new) if len(p_new) else state.x.copy()
    if not (np.all(np.isfinite(x_new)) and np.all(np.isfinite(p_new))):
        raise InstabilityError(f"non-finite particle state at t={state.t:.6g}")
    j = deposit_current_esirkepov(g, state.x, x_new, state.w, dt)
    rho_new = deposit_rho(g, x_new, state.w)
    continuity = float(np.max(np.abs((rho_new - g.rho) / dt + div_E(j, g.h))))
    g.j = j
    new = step_maxwell(g, dt)
    new.rho = rho_new
    if not (np.all(np.isfinite(new.E)) and np.all(np.isfinite(new.B))):
        raise InstabilityError(f"non-finite fields at t={new.t:.6g}")
    state.x, state.p_half, state.grid = x_new, p_new, new
    state.step += 1
    return StepRecord(snap, continuity)


def closing_snapshot(state: PICState) -> Snapshot:
    """Snapshot at the current time, using a momentum-only kick to centre ``p``."""
    if len(state.w):
        E, B = sample_fields(state.grid, state.x)
        p_new = boris_kick(state.p_half, E, B, state.dt)
    else:
        E = B = np.zeros((0, 3))
        p_new = state.p_half
    return _snapshot(state, p_new, E, B)


def ensemble_of(snap: Snapshot, template: Optional[Ensemble] = None) -> Ensemble:
    kw = {}
    if template is not None:
        kw = dict(f_sup=template.f_sup, support_radius_x=template.support_radius_x,
                  support_radius_p=template.support_radius_p)
    return Ensemble(snap.x, snap.p, snap.w, t=snap.t, **kw)


def total_energy_of(snap: Snapshot) -> float:
    g = snap.grid
    return float(np.sum(snap.w * lorentz_factor(snap.p))) + g.field_energy()
