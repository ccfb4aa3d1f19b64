import numpy as np
import pytest

from vmlab.fields import FieldGrid, constraint_residuals, div_B, max_stable_dt
from vmlab.kinetic import Ensemble, bump_initial_data, sample_lattice
from vmlab.pic import InstabilityError, closing_snapshot, ensemble_of, initialize, step, total_energy_of


def _setup(n_cells=12, half=2.0, amp=1.0, n_x=6, n_p=4, cfl=0.9):
    e = sample_lattice(bump_initial_data(amp, 1.0, 1.0), n_x, n_p)
    g = FieldGrid.cube(n_cells, half)
    return e, g, cfl * max_stable_dt(g.h)


def test_initial_gauss_defect_vanishes():
    e, g, dt = _setup()
    st = initialize(e, g, dt)
    gauss, _ = constraint_residuals(st.grid)
    assert gauss <= 1e-12 * np.max(np.abs(st.grid.rho))


def test_step_conserves_charge_and_weight():
    e, g, dt = _setup()
    st = initialize(e, g, dt)
    w0 = st.w.sum()
    scale = np.max(np.abs(st.grid.rho)) / dt
    for _ in range(20):
        rec = step(st)
        assert rec.continuity <= 1e-12 * scale
    assert st.w.sum() == w0
    assert np.max(np.abs(div_B(st.grid.B, st.grid.h))) <= 1e-12
    gauss, _ = constraint_residuals(st.grid)
    assert gauss <= 1e-10 * np.max(np.abs(st.grid.rho))


def test_energy_drift_small():
    e, g, dt = _setup()
    st = initialize(e, g, dt)
    energies = [total_energy_of(step(st).snapshot) for _ in range(40)]
    assert abs(energies[-1] - energies[0]) / energies[0] <= 1e-2


def test_deterministic():
    e, g, dt = _setup()
    a, b = initialize(e, g, dt), initialize(e, g, dt)
    for _ in range(5):
        step(a), step(b)
    assert np.array_equal(a.x, b.x) and np.array_equal(a.grid.E, b.grid.E)


def test_snapshot_times_and_closing():
    e, g, dt = _setup()
    st = initialize(e, g, dt)
    recs = [step(st) for _ in range(3)]
    assert [r.snapshot.t for r in recs] == pytest.approx([0, dt, 2 * dt])
    last = closing_snapshot(st)
    assert last.t == pytest.approx(3 * dt)
    ens = ensemble_of(last, e)
    assert ens.f_sup == e.f_sup and len(ens) == len(e)


def test_empty_ensemble_runs_vacuum():
    g = FieldGrid.cube(8, 1.0)
    st = initialize(Ensemble.empty(), g, 0.5 * max_stable_dt(g.h))
    rec = step(st)
    assert rec.continuity == 0.0
    assert np.all(st.grid.E == 0)


@pytest.mark.filterwarnings("ignore::RuntimeWarning")
def test_non_finite_state_raises():
    e, g, dt = _setup()
    st = initialize(e, g, dt)
    st.grid.E[0, 0, 0, 0] = np.inf
    with pytest.raises(InstabilityError):
        step(st)
