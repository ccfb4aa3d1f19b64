import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays

from vmlab.diagnostics import (CellDensity, DiagnosticSeries, PInfinityTracker, SeriesError, P_infinity,
                               audit_sigma_max, bin_ensemble, criterion_monitor, exact_bound_check,
                               fitted_constant_audit, I_theta, I_theta_cells, I_theta_Lq, local_field_energy,
                               moment_mk, moment_rate, sigma_L2_norm, sigma_minus1, sigma_minus1_cells,
                               snapshot_diagnostics, total_energy, write_verdict_csv)
from vmlab.fields import FieldGrid, deposit_rho
from vmlab.kinetic import (Ensemble, bump_initial_data, lorentz_factor, sample_lattice, transport_ensemble,
                           uniform_fields)

from conftest import smooth_static_fields


def _cell(p, w, h=0.5):
    return CellDensity((0, 0, 0), np.atleast_2d(np.asarray(p, float)), np.atleast_1d(np.asarray(w, float)), h**3)


def _random_ensemble(rng, n=400, half=1.5, pmax=3.0):
    x = rng.uniform(-half, half, (n, 3))
    p = rng.normal(0, pmax / 2, (n, 3))
    return Ensemble(x, p, rng.uniform(0.1, 1.0, n))


# ---------------------------------------------------------------- binning

def test_cell_volume_must_be_positive():
    with pytest.raises(ValueError):
        CellDensity((0, 0, 0), np.zeros((0, 3)), np.zeros(0), 0.0)


@pytest.mark.parametrize("binning", ["ngp", "cic"])
def test_binning_preserves_weight(rng, binning):
    e = _random_ensemble(rng)
    b = bin_ensemble(e, FieldGrid.cube(8, 2.0), binning)
    assert sum(b.cell(i).w.sum() for i in range(len(b))) == pytest.approx(e.total_weight, rel=1e-13)


def test_binning_rejects_outside_non_periodic():
    g = FieldGrid.cube(8, 1.0, periodic=False)
    e = Ensemble([[5.0, 0, 0]], [[0, 0, 0]], [1.0])
    with pytest.raises(ValueError):
        bin_ensemble(e, g)


def test_unknown_binning():
    with pytest.raises(ValueError):
        bin_ensemble(Ensemble([[0, 0, 0]], [[0, 0, 0]], [1.0]), FieldGrid.cube(4, 1.0), "tsc")


# ---------------------------------------------------------------- sigma_{-1}

def test_sigma_empty_cell_is_zero():
    assert sigma_minus1(CellDensity((0, 0, 0), np.zeros((0, 3)), np.zeros(0), 1.0)) == 0.0


def test_sigma_particle_at_rest():
    assert sigma_minus1(_cell([0, 0, 0], 0.7)) == pytest.approx(0.7 / 0.125, rel=1e-14)


def test_sigma_single_moving_particle():
    P, w, h = 3.0, 0.4, 0.5
    val, arg = sigma_minus1(_cell([P, 0, 0], w, h), return_argmax=True)
    expected = w / (h**3 * np.sqrt(10) * (1 - 3 / np.sqrt(10)))
    assert val == pytest.approx(expected, rel=1e-12)
    assert arg == pytest.approx([-1, 0, 0], abs=1e-6)


def test_sigma_audit_against_fine_scan(rng):
    e = _random_ensemble(rng, n=300, half=1.0)
    b = bin_ensemble(e, FieldGrid.cube(4, 1.0))
    audit = audit_sigma_max(b, max_cells=12)
    assert audit.passed, audit
    assert audit.max_rel_below_scan <= 1e-6


@given(arrays(np.float64, (6, 3), elements=st.floats(-50, 50)),
       arrays(np.float64, 6, elements=st.floats(0, 2)))
def test_sigma_bounded_by_twice_I1(p, w):
    c = _cell(p, w)
    s = sigma_minus1(c)
    assert s <= 2 * I_theta(c, 1.0) * (1 + 1e-12)
    # and never below the value at any single direction, e.g. the anti-velocity of the fastest particle
    assert s >= np.sum(w / lorentz_factor(p)) / c.volume * (1 - 1e-12)


def test_sigma_L2_examples():
    g = FieldGrid.cube(4, 1.0)
    empty = bin_ensemble(Ensemble.empty(), g)
    assert sigma_L2_norm(empty) == 0.0
    e = Ensemble([[0.1, 0, 0]], [[0, 0, 0]], [0.3])
    assert sigma_L2_norm(bin_ensemble(e, g)) == pytest.approx(0.3 * g.h**-1.5, rel=1e-14)


def test_sigma_L2_homogeneous(rng):
    e = _random_ensemble(rng, n=200)
    g = FieldGrid.cube(8, 2.0)
    a = sigma_L2_norm(bin_ensemble(e, g))
    b = sigma_L2_norm(bin_ensemble(e.scaled(2.0), g))
    assert b == pytest.approx(2 * a, rel=1e-12)


def test_exact_bound_check_counts():
    assert exact_bound_check(np.array([1.0, 2.0, 5.0]), np.array([1.0, 1.0, 1.0])) == 1
    assert exact_bound_check(np.zeros(0), np.zeros(0)) == 0


def test_sigma_vanishes_outside_light_cone():
    init = bump_initial_data(1.0, 0.8, 1.5)
    e = sample_lattice(init, 6, 4)
    t = 1.0
    moved = e
    for _ in range(10):
        moved = transport_ensemble(moved, uniform_fields(), t / 10)
    g = FieldGrid.cube(16, 2.5)
    b = bin_ensemble(moved, g)
    sig = sigma_minus1_cells(b)
    r = np.linalg.norm(b.cell_centres(), axis=1)
    outside = r > init.support_radius_x + t + g.h * np.sqrt(3) / 2
    assert np.all(sig[outside] == 0)
    assert np.all(sig[~outside] >= 0)
    # every occupied cell lies inside the propagated support
    assert np.all(r <= init.support_radius_x + t + g.h * np.sqrt(3) / 2)


# ---------------------------------------------------------------- I_theta

def test_I0_matches_deposited_rho(rng):
    e = _random_ensemble(rng, n=300)
    g = FieldGrid.cube(8, 2.0)
    b = bin_ensemble(e, g, "cic")
    rho = deposit_rho(g, e.x, e.w)
    assert np.max(np.abs(b.to_grid(I_theta_cells(b, 0.0)) - rho)) <= 1e-12 * np.max(rho)


def test_I_theta_particle_at_rest():
    c = _cell([0, 0, 0], 0.5)
    for th in (0.0, 1.0, 2.5):
        assert I_theta(c, th) == pytest.approx(0.5 / c.volume, rel=1e-15)


@given(arrays(np.float64, (5, 3), elements=st.floats(-20, 20)),
       st.floats(0, 3), st.floats(0, 3))
def test_I_theta_monotone(p, a, b):
    c = _cell(p, np.ones(5))
    lo, hi = sorted((a, b))
    assert I_theta(c, lo) <= I_theta(c, hi) * (1 + 1e-14)


def test_I_theta_argument_checks():
    with pytest.raises(ValueError):
        I_theta(_cell([0, 0, 0], 1.0), -1)
    with pytest.raises(ValueError):
        I_theta_Lq(bin_ensemble(Ensemble.empty(), FieldGrid.cube(4, 1.0)), 1.0, 0.5)


# ---------------------------------------------------------------- moments, P, energy

def test_moment_examples():
    assert moment_mk(Ensemble.empty(), 2) == 1.0
    assert moment_mk(Ensemble([[0, 0, 0]], [[0, 0, 0]], [1.0]), 3) == 2.0
    with pytest.raises(ValueError):
        moment_mk(Ensemble.empty(), -1)


def test_moment_rate_second_order():
    """Central differences of m_2 along RK4 characteristics converge at O(dt^2) to the exact rate."""
    init = bump_initial_data(1.0, 1.0, 1.0)
    e = sample_lattice(init, 4, 4)
    T = 0.5
    errs = []
    for n in (10, 20, 40):
        dt = T / n
        ens = [e]
        for _ in range(n + 1):
            ens.append(transport_ensemble(ens[-1], smooth_static_fields, dt))
        fd = (moment_mk(ens[n + 1], 2) - moment_mk(ens[n - 1], 2)) / (2 * dt)
        E, _ = smooth_static_fields(ens[n].t, ens[n].x)
        errs.append(abs(fd - moment_rate(ens[n], E, 2)))
    ratios = np.array(errs[:-1]) / np.array(errs[1:])
    assert np.all(np.abs(ratios - 4) <= 1.0), (errs, ratios)


def test_P_infinity_examples():
    e = Ensemble([[0, 0, 0], [0.1, 0, 0]], [[2.0, 0, 0], [0, 1.0, 0]], [1.0, 1.0])
    assert P_infinity([e]) == 12.0
    with pytest.raises(ValueError):
        P_infinity([])


def test_P_infinity_free_streaming_constant():
    e = sample_lattice(bump_initial_data(1.0, 1.0, 2.0), 4, 4)
    tr = PInfinityTracker()
    v0 = tr.update(e)
    for _ in range(5):
        e = transport_ensemble(e, uniform_fields(), 0.1)
        assert tr.update(e) == v0


def test_P_infinity_monotone(rng):
    tr = PInfinityTracker()
    prev = tr.value
    for _ in range(20):
        e = Ensemble(np.zeros((3, 3)), rng.normal(0, rng.uniform(0.1, 5), (3, 3)), np.ones(3))
        cur = tr.update(e)
        assert cur >= prev
        prev = cur


def test_total_energy_examples():
    g = FieldGrid.cube(4, 1.0)
    assert total_energy(Ensemble.empty(), g) == 0.0
    e = sample_lattice(bump_initial_data(1.0, 0.5, 1.0), 4, 4)
    e0 = total_energy(e, g)
    moved = e
    for _ in range(4):
        moved = transport_ensemble(moved, uniform_fields(), 0.05)
    g.t = moved.t
    assert total_energy(moved, g) == e0
    g.t = 3.0
    with pytest.raises(ValueError, match="time mismatch"):
        total_energy(moved, g)


def test_local_field_energy_bounded_by_total(rng):
    g = FieldGrid.cube(8, 1.0)
    g.E = rng.normal(size=g.E.shape)
    assert 0 < local_field_energy(g, 0.5) <= local_field_energy(g, 10.0)


# ---------------------------------------------------------------- series and monitor

def test_series_rejects_non_increasing_times():
    s = DiagnosticSeries()
    s.append(0.0, sigma_L2=1.0)
    with pytest.raises(SeriesError):
        s.append(0.0, sigma_L2=1.0)
    with pytest.raises(SeriesError):
        s.append(1.0, sigma_L2=1.0, mass=2.0)


def test_series_csv_round_trip(tmp_path):
    s = DiagnosticSeries()
    for i, v in enumerate([1.0, 0.5, 2.0 / 3.0]):
        s.append(0.1 * i, sigma_L2=v, mass=np.pi)
    s.to_csv(tmp_path / "s.csv")
    r = DiagnosticSeries.from_csv(tmp_path / "s.csv")
    assert r.times == s.times
    assert r.channels == s.channels
    assert r.column("criterion_sup").tolist() == [1.0, 1.0, 1.0]


def test_criterion_constant_and_running_sup():
    s = DiagnosticSeries()
    for i in range(5):
        s.append(float(i), sigma_L2=0.25)
    _, v = criterion_monitor(s)
    assert np.all(s.column("criterion_sup") == 0.25)
    assert v.passed and v.sup == 0.25


@given(st.lists(st.floats(0, 1e3), min_size=1, max_size=30))
def test_criterion_sup_non_decreasing(values):
    s = DiagnosticSeries()
    for i, v in enumerate(values):
        s.append(float(i), sigma_L2=v)
    _, verdict = criterion_monitor(s)
    assert np.all(np.diff(s.column("criterion_sup")) >= 0)
    assert verdict.monotone
    assert verdict.sup == max(values)


def test_criterion_growth_limit():
    s = DiagnosticSeries()
    for i, v in enumerate([1.0, 3.0, 11.0]):
        s.append(float(i), sigma_L2=v)
    _, v = criterion_monitor(s, growth_limit=10.0)
    assert not v.bounded


def test_criterion_requires_sigma():
    s = DiagnosticSeries()
    s.append(0.0, mass=1.0)
    with pytest.raises(SeriesError):
        criterion_monitor(s)


# ---------------------------------------------------------------- audits

def test_fitted_constant_audit_split():
    rhs = np.ones(10)
    ok = fitted_constant_audit("flat", np.full(10, 2.0), rhs)
    assert ok.passed and ok.fitted_constant == 2.0 and ok.max_violation == 0.0
    bad = fitted_constant_audit("growing", np.r_[np.ones(5), np.full(5, 1.6)], rhs)
    assert not bad.passed
    assert bad.max_violation == pytest.approx(0.6)
    with pytest.raises(ValueError):
        fitted_constant_audit("x", [1.0, 1.0], [1.0, 0.0])


def test_verdict_csv(tmp_path):
    r = fitted_constant_audit("flat", [1.0, 1.0], [1.0, 1.0])
    write_verdict_csv(tmp_path / "v.csv", [r], [("exact", "sigma<=2I1", 0.0, 0.0, True)])
    lines = (tmp_path / "v.csv").read_text().splitlines()
    assert lines[0] == "channel,bound,fitted_constant,max_violation,passed"
    assert lines[1].startswith("flat,") and lines[2].startswith("exact,")


def test_snapshot_channels():
    e = sample_lattice(bump_initial_data(1.0, 0.8, 1.0), 4, 4)
    g = FieldGrid.cube(8, 1.5)
    d = snapshot_diagnostics(e, g, PInfinityTracker(), local_radius=1.0)
    for name in ("sigma_L2", "P_inf", "mass", "energy", "rho_Linf", "m_2", "m_0.8", "I_2_L1.5",
                 "local_field_energy"):
        assert name in d.channels
    assert d.channels["mass"] == pytest.approx(e.total_weight)
    assert exact_bound_check(d.sigma_cells, d.I1_cells) == 0
