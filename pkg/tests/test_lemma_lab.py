import numpy as np
import pytest

from vmlab.diagnostics import DiagnosticSeries
from vmlab.lemma_lab import (LEMMAS, CharacteristicPath, GaussianDensity, GaussianPulse, GaussianSource,
                             HypothesisError, SweepSpec, _moment_growth_audit, _periodic_grid, _w_spectral,
                             interpolation_sample, load_sweep_spec, run_campaign, strichartz_ratio,
                             verify_integration_lemma, verify_moment_inequality, verify_phi_tau,
                             verify_w_fourier, w_static_multiplier)
from vmlab.quadrature import FOUR_PI


# ---------------------------------------------------------------- sweep specs

@pytest.mark.parametrize("lemma,kw", [
    ("2.4a", dict(R=(5.0,))),
    ("2.4a", dict(theta=(1.5,))),
    ("2.4b", dict(kappa=(1.0,))),
    ("2.4b", dict(theta=(2.0,), kappa=(1.5,))),
    ("2.4c", dict(theta=(1.0,))),
    ("2.4c", dict(speed=(1.0,))),
    ("5.1", dict(a=(1.0,), eps=())),
    ("5.2", dict(a=(1.0,), eps=(1.5,))),
    ("strichartz", dict(eps=(0.0,))),
])
def test_sweep_rejects_outside_hypotheses(lemma, kw):
    with pytest.raises(HypothesisError):
        SweepSpec.default(lemma, **kw)


def test_sweep_unknown_lemma_and_refine():
    with pytest.raises(HypothesisError):
        SweepSpec("9.9")
    with pytest.raises(HypothesisError):
        SweepSpec.default("2.4c", refine=1)


def test_every_lemma_has_a_valid_default():
    for L in LEMMAS:
        assert SweepSpec.default(L).lemma == L


def test_load_sweep_spec(tmp_path):
    p = tmp_path / "s.ini"
    p.write_text("[sweep]\nlemma = 2.4b\ntheta = 0.0, 0.5\nkappa = 2.0\nR = 10, 20\nn_panels = 8\n")
    s = load_sweep_spec(p)
    assert (s.lemma, s.theta, s.kappa, s.R, s.n_panels) == ("2.4b", (0.0, 0.5), (2.0,), (10.0, 20.0), 8)
    p.write_text("[sweep]\nlemma = 2.4b\nbogus = 1\n")
    with pytest.raises(HypothesisError, match="bogus"):
        load_sweep_spec(p)
    p.write_text("[other]\nlemma = 2.4b\n")
    with pytest.raises(HypothesisError, match="sweep"):
        load_sweep_spec(p)


# ---------------------------------------------------------------- integration lemmas

def test_sphere_lemma_examples():
    rep = verify_integration_lemma(SweepSpec.default("2.4c", theta=(0.5,), speed=(0.0, 0.6), n_directions=1))
    at_rest, moving = rep.samples
    assert at_rest.lhs == pytest.approx(FOUR_PI, rel=1e-12)
    assert at_rest.rhs == pytest.approx(FOUR_PI, rel=1e-12)
    assert moving.lhs == pytest.approx(13.245, abs=2e-3)
    assert moving.lhs == pytest.approx(moving.rhs, rel=1e-6)
    assert rep.passed


def test_sphere_lemma_full_sweep():
    rep = run_campaign(SweepSpec.default("2.4c"))
    assert rep.passed
    assert rep.details["max_rel_err"] <= 1e-6
    assert rep.details["max_bound_ratio"] <= 1.0


def test_ball_lemma_growth_two_point():
    rep = verify_integration_lemma(SweepSpec.default("2.4a", theta=(0.0,), R=(10.0, 100.0), n_directions=1))
    r10, r100 = rep.ratios
    assert 0.5 <= r100 / r10 <= 2.0
    assert rep.stable and rep.passed


def test_ball_lemma_b_small_sweep():
    rep = verify_integration_lemma(SweepSpec.default("2.4b", theta=(0.5,), kappa=(2.0,), R=(10.0, 30.0),
                                                     n_directions=2))
    assert rep.passed
    assert np.all(np.isfinite(rep.ratios)) and np.all(rep.ratios > 0)


def test_integration_rejects_other_lemmas():
    with pytest.raises(HypothesisError):
        verify_integration_lemma(SweepSpec.default("3.1"))


def test_kernel_campaign():
    rep = run_campaign(SweepSpec.default("3.1", n_samples=100_000))
    assert rep.passed and rep.details["violations"] == 0
    assert rep.fitted_constant <= np.sqrt(2) + 1e-9


# ---------------------------------------------------------------- light-cone average in Fourier space

def test_w_fourier_zero_source():
    rep = verify_w_fourier(GaussianSource(amplitude=0.0), grid_size=16, times=(1.0,), n_shells=8, n_theta=8)
    assert rep.samples[0].lhs == 0 and rep.samples[0].rhs == 0
    assert rep.passed


def test_w_spectral_static_matches_sine_integral():
    src = GaussianSource(width=0.6)
    h, X, K = _periodic_grid(32, 16.0)
    for t in (0.5, 1.0, 2.0):
        W = _w_spectral(src, t, X, K)
        ref = np.fft.ifftn(np.fft.fftn(src(0.0, X)) * w_static_multiplier(t, K)).real
        assert np.linalg.norm(W - ref) <= 1e-3 * np.linalg.norm(ref)


def test_w_fourier_small_grid():
    rep = verify_w_fourier(GaussianSource(width=0.6, rate=0.3), grid_size=32, T=1.0)
    assert rep.details["max_rel_l2_err"] <= 1e-3
    sob = [s for s in rep.samples if s.params["check"] == "sobolev"]
    assert sob and all(s.lhs <= s.rhs for s in sob)


def test_w_fourier_box_too_small():
    with pytest.raises(ValueError, match="grid too small"):
        verify_w_fourier(GaussianSource(width=1.0), box=8.0)


# ---------------------------------------------------------------- cone change of variables

def test_phi_tau_static_path():
    rep = verify_phi_tau(CharacteristicPath.static(), 0.0, 1.0, n_samples=2**18)
    assert rep.details["rel_err"] <= 1e-3 and rep.passed


def test_phi_tau_moving_path():
    rep = verify_phi_tau(CharacteristicPath.constant_velocity((0.5, 0, 0)), 0.0, 1.5, n_samples=2**18)
    assert rep.details["rel_err"] <= 1e-2 and rep.details["injectivity_failures"] == 0


def test_phi_tau_zero_test_function():
    rep = verify_phi_tau(CharacteristicPath.static(), 0.0, 1.0, n_samples=2**12, g=lambda y: np.zeros(y.shape[:-1]))
    assert rep.samples[0].lhs == 0.0 and rep.samples[0].rhs == 0.0


def test_phi_tau_rejects_superluminal_path():
    with pytest.raises(ValueError, match=">= 1"):
        verify_phi_tau(CharacteristicPath.constant_velocity((1.0, 0, 0)), 0.0, 1.0)
    with pytest.raises(ValueError):
        verify_phi_tau(CharacteristicPath.static(), 1.0, 1.0)


def test_phi_tau_curved_path(rng):
    from conftest import smooth_static_fields
    path = CharacteristicPath.from_fields((0, 0, 0), (0.5, 0.2, 0), smooth_static_fields, 0.0, 1.2)
    rep = verify_phi_tau(path, 0.2, 1.2, n_samples=2**16)
    assert rep.details["rel_err"] <= 1e-2 and rep.passed


# ---------------------------------------------------------------- moment growth

def test_gaussian_moment_closed_form():
    # m_0 = 1 + A (2 pi a^2)^(3/2) (2 pi b^2)^(3/2)
    f = GaussianDensity(0.7, 0.8, 1.3)
    exact = 1 + 0.7 * (2 * np.pi * 0.64) ** 1.5 * (2 * np.pi * 1.69) ** 1.5
    assert f.moment(0) == pytest.approx(exact, rel=1e-12)


def test_interpolation_step_bounded():
    lhs, rhs = interpolation_sample(GaussianDensity(1.0, 1.0, 1.0), 2.0, 1.25)
    assert 0 < lhs <= rhs


def test_moment_campaign():
    rep = verify_moment_inequality(k=2.0, q=1.25)
    assert rep.passed and rep.stable
    assert rep.details["interpolation_second_half"] <= 1.5 * rep.details["interpolation_fit"]


def test_moment_growth_without_field_is_trivial():
    t = np.linspace(0, 1, 11)
    res = _moment_growth_audit(t, np.full(11, 3.0), np.zeros(11), 1.0, 2.0)
    assert res.passed and res.max_violation == 0.0


def test_moment_growth_missing_channels():
    s = DiagnosticSeries()
    s.append(0.0, m_2=2.0)
    with pytest.raises(KeyError):
        verify_moment_inequality(s, f_sup=1.0)
    with pytest.raises(HypothesisError):
        verify_moment_inequality(k=1.0)


# ---------------------------------------------------------------- sigma inequalities

def test_sigma_cell_campaign():
    rep = run_campaign(SweepSpec.default("5.1"))
    assert rep.passed
    assert rep.details["exact_violations"] == 0


# ---------------------------------------------------------------- Strichartz probe

def test_strichartz_zero_forcing():
    lhs, rhs = strichartz_ratio(GaussianPulse(amplitude=0.0), 0.5, grid_size=16)
    assert lhs == 0.0 and rhs == 0.0


def test_strichartz_report():
    rep = run_campaign(SweepSpec.default("strichartz"))
    assert rep.passed is None and rep.summary_line().split()[1] == "REPORT"
    assert np.isfinite(rep.fitted_constant) and rep.fitted_constant > 0
    assert rep.stable
    assert rep.details["translation_rel_change"] <= 0.05


def test_strichartz_box_too_small():
    with pytest.raises(ValueError, match="box too small"):
        strichartz_ratio(GaussianPulse(), 0.5, box=6.0)


# ---------------------------------------------------------------- report files

def test_report_files(tmp_path):
    rep = run_campaign(SweepSpec.default("2.4c", theta=(0.3,), speed=(0.3,), n_directions=1))
    rep.to_csv(tmp_path / "s.csv")
    rep.write_verdict(tmp_path / "v.csv")
    rows = (tmp_path / "s.csv").read_text().splitlines()
    assert rows[0] == "direction,speed,theta,lhs,rhs_envelope,ratio"
    assert len(rows) == 2
    v = (tmp_path / "v.csv").read_text().splitlines()
    assert v[0] == "lemma,fitted_constant,refined_constant,stable,passed"
    assert v[1].startswith("2.4c,") and v[1].endswith(",1")
