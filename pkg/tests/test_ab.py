import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qqmab.ab import (ABSetup, ConvergenceError, MaskedRegionError, SolenoidConfig, ab_phase_gradients,
                      beta_curl_analytic, brute_force_intensity, circular_distance, fringe_shift,
                      gamma_curl_analytic, holonomy_pair, interference_pattern, loop_closure_defect,
                      lorentz_radial_force, noncommutativity_witness, on_cut, path_dependence_term,
                      reconstruct_angle, reconstructed_gradient, sample_fields, solenoid_alpha)
from qqmab.quaternion import Quaternion

FLUX = 2.0
SETUP = ABSetup(solenoid=SolenoidConfig(flux=FLUX), screen_y=(0.0,))


def polar_points(r, phi):
    return np.stack([r * np.cos(phi), r * np.sin(phi)], -1)


def test_solenoid_constants():
    s = SolenoidConfig(R=0.5, flux=2 * np.pi, charge=1.0, hbar=1.0)
    assert s.c0 == pytest.approx(1.0)
    assert SolenoidConfig.from_field(0.5, 4.0).flux == pytest.approx(np.pi)
    assert SolenoidConfig(flux=3.0, charge=2.0, hbar=0.5).ab_phase == pytest.approx(12.0)
    with pytest.raises(ValueError):
        SolenoidConfig(R=0.0)


def test_alpha_examples():
    s = SolenoidConfig(flux=2 * np.pi)
    a = solenoid_alpha(s, [[1.0, 0.0], [0.0, 2.0]])
    assert np.allclose(a, [[0.0, 1.0], [-0.5, 0.0]], atol=1e-15)
    with pytest.raises(MaskedRegionError):
        solenoid_alpha(s, [[0.1, 0.1]])


@settings(max_examples=100, deadline=None)
@given(st.floats(0.6, 10), st.floats(-np.pi, np.pi), st.floats(0.05, 1.5))
def test_gradients_recombine_to_alpha(r, phi, theta):
    setup = SETUP.with_(theta=theta)
    P = polar_points(np.array([r]), np.array([phi]))
    gG, gW = ab_phase_gradients(setup, P)
    a = np.cos(theta) ** 2 * gG + np.sin(theta) ** 2 * gW
    assert np.max(np.abs(a - solenoid_alpha(setup.solenoid, P))) <= 1e-12 * max(1.0, np.max(np.abs(a)))


def test_reconstructed_angles_match_closed_form():
    r = np.array([1.3, 2.0, 3.7, 5.0])
    phi = np.array([0.4, 2.9, -1.2, -2.5])
    P = polar_points(r, phi)
    setup = SETUP.with_(reference_point=(1.0, 0.0))
    c0, c, s = setup.solenoid.c0, setup.c, setup.s
    gamma = c0 / c**2 * (phi / 2 - np.sin(2 * phi) / 4)
    omega = c0 / s**2 * (phi / 2 + np.sin(2 * phi) / 4)
    assert np.max(np.abs(reconstruct_angle(setup, "gamma", P) - gamma)) < 1e-12
    assert np.max(np.abs(reconstruct_angle(setup, "omega", P) - omega)) < 1e-12


def test_reconstructed_gradient_matches_differences():
    P = np.array([[1.7, 0.9], [-1.1, 2.3], [0.4, -2.2]])
    h = 1e-5
    for which in ("gamma", "omega"):
        g = reconstructed_gradient(SETUP, which, P)
        for axis in range(2):
            e = np.zeros(2)
            e[axis] = h
            fd = (reconstruct_angle(SETUP, which, P + e) - reconstruct_angle(SETUP, which, P - e)) / (2 * h)
            assert np.max(np.abs(fd - g[:, axis])) < 1e-8


def test_prescribed_gradients_are_not_curl_free():
    P = np.array([[1.0, 0.0], [2.0, 1.0]])
    x, y = P[:, 0], P[:, 1]
    r2 = x * x + y * y
    c0 = SETUP.solenoid.c0
    expect = c0 / SETUP.c**2 * (r2 - 2 * y * y) / r2**2
    assert np.allclose(gamma_curl_analytic(SETUP, P), expect)
    assert abs(gamma_curl_analytic(SETUP, P)[0]) > 0.1


def test_loop_closure_defect_is_reported():
    d = loop_closure_defect(SETUP)
    for name in ("gamma", "omega"):
        assert d[name]["numeric"] == pytest.approx(d[name]["analytic"], rel=1e-5)
    assert d["gamma"]["analytic"] == pytest.approx(FLUX, rel=1e-12)


def test_curl_beta_closed_form_at_diagonal():
    r = 2.0
    P = polar_points(np.array([r]), np.array([np.pi / 4]))
    val = beta_curl_analytic(SETUP, P)[0]
    a2 = (SETUP.solenoid.c0 / r) ** 2
    assert abs(val) == pytest.approx(2 * a2 / np.sin(2 * SETUP.theta), rel=1e-12)
    assert abs(beta_curl_analytic(SETUP, polar_points(np.array([r]), np.array([0.0])))[0]) < 1e-15


def test_path_dependence_term_is_order_one():
    P = polar_points(np.array([1.5, 2.5, 3.0]), np.array([0.3, 1.9, -2.0]))
    assert np.max(np.abs(path_dependence_term(SETUP, P))) > 0.1


def test_cut_lies_opposite_the_reference_point():
    P = np.array([[-3.0, 0.01], [3.0, 0.0], [-3.0, 1.0]])
    assert on_cut(SETUP, P, 0.1).tolist() == [True, False, False]


def test_sampled_curls_converge_away_from_cut():
    errs_alpha, errs_beta = [], []
    for n in (64, 128):
        F = sample_fields(SETUP.with_(grid_n=n))
        g = F.grid
        X, Y = g.coords()
        far = (np.hypot(X, Y) >= 2 * SETUP.solenoid.R) & ~on_cut(SETUP, g.points(), 0.25).reshape(g.shape)
        errs_alpha.append(np.nanmax(np.abs(F.curl_alpha.values[far])))
        errs_beta.append(np.nanmax(np.abs((F.curl_beta.values - F.curl_beta_exact.values)[far])))
    assert errs_alpha[1] < errs_alpha[0] / 3 and errs_beta[1] < errs_beta[0] / 3
    assert np.all(np.isnan(F.curl_alpha.values[~F.grid.valid]))


def test_complex_limit_holonomy_is_the_ab_phase():
    hp = holonomy_pair(SETUP.with_(complex_limit=True))
    for K in (hp.K1, hp.K2):
        assert abs(complex(K.zeta)) == 0 and float(K.norm()) == pytest.approx(1, abs=1e-12)
    rel = hp.relative
    assert circular_distance(np.angle(complex(rel.z)), FLUX) < 1e-6
    assert hp.witness < 1e-12


def test_quaternionic_witness_value():
    hp = holonomy_pair(SETUP)
    assert hp.change < SETUP.convergence_tol
    assert hp.witness == pytest.approx(1.1968491859591783, abs=1e-6)


def test_witness_stable_under_refinement_doubling():
    a = holonomy_pair(SETUP).witness
    b = holonomy_pair(SETUP.with_(refinement=2 * SETUP.refinement)).witness
    assert abs(a - b) < 1e-6


def test_holonomy_convergence_failure():
    with pytest.raises(ConvergenceError):
        holonomy_pair(SETUP.with_(refinement=1, max_refinement=4, convergence_tol=1e-12))


def test_witness_examples():
    i, j = Quaternion(1j, 0), Quaternion(0, 1)
    assert noncommutativity_witness(i, j) == pytest.approx(2.0)
    assert noncommutativity_witness(i, Quaternion(0.3j, 0)) == 0


def test_brute_force_intensity_matches_symplectic_form():
    rng = np.random.default_rng(4)
    for _ in range(50):
        K1 = Quaternion.from_real4(*rng.normal(size=4))
        K2 = Quaternion.from_real4(*rng.normal(size=4))
        l1, l2, k = rng.uniform(5, 20, size=3)
        amp = K1 * np.exp(1j * k * l1) + K2 * np.exp(1j * k * l2)
        assert brute_force_intensity(K1, K2, l1, l2, k) == pytest.approx(float(amp.norm2()), abs=1e-12)


def test_fringe_fit_recovers_phase():
    x = np.linspace(-3, 3, 41)
    delta, rms = fringe_shift(x, 1.5 + 0.8 * np.cos(x + 2.2))
    assert delta == pytest.approx(2.2, abs=1e-12) and rms < 1e-12


def few_points(**kw):
    return SETUP.with_(screen_y=tuple(np.linspace(-3, 3, 7)), **kw)


def test_complex_limit_pattern_is_shifted_by_flux():
    res = interference_pattern(few_points(complex_limit=True), 4.0)
    assert circular_distance(res.fringe_shift, FLUX) < 1e-6
    assert np.allclose(res.quaternionic_intensity, res.complex_intensity, atol=1e-6)


def test_zero_flux_pattern_is_unshifted():
    res = interference_pattern(few_points(solenoid=SolenoidConfig(flux=0.0)), 4.0)
    assert circular_distance(res.fringe_shift, 0.0) < 1e-9 and res.witness < 1e-12


def test_pattern_csv_and_summary():
    res = interference_pattern(few_points(complex_limit=True), 4.0)
    lines = res.to_csv().splitlines()
    assert lines[0] == "screen_y,complex_intensity,quaternionic_intensity" and len(lines) == 8
    assert {"fringe_shift", "witness", "loop_closure_defect"} <= set(res.summary())


def test_lorentz_force_is_labelled_speculative():
    out = lorentz_radial_force(SETUP, 1.0, polar_points(np.array([2.0]), np.array([np.pi / 4])))
    assert "speculative" in out["label"] and out["force"][0] > 0
    with pytest.raises(ValueError):
        lorentz_radial_force(SETUP, 1.0, [[2.0, 0.0]], extraction="phase")


def test_setup_validation():
    with pytest.raises(ValueError):
        SETUP.with_(theta=0.0)
    with pytest.raises(MaskedRegionError):
        SETUP.with_(apex=0.3)
