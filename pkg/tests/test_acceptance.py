"""End-to-end acceptance criteria, one test per criterion.

Each test records a single PASS/FAIL line (shown in the terminal summary)
before asserting.  Run alone with ``pytest tests/test_acceptance.py``.
"""
import json
from pathlib import Path

import numpy as np

from _families import THETA_AB, ab_angles, ab_connection, ab_family, orders, simple_connection, simple_family, \
    simple_omega, smooth_phi, L_SIMPLE
from acceptance_log import record
from qqmab.ab import (ABSetup, SolenoidConfig, brute_force_intensity, circular_distance, connection,
                      holonomy_pair, interference_pattern, loop_closure_defect, on_cut, sample_fields)
from qqmab.cli import main
from qqmab.fields import Polyline, path_ordered_product
from qqmab.matrix_model import (commuting_real_pair, decouple_commuting, eigen_split_residual,
                                quaternionic_eigensolve, random_model)
from qqmab.phase import (covariance_defect, master_residual, no_solution_probe, potentials_from_phase,
                         reduced_residual)
from qqmab.quaternion import I, J, Quaternion, quat_conj, quat_mul, real_matrix
from qqmab.schrodinger import (HamiltonianSpec, SimulationParams, WaveState, box_grid, box_mode,
                               energy_equality_check, evolve)

CONFIGS = Path(__file__).resolve().parents[1] / "configs"
KAPPA = 0.2
LEVELS = (64, 128, 256)


def fmt(x):
    return f"{x:.3g}"


def order_ok(errs, target=2.0, tol=0.2):
    o = orders(errs)
    return bool(np.all(np.abs(o - target) <= tol)), "orders " + ",".join(f"{v:.3f}" for v in o)


# 1 ---------------------------------------------------------------------------

def hamilton(p, q):
    a1, b1, c1, d1 = p
    a2, b2, c2, d2 = q
    return np.array([a1 * a2 - b1 * b2 - c1 * c2 - d1 * d2,
                     a1 * b2 + b1 * a2 + c1 * d2 - d1 * c2,
                     a1 * c2 - b1 * d2 + c1 * a2 + d1 * b2,
                     a1 * d2 + b1 * c2 - c1 * b2 + d1 * a2])


def test_criterion_1_algebra():
    rng = np.random.default_rng(2024)
    P, Q, R = (rng.normal(size=(4, 1000)) for _ in range(3))
    p, q, r = (Quaternion.from_real4(*M) for M in (P, Q, R))
    pq = quat_mul(p, q)
    oracle = np.array([hamilton(P[:, k], Q[:, k]) for k in range(1000)])
    rep = np.array([real_matrix(Quaternion.from_real4(*P[:, k])) @ Q[:, k] for k in range(1000)])
    e_oracle = float(np.max(np.abs(pq.real4() - oracle)))
    e_rep = float(np.max(np.abs(rep - oracle)))
    e_assoc = float(np.max(np.abs(quat_mul(pq, r).real4() - quat_mul(p, quat_mul(q, r)).real4())))
    e_norm = float(np.max(np.abs(pq.norm() - p.norm() * q.norm())))
    z = p.z
    zj = quat_mul(Quaternion(z, 0 * z), Quaternion(0 * z, 1 + 0 * z))
    jzbar = quat_mul(Quaternion(0 * z, 1 + 0 * z), Quaternion(np.conj(z), 0 * z))
    e_zj = float(np.max(np.abs(zj.real4() - jzbar.real4())))
    ij, ji = quat_mul(I, J), quat_mul(J, I)
    e_ij = float(np.max(np.abs(ij.real4() + ji.real4())))
    e_conj = float(np.max(np.abs(quat_mul(p, quat_conj(p)).real4()[..., 0] - p.norm2())))
    checks = {name: (v <= 1e-12, fmt(v)) for name, v in
              [("product-vs-hamilton", e_oracle), ("real-representation", e_rep), ("associativity", e_assoc),
               ("norm", e_norm), ("zj=jzbar", e_zj), ("ij=-ji", e_ij), ("q conj q", e_conj)]}
    assert record(1, checks)


# 2, 3 -----------------------------------------------------------------------

def family_residuals(family):
    res, cov = [], []
    for n in LEVELS:
        g, sol = family(n, KAPPA)
        X, Y = g.coords()
        res.append(master_residual(sol.phase, sol.potentials, smooth_phi(X, Y, KAPPA)).max)
        cov.append(covariance_defect(sol.phase, sol.potentials, "fd").max)
    return res, cov


def test_criterion_2_simple_family():
    res, cov = family_residuals(simple_family)
    checks = {"residual": order_ok(res), "finest": (res[-1] < 1e-6, fmt(res[-1])), "gradK=QK": order_ok(cov)}
    assert record(2, checks)


def test_criterion_3_ab_family():
    res, cov = family_residuals(ab_family)
    g, sol = ab_family(256, KAPPA)
    X, Y = g.coords()
    cc1 = reduced_residual(sol.phase, sol.lam, smooth_phi(X, Y, KAPPA))["CC1"].max
    ph = sol.phase
    c, s = np.cos(THETA_AB), np.sin(THETA_AB)
    beta = -1j * s * c * np.exp(1j * (ph.gamma + ph.omega)) * (ph.gradient("gamma") - ph.gradient("omega"))
    lam = -np.tan(THETA_AB) * np.exp(1j * (ph.gamma + ph.omega))
    d_beta = float(np.max(np.abs(potentials_from_phase(ph, lam).beta - beta)))
    checks = {"residual": order_ok(res), "finest": (res[-1] < 1e-6, fmt(res[-1])), "gradK=QK": order_ok(cov),
              "CC1 prefactor": (cc1 <= 1e-12, fmt(cc1)), "beta closed form": (d_beta <= 1e-12, fmt(d_beta))}
    assert record(3, checks)


# 4 ---------------------------------------------------------------------------

def test_criterion_4_energy_equality():
    g = box_grid((63, 63), (1.0, 1.0))
    X, Y = g.coords()
    Ga, Wa = ab_angles()[:2]
    e = np.exp(1j * simple_omega()[0](X, Y))
    families = {"simple": (Quaternion(e * L_SIMPLE.z, e * L_SIMPLE.zeta), simple_connection()),
                "ab": (Quaternion(np.cos(THETA_AB) * np.exp(1j * Ga(X, Y)), np.sin(THETA_AB) * np.exp(1j * Wa(X, Y))),
                       ab_connection())}
    checks = {}
    for name, (K, conn) in families.items():
        for mode in ((1, 1), (2, 1)):
            phi, _ = box_mode(g, mode, (1.0, 1.0))
            r = energy_equality_check(K, phi, HamiltonianSpec(g, connection=conn),
                                      SimulationParams(dt=5e-6, steps=0))
            checks[f"{name}{mode}"] = (r.rel_error < 1e-6, fmt(r.rel_error))
    assert record(4, checks)


# 5 ---------------------------------------------------------------------------

TAU = 2 * np.pi


def torus_family(name, n):
    """Periodic family on the unit torus with angles defined mod 2 pi."""
    from qqmab.fields import GridSpec
    from test_schrodinger import G, THETA, W, conn_ab, conn_simple
    g = GridSpec((n, n), (1 / n, 1 / n), (0, 0), periodic=True)
    X, Y = g.coords()
    if name == "ab":
        return g, Quaternion(np.cos(THETA) * np.exp(1j * G(X, Y)), np.sin(THETA) * np.exp(1j * W(X, Y))), conn_ab
    e = np.exp(1j * W(X, Y))
    return g, Quaternion(0.6 * e, 0.8j * e), conn_simple


def test_criterion_5_probability_conservation():
    checks = {}
    for name in ("simple", "ab"):
        g, K, conn = torus_family(name, 32)
        X, Y = g.coords()
        phi = np.exp(-((X - 0.5) ** 2 + (Y - 0.5) ** 2) / (2 * 0.1**2) + 1j * 2 * TAU * X)
        _, ser = evolve(WaveState.factored(K, phi), HamiltonianSpec(g, connection=conn),
                        SimulationParams(dt=4e-5, steps=1000), diagnostics=False)
        drift = ser.norm_drift()
        checks[f"{name} drift"] = (drift < 1e-6, fmt(drift))
        cont, T = [], 0.002
        for n in (16, 32, 64):
            g, K, conn = torus_family(name, n)
            X, Y = g.coords()
            phi = np.exp(1j * TAU * (X + 2 * Y)) * (1 + 0.5 * np.cos(TAU * Y))
            steps = 20 * (n // 16) ** 2
            _, ser = evolve(WaveState.factored(K, phi), HamiltonianSpec(g, connection=conn),
                            SimulationParams(dt=T / steps, steps=steps))
            cont.append(ser.max_continuity())
        o = orders(cont)
        checks[f"{name} continuity"] = (bool(abs(o[-1] - 2) <= 0.2 and o[-1] >= o[0]),
                                        "values " + ",".join(fmt(v) for v in cont)
                                        + " orders " + ",".join(f"{v:.2f}" for v in o))
    assert record(5, checks)


# 6 ---------------------------------------------------------------------------

def test_criterion_6_eigen_split():
    rng = np.random.default_rng(6)
    checks = {}
    for n in (2, 4, 8):
        worst = max(eigen_split_residual(random_model(n, rng)).identity_defect for _ in range(1000))
        checks[f"split n={n}"] = (worst <= 1e-12, fmt(worst))
    worst = 0.0
    for seed in range(20):
        for n in (2, 4, 8):
            for antisym in (False, True):
                H, L = commuting_real_pair(n, np.random.default_rng(seed), antisymmetric_l=antisym)
                worst = max(worst, max(decouple_commuting(m).max_residual for m in quaternionic_eigensolve(H, L)))
    checks["decoupling"] = (worst <= 1e-10, fmt(worst))
    assert record(6, checks)


# 7, 8 ------------------------------------------------------------------------

FLUX = 2.0
SCREEN = tuple(np.linspace(-3, 3, 21))


def test_criterion_7_abelian_limit():
    setup = ABSetup(solenoid=SolenoidConfig(flux=FLUX), screen_y=SCREEN, complex_limit=True)
    loop = Polyline.circle((0.0, 0.0), 2.0, 512)
    K = path_ordered_product(connection(setup), loop, 64)
    expected = np.exp(1j * setup.solenoid.ab_phase)
    loop_err = float(np.hypot(abs(complex(K.z) - expected), abs(complex(K.zeta))))
    res = interference_pattern(setup, 4.0)
    shift_err = circular_distance(res.fringe_shift, FLUX)
    witness = max(h.witness for h in res.holonomies)
    checks = {"loop holonomy": (loop_err <= 1e-6, fmt(loop_err)),
              "fringe shift": (shift_err <= 1e-3, f"{res.fringe_shift:.9f} err {fmt(shift_err)}"),
              "witness": (witness < 1e-10, fmt(witness))}
    assert record(7, checks)


def test_criterion_8_quaternionic_ab():
    setup = ABSetup(solenoid=SolenoidConfig(flux=FLUX), screen_y=tuple(np.linspace(-3, 3, 7)))
    res = interference_pattern(setup, 4.0)
    hp = holonomy_pair(setup, 0.0)
    doubled = holonomy_pair(setup.with_(refinement=2 * setup.refinement), 0.0)
    stable = abs(hp.witness - doubled.witness)
    worst = 0.0
    for y, h, q in zip(res.screen_y, res.holonomies, res.quaternionic_intensity):
        p1, p2 = setup.paths(y)
        worst = max(worst, abs(brute_force_intensity(h.K1, h.K2, p1.length(), p2.length(), 4.0) - q))
    checks = {"witness": (hp.witness > 0.1, f"{hp.witness:.10f}"),
              "doubling": (stable <= setup.convergence_tol and hp.change < setup.convergence_tol,
                           f"change {fmt(hp.change)}, witness shift {fmt(stable)}"),
              "brute force": (worst <= 1e-12, fmt(worst)),
              "fringe shift": (True, f"{res.fringe_shift:.5f} rms {fmt(res.fringe_fit_rms)}")}
    assert record(8, checks)


# 9 ---------------------------------------------------------------------------

def test_criterion_9_curls():
    setup = ABSetup(solenoid=SolenoidConfig(flux=FLUX), screen_y=(0.0,))
    ea, eb, eg, path_term = [], [], [], 0.0
    for n in (128, 256):
        F = sample_fields(setup.with_(grid_n=n))
        g = F.grid
        X, Y = g.coords()
        far = (np.hypot(X, Y) >= 2 * setup.solenoid.R) & ~on_cut(setup, g.points(), 0.25).reshape(g.shape)
        ea.append(np.nanmax(np.abs(F.curl_alpha.values[far])))
        eb.append(np.nanmax(np.abs((F.curl_beta.values - F.curl_beta_exact.values)[far])))
        eg.append(np.nanmax(np.abs((F.curl_g_gamma.values - F.curl_g_gamma_analytic.values)[far])))
        path_term = np.nanmax(np.abs((F.curl_beta_exact.values - F.curl_beta_analytic.values)[far]))
    defect = loop_closure_defect(setup)["gamma"]
    rel = abs(defect["numeric"] - defect["analytic"]) / abs(defect["analytic"])
    analytic_curl = np.nanmax(np.abs(F.curl_g_gamma_analytic.values[far]))
    checks = {"curl alpha": order_ok(ea), "curl beta": order_ok(eb), "curl gGamma": order_ok(eg),
              "loop defect": (abs(defect["numeric"]) > 0.1 and rel < 1e-5,
                              f"{defect['numeric']:.7f} vs {defect['analytic']:.7f}"),
              "gGamma curl nonzero": (analytic_curl > 0.1, fmt(analytic_curl)),
              "path term": (True, f"max {fmt(path_term)}")}
    assert record(9, checks)


# 10 --------------------------------------------------------------------------

PROBE_THRESHOLD = 1e-3


def test_criterion_10_no_solution_probe():
    r = no_solution_probe(100, 0)
    ctrl = {seed: [no_solution_probe(1, seed, n=n).control_violation for n in (32, 64, 128)] for seed in (1, 2, 3)}
    checks = {"minimum": (r.min_violation > PROBE_THRESHOLD, f"{r.min_violation:.4g} > {PROBE_THRESHOLD:g}")}
    for seed, vals in ctrl.items():
        checks[f"control seed {seed}"] = order_ok(vals)
    assert record(10, checks)


# 11 --------------------------------------------------------------------------

RUNS = [("verify", "verify_simple.json", 0), ("verify", "verify_ab.json", 0),
        ("verify", "verify_ab_perturbed.json", 1), ("evolve", "evolve_free.json", 0),
        ("evolve", "evolve_ab.json", 0), ("ab-pattern", "ab_complex.json", 0),
        ("ab-pattern", "ab_quaternion.json", 0), ("holonomy", "ab_complex.json", 0),
        ("holonomy", "ab_zero_flux.json", 0), ("split-check", "split.json", 0), ("fields", "fields_ab.json", 0)]


def test_criterion_11_cli(tmp_path):
    checks = {}
    for k, (cmd, cfg, expect) in enumerate(RUNS):
        codes, snaps = [], []
        for rep in range(2):
            out = tmp_path / f"{k}-{rep}"
            codes.append(main([cmd, "--config", str(CONFIGS / cfg), "--out", str(out), "--seed", "3"]))
            snaps.append({p.name: p.read_bytes() for p in sorted(out.iterdir())})
        same = snaps[0] == snaps[1] and bool(snaps[0])
        checks[f"{cmd}:{cfg}"] = (same and codes == [expect, expect], f"exit {codes[0]}")
    unstable = main(["evolve", "--config", str(CONFIGS / "evolve_unstable.json"), "--out", str(tmp_path / "u")])
    missing = main(["verify", "--config", str(tmp_path / "absent.json"), "--out", str(tmp_path / "m")])
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"schema_version": 1, "verify": {"bogus": True}}))
    unknown = main(["verify", "--config", str(bad), "--out", str(tmp_path / "b")])
    written = any((tmp_path / d).exists() for d in ("u", "m", "b"))
    checks["misuse"] = ((unstable, missing, unknown) == (2, 2, 2) and not written,
                        f"exits {unstable},{missing},{unknown}")
    assert record(11, checks)
