"""Command line entry point ``qqmab``.

Subcommands: verify, evolve, ab-pattern, holonomy, split-check, fields.
Exit codes: 0 pass, 1 quantitative failure (report still written),
2 usage or configuration error (nothing written).
"""
from __future__ import annotations

import argparse
import json
import os
import sys
import tempfile
from pathlib import Path

import numpy as np

from . import __version__
from .ab import ConvergenceError
from .config import (ConfigError, RunConfig, SplitConfig, build_ab_setup, build_family, build_grid,
                     family_connection, load_config, parse_config, section)
from .schrodinger import InstabilityError

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


# ---------------------------------------------------------------------------
# output helpers


def to_jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if np.isfinite(v) else repr(v)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (complex, np.complexfloating)):
        return [float(obj.real), float(obj.imag)]
    if isinstance(obj, np.ndarray):
        return to_jsonable(obj.tolist())
    return obj


def dumps(obj) -> str:
    return json.dumps(to_jsonable(obj), indent=2, sort_keys=True, allow_nan=False) + "\n"


def write_outputs(out_dir: Path, files: dict[str, str]) -> None:
    """Write every file to a temporary name first, then rename into place."""
    out_dir.mkdir(parents=True, exist_ok=True)
    staged = []
    try:
        for name, text in files.items():
            fd, tmp = tempfile.mkstemp(prefix=f".{name}.", dir=out_dir)
            with os.fdopen(fd, "w", newline="\n") as fh:
                fh.write(text)
            staged.append((tmp, out_dir / name))
        for tmp, final in staged:
            os.replace(tmp, final)
    finally:
        for tmp, _ in staged:
            if os.path.exists(tmp):
                os.unlink(tmp)


def envelope(command: str, raw: dict, passed: bool, body: dict) -> dict:
    return {"command": command, "version": __version__, "passed": passed, "config": raw, **body}


# ---------------------------------------------------------------------------
# commands; each returns (passed, files)


def run_verify(cfg: RunConfig, raw: dict, scale: float):
    from .phase import (coefficient_constraints, master_residual, no_solution_probe, reduced_residual,
                        right_form_residual, split_residuals)

    vc = section(cfg, "verify")
    grid = build_grid(vc.grid)
    sol = build_family(vc.family, grid)
    pot = sol.potentials
    if any(vc.perturb_alpha):
        pot = pot.perturbed(np.asarray(vc.perturb_alpha, float)[:, None, None])
    X, Y = grid.coords()
    phi = vc.phi.value(X, Y)
    reports = [master_residual(sol.phase, pot, phi), split_residuals(sol.phase, pot, phi),
               coefficient_constraints(sol.phase, pot, sol.lam), reduced_residual(sol.phase, sol.lam, phi),
               right_form_residual(sol.phase, pot, phi)]
    equations, passed = [], True
    for rep in reports:
        for eq in rep.to_dict()["equations"]:
            tol = vc.tolerances.get(eq["label"], vc.tolerance) * scale
            checked = eq["label"] not in vc.report_only
            ok = eq["max"] <= tol
            passed &= ok or not checked
            equations.append({**eq, "tolerance": tol, "checked": checked, "pass": ok})
    body = {"grid": grid.metadata(), "equations": equations}
    if vc.probe is not None:
        seed = cfg.seed if cfg.seed is not None else vc.probe.seed
        pr = no_solution_probe(vc.probe.samples, seed, n=vc.probe.n)
        ok = pr.min_violation > vc.probe.threshold
        passed &= ok
        body["probe"] = {"samples": vc.probe.samples, "seed": seed, "minimum": pr.min_violation,
                         "threshold": vc.probe.threshold, "control": pr.control_violation, "pass": ok}
    return passed, {"report.json": dumps(envelope("verify", raw, passed, body))}


def run_evolve(cfg: RunConfig, raw: dict, scale: float):
    from .fields import ScalarField, field_csv
    from .schrodinger import HamiltonianSpec, SimulationParams, WaveState, evolve

    ec = section(cfg, "evolve")
    grid = build_grid(ec.grid)
    X, Y = grid.coords()
    phi0 = ec.initial.value(X, Y)
    sc = ec.simulation
    params = SimulationParams(dt=sc.dt, steps=sc.steps, hbar=sc.hbar, mass=sc.mass, operator=sc.operator,
                              link_refinement=sc.link_refinement, stability_factor=sc.stability_factor,
                              norm_growth_limit=sc.norm_growth_limit)
    V = ec.potential.value(X, Y)
    if ec.family is None:
        ham = HamiltonianSpec(grid, V)
        state = WaveState.from_complex(phi0)
    else:
        sol = build_family(ec.family, grid)
        ham = HamiltonianSpec(grid, V, potentials=sol.potentials, connection=family_connection(ec.family))
        state = WaveState.factored(sol.K, phi0)
    final, series = evolve(state, ham, params)
    drift = series.norm_drift()
    cont = series.max_continuity()
    drift_tol = ec.norm_drift_tol * scale
    passed = drift <= drift_tol
    if ec.continuity_tol is not None:
        passed &= bool(cont <= ec.continuity_tol * scale)
    body = {"grid": grid.metadata(), "norm_drift": drift, "norm_drift_tol": drift_tol,
            "continuity_residual_max": cont, "continuity_tol": ec.continuity_tol,
            "final_energy": series.energy[-1], "final_time": final.t}
    return passed, {"observables.csv": series.to_csv(),
                    "final_state.csv": field_csv(("psi", ScalarField(grid, final.psi))),
                    "report.json": dumps(envelope("evolve", raw, passed, body))}


def run_ab_pattern(cfg: RunConfig, raw: dict, scale: float):
    from .ab import circular_distance, interference_pattern

    ac = section(cfg, "ab")
    setup = build_ab_setup(ac)
    res = interference_pattern(setup, ac.wavenumber)
    summary = res.summary()
    theory = float(np.mod(setup.solenoid.ab_phase, 2 * np.pi))
    summary["ab_phase_mod_2pi"] = theory
    passed = bool(np.all(res.quaternionic_intensity >= 0))
    if setup.complex_limit:
        err = circular_distance(res.fringe_shift, theory)
        summary["fringe_shift_error"] = err
        passed &= err <= ac.tolerance * scale
    return passed, {"interference.csv": res.to_csv(),
                    "summary.json": dumps(envelope("ab-pattern", raw, passed, summary))}


def run_holonomy(cfg: RunConfig, raw: dict, scale: float):
    from .ab import connection, holonomy_pair, loop_closure_defect
    from .fields import Polyline, path_ordered_product

    ac = section(cfg, "ab")
    setup = build_ab_setup(ac)
    mid = setup.screen_y[len(setup.screen_y) // 2]
    hp = holonomy_pair(setup, mid)
    sol = setup.solenoid
    radius = ac.loop_radius or abs(setup.apex)
    loop = Polyline.circle(sol.center, radius, 256)
    Kloop = path_ordered_product(connection(setup.with_(complex_limit=True)), loop, 64)
    expected = np.exp(1j * sol.ab_phase)
    loop_err = float(np.sqrt(abs(complex(Kloop.z) - expected) ** 2 + abs(complex(Kloop.zeta)) ** 2))
    rel = hp.relative
    body = {"screen_y": mid, "K1": hp.K1.real4(), "K2": hp.K2.real4(), "refinement": hp.refinement,
            "refinement_change": hp.change, "witness": hp.witness,
            "relative_holonomy": rel.real4(), "relative_phase": float(np.angle(complex(rel.z))),
            "ab_phase": sol.ab_phase, "abelian_loop_holonomy": Kloop.real4(), "abelian_loop_error": loop_err,
            "loop_closure_defect": loop_closure_defect(setup)}
    passed = loop_err <= ac.holonomy_tolerance * scale
    if setup.complex_limit:
        passed &= hp.witness <= ac.witness_tolerance * scale
    return passed, {"holonomy.json": dumps(envelope("holonomy", raw, passed, body))}


def run_split_check(cfg: RunConfig, raw: dict, scale: float):
    from .matrix_model import (commutator_trace, commuting_real_pair, decouple_commuting, eigen_split_residual,
                               quaternionic_eigensolve, random_model)

    sc = cfg.split or SplitConfig()
    seed = cfg.seed if cfg.seed is not None else sc.seed
    rng = np.random.default_rng(seed)
    defects = [eigen_split_residual(random_model(sc.dim, rng)).identity_defect for _ in range(sc.samples)]
    worst = max(defects)
    decoupling = None
    if sc.dim % 2 == 0:
        H, L = commuting_real_pair(sc.dim, rng, antisymmetric_l=True)
        res = [decouple_commuting(m) for m in quaternionic_eigensolve(H, L)]
        decoupling = {"max_residual": max(r.max_residual for r in res),
                      "printed_form_max_residual": max(max(r.printed_phi_residual, r.printed_chi_residual)
                                                       for r in res),
                      "commutator_trace": abs(commutator_trace(H, L))}
    passed = worst <= sc.tolerance * scale
    if decoupling is not None:
        passed &= decoupling["max_residual"] <= sc.decoupling_tolerance * scale
    body = {"dim": sc.dim, "seed": seed, "samples": sc.samples, "max_identity_defect": worst,
            "tolerance": sc.tolerance * scale, "decoupling": decoupling}
    return passed, {"split_check.json": dumps(envelope("split-check", raw, passed, body))}


def run_fields(cfg: RunConfig, raw: dict, scale: float):
    from .ab import on_cut, sample_fields
    from .fields import ScalarField, VectorField, field_csv, fd_curl
    from .phase import curl_fields

    fc = section(cfg, "fields")
    if fc.ab is not None:
        setup = build_ab_setup(fc.ab)
        F = sample_fields(setup)
        cut = ScalarField(F.grid, on_cut(setup, F.grid.points(), 4 * F.grid.h[0]).reshape(F.grid.shape)
                          .astype(float))
        files = {
            "alpha.csv": field_csv(("alpha", F.alpha), ("g_gamma", F.g_gamma), ("g_omega", F.g_omega)),
            "beta.csv": field_csv(("beta", F.beta)),
            "curl.csv": field_csv(("curl_alpha", F.curl_alpha), ("curl_g_gamma", F.curl_g_gamma),
                                  ("curl_g_gamma_analytic", F.curl_g_gamma_analytic),
                                  ("curl_beta", F.curl_beta), ("curl_beta_analytic", F.curl_beta_analytic),
                                  ("curl_beta_exact", F.curl_beta_exact), ("near_cut", cut)),
        }
    else:
        grid = build_grid(fc.grid)
        sol = build_family(fc.family, grid)
        pot = sol.potentials
        cf = curl_fields(pot, sol.phase)
        files = {
            "alpha.csv": field_csv(("alpha", VectorField(grid, pot.alpha))),
            "beta.csv": field_csv(("beta", VectorField(grid, pot.beta))),
            "curl.csv": field_csv(("curl_alpha", cf.curl_alpha), ("curl_beta", cf.curl_beta),
                                  ("curl_beta_analytic", cf.curl_beta_analytic)),
        }
    meta = {"files": sorted(files)}
    files["fields.json"] = dumps(envelope("fields", raw, True, meta))
    return True, files


COMMANDS = {
    "verify": run_verify,
    "evolve": run_evolve,
    "ab-pattern": run_ab_pattern,
    "holonomy": run_holonomy,
    "split-check": run_split_check,
    "fields": run_fields,
}


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="qqmab", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", type=Path, required=name != "split-check")
        p.add_argument("--out", type=Path, default=Path("qqmab-out"))
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--tolerance-scale", type=float, default=1.0)
        if name == "split-check":
            p.add_argument("--dim", type=int, default=None)
            p.add_argument("--samples", type=int, default=None)
    return parser


def _resolve(args) -> tuple[RunConfig, dict]:
    if args.config is not None:
        cfg, raw = load_config(args.config)
    else:
        raw = {"schema_version": 1}
        cfg = parse_config(raw)
    if cfg.command is not None and cfg.command != args.command:
        raise ConfigError(f"config is for '{cfg.command}', not '{args.command}'")
    if args.command == "split-check" and (args.dim is not None or args.samples is not None):
        split = dict(raw.get("split", {}))
        if args.dim is not None:
            split["dim"] = args.dim
        if args.samples is not None:
            split["samples"] = args.samples
        raw = {**raw, "split": split}
    if args.seed is not None:
        raw = {**raw, "seed": args.seed}
    return parse_config(raw), raw


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    if not args.tolerance_scale > 0:
        print("error: --tolerance-scale must be positive", file=sys.stderr)
        return EXIT_USAGE
    try:
        cfg, raw = _resolve(args)
        passed, files = COMMANDS[args.command](cfg, raw, args.tolerance_scale)
    except (ConfigError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (InstabilityError, ConvergenceError) as exc:
        passed = False
        files = {"report.json": dumps(envelope(args.command, raw, False, {"error": str(exc)}))}
        print(f"error: {exc}", file=sys.stderr)
    write_outputs(args.out, files)
    status = "pass" if passed else "FAIL"
    print(f"{args.command}: {status} ({', '.join(sorted(files))} in {args.out})")
    return EXIT_OK if passed else EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
