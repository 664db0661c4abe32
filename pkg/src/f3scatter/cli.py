"""Command-line entry point: ``f3scatter <subcommand> [options]``.

Exit codes: 0 success, 2 configuration error, 3 solver error,
4 verification failure. ``F3_LOG`` sets the log level (default WARNING).
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np
import scipy.fft

from . import fileio
from .exponential import pairing, solve_remainder
from .faddeev_green import AdmissibilityError, momentum
from .reconstruction import (PlanError, plan_reconstruction, reconstruct_ball,
                             synthesize_kernels)
from .scattering import invert_smatrix
from .scenario import ConfigError, Problem, default_scenario_path, parse_scenario
from .subsystem import SpectrumError
from .verify import full_suite, green_suite

EXIT_CONFIG, EXIT_SOLVER, EXIT_VERIFY = 2, 3, 4
log = logging.getLogger("f3scatter")


def _vec(text: str) -> np.ndarray:
    try:
        return np.array([float(t) for t in text.split(",")])
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")


def _pair(text: str) -> tuple:
    v = _vec(text)
    if len(v) != 2:
        raise argparse.ArgumentTypeError("expected two numbers a,b")
    return float(v[0]), float(v[1])


def _complex(text: str) -> complex:
    try:
        return complex(text.replace(" ", "").replace("i", "j"))
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a complex number: {text!r}")


def _emit(obj, out: Path | None):
    if out is None:
        sys.stdout.write(json.dumps(obj, sort_keys=True, indent=2, default=fileio._json_default)
                         + "\n")
    else:
        fileio.write_json(out, obj)


def cmd_spectrum(problem: Problem, args) -> int:
    s = problem.spectral
    neg = [float(s.eigenvalues[k]) for k in s.negative]
    _emit({"eigenvalues": neg, "channels": list(s.bound_channels),
           "lambda_prime_a": s.lambda_prime, "epsilon1": s.epsilon1, "epsilon0": s.epsilon0,
           "thresholds": problem.thresholds, "scenario_hash": problem.config.hash()}, args.out)
    return 0


def _suite_exit(results, out) -> int:
    ok = all(r["passed"] for r in results)
    _emit({"passed": ok, "checks": results}, out)
    return 0 if ok else EXIT_VERIFY


def cmd_green_verify(problem: Problem, args) -> int:
    return _suite_exit(green_suite(problem), args.out)


def cmd_verify_all(problem: Problem, args) -> int:
    return _suite_exit(full_suite(problem), args.out)


def cmd_forward(problem: Problem, args) -> int:
    alpha = problem.incident
    ap = alpha if args.alpha_prime is None else args.alpha_prime
    zetas = np.array(args.zeta) if args.zeta else np.zeros((1, problem.grid.dim_xa))
    rows = []
    for z in args.z:
        mom = momentum(z, args.nu, args.rho_perp, problem.spectral, alpha)
        sol = solve_remainder(mom, problem.ia, problem.spectral, problem.grid,
                              tol=problem.config.solver.tol,
                              max_iter=problem.config.solver.max_iter,
                              method=problem.config.solver.method, estimate=False)
        vals = pairing(sol, zetas, ap, problem.ia, problem.spectral, problem.grid)
        for zeta, v in zip(zetas, vals):
            rows.append([z.real, z.imag, *map(float, zeta), alpha, ap, v.real, v.imag,
                         sol.pde_residual, sol.iterations])
    header = ["z_re", "z_im"] + [f"zeta_{i}" for i in range(zetas.shape[1])] + \
        ["alpha", "alpha_prime", "re", "im", "residual", "iterations"]
    fileio.write_csv(args.out or Path("pairings.csv"), header, rows)
    return 0


def _plan(problem: Problem, args):
    interval = args.interval or problem.config.reconstruction.interval
    return plan_reconstruction(args.zeta, interval, problem.spectral, None, problem.incident,
                               problem.config.reconstruction.z_samples, problem.thresholds)


def _plan_z(plan, z):
    return float(plan.z_samples[len(plan.z_samples) // 2]) if z is None else float(z)


def cmd_smatrix(problem: Problem, args) -> int:
    plan = _plan(problem, args)
    z = _plan_z(plan, args.z)
    bundle = synthesize_kernels(plan, problem, z, args.n_nodes)
    fileio.write_kernels(args.out or Path("kernels.csv"), bundle.kernels)
    return 0


def cmd_invert(problem: Problem, args) -> int:
    plan = _plan(problem, args)
    z = _plan_z(plan, args.z)
    spectral = plan.spectral(problem.spectral)
    kernels = fileio.read_kernels(args.kernels, spectral.eigenvalues)
    mom = momentum(z, plan.nu, plan.rho_perp, spectral, plan.alpha)
    circle = kernels[(plan.alpha, plan.alpha)].circle_in
    i0 = circle.index_of(plan.rho(z), tol=1e-7)
    lam = next(iter(kernels.values())).lam
    phi, cond = invert_smatrix(kernels, mom, lam, (plan.alpha, i0))
    rows = []
    for a in sorted(phi):
        c = kernels[(a, a)].circle_out
        for t, v in zip(c.thetas, phi[a]):
            rows.append([lam, plan.alpha, a, float(t), v.real, v.imag])
    fileio.write_csv(args.out or Path("pairings_inverted.csv"),
                     ["lam", "alpha", "alpha_prime", "theta", "re", "im"], rows,
                     f"# condition number {cond!r}")
    return 0


def cmd_reconstruct(problem: Problem, args) -> int:
    rep = reconstruct_ball(problem, args.interval, args.zeta_rings, args.zeta_per_ring,
                           args.mode, args.oracle, args.n_nodes, args.z_samples,
                           max_radius=args.max_radius)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    fileio.write_json(out / "report.json", rep.as_dict())
    rows = []
    for r in rep.results:
        rec = r.recovered if r.recovered is not None else complex(np.nan, np.nan)
        rel = r.rel(r.recovered)
        rows.append([float(r.zeta[0]), float(r.zeta[1]), rec.real, rec.imag,
                     float(np.real(r.truth)), float(np.imag(r.truth)),
                     float("nan") if rel is None else rel, int(r.trusted)])
    fileio.write_csv(out / "vhat.csv", ["zeta_x", "zeta_y", "re_rec", "im_rec", "re_true",
                                        "im_true", "rel_err", "trusted"], rows)
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="f3scatter", description=__doc__.splitlines()[0])
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--scenario", type=Path, default=None,
                        help="scenario JSON (default: bundled default_scenario.json)")
    common.add_argument("--threads", type=int, default=1, help="FFT worker threads")
    common.add_argument("--out", type=Path, default=None, help="output file")
    sub = p.add_subparsers(dest="command", required=True)

    sub.add_parser("spectrum", parents=[common], help="subsystem eigenvalues and channels")
    sub.add_parser("green-verify", parents=[common], help="Green's-function invariant suite")
    sub.add_parser("verify-all", parents=[common], help="every module's invariant suite")

    f = sub.add_parser("forward", parents=[common], help="pairings at given momenta")
    f.add_argument("--z", type=_complex, action="append", required=True)
    f.add_argument("--nu", type=_vec, required=True)
    f.add_argument("--rho-perp", type=_vec, required=True)
    f.add_argument("--zeta", type=_vec, action="append")
    f.add_argument("--alpha-prime", type=int, default=None)

    for name, hlp in (("smatrix", "synthesize S-matrix kernels"),
                      ("invert", "recover pairings from S-matrix kernels")):
        s = sub.add_parser(name, parents=[common], help=hlp)
        s.add_argument("--zeta", type=_vec, required=True)
        s.add_argument("--z", type=float, default=None,
                       help="real z (default: middle sample of the plan)")
        s.add_argument("--interval", type=_pair, default=None)
        if name == "smatrix":
            s.add_argument("--n-nodes", type=int, default=16)
        else:
            s.add_argument("--kernels", type=Path, required=True)

    r = sub.add_parser("reconstruct", parents=[common], help="recover V̂_α over the ball")
    r.add_argument("--interval", type=_pair, default=None)
    r.add_argument("--mode", choices=["full", "near_forward"], default=None)
    r.add_argument("--zeta-rings", type=int, default=None)
    r.add_argument("--zeta-per-ring", type=int, default=None)
    r.add_argument("--oracle", action=argparse.BooleanOptionalAction, default=None)
    r.add_argument("--n-nodes", type=int, default=None)
    r.add_argument("--z-samples", type=int, default=None)
    r.add_argument("--max-radius", type=float, default=None,
                   help="outer ring radius (default 0.95 R)")
    r.add_argument("--out-dir", default="reconstruction")
    return p


COMMANDS = {"spectrum": cmd_spectrum, "green-verify": cmd_green_verify,
            "verify-all": cmd_verify_all, "forward": cmd_forward, "smatrix": cmd_smatrix,
            "invert": cmd_invert, "reconstruct": cmd_reconstruct}


def main(argv=None) -> int:
    logging.basicConfig(level=os.environ.get("F3_LOG", "WARNING").upper(),
                        format="%(levelname)s %(name)s: %(message)s")
    args = build_parser().parse_args(argv)
    try:
        cfg = parse_scenario(args.scenario or default_scenario_path())
        problem = Problem(cfg)
        _ = problem.spectral, problem.ia
    except (ConfigError, SpectrumError, ValueError) as err:
        print(f"config error: {err}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        with scipy.fft.set_workers(max(1, args.threads)):
            return COMMANDS[args.command](problem, args)
    except (AdmissibilityError, PlanError, ArithmeticError) as err:
        print(f"solver error: {err}", file=sys.stderr)
        return EXIT_SOLVER
    except fileio.FormatError as err:
        print(f"config error: {err}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
