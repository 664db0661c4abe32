"""Invariant checks shared by the ``green-verify`` and ``verify-all`` commands.

Each check returns a plain dict with ``name``, ``passed``, the measured
``value`` and the ``threshold`` it was held to.
"""
from __future__ import annotations

import logging
import time

import numpy as np

from .exponential import pairing, solve_remainder
from .faddeev_green import GreenOperator, momentum, real_limit_green
from .geometry import ia_decay_constant
from .reconstruction import continue_extrapolate
from .scattering import (circle_grid, forward_smatrix, invert_smatrix,
                         invert_smatrix_near_forward)

log = logging.getLogger(__name__)


def _result(name, value, threshold, passed=None, **detail):
    ok = bool(value <= threshold) if passed is None else bool(passed)
    return {"name": name, "passed": ok, "value": float(value), "threshold": float(threshold),
            **detail}


def sample_momenta(problem, n: int = 5):
    """Admissible complex momenta for the incident channel (Im z > 0)."""
    spectral = problem.spectral
    alpha = problem.incident
    eps = float(spectral.eigenvalues[alpha])
    base = 0.45 * np.sqrt(-eps)
    out = []
    for k in range(n):
        t = 0.4 + 1.1 * k
        nu = np.array([np.cos(t), np.sin(t)])
        perp = base * (0.5 + 0.1 * k) * np.array([-nu[1], nu[0]])
        z = complex(0.3 + 0.4 * k, 0.5 + 0.3 * k)
        out.append(momentum(z, nu, perp, spectral, alpha))
    return out


def random_fields(grid, n: int, seed: int = 0):
    rng = np.random.default_rng(seed)
    return [rng.standard_normal(grid.shape) + 1j * rng.standard_normal(grid.shape)
            for _ in range(n)]


def green_residuals(problem, n_fields: int = 20, n_momenta: int = 5, seed: int = 0) -> dict:
    """max over fields and momenta of ‖Π_reg(P G f - f)‖ and ‖Π_reg(G P f - f)‖."""
    grid = problem.grid
    worst_pg = worst_gp = 0.0
    for mom in sample_momenta(problem, n_momenta):
        op = GreenOperator(mom, problem.spectral, grid)
        for f in random_fields(grid, n_fields, seed):
            fr = op.regular_part(f)
            nf = np.linalg.norm(fr)
            worst_pg = max(worst_pg, np.linalg.norm(op.regular_part(op.apply_p(op.apply(f)) - f)) / nf)
            worst_gp = max(worst_gp, np.linalg.norm(op.regular_part(op.apply(op.apply_p(f)) - f)) / nf)
    return _result("green_inverse_residual", max(worst_pg, worst_gp), 1e-10,
                   p_after_g=worst_pg, g_after_p=worst_gp)


def cauchy_nodes(z0: complex, radius: float, n: int):
    t = 2 * np.pi * (np.arange(n) + 0.5) / n
    return z0 + radius * np.exp(1j * t)


def cauchy_green_pairing(problem, z0=1 + 2j, radius: float = 0.3, n: int = 24,
                         seed: int = 1) -> dict:
    """Mean-value reproduction of z ↦ ⟨g, G_a(z) f⟩ on a circle around z0."""
    mom0 = sample_momenta(problem, 1)[0]
    grid = problem.grid
    f, g = random_fields(grid, 2, seed)

    def val(z):
        m = momentum(z, mom0.nu, mom0.rho_perp, problem.spectral, problem.incident)
        return np.vdot(g, GreenOperator(m, problem.spectral, grid).apply(f))

    centre = val(z0)
    mean = np.mean([val(z) for z in cauchy_nodes(z0, radius, n)])
    return _result("cauchy_mean_green", abs(mean - centre) / abs(centre), 1e-7)


def cauchy_pairing(problem, zeta=(0.7, 0.4), z0=1 + 2j, radius: float = 0.3,
                   n: int = 16) -> dict:
    """Mean-value reproduction of the pairing z ↦ G_{αα}(ρ(z), ρ̄(z)+ζ)."""
    mom0 = sample_momenta(problem, 1)[0]
    zeta = np.asarray(zeta, dtype=float)

    def val(z):
        m = momentum(z, mom0.nu, mom0.rho_perp, problem.spectral, problem.incident)
        sol = solve_remainder(m, problem.ia, problem.spectral, problem.grid, estimate=False)
        return pairing(sol, zeta, problem.incident, problem.ia, problem.spectral, problem.grid)

    centre = val(z0)
    mean = np.mean([val(z) for z in cauchy_nodes(z0, radius, n)])
    return _result("cauchy_mean_pairing", abs(mean - centre) / abs(centre), 1e-7)


def real_limit_stability(problem, seed: int = 2) -> dict:
    """Richardson limit vs the tiny-η boundary operator, within the spread estimate."""
    mom0 = sample_momenta(problem, 1)[0]
    m = momentum(0.8, mom0.nu, mom0.rho_perp, problem.spectral, problem.incident)
    f = random_fields(problem.grid, 1, seed)[0] * problem.ia
    lim, err = real_limit_green(m, problem.spectral, problem.grid, f,
                                problem.config.solver.eta_schedule,
                                problem.config.solver.extrapolation_tol)
    direct = GreenOperator(m.shifted(1e-9j), problem.spectral, problem.grid,
                           real_circle=True).apply(f)
    diff = np.linalg.norm(lim - direct)
    return _result("real_limit_stability", diff, max(err, 1e-14), estimate=err)


def exponential_residuals(problem, z_values=(2j, 0.8)) -> dict:
    mom0 = sample_momenta(problem, 1)[0]
    worst, kappa = 0.0, 0.0
    for z in z_values:
        m = momentum(z, mom0.nu, mom0.rho_perp, problem.spectral, problem.incident)
        sol = solve_remainder(m, problem.ia, problem.spectral, problem.grid)
        worst = max(worst, sol.pde_residual)
        kappa = max(kappa, sol.contraction_estimate)
    return _result("exponential_pde_residual", worst, 1e-8,
                   passed=worst <= 1e-8 and kappa < 0.5, contraction=kappa)


def decay_linearity(problem, deltas=(0.01, 0.05, 0.1)) -> dict:
    mu = min(b.decay_mu for b in problem.geometry.others) if problem.geometry.others else 1.0
    c = []
    for d in deltas:
        p = problem.scaled(d / problem.config.potentials.delta)
        c.append(ia_decay_constant(p.ia, mu, p.grid) / d)
    dev = (max(c) - min(c)) / max(abs(c[0]), 1e-300)
    return _result("decay_constant_linearity", dev, 1e-10,
                   passed=dev <= 1e-10 and np.all(np.isfinite(c)))


def _synthetic_circles(n=16, lam=-2.0, eps=-4.0, seed=3):
    rng = np.random.default_rng(seed)
    nu = np.array([np.cos(0.3), np.sin(0.3)])
    z = 0.6
    c = circle_grid(lam, eps, n, nu, z)
    G = 0.05 * (rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n)))
    return c, nu, z, G


class _Mom:
    def __init__(self, nu, rho):
        self.nu = nu
        self.rho = rho
        self.z = float(nu @ rho)


def scattering_identities(seed: int = 3) -> dict:
    """Round trip and the near-forward restriction identity on random small kernels."""
    c, nu, z, G = _synthetic_circles(seed=seed)
    incoming = [_Mom(_rot_to(node), node) for node in c.nodes]
    kern = forward_smatrix({(0, 0): G}, {0: c}, {0: incoming}, c.lam)
    i0 = c.cut_indices[0]
    phi, _ = invert_smatrix(kern, incoming[i0], c.lam, (0, i0))
    rt = np.linalg.norm(phi[0] - G[i0]) / np.linalg.norm(G[i0])
    nf, _ = invert_smatrix_near_forward(kern, incoming[i0], c.lam, (0, i0))
    idx, vals = nf[0]
    ident = np.max(np.abs(vals - phi[0][idx])) / np.max(np.abs(phi[0]))
    wsum = abs(c.weights.sum() - 2 * np.pi)
    ok = rt <= 1e-10 and ident <= 1e-12 and wsum <= 1e-12
    return _result("scattering_identities", max(rt, ident), 1e-10, passed=ok,
                   roundtrip=rt, near_forward=ident, weight_sum_error=wsum)


def _rot_to(node):
    """Direction ν_i for an incoming node, keeping the side of ρ⊥ fixed."""
    r = np.linalg.norm(node)
    m = 0.3 * r
    ang = np.arctan2(m, np.sqrt(r * r - m * m))
    c, s = np.cos(-ang), np.sin(-ang)
    u = node / r
    return np.array([c * u[0] - s * u[1], s * u[0] + c * u[1]])


def continuation_oracle() -> dict:
    x = 0.3 + 0.3 * (1 - np.cos((2 * np.arange(16) + 1) * np.pi / 32))
    val, model = continue_extrapolate(x, 3 + 1 / (x + 2j))
    _, neg = continue_extrapolate(x, np.exp(-x**2))
    err = abs(val - 3) / 3
    return _result("continuation_oracle", err, 1e-6,
                   passed=err <= 1e-6 and model.trusted and not neg.trusted)


def config_roundtrip(problem) -> dict:
    from .scenario import load_scenario
    cfg = problem.config
    again = load_scenario(cfg.model_dump(mode="json"))
    same = again == cfg and again.hash() == cfg.hash()
    return _result("config_roundtrip", 0.0 if same else 1.0, 0.0)


def green_suite(problem) -> list:
    return [green_residuals(problem, n_fields=4, n_momenta=3),
            cauchy_green_pairing(problem),
            real_limit_stability(problem)]


def full_suite(problem) -> list:
    checks = [lambda: green_residuals(problem, n_fields=4, n_momenta=3),
              lambda: cauchy_green_pairing(problem),
              lambda: real_limit_stability(problem),
              lambda: exponential_residuals(problem),
              lambda: decay_linearity(problem),
              scattering_identities,
              continuation_oracle,
              lambda: config_roundtrip(problem)]
    out = []
    for chk in checks:
        t0 = time.perf_counter()
        try:
            res = chk()
        except Exception as err:   # a crashing check is a failed check
            res = {"name": getattr(chk, "__name__", "check"), "passed": False,
                   "error": f"{type(err).__name__}: {err}"}
        log.info("%s passed=%s (%.1fs)", res["name"], res["passed"], time.perf_counter() - t0)
        out.append(res)
    return out
