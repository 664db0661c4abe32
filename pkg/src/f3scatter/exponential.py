"""Exponential solutions u_ρ = e^{iρ·w_a}(ψ_α + v) and their pairings.

Everything stays in plane-wave-removed gauge: only ψ_α + v is stored, and
the pairing integrand carries the single factor e^{-iζ·w_a} left over after
the two plane waves cancel.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
import scipy.sparse.linalg as spla

from .faddeev_green import ComplexMomentum, GreenOperator, boundary_operator, richardson
from .geometry import GridPair, l2_norm
from .subsystem import SpectralData

log = logging.getLogger(__name__)


class ContractionError(ArithmeticError):
    pass


@dataclass
class RemainderSolution:
    mom: ComplexMomentum
    v: np.ndarray
    w: np.ndarray
    iterations: int
    contraction_estimate: float
    residual: float            # solver residual of (Id + I_a G_a) w = I_a ψ_α
    pde_residual: float        # ‖Π_reg P(ρ)(ψ_α + v)‖ / ‖I_a ψ_α‖
    singular_defect: float     # ‖Π_sing P(ρ)(ψ_α + v)‖ / ‖I_a ψ_α‖
    method: str = "neumann"


def incident_field(spectral: SpectralData, channel: int, grid: GridPair) -> np.ndarray:
    """ψ_α(w^a) ⊗ 1(w_a) in memory layout."""
    psi = spectral.psi(channel)
    return np.broadcast_to(psi.reshape((-1,) + (1,) * grid.dim_xa), grid.shape).astype(complex)


def contraction_estimate(op: GreenOperator, ia: np.ndarray, n_iter: int = 12,
                         seed: int = 0) -> float:
    """‖I_a G_a(ρ)‖ on L^2 by power iteration on (I_a G_a)^*(I_a G_a)."""
    if not np.any(ia):
        return 0.0
    rng = np.random.default_rng(seed)
    f = rng.standard_normal(op.grid.shape) + 1j * rng.standard_normal(op.grid.shape)
    f /= np.linalg.norm(f)
    est = 0.0
    for _ in range(n_iter):
        g = op.apply_adjoint(ia * (ia * op.apply(f)))
        nrm = np.linalg.norm(g)
        if nrm == 0:
            return 0.0
        est = np.sqrt(nrm)
        f = g / nrm
    return float(est)


def _operator(mom, spectral, grid, op):
    if op is not None:
        return op
    if np.imag(mom.z) == 0:
        return boundary_operator(mom, spectral, grid)
    return GreenOperator(mom, spectral, grid)


def solve_remainder(mom: ComplexMomentum, ia: np.ndarray, spectral: SpectralData,
                    grid: GridPair, op: GreenOperator | None = None, tol: float = 1e-10,
                    max_iter: int = 200, method: str = "neumann",
                    estimate: bool = True) -> RemainderSolution:
    """Solve (Id + I_a G_a(ρ)) w = I_a ψ_α and return v = -G_a(ρ) w.

    Real z uses the boundary-value operator. Neumann iteration raises
    ContractionError once the residual stops shrinking by at least 0.9 per
    step; ``method="gmres"`` is the Krylov fallback.
    """
    op = _operator(mom, spectral, grid, op)
    psi = incident_field(spectral, mom.incident, grid)
    rhs = ia * psi
    rhs_norm = np.linalg.norm(rhs)
    zero = np.zeros(grid.shape, dtype=complex)
    if rhs_norm == 0:
        return RemainderSolution(mom, zero, zero, 0, 0.0, 0.0, 0.0, 0.0, method)
    kappa = contraction_estimate(op, ia) if estimate else float("nan")
    if method == "neumann":
        w = rhs.copy()
        prev = None
        it = 0
        while True:
            gw = op.apply(w)
            r = rhs - ia * gw - w
            res = np.linalg.norm(r) / rhs_norm
            if res < tol:
                break
            if prev is not None and res > 0.9 * prev:
                raise ContractionError(
                    f"contraction failure: residual ratio {res / prev:.3g} > 0.9 "
                    f"(estimated norm {kappa:.3g})")
            if it >= max_iter:
                raise ContractionError(f"contraction failure: no convergence in {max_iter} steps")
            prev = res
            w = w + r
            it += 1
        v = -gw
    elif method == "gmres":
        n = rhs.size

        def mv(x):
            x = x.reshape(grid.shape)
            return (x + ia * op.apply(x)).ravel()

        A = spla.LinearOperator((n, n), matvec=mv, dtype=complex)
        count = [0]

        def cb(_):
            count[0] += 1

        w, info = spla.gmres(A, rhs.ravel(), rtol=tol, atol=0.0, restart=60,
                             maxiter=max_iter, callback=cb, callback_type="pr_norm")
        if info != 0:
            raise ContractionError(f"contraction failure: gmres info {info}")
        w = w.reshape(grid.shape)
        gw = op.apply(w)
        res = np.linalg.norm(rhs - ia * gw - w) / rhs_norm
        it = count[0]
        v = -gw
    else:
        raise ValueError(f"unknown method {method!r}")
    u = psi + v
    pu = op.apply_p(u) + ia * u
    sing = op.singular_part(pu)
    pde = np.linalg.norm(pu - sing) / rhs_norm
    defect = np.linalg.norm(sing) / rhs_norm
    log.debug("solve z=%s iterations=%d residual=%.2e", mom.z, it, res)
    return RemainderSolution(mom, v, w, it, kappa, float(res), float(pde), float(defect), method)


def pairing_density(sol: RemainderSolution, ia: np.ndarray, spectral: SpectralData,
                    grid: GridPair, alpha_prime: int, born: bool = False) -> np.ndarray:
    """∫ I_a (ψ_α + v) conj(ψ_α') dw^a as a function on the X_a grid."""
    psi = incident_field(spectral, sol.mom.incident, grid)
    u = psi if born else psi + sol.v
    psi_p = spectral.psi(alpha_prime)
    return (np.conj(psi_p) @ (ia * u).reshape(grid.n_perp, -1) * grid.xperp_cell).reshape(
        grid.xa_shape)


def transform_at(density: np.ndarray, grid: GridPair, zetas) -> np.ndarray:
    """∫ e^{-iζ·w_a} density(w_a) dw_a at each row of ``zetas``."""
    zetas = np.atleast_2d(np.asarray(zetas, dtype=float))
    wa = grid.xa_mesh().reshape(-1, grid.dim_xa)
    phase = np.exp(-1j * (zetas @ wa.T))
    return phase @ density.ravel() * grid.xa_cell


def pairing(sol: RemainderSolution, zeta, alpha_prime: int, ia: np.ndarray,
            spectral: SpectralData, grid: GridPair):
    """G_{αα'}(ρ, ρ̄ + ζ) = ∫ I_a (ψ_α + v) conj(ψ_α') e^{-iζ·w_a} dw.

    Scalar for a single ζ, array for a stack of them.
    """
    zeta = np.asarray(zeta, dtype=float)
    vals = transform_at(pairing_density(sol, ia, spectral, grid, alpha_prime), grid, zeta)
    return complex(vals[0]) if zeta.ndim == 1 else vals


def born_term(zeta, alpha: int, alpha_prime: int, ia: np.ndarray, spectral: SpectralData,
              grid: GridPair):
    """∫ I_a ψ_α conj(ψ_α') e^{-iζ·w_a} dw, the large-|z| limit of the pairing."""
    psi = spectral.psi(alpha)
    psi_p = spectral.psi(alpha_prime)
    dens = ((np.conj(psi_p) * psi) @ ia.reshape(grid.n_perp, -1) * grid.xperp_cell).reshape(
        grid.xa_shape)
    zeta = np.asarray(zeta, dtype=float)
    vals = transform_at(dens, grid, zeta)
    return complex(vals[0]) if zeta.ndim == 1 else vals


def pairing_on_circle(mom: ComplexMomentum, nodes: np.ndarray, alpha_prime: int,
                      ia: np.ndarray, spectral: SpectralData, grid: GridPair,
                      limit: str = "direct", eta_schedule=(0.02, 0.01, 0.005), **kw):
    """Pairings G_{αα'}(ρ, ρ'_j) at real z for circle nodes ρ'_j (rows of ``nodes``).

    ``limit="direct"`` solves once with the boundary-value operator;
    ``"richardson"`` extrapolates solutions at z + iη over ``eta_schedule``.
    Returns (values, solution_or_None, error_estimate).
    """
    if np.imag(mom.z) != 0:
        raise ValueError("pairing_on_circle takes real z")
    zetas = np.asarray(nodes, dtype=float) - np.real(mom.rho)[None]
    if limit == "direct":
        sol = solve_remainder(mom, ia, spectral, grid, **kw)
        return pairing(sol, zetas, alpha_prime, ia, spectral, grid), sol, 0.0
    if limit != "richardson":
        raise ValueError(f"unknown limit {limit!r}")
    vals = []
    for eta in eta_schedule:
        m = mom.shifted(1j * eta)
        op = GreenOperator(m, spectral, grid, real_circle=True)
        sol = solve_remainder(m, ia, spectral, grid, op=op, **kw)
        vals.append(pairing(sol, zetas, alpha_prime, ia, spectral, grid))
    out, err = richardson(list(eta_schedule), vals)
    return out, None, err


def field_norm(f: np.ndarray, grid: GridPair) -> float:
    return l2_norm(f, grid)
