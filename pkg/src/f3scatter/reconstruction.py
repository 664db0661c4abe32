"""Recovery of V̂_α(ζ) from relative S-matrix data.

For each ζ the incoming momentum is ρ(z) = zν + ρ⊥ with ρ⊥ = -ζ/2 and
ν ⊥ ζ, so ρ and ρ + ζ have equal length and both lie on the channel circle
at λ = z² + |ρ⊥|² + ε_α. Real-z pairings G_{αα}(ρ, ρ+ζ) are read from the
inverted S-matrix, continued analytically into Im z > 0 and extrapolated
along the imaginary axis, where they tend to V̂_α(ζ).
"""
from __future__ import annotations

import logging
import time
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import AAA

from .exponential import pairing, pairing_on_circle, solve_remainder
from .faddeev_green import AdmissibilityError, GreenOperator, momentum
from .scattering import (circle_grid, forward_smatrix, invert_smatrix,
                         invert_smatrix_near_forward, rotate)
from .subsystem import SpectralData, near_threshold

log = logging.getLogger(__name__)

EXCLUSION_TOL = 1e-6
# strip half-width (in cell half-projections) averaged on the imaginary-axis ladder
LADDER_STRIP = 2.0


class PlanError(ValueError):
    pass


@dataclass(frozen=True)
class ReconstructionPlan:
    zeta: np.ndarray
    rho_perp: np.ndarray
    nu: np.ndarray
    alpha: int
    eps_alpha: float
    epsilon1: float
    epsilon0: float
    interval: tuple
    radius: float
    z_interval: tuple
    z_samples: np.ndarray

    @property
    def lower(self) -> float:
        """|ρ⊥|² + ε_α, the bottom of the reachable energies."""
        return float(self.rho_perp @ self.rho_perp + self.eps_alpha)

    def lam(self, z) -> float:
        return float(z * z + self.lower)

    def rho(self, z) -> np.ndarray:
        return z * self.nu + self.rho_perp

    def spectral(self, spectral: SpectralData) -> SpectralData:
        return spectral.with_epsilon1(self.epsilon1)


def ball_radius(interval, eps_alpha: float, eps_prime: float | None = None) -> float:
    """2 sqrt(sup I - ε_α), or with sup I capped at ε' for the near-forward regime."""
    top = interval[1] if eps_prime is None else min(interval[1], eps_prime)
    return float(2 * np.sqrt(top - eps_alpha))


def next_level(eps_alpha: float, lambda_prime) -> float:
    """ε', the next element of Λ'_a above ε_α."""
    return float(min(e for e in lambda_prime if e > eps_alpha + EXCLUSION_TOL))


def plan_reconstruction(zeta, interval, spectral: SpectralData, lambda_prime=None,
                        alpha: int = 0, n_z: int = 24, thresholds=None,
                        near_forward: bool = False) -> ReconstructionPlan:
    """Choose ρ⊥, ν, ε₁ and the real z-samples for one ζ.

    ``lambda_prime`` is Λ'_a (default: from ``spectral``); ``thresholds`` is
    the full Λ' avoided by the sampled energies (default Λ'_a).
    """
    zeta = np.asarray(zeta, dtype=float)
    a, b = map(float, interval)
    eps_alpha = float(spectral.eigenvalues[alpha])
    lp = sorted(spectral.lambda_prime if lambda_prime is None else map(float, lambda_prime))
    thr = lp if thresholds is None else sorted(map(float, thresholds))
    if not (eps_alpha <= a < b <= 0):
        raise PlanError(f"interval ({a}, {b}) must be a non-empty subset of ({eps_alpha}, 0)")
    R = ball_radius((a, b), eps_alpha, next_level(eps_alpha, lp) if near_forward else None)
    zn = float(np.linalg.norm(zeta))
    if zn >= R:
        raise PlanError(f"zeta outside ball: |zeta| = {zn:.6g} >= R = {R:.6g}")
    lower = 0.25 * zn**2 + eps_alpha
    if near_threshold(lower, lp, EXCLUSION_TOL):
        raise PlanError(f"excluded sphere: |zeta|^2/4 + eps_alpha = {lower:.9g} is in Lambda'_a")
    rho_perp = -0.5 * zeta
    nu = rotate(zeta / zn, np.pi / 2)
    # ε₁ strictly between max(lower, inf I) and the first level above lower
    e_next = min(e for e in lp if e > lower)
    lo, hi = max(lower, a), min(b, e_next)
    if not lo < hi:
        raise PlanError(f"empty z-interval: I and ({lower:.6g}, {e_next:.6g}) do not overlap")
    eps1 = 0.5 * (lo + hi)
    if eps1 >= 0:
        eps1 = 0.5 * lo
    eps0 = e_next
    zlo, zhi = np.sqrt(lo - lower), np.sqrt(hi - lower)
    k = np.arange(n_z)
    cheb = 0.5 * (zlo + zhi) - 0.5 * (zhi - zlo) * np.cos((2 * k + 1) * np.pi / (2 * n_z))
    lam = cheb**2 + lower
    keep = np.array([not near_threshold(x, thr, EXCLUSION_TOL) for x in lam], dtype=bool)
    if not np.any(keep):
        raise PlanError("empty z-interval: every sample sits on a threshold")
    return ReconstructionPlan(zeta, rho_perp, nu, int(alpha), eps_alpha, float(eps1),
                              float(eps0), (a, b), R, (float(zlo), float(zhi)), cheb[keep])


# ---------------------------------------------------------------- boundary data

def _decomposition(point, nu_ref, perp_ref, perp_mag):
    """(z, ν, ρ⊥) with zν + ρ⊥ = point, |ρ⊥| = perp_mag, and ρ⊥ on the same
    side of ν as ``perp_ref`` is of ``nu_ref``."""
    p = np.asarray(point, dtype=float)
    r = np.linalg.norm(p)
    z = np.sqrt(r * r - perp_mag**2)
    side = np.sign(nu_ref[0] * perp_ref[1] - nu_ref[1] * perp_ref[0]) or 1.0
    nu = rotate(p / r, -side * np.arctan2(perp_mag, z))
    rho_perp = p - z * nu
    rho_perp -= (rho_perp @ nu) * nu
    return float(z), nu, rho_perp


def _channel_perp(plan: ReconstructionPlan, e_k: float, lam: float) -> float:
    """Shared |ρ⊥| on the circle of channel k, shrunk only when inadmissible."""
    m = 0.5 * float(np.linalg.norm(plan.zeta))
    cap = min(plan.epsilon0 - e_k, -e_k, lam - e_k)
    return m if m * m < 0.81 * cap else 0.5 * np.sqrt(cap)


@dataclass
class KernelBundle:
    kernels: dict
    circles: dict
    source: tuple
    target: int
    pairings: dict = field(default_factory=dict)
    meta: dict = field(default_factory=dict)


def synthesize_kernels(plan: ReconstructionPlan, problem, z: float, n_nodes: int = 16,
                       solver_kw=None) -> KernelBundle:
    """S♯ kernels at λ(z) generated from pairings at every incoming node.

    Every circle is cut by ν·ρ' = z, so ρ(z) and ρ(z)+ζ are both nodes of the
    channel-α circle.
    """
    solver_kw = dict(solver_kw or {})
    solver_kw.setdefault("estimate", False)
    spectral = plan.spectral(problem.spectral)
    lam = plan.lam(z)
    ev = spectral.eigenvalues
    open_ch = [k for k in spectral.bound_channels if ev[k] < lam]
    circles = {k: circle_grid(lam, float(ev[k]), n_nodes, plan.nu, float(z), channel=k)
               for k in open_ch}
    alpha = plan.alpha
    rho = plan.rho(z)
    i0 = circles[alpha].index_of(rho)
    j_out = circles[alpha].index_of(rho + plan.zeta)
    pairings = {(k, kp): np.zeros((circles[k].n, circles[kp].n), dtype=complex)
                for k in open_ch for kp in open_ch}
    incoming = {}
    for k in open_ch:
        c = circles[k]
        mag = _channel_perp(plan, float(ev[k]), lam)
        moms = []
        for i, node in enumerate(c.nodes):
            if k == alpha and i == i0:
                mom = momentum(z, plan.nu, plan.rho_perp, spectral, alpha)
            else:
                zi, nui, pi = _decomposition(node, plan.nu, plan.rho_perp, mag)
                mom = momentum(zi, nui, pi, spectral, k)
            sol = solve_remainder(mom, problem.ia, spectral, problem.grid, **solver_kw)
            for kp in open_ch:
                zetas = circles[kp].nodes - np.real(mom.rho)[None]
                pairings[(k, kp)][i] = pairing(sol, zetas, kp, problem.ia, spectral, problem.grid)
            moms.append(mom)
        incoming[k] = moms
    kernels = forward_smatrix(pairings, circles, incoming, lam)
    meta = next(iter(kernels.values())).meta if kernels else {}
    return KernelBundle(kernels, circles, (alpha, i0), j_out, pairings, dict(meta))


@dataclass
class BoundarySample:
    z: float
    lam: float
    value: complex
    direct: complex | None
    condition: float
    spectral_radius: float


def boundary_data(plan: ReconstructionPlan, problem, source=None, n_nodes: int = 16,
                  near_forward: bool = False, solver_kw=None):
    """Real-z samples G_{αα}(ρ(z_k), ρ(z_k)+ζ) read from inverted S-matrix kernels.

    ``source(plan, z)`` returns a KernelBundle; the default synthesizes the
    kernels through the forward map. Returns (samples, dropped) where dropped
    lists (z, reason) for samples that could not be produced.
    """
    spectral = plan.spectral(problem.spectral)
    thr = problem.thresholds
    if source is None:
        def source(p, z):
            return synthesize_kernels(p, problem, z, n_nodes, solver_kw)
    samples, dropped = [], []
    for z in plan.z_samples:
        lam = plan.lam(z)
        if near_threshold(lam, thr, EXCLUSION_TOL):
            log.info("dropping z=%.6g: lambda=%.9g on a threshold", z, lam)
            dropped.append((float(z), "threshold"))
            continue
        bundle = source(plan, z)
        mom = momentum(z, plan.nu, plan.rho_perp, spectral, plan.alpha)
        if near_forward:
            sol, cond = invert_smatrix_near_forward(bundle.kernels, mom, lam, bundle.source)
            idx, vals = sol[plan.alpha]
            value = complex(vals[list(idx).index(bundle.target)])
        else:
            sol, cond = invert_smatrix(bundle.kernels, mom, lam, bundle.source)
            value = complex(sol[plan.alpha][bundle.target])
        direct = None
        if bundle.pairings:
            direct = complex(bundle.pairings[(plan.alpha, plan.alpha)][bundle.source[1],
                                                                        bundle.target])
        samples.append(BoundarySample(float(z), lam, value, direct, cond,
                                      float(bundle.meta.get("spectral_radius", np.nan))))
    return samples, dropped


def oracle_pairing_path(plan: ReconstructionPlan, problem, z_list, solver_kw=None) -> np.ndarray:
    """Pairings G_{αα}(ρ(z), ρ(z)+ζ) by direct solves, bypassing S-matrices.

    Complex z uses the Green operator in Im z > 0 with the strip about
    ν·ξ = 0 cell-averaged; real z the boundary value.
    """
    solver_kw = dict(solver_kw or {})
    solver_kw.setdefault("estimate", False)
    spectral = plan.spectral(problem.spectral)
    out = []
    for z in z_list:
        z = complex(z)
        mom = momentum(z, plan.nu, plan.rho_perp, spectral, plan.alpha)
        if z.imag == 0:
            node = np.real(mom.rho) + plan.zeta
            vals, _, _ = pairing_on_circle(mom, node[None], plan.alpha, problem.ia, spectral,
                                           problem.grid, **solver_kw)
            out.append(vals[0])
        else:
            op = GreenOperator(mom, spectral, problem.grid, strip_width=LADDER_STRIP)
            sol = solve_remainder(mom, problem.ia, spectral, problem.grid, op=op, **solver_kw)
            out.append(pairing(sol, plan.zeta, plan.alpha, problem.ia, spectral, problem.grid))
    return np.asarray(out, dtype=complex)


# ---------------------------------------------------------------- continuation

@dataclass
class TailFit:
    c0: complex
    coeffs: np.ndarray
    residual: float           # max |fit - data| / max(|c0|, tiny)


def tail_fit(y, values) -> TailFit:
    """Least-squares fit of c₀ + c₁/y + c₂/y² along the imaginary axis."""
    y = np.asarray(y, dtype=float)
    values = np.asarray(values, dtype=complex)
    A = np.stack([np.ones_like(y), 1 / y, 1 / y**2], -1)
    coef, *_ = np.linalg.lstsq(A.astype(complex), values, rcond=None)
    res = np.max(np.abs(A @ coef - values)) if len(y) > 3 else 0.0
    scale = max(abs(coef[0]), np.max(np.abs(values)), 1e-300)
    return TailFit(complex(coef[0]), coef, float(res / scale))


@dataclass
class ContinuationModel:
    method: str
    support_points: np.ndarray
    support_values: np.ndarray
    weights: np.ndarray
    degree: int
    holdout_error: float
    fit_residual: float
    poles: np.ndarray
    ladder: np.ndarray
    tail: TailFit
    half_spread: float
    trusted: bool
    reasons: list

    def __call__(self, z):
        z = np.asarray(z, dtype=complex)
        d = z[..., None] - self.support_points
        with np.errstate(divide="ignore", invalid="ignore"):
            c = self.weights / d
            r = (c @ self.support_values) / c.sum(-1)
        hit = np.isclose(d, 0, atol=1e-14, rtol=0)
        if np.any(hit):
            r = np.where(hit.any(-1), self.support_values[np.argmax(hit, -1)], r)
        return r

    def summary(self) -> dict:
        return {"method": self.method, "degree": self.degree,
                "holdout_error": self.holdout_error, "fit_residual": self.fit_residual,
                "tail_residual": self.tail.residual, "half_spread": self.half_spread,
                "n_poles_upper": int(np.sum(self.poles.imag > 0)),
                "trusted": self.trusted, "reasons": list(self.reasons)}


@dataclass(frozen=True)
class ContinuationConfig:
    max_degree: int = 10
    ladder: tuple = tuple(1e2 * 4.0**k for k in range(8))   # in units of max(|z_k|, 1)
    holdout_tol: float = 1e-3    # boundary data carry ~1e-5 discretization jitter
    tail_tol: float = 1e-4
    spread_tol: float = 1e-2
    pole_sector: float = 1.0


def _aaa(x, f, m):
    if np.ptp(f.real) == 0 and np.ptp(f.imag) == 0:
        return None
    with warnings.catch_warnings():
        # rtol=0 always runs to max_terms, which AAA reports as non-convergence
        warnings.simplefilter("ignore", RuntimeWarning)
        return AAA(x, f, rtol=0.0, max_terms=m, clean_up=False)


def _eval(model, f, z):
    if model is None:
        return np.full(np.shape(z), f[0], dtype=complex)
    return model(np.asarray(z, dtype=complex))


def _scale(f):
    return max(float(np.max(np.abs(f))), 1e-300)


def _select_degree(x, f, cap):
    """Max-terms by holdout: fit on even samples, score on odd ones."""
    best, best_err = 1, np.inf
    xe, fe, xo, fo = x[::2], f[::2], x[1::2], f[1::2]
    for m in range(1, min(cap + 1, len(xe)) + 1):
        mod = _aaa(xe, fe, m)
        err = np.max(np.abs(_eval(mod, fe, xo) - fo)) / _scale(f)
        if err < best_err * (1 - 1e-3):
            best, best_err = m, err
    return best, float(best_err)


def _limit(x, f, m, ladder):
    mod = _aaa(x, f, m)
    vals = _eval(mod, f, 1j * np.asarray(ladder))
    return mod, vals, tail_fit(ladder, vals)


def continue_extrapolate(z, values, cfg: ContinuationConfig | None = None):
    """Continue boundary samples into Im z > 0 and return the z → i∞ limit.

    A barycentric rational interpolant (degree by holdout, capped at
    ``cfg.max_degree``) is evaluated on a geometric ladder z = iy and the
    values fitted to c₀ + c₁/y + c₂/y². Returns (c₀, ContinuationModel);
    ``model.trusted`` is False with reasons when any diagnostic fails.
    """
    cfg = cfg or ContinuationConfig()
    x = np.asarray(z, dtype=float)
    f = np.asarray(values, dtype=complex)
    if len(x) < 12:
        raise ValueError("continuation needs at least 12 samples")
    order = np.argsort(x)
    x, f = x[order], f[order]
    ladder = np.asarray(cfg.ladder, dtype=float) * max(float(np.max(np.abs(x))), 1.0)
    m, hold = _select_degree(x, f, cfg.max_degree)
    mod, vals, tail = _limit(x, f, m, ladder)
    halves = [_limit(x[s::2], f[s::2], m, ladder)[2].c0 for s in (0, 1)]
    spread = max(abs(h - tail.c0) for h in halves) / max(abs(tail.c0), _scale(f) * 1e-12)
    if mod is None:
        sp, sv, w, poles = x[:1].astype(complex), f[:1], np.ones(1), np.zeros(0, complex)
        fit_res = 0.0
    else:
        sp, sv, w = mod.support_points, mod.support_values, mod.weights
        poles = mod.poles()
        fit_res = float(np.max(np.abs(mod(x) - f)) / _scale(f))
    reasons = []
    if hold > cfg.holdout_tol:
        reasons.append(f"holdout error {hold:.2e}")
    if tail.residual > cfg.tail_tol:
        reasons.append(f"tail residual {tail.residual:.2e}")
    if spread > cfg.spread_tol:
        reasons.append(f"half-sample spread {spread:.2e}")
    up = poles[poles.imag > 0]
    near = up[np.abs(up.real) <= cfg.pole_sector * up.imag]
    if len(near):
        reasons.append(f"{len(near)} pole(s) near the imaginary axis")
    model = ContinuationModel("rational-barycentric", sp, sv, w, m, hold, fit_res, poles,
                              ladder, tail, float(spread), not reasons, reasons)
    return tail.c0, model


# ---------------------------------------------------------------- ball sweep

def zeta_grid(radius: float, rings: int, per_ring: int, max_radius: float | None = None):
    """Polar grid in B₀(0.95R) off the coordinate axes; ±ζ pairs when per_ring is even.

    ``max_radius`` overrides the outer ring radius 0.95R.
    """
    top = 0.95 * radius if max_radius is None else float(max_radius)
    pts = []
    for m in range(1, rings + 1):
        r = top * m / rings
        off = 0.3 + np.pi * m / (per_ring * (rings + 1))
        for j in range(per_ring):
            t = off + 2 * np.pi * j / per_ring
            pts.append((r * np.cos(t), r * np.sin(t)))
    return np.array(pts)


@dataclass
class ZetaResult:
    zeta: np.ndarray
    truth: complex
    recovered: complex | None = None
    oracle: complex | None = None
    trusted: bool = False
    status: str = "ok"
    error: str | None = None
    continuation: dict = field(default_factory=dict)
    oracle_tail_residual: float | None = None
    max_condition: float | None = None
    max_roundtrip: float | None = None
    n_samples: int = 0
    interpolated: bool = False

    def rel(self, value) -> float | None:
        if value is None:
            return None
        return float(abs(value - self.truth) / max(abs(self.truth), 1e-300))

    def as_dict(self) -> dict:
        def c(v):
            return None if v is None else [float(np.real(v)), float(np.imag(v))]
        return {"zeta": [float(t) for t in self.zeta], "status": self.status,
                "error": self.error, "truth": c(self.truth), "recovered": c(self.recovered),
                "oracle": c(self.oracle), "rel_err": self.rel(self.recovered),
                "oracle_rel_err": self.rel(self.oracle), "trusted": self.trusted,
                "interpolated": self.interpolated, "n_samples": self.n_samples,
                "max_condition": self.max_condition, "max_roundtrip": self.max_roundtrip,
                "oracle_tail_residual": self.oracle_tail_residual,
                "continuation": self.continuation}


@dataclass
class ReconstructionReport:
    radius: float
    interval: tuple
    mode: str
    scenario_hash: str
    results: list
    excluded: list

    def conjugate_defects(self, tol: float = 1e-9) -> list:
        """|V(ζ) - conj V(-ζ)| / max(|V(ζ)|, |V(-ζ)|) for recovered ±ζ pairs.

        V_α is real, so V̂(-ζ) = conj V̂(ζ); the defect needs no reference
        value, and half of it (rescaled to |V̂|) is a lower bound on the worse
        of the two recovery errors.
        """
        done = [r for r in self.results if r.recovered is not None and not r.interpolated]
        out = []
        for i, a in enumerate(done):
            for b in done[i + 1:]:
                if np.linalg.norm(a.zeta + b.zeta) <= tol * max(1.0, np.linalg.norm(a.zeta)):
                    scale = max(abs(a.recovered), abs(b.recovered), 1e-300)
                    out.append({"zeta": [float(t) for t in a.zeta],
                                "defect": float(abs(a.recovered - np.conj(b.recovered)) / scale)})
        return out

    def as_dict(self) -> dict:
        return {"radius": self.radius, "interval": list(self.interval), "mode": self.mode,
                "scenario_hash": self.scenario_hash, "excluded_spheres": self.excluded,
                "conjugate_symmetry": self.conjugate_defects(),
                "results": [r.as_dict() for r in self.results]}


def oracle_limit(plan: ReconstructionPlan, problem, y_factors=(5.0, 10.0, 20.0, 40.0),
                 solver_kw=None):
    """Tail fit of direct pairings on z = iy, y ∈ y_factors·sqrt(-ε_α)."""
    y = np.asarray(y_factors, dtype=float) * np.sqrt(-plan.eps_alpha)
    vals = oracle_pairing_path(plan, problem, 1j * y, solver_kw)
    return tail_fit(y, vals), vals


def _fill_excluded(results):
    done = [r for r in results if r.recovered is not None and not r.interpolated]
    for r in results:
        if r.status != "excluded" or not done:
            continue
        d = np.array([np.linalg.norm(o.zeta - r.zeta) for o in done])
        near = np.argsort(d)[:2]
        wts = 1 / np.maximum(d[near], 1e-12)
        r.recovered = complex(sum(w * done[i].recovered for w, i in zip(wts, near)) / wts.sum())
        r.interpolated = True


def reconstruct_ball(problem, interval=None, rings: int | None = None,
                     per_ring: int | None = None, mode: str | None = None,
                     oracle: bool | None = None, n_nodes: int | None = None,
                     z_samples: int | None = None, zetas=None, max_radius=None,
                     cont_cfg: ContinuationConfig | None = None) -> ReconstructionReport:
    """Sweep ζ over a polar grid and recover V̂_α(ζ) at each point.

    Unset arguments come from the scenario's reconstruction section.
    Per-ζ failures are recorded in the report and never stop the sweep.
    """
    rc = problem.config.reconstruction
    interval = tuple(rc.interval if interval is None else interval)
    rings = rc.zeta_rings if rings is None else rings
    per_ring = rc.zeta_per_ring if per_ring is None else per_ring
    mode = rc.mode if mode is None else mode
    oracle = rc.oracle if oracle is None else oracle
    n_nodes = rc.n_nodes if n_nodes is None else n_nodes
    z_samples = rc.z_samples if z_samples is None else z_samples
    if mode not in ("full", "near_forward"):
        raise ValueError(f"unknown mode {mode!r}")
    nf = mode == "near_forward"
    spectral = problem.spectral
    alpha = problem.incident
    eps_alpha = float(spectral.eigenvalues[alpha])
    lp = spectral.lambda_prime
    R = ball_radius(interval, eps_alpha, next_level(eps_alpha, lp) if nf else None)
    zetas = zeta_grid(R, rings, per_ring, max_radius) if zetas is None else np.atleast_2d(zetas)
    solver_kw = {"tol": problem.config.solver.tol, "max_iter": problem.config.solver.max_iter,
                 "method": problem.config.solver.method}
    results, excluded = [], []
    for zeta in zetas:
        res = ZetaResult(np.asarray(zeta, float), problem.effective.direct(zeta))
        t0 = time.perf_counter()
        try:
            plan = plan_reconstruction(zeta, interval, spectral, lp, alpha, z_samples,
                                       problem.thresholds, nf)
            if oracle:
                tail, _ = oracle_limit(plan, problem, rc.y_factors, solver_kw)
                res.oracle = tail.c0
                res.oracle_tail_residual = tail.residual
            samples, _ = boundary_data(plan, problem, n_nodes=n_nodes, near_forward=nf,
                                       solver_kw=solver_kw)
            res.n_samples = len(samples)
            res.max_condition = max(s.condition for s in samples)
            rt = [abs(s.value - s.direct) / max(abs(s.direct), 1e-300)
                  for s in samples if s.direct is not None]
            res.max_roundtrip = float(max(rt)) if rt else None
            value, model = continue_extrapolate([s.z for s in samples],
                                                [s.value for s in samples], cont_cfg)
            res.recovered = value
            res.trusted = model.trusted
            res.continuation = model.summary()
        except PlanError as err:
            msg = str(err)
            res.status = "excluded" if msg.startswith("excluded sphere") else "failed"
            res.error = msg
            if res.status == "excluded":
                excluded.append(float(np.linalg.norm(zeta)))
        except (ArithmeticError, AdmissibilityError, ValueError) as err:
            res.status, res.error = "failed", str(err)
        log.info("zeta=(%.4f, %.4f) status=%s rel_err=%s time=%.1fs", zeta[0], zeta[1],
                 res.status, res.rel(res.recovered), time.perf_counter() - t0)
        results.append(res)
    _fill_excluded(results)
    return ReconstructionReport(R, interval, mode, problem.config.hash(), results,
                                sorted(set(excluded)))
