import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from f3scatter.geometry import PotentialSpec
from f3scatter.reconstruction import (ContinuationConfig, PlanError, ReconstructionReport,
                                      ZetaResult, ball_radius, continue_extrapolate,
                                      next_level, plan_reconstruction, reconstruct_ball,
                                      tail_fit, zeta_grid)
from f3scatter.scenario import Problem, default_scenario, load_scenario
from f3scatter.subsystem import eigensolve_subsystem


@pytest.fixture(scope="module")
def single_level():
    """-2 sech^2: one bound state at -1, Λ'_a = {-1, 0}."""
    return eigensolve_subsystem(PotentialSpec("sech2", -2.0, 1.0), (30.0,), (256,))


@pytest.fixture(scope="module")
def two_level():
    return eigensolve_subsystem(PotentialSpec("sech2", -6.0, 1.0), (30.0,), (256,))


def test_plan_worked_example(single_level):
    plan = plan_reconstruction([0.5, 0.0], (-0.84, -0.64), single_level)
    assert plan.radius == pytest.approx(1.2, abs=1e-8)
    assert np.allclose(plan.rho_perp, [-0.25, 0.0])
    assert abs(plan.nu @ plan.zeta) < 1e-15 and np.linalg.norm(plan.nu) == pytest.approx(1)
    lo, hi = plan.z_interval
    assert lo**2 == pytest.approx(0.0975, abs=1e-7)
    assert hi**2 == pytest.approx(0.2975, abs=1e-7)
    assert np.all((plan.z_samples > lo) & (plan.z_samples < hi))


def test_plan_energy_matching(two_level):
    zeta = np.array([1.1, 0.5])
    plan = plan_reconstruction(zeta, (-3.0, -1.5), two_level, n_z=12)
    for z in plan.z_samples:
        rho = plan.rho(z)
        # ρ and ρ̄ + ζ lie on the same energy shell λ = z^2 + |ρ⊥|^2 + ε_α
        assert rho @ rho == pytest.approx((rho + zeta) @ (rho + zeta), abs=1e-12)
        assert -3.0 < plan.lam(z) < -1.5
        assert plan.lam(z) == pytest.approx(rho @ rho + plan.eps_alpha, abs=1e-12)
    assert plan.eps_alpha < plan.epsilon1 < plan.epsilon0


def test_plan_outside_ball(single_level):
    R = ball_radius((-0.84, -0.64), single_level.eigenvalues[0])
    with pytest.raises(PlanError, match="outside ball"):
        plan_reconstruction([R, 0.0], (-0.84, -0.64), single_level)


def test_plan_excluded_sphere(two_level):
    # |ζ|^2/4 + ε_α = -1 is a level of H^a
    zeta = [2 * np.sqrt(3.0), 0.0]
    with pytest.raises(PlanError, match="excluded sphere"):
        plan_reconstruction(zeta, (-3.0, -0.5), two_level)


def test_plan_empty_interval(two_level):
    # the level -1 separates |ζ|^2/4 + ε_α = -3.75 from I = (-0.9, -0.5)
    with pytest.raises(PlanError, match="empty z-interval"):
        plan_reconstruction([1.0, 0.0], (-0.9, -0.5), two_level)


def test_plan_bad_interval(two_level):
    with pytest.raises(PlanError, match="non-empty subset"):
        plan_reconstruction([0.5, 0.0], (-1.0, -1.5), two_level)


def test_radius_and_next_level():
    assert ball_radius((-3.0, -1.5), -4.0) == pytest.approx(2 * np.sqrt(2.5))
    assert ball_radius((-3.0, -0.5), -4.0, -1.0) == pytest.approx(2 * np.sqrt(3.0))
    assert next_level(-4.0, [-4.0, -1.0, 0.0]) == -1.0


def _cheb(n=16):
    return 0.3 + 0.3 * (1 - np.cos((2 * np.arange(n) + 1) * np.pi / (2 * n)))


def test_continuation_rational_oracle():
    x = _cheb()
    val, model = continue_extrapolate(x, 3 + 1 / (x + 2j))
    assert abs(val - 3) / 3 <= 1e-6
    assert model.trusted and not model.reasons


def test_continuation_flags_entire_function():
    x = _cheb()
    _, model = continue_extrapolate(x, np.exp(-x**2))
    assert not model.trusted and model.reasons


def test_continuation_constant_and_zero():
    x = _cheb()
    val, model = continue_extrapolate(x, np.full(16, 2.5 - 1j))
    assert val == pytest.approx(2.5 - 1j, abs=1e-14) and model.trusted
    val, _ = continue_extrapolate(x, np.zeros(16))
    assert val == 0


def test_continuation_needs_samples():
    with pytest.raises(ValueError, match="at least 12"):
        continue_extrapolate(_cheb(8), np.ones(8))


def test_continuation_tolerances_respected():
    x = _cheb()
    strict = ContinuationConfig(holdout_tol=0.0)
    _, model = continue_extrapolate(x, 3 + 1 / (x + 2j), strict)
    assert not model.trusted and any("holdout" in r for r in model.reasons)


def test_tail_fit_exact_model():
    y = np.array([5.0, 10.0, 20.0, 40.0])
    c = np.array([0.4 - 0.1j, 0.02j, -0.3])
    fit = tail_fit(y, c[0] + c[1] / y + c[2] / y**2)
    assert np.allclose(fit.coeffs, c, atol=1e-12)
    assert fit.residual <= 1e-14


@settings(max_examples=30, deadline=None)
@given(rings=st.integers(1, 4), half=st.integers(1, 4), radius=st.floats(0.5, 5.0))
def test_zeta_grid_symmetric_and_inside(rings, half, radius):
    pts = zeta_grid(radius, rings, 2 * half)
    assert len(pts) == rings * 2 * half
    assert np.all(np.linalg.norm(pts, axis=1) <= 0.95 * radius * (1 + 1e-12))
    assert np.all(np.abs(pts) > 1e-6)     # off the coordinate axes
    for p in pts:
        assert np.min(np.linalg.norm(pts + p, axis=1)) <= 1e-12 * radius


def _report(values):
    res = [ZetaResult(np.array(z), truth=t, recovered=r) for z, t, r in values]
    return ReconstructionReport(1.0, (-3.0, -1.5), "full", "h", res, [])


def test_conjugate_defects_synthetic():
    v = 0.3 - 0.2j
    rep = _report([((0.4, 0.1), v, v), ((-0.4, -0.1), np.conj(v), np.conj(v) * 1.01),
                   ((0.2, 0.3), v, v)])
    out = rep.conjugate_defects()
    assert len(out) == 1
    assert out[0]["defect"] == pytest.approx(0.01 * abs(v) / max(abs(v), 1.01 * abs(v)),
                                             rel=1e-12)
    assert rep.as_dict()["conjugate_symmetry"] == out


@pytest.fixture(scope="module")
def reduced_problem():
    d = default_scenario().model_dump(mode="json")
    d["grids"].update(xa_counts=[24, 24], xperp_counts=[128])
    return Problem(load_scenario(d))


def test_reconstruct_failures_are_recorded(reduced_problem):
    R = 2 * np.sqrt(2.5)
    rep = reconstruct_ball(reduced_problem, zetas=np.array([[R, 0.1]]), oracle=False)
    (r,) = rep.results
    assert r.status == "failed" and "outside ball" in r.error and r.recovered is None


def test_reconstruct_zero_interaction(reduced_problem):
    rep = reconstruct_ball(reduced_problem.scaled(0.0), zetas=np.array([[0.8, 0.5]]),
                           oracle=True, z_samples=12)
    (r,) = rep.results
    assert r.status == "ok" and r.recovered == 0 and r.oracle == 0 and r.truth == 0


@pytest.mark.slow
def test_reconstruct_conjugate_pair(reduced_problem):
    rep = reconstruct_ball(reduced_problem, zetas=np.array([[0.8, 0.5], [-0.8, -0.5]]),
                           oracle=False)
    assert all(r.status == "ok" and r.trusted for r in rep.results)
    errs = [r.rel(r.recovered) for r in rep.results]
    assert max(errs) <= 5e-2
    (pair,) = rep.conjugate_defects()
    # V̂(-ζ) = conj V̂(ζ), so the defect never exceeds twice the worst error
    # (in units of |V̂| rather than the recovered scale)
    a, b = rep.results
    scale = max(abs(a.recovered), abs(b.recovered))
    assert pair["defect"] <= 2 * max(errs) * abs(a.truth) / scale * (1 + 1e-9)
