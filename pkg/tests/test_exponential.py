import numpy as np
import pytest

from f3scatter.exponential import (ContractionError, born_term, pairing, pairing_on_circle,
                                   solve_remainder)
from f3scatter.faddeev_green import GreenOperator, momentum
from f3scatter.geometry import assemble_intercluster, build_grids
from f3scatter.subsystem import eigensolve_subsystem, effective_interaction

NU = np.array([np.cos(0.3), np.sin(0.3)])
PERP = 1.1 * np.array([-NU[1], NU[0]])


@pytest.fixture(scope="module")
def setup(problem):
    """Default geometry and potentials on a reduced grid."""
    sp = eigensolve_subsystem(problem.config.potentials.va.spec(), (30.0,), (128,))
    grid = build_grids((20.0, 20.0), (24, 24), (30.0,), (128,))
    ia = assemble_intercluster(problem.geometry, problem.vb_specs, grid)
    return sp, grid, ia


def test_zero_interaction_gives_zero_remainder(setup):
    sp, grid, _ = setup
    mom = momentum(0.5 + 2j, NU, PERP, sp, 0)
    sol = solve_remainder(mom, np.zeros(grid.shape), sp, grid)
    assert sol.iterations == 0 and not np.any(sol.v)


def test_imaginary_z_converges(setup):
    sp, grid, ia = setup
    sol = solve_remainder(momentum(2j, NU, PERP, sp, 0), ia, sp, grid)
    assert sol.pde_residual <= 1e-8
    assert sol.iterations <= 30
    assert sol.contraction_estimate < 0.5


def test_neumann_and_gmres_agree(setup):
    sp, grid, ia = setup
    mom = momentum(0.7 + 1j, NU, PERP, sp, 0)
    a = solve_remainder(mom, ia, sp, grid, estimate=False)
    b = solve_remainder(mom, ia, sp, grid, method="gmres", estimate=False)
    assert np.linalg.norm(a.v - b.v) <= 1e-8 * np.linalg.norm(a.v)
    with pytest.raises(ValueError):
        solve_remainder(mom, ia, sp, grid, method="jacobi")


def test_strong_coupling_raises_contraction_error(setup):
    sp, grid, ia = setup
    with pytest.raises(ContractionError):
        solve_remainder(momentum(0.3 + 0.05j, NU, PERP, sp, 0), 400 * ia, sp, grid,
                        estimate=False)


def test_conjugation_symmetry(problem, setup):
    """Real potentials: -ρ̄ = (-z̄)ν - ρ⊥ is admissible and v(-ρ̄) = conj v(ρ)."""
    sp = setup[0]
    # the unpaired Nyquist row breaks ξ -> -ξ; at 48 points I_a is resolved past it
    grid = build_grids((20.0, 20.0), (48, 48), (30.0,), (128,))
    ia = assemble_intercluster(problem.geometry, problem.vb_specs, grid)
    z = 0.6 + 1.5j
    a = solve_remainder(momentum(z, NU, PERP, sp, 0), ia, sp, grid, estimate=False)
    b = solve_remainder(momentum(-np.conj(z), NU, -PERP, sp, 0), ia, sp, grid,
                        estimate=False)
    assert np.linalg.norm(b.v - np.conj(a.v)) <= 1e-9 * np.linalg.norm(a.v)


def test_born_term_is_fourier_of_effective_interaction(setup):
    sp, grid, ia = setup
    eff = effective_interaction(sp.psi(0), ia, grid)
    for i, j in ((0, 0), (3, 5), (20, 17)):
        xi = np.array([grid.xa_freqs[0][i], grid.xa_freqs[1][j]])
        assert born_term(xi, 0, 0, ia, sp, grid) == pytest.approx(eff.fourier[i, j],
                                                                  rel=1e-12, abs=1e-15)


def test_born_term_orthogonal_channels(setup):
    sp, grid, _ = setup
    wa = grid.xa_mesh()
    sep = np.exp(-0.3 * np.sum(wa**2, -1))
    ia = np.broadcast_to(sep[None], grid.shape).copy()
    vals = born_term(np.array([[0.0, 0.0], [0.7, -0.4]]), 0, 1, ia, sp, grid)
    assert np.max(np.abs(vals)) <= 1e-12 * abs(born_term([0.0, 0.0], 0, 0, ia, sp, grid))


def test_pairing_tends_to_born_at_large_z(setup):
    sp, grid, ia = setup
    zeta = np.array([0.7, 0.4])
    born = born_term(zeta, 0, 0, ia, sp, grid)
    errs = []
    for y in (4.0, 16.0, 64.0):
        sol = solve_remainder(momentum(1j * y, NU, PERP, sp, 0), ia, sp, grid, estimate=False)
        errs.append(abs(pairing(sol, zeta, 0, ia, sp, grid) - born))
    assert errs[0] > errs[1] > errs[2]


def test_circle_node_at_re_rho_is_forward_pairing(setup):
    sp, grid, ia = setup
    mom = momentum(0.8, NU, PERP, sp, 0)
    nodes = np.array([np.real(mom.rho), np.real(mom.rho) + [0.1, -0.2]])
    vals, sol, err = pairing_on_circle(mom, nodes, 0, ia, sp, grid)
    assert err == 0.0
    assert vals[0] == pytest.approx(pairing(sol, [0.0, 0.0], 0, ia, sp, grid), rel=1e-14)
    assert vals[1] == pytest.approx(pairing(sol, [0.1, -0.2], 0, ia, sp, grid), rel=1e-14)
    with pytest.raises(ValueError):
        pairing_on_circle(mom.shifted(1j), nodes, 0, ia, sp, grid)


def test_direct_and_richardson_boundary_values_agree(setup):
    sp, grid, ia = setup
    mom = momentum(0.8, NU, PERP, sp, 0)
    node = np.real(mom.rho)[None]
    direct, _, _ = pairing_on_circle(mom, node, 0, ia, sp, grid)
    rich, _, est = pairing_on_circle(mom, node, 0, ia, sp, grid, limit="richardson",
                                     estimate=False)
    assert abs(direct[0] - rich[0]) <= max(10 * est, 1e-6 * abs(direct[0]))


def test_real_z_solution_residual(setup):
    sp, grid, ia = setup
    sol = solve_remainder(momentum(0.8, NU, PERP, sp, 0), ia, sp, grid)
    assert sol.pde_residual <= 1e-8
    assert sol.contraction_estimate < 0.5


def test_explicit_operator_is_used(setup):
    sp, grid, ia = setup
    mom = momentum(0.5 + 1j, NU, PERP, sp, 0)
    op = GreenOperator(mom, sp, grid)
    a = solve_remainder(mom, ia, sp, grid, op=op, estimate=False)
    b = solve_remainder(mom, ia, sp, grid, estimate=False)
    assert np.array_equal(a.v, b.v)
