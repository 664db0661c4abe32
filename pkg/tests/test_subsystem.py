import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.integrate import solve_ivp
from scipy.optimize import brentq

from f3scatter.geometry import PotentialSpec, build_grids
from f3scatter.subsystem import (SpectrumError, channel_partition, continuum_fft,
                                 effective_interaction, eigensolve_subsystem, fourier_direct,
                                 full_thresholds, make_channel, near_threshold, sibling_levels)

LX, NX = (30.0,), (256,)


@pytest.fixture(scope="module")
def pt6():
    """Pöschl-Teller well -6 sech^2: exact levels -4 and -1."""
    return eigensolve_subsystem(PotentialSpec("sech2", -6.0, 1.0), LX, NX)


def test_poschl_teller_levels(pt6):
    assert pt6.eigenvalues[0] == pytest.approx(-4.0, abs=1e-8)
    assert pt6.eigenvalues[1] == pytest.approx(-1.0, abs=1e-8)
    assert list(pt6.negative) == [0, 1]
    assert pt6.lambda_prime == pytest.approx([-4.0, -1.0, 0.0], abs=1e-8)


def test_poschl_teller_single_level():
    s = eigensolve_subsystem(PotentialSpec("sech2", -2.0, 1.0), LX, NX)
    assert list(s.negative) == [0]
    assert s.eigenvalues[0] == pytest.approx(-1.0, abs=1e-8)


def test_no_bound_state_raises():
    with pytest.raises(SpectrumError, match="no bound state"):
        eigensolve_subsystem(PotentialSpec("gaussian", 0.0, 1.0), LX, NX)


def test_default_partition(pt6):
    assert pt6.epsilon1 == pytest.approx(-2.5, abs=1e-8)
    assert pt6.epsilon0 == pytest.approx(-1.0, abs=1e-8)
    assert pt6.bound_channels == (0,)


@pytest.mark.parametrize("eps1, channels, eps0", [(-3.0, [0], -1.0), (-0.5, [0, 1], 0.0)])
def test_channel_partition(pt6, eps1, channels, eps0):
    chans, e0, lp = channel_partition(pt6, eps1)
    assert [c.index for c in chans] == channels
    assert e0 == pytest.approx(eps0, abs=1e-8)
    assert lp == pytest.approx([-4.0, -1.0, 0.0], abs=1e-8)


@pytest.mark.parametrize("eps1, msg", [(0.0, "negative"), (0.5, "negative")])
def test_channel_partition_errors(pt6, eps1, msg):
    with pytest.raises(SpectrumError, match=msg):
        channel_partition(pt6, eps1)
    with pytest.raises(SpectrumError, match="coincides"):
        channel_partition(pt6, float(pt6.eigenvalues[1]))


def test_eigenfunctions_complete_and_normalized(pt6):
    v = pt6.eigenvectors
    assert np.max(np.abs(v @ v.T - np.eye(v.shape[0]))) <= 1e-9
    for k in (0, 1):
        assert np.sum(np.abs(pt6.psi(k)) ** 2) * pt6.weight == pytest.approx(1.0, abs=1e-12)


@pytest.mark.parametrize("k", [0, 1])
def test_decay_rate_matches_energy(pt6, k):
    ch = make_channel(pt6, k)
    expect = np.sqrt(-pt6.eigenvalues[k])
    assert abs(ch.decay_rate - expect) <= 0.2 * expect


def _problem_grid():
    return build_grids((20.0, 20.0), (24, 24), LX, (64,))


def test_continuum_fft_matches_direct(rng):
    g = _problem_grid()
    w = g.xa_mesh()
    f = np.exp(-0.4 * np.sum((w - [0.5, -1.0]) ** 2, -1)) * (1 + 0.3j * w[..., 1])
    fh = continuum_fft(f, g)
    for _ in range(10):
        i, j = rng.integers(24, size=2)
        xi = (g.xa_freqs[0][i], g.xa_freqs[1][j])
        assert abs(fh[i, j] - fourier_direct(f, g, xi)) <= 1e-10 * np.max(np.abs(fh))


def test_effective_interaction_linear_and_direct(problem, rng):
    g = problem.grid
    psi = problem.spectral.psi(problem.incident)
    a = rng.standard_normal(g.shape)
    b = rng.standard_normal(g.shape)
    ea, eb = effective_interaction(psi, a, g), effective_interaction(psi, b, g)
    eab = effective_interaction(psi, 2 * a - 3 * b, g)
    assert np.allclose(eab.values, 2 * ea.values - 3 * eb.values, atol=1e-12)
    assert np.allclose(eab.fourier, 2 * ea.fourier - 3 * eb.fourier, atol=1e-10)
    # pointwise against an explicit sum over X^a
    i, j = 7, 30
    dens = np.abs(psi) ** 2
    assert ea.values[i, j] == pytest.approx(np.sum(dens * a[:, i, j]) * g.xperp_cell,
                                            rel=1e-12)


def _shooting_level(spec, x0=-9.0):
    """Even ground state by shooting ψ'' = (V - E)ψ from the decaying tail."""
    def dpsi0(kappa):
        rhs = lambda x, y: [y[1], (spec(np.array([[x]]))[0] + kappa**2) * y[0]]
        sol = solve_ivp(rhs, (x0, 0.0), [1.0, kappa], rtol=1e-12, atol=1e-14)
        return sol.y[1, -1]
    kappa = brentq(dpsi0, 1e-4, 0.05, xtol=1e-14)
    return -kappa**2


def test_sibling_weak_1d_well_against_shooting():
    spec = PotentialSpec("gaussian", -0.01, 1.0)
    levels = sibling_levels(spec, 1)
    assert len(levels) == 1
    assert levels[0] == pytest.approx(_shooting_level(spec), rel=1e-3)
    # weak-coupling limit -(∫V/2)^2 to leading order
    assert levels[0] == pytest.approx(-(0.01 * np.sqrt(2 * np.pi) / 2) ** 2, rel=0.05)


def test_sibling_strong_1d_well_poschl_teller():
    levels = sibling_levels(PotentialSpec("sech2", -2.0, 1.0), 1)
    assert levels[0] == pytest.approx(-1.0, rel=1e-2)


def test_sibling_repulsive_or_zero_has_no_levels():
    assert sibling_levels(PotentialSpec("gaussian", 0.0, 1.0), 2) == []
    assert sibling_levels(PotentialSpec("gaussian", 0.3, 1.0), 1) == []


def test_full_thresholds(pt6):
    zero = [PotentialSpec("gaussian", 0.0, 1.0)] * 2
    assert full_thresholds(pt6, zero, (2, 2)) == pytest.approx([-4.0, -1.0, 0.0], abs=1e-8)
    weak = [PotentialSpec("gaussian", -0.01, 1.0)]
    th = full_thresholds(pt6, weak, (1,))
    assert len(th) == 4 and th[2] == pytest.approx(-1.528e-4, rel=1e-2)
    assert near_threshold(-1.0 + 1e-8, th)
    assert not near_threshold(-0.5, th)


@settings(max_examples=15, deadline=None)
@given(depth=st.floats(1.5, 8.0))
def test_levels_below_zero_and_above_potential_minimum(depth):
    # depths >= 1.5 keep the ground-state tail well inside the periodic box
    s = eigensolve_subsystem(PotentialSpec("sech2", -depth, 1.0), LX, NX)
    neg = s.eigenvalues[s.negative]
    assert np.all(neg > -depth) and np.all(neg < 0)
    # Pöschl-Teller: ground state -(l)^2 with depth l(l+1)
    ell = 0.5 * (np.sqrt(1 + 4 * depth) - 1)
    assert neg[0] == pytest.approx(-ell**2, abs=1e-6)
