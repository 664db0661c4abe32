import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from f3scatter.scattering import (ConditioningError, HeavisideMask, KernelError, circle_grid,
                                  forward_smatrix, invert_smatrix, invert_smatrix_near_forward,
                                  poisson_factor, rotate, sibling_channels_excluded)

NU = np.array([np.cos(0.3), np.sin(0.3)])


class Incoming:
    """Minimal decomposition carrier: direction ν and momentum ρ (real z = ν·ρ)."""

    def __init__(self, nu, rho):
        self.nu = np.asarray(nu, dtype=float)
        self.rho = np.asarray(rho, dtype=float)
        self.z = float(self.nu @ self.rho)


def _tilted(node, frac=0.3):
    r = np.linalg.norm(node)
    return rotate(node / r, -np.arctan2(frac * r, np.sqrt(r * r - (frac * r) ** 2)))


def _setup(seed=0, scale=0.05, n=16, lams=(-2.0,), evs=(-4.0, -2.8)):
    rng = np.random.default_rng(seed)
    lam = lams[0]
    circles = {k: circle_grid(lam, e, n, NU, 0.6 if k == 0 else None, channel=k)
               for k, e in enumerate(evs)}
    incoming = {k: [Incoming(_tilted(p), p) for p in c.nodes] for k, c in circles.items()}
    G = {(a, b): scale * (rng.standard_normal((circles[a].n, circles[b].n))
                          + 1j * rng.standard_normal((circles[a].n, circles[b].n)))
         for a in circles for b in circles}
    return G, circles, incoming, lam


@settings(max_examples=40, deadline=None)
@given(n=st.integers(8, 40).map(lambda k: 2 * k), cut=st.floats(-2.0, 2.0))
def test_circle_weights_total_two_pi(n, cut):
    c = circle_grid(-1.0, -4.0, n, NU, cut)
    assert c.weights.sum() == pytest.approx(2 * np.pi, abs=1e-12)
    assert np.all(c.weights > 0) and c.n == n
    assert np.allclose(np.linalg.norm(c.nodes, axis=1), np.sqrt(3.0))


def test_cut_nodes_get_half_mask():
    c = circle_grid(-2.0, -4.0, 16, NU, 0.6)
    assert len(c.cut_indices) == 2
    for i in c.cut_indices:
        assert c.nodes[i] @ NU == pytest.approx(0.6, abs=1e-12)
    re_rho = 0.6 * NU + 0.9 * rotate(NU, np.pi / 2)
    h = HeavisideMask.build(c, NU, re_rho).values
    assert np.flatnonzero(h == 0.5).tolist() == sorted(c.cut_indices)
    assert set(np.unique(h)) == {0.0, 0.5, 1.0}
    assert np.all(h[c.nodes @ NU > 0.6 + 1e-9] == 1.0)


@pytest.mark.parametrize("k", range(11))
def test_uncut_rule_integrates_trig_polynomials(k):
    c = circle_grid(-2.0, -4.0, 16, anchor=0.37)
    for f, exact in ((np.cos, 2 * np.pi if k == 0 else 0.0), (np.sin, 0.0)):
        assert np.sum(c.weights * f(k * c.thetas)) == pytest.approx(exact, abs=1e-12)


def test_cut_rule_converges_at_second_order():
    f = lambda t: np.exp(np.cos(t - 0.4))
    exact = 2 * np.pi * 1.2660658777520082   # 2π I_0(1)
    errs = [abs(np.sum(c.weights * f(c.thetas)) - exact)
            for c in (circle_grid(-2.0, -4.0, n, NU, 0.6) for n in (32, 64, 128))]
    assert errs[0] / errs[1] > 3 and errs[1] / errs[2] > 3


def test_circle_errors():
    with pytest.raises(ValueError, match="lambda > epsilon"):
        circle_grid(-4.0, -4.0, 16)
    with pytest.raises(ValueError, match="even"):
        circle_grid(-2.0, -4.0, 15)
    with pytest.raises(ValueError, match="at least 16"):
        circle_grid(-2.0, -4.0, 8)
    c = circle_grid(-2.0, -4.0, 16)
    assert c.index_of(c.nodes[5]) == 5
    with pytest.raises(KeyError):
        c.index_of(c.nodes[5] * 1.01)


def test_zero_kernels():
    G, circles, incoming, lam = _setup()
    zero = {k: np.zeros_like(v) for k, v in G.items()}
    S = forward_smatrix(zero, circles, incoming, lam)
    assert all(not np.any(k.values) for k in S.values())
    phi, cond = invert_smatrix(S, incoming[0][3], lam, (0, 3))
    assert cond == pytest.approx(1.0) and all(not np.any(v) for v in phi.values())


def _dense_oracle(G, circles, incoming, lam):
    """Independent loop assembly of (Id + K) S = G."""
    order = [(a, i) for a in sorted(circles) for i in range(circles[a].n)]
    n = len(order)
    Gm = np.array([[G[(a, b)][i, j] for (b, j) in order] for (a, i) in order])
    K = np.zeros((n, n), dtype=complex)
    for r, (a, i) in enumerate(order):
        mom = incoming[a][i]
        for c_, (b, j) in enumerate(order):
            node = circles[b].nodes[j]
            s = mom.nu @ (node - mom.rho)
            h = 1.0 if s > 1e-10 else (0.0 if s < -1e-10 else 0.5)
            K[r, c_] = 1j / (2 * np.sqrt(lam - circles[b].epsilon_prime)) \
                * circles[b].weights[j] * h * Gm[r, c_]
    return order, Gm, K


def test_forward_matches_dense_oracle():
    G, circles, incoming, lam = _setup(seed=4)
    order, Gm, K = _dense_oracle(G, circles, incoming, lam)
    S = np.linalg.solve(np.eye(len(order)) + K, Gm)
    out = forward_smatrix(G, circles, incoming, lam)
    n0 = circles[0].n
    assert np.allclose(out[(0, 1)].values, S[:n0, n0:], atol=1e-13, rtol=0)
    assert np.allclose(out[(1, 0)].values, S[n0:, :n0], atol=1e-13, rtol=0)


def test_second_neumann_iterate():
    """S = G - KG + K^2 G + O(|G|^4) for small pairings."""
    errs = []
    for scale in (1e-2, 5e-3):
        G, circles, incoming, lam = _setup(seed=7, scale=scale)
        order, Gm, K = _dense_oracle(G, circles, incoming, lam)
        approx = Gm - K @ Gm + K @ (K @ Gm)
        out = forward_smatrix(G, circles, incoming, lam)
        n0 = circles[0].n
        S = np.block([[out[(0, 0)].values, out[(0, 1)].values],
                      [out[(1, 0)].values, out[(1, 1)].values]])
        errs.append(np.max(np.abs(S - approx)))
    assert errs[0] / errs[1] == pytest.approx(16, rel=0.1)


@settings(max_examples=20, deadline=None)
@given(seed=st.integers(0, 2**31 - 1))
def test_roundtrip_forward_inverse(seed):
    G, circles, incoming, lam = _setup(seed=seed)
    S = forward_smatrix(G, circles, incoming, lam)
    for i0 in (0, 5):
        phi, _ = invert_smatrix(S, incoming[0][i0], lam, (0, i0))
        for b in circles:
            assert np.allclose(phi[b], G[(0, b)][i0], atol=1e-12, rtol=0)
        nf, _ = invert_smatrix_near_forward(S, incoming[0][i0], lam, (0, i0))
        for b, (idx, vals) in nf.items():
            assert np.allclose(vals, phi[b][idx], atol=1e-12, rtol=0)


def test_kernel_too_large():
    G, circles, incoming, lam = _setup(scale=40.0)
    with pytest.raises(KernelError, match="kernel too large"):
        forward_smatrix(G, circles, incoming, lam)


def test_ill_conditioned_inverse():
    G, circles, incoming, lam = _setup()
    S = forward_smatrix(G, circles, incoming, lam)
    with pytest.raises(ConditioningError, match="ill-conditioned"):
        invert_smatrix(S, incoming[0][0], lam, (0, 0), max_cond=1.0 - 1e-9)
    with pytest.raises(ConditioningError):
        invert_smatrix_near_forward(S, incoming[0][0], lam, (0, 0), max_cond=1.0 - 1e-9)


def test_poisson_factor():
    assert poisson_factor(-2.0, -4.0) == pytest.approx(1j / (2 * np.sqrt(2.0)))


def test_sibling_exclusion_rule():
    circles = {0: circle_grid(-0.5, -4.0, 16), 1: circle_grid(-0.5, -1.0, 16)}
    r1 = circles[1].radius
    hi = Incoming(NU, (r1 + 0.1) * NU)
    lo = Incoming(NU, (r1 - 0.1) * NU)
    assert sibling_channels_excluded(hi, circles, 0) == {1: True}
    assert sibling_channels_excluded(lo, circles, 0) == {1: False}
