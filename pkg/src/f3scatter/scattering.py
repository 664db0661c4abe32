"""Circle quadrature, the Heaviside cut and the S♯ <-> pairing integral equations.

The relative S-matrix S♯ is defined operationally through

    S♯_{αα''}(ρ, ω'') = G_{αα''}(ρ, ω'')
        - Σ_{α'} c_{α'} ∫ S♯_{α'α''}(ρ', ω'') H(ν·(ρ' - Re ρ)) G_{αα'}(ρ, ρ') dρ',

with c_{α'} = i / (2 sqrt(λ - ε_{α'})) and dρ' the circle measure of total
mass 2π. Read with S♯ unknown this is the forward map; with the row
G_{α·}(ρ, ·) unknown it is the inverse map. One node set per channel circle
serves both as incoming and outgoing directions, which makes the two
Nyström systems exact inverses of each other.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .faddeev_green import ComplexMomentum


class KernelError(ArithmeticError):
    pass


class ConditioningError(ArithmeticError):
    pass


@dataclass(frozen=True)
class CircleGrid:
    lam: float
    epsilon_prime: float
    channel: int
    thetas: np.ndarray
    weights: np.ndarray
    cut_indices: tuple = ()

    @property
    def radius(self) -> float:
        return float(np.sqrt(self.lam - self.epsilon_prime))

    @property
    def nodes(self) -> np.ndarray:
        return self.radius * np.stack([np.cos(self.thetas), np.sin(self.thetas)], -1)

    @property
    def n(self) -> int:
        return len(self.thetas)

    def index_of(self, point, tol: float = 1e-9) -> int:
        d = np.linalg.norm(self.nodes - np.asarray(point)[None], axis=-1)
        i = int(np.argmin(d))
        if d[i] > tol * max(1.0, self.radius):
            raise KeyError("point is not a node of this circle")
        return i


def _arc(lo, hi, m):
    t = np.linspace(lo, hi, m + 1)
    w = np.full(m + 1, (hi - lo) / m)
    w[0] = w[-1] = 0.5 * (hi - lo) / m
    return t, w


def circle_grid(lam: float, epsilon_prime: float, n_nodes: int, nu=None,
                cut_level: float | None = None, anchor: float = 0.0,
                channel: int = 0) -> CircleGrid:
    """Nodes on |ρ'| = sqrt(λ - ε') with weights totalling 2π.

    Without a cut the rule is the periodic trapezoid rule, rotated so a node
    sits at angle ``anchor``. When the line ν·ρ' = ``cut_level`` meets the
    circle, both intersection points are nodes: each of the two arcs gets a
    uniform trapezoid rule with interval counts proportional to arc length.
    """
    if not lam > epsilon_prime:
        raise ValueError(f"need lambda > epsilon' (got {lam} <= {epsilon_prime})")
    if n_nodes < 16 or n_nodes % 2:
        raise ValueError("n_nodes must be even and at least 16")
    r = np.sqrt(lam - epsilon_prime)
    if nu is None or cut_level is None or abs(cut_level) >= r:
        th = anchor + 2 * np.pi * np.arange(n_nodes) / n_nodes
        return CircleGrid(float(lam), float(epsilon_prime), int(channel),
                          np.mod(th, 2 * np.pi), np.full(n_nodes, 2 * np.pi / n_nodes))
    nu = np.asarray(nu, dtype=float)
    base = np.arctan2(nu[1], nu[0])
    d = np.arccos(cut_level / r)
    t1, t2 = base - d, base + d
    len1 = t2 - t1
    m1 = int(np.clip(round(n_nodes * len1 / (2 * np.pi)), 1, n_nodes - 1))
    m2 = n_nodes - m1
    a_t, a_w = _arc(t1, t2, m1)
    b_t, b_w = _arc(t2, t1 + 2 * np.pi, m2)
    th = np.concatenate([a_t, b_t[1:-1]])
    w = np.concatenate([a_w, b_w[1:-1]])
    w[0] += b_w[-1]
    w[m1] += b_w[0]
    return CircleGrid(float(lam), float(epsilon_prime), int(channel), np.mod(th, 2 * np.pi), w,
                      (0, m1))


@dataclass(frozen=True)
class HeavisideMask:
    values: np.ndarray

    @classmethod
    def build(cls, circle: CircleGrid, nu, re_rho, tol: float = 1e-10) -> "HeavisideMask":
        """H(ν·(ρ'_j - Re ρ)) with H(0) = 1/2."""
        s = circle.nodes @ np.asarray(nu, dtype=float) - float(np.asarray(nu) @ np.asarray(re_rho))
        scale = tol * max(1.0, circle.radius)
        return cls(np.where(s > scale, 1.0, np.where(s < -scale, 0.0, 0.5)))


def poisson_factor(lam: float, eps: float) -> complex:
    return 1j / (2 * np.sqrt(lam - eps))


@dataclass
class SMatrixKernel:
    """S♯_{α'α''}(λ, ω_i, ω''_k) on the node sets of two channel circles."""

    lam: float
    channels: tuple
    values: np.ndarray
    circle_in: CircleGrid
    circle_out: CircleGrid
    meta: dict = field(default_factory=dict)


def _offsets(circles):
    off, acc = {}, 0
    for a in sorted(circles):
        off[a] = acc
        acc += circles[a].n
    return off, acc


def forward_smatrix(pairings: dict, circles: dict, incoming: dict, lam: float,
                    max_norm: float = 1.0) -> dict:
    """Solve (Id + K) S = G for every outgoing node at once.

    ``pairings[(α, α')]`` is the matrix G_{αα'}(ρ_i, ρ'_j) for incoming nodes
    ρ_i on circle α (decompositions ``incoming[α][i]``) and nodes ρ'_j on
    circle α'. Returns kernels keyed by (α', α'').
    """
    off, n = _offsets(circles)
    G = np.zeros((n, n), dtype=complex)
    K = np.zeros((n, n), dtype=complex)
    for (a, ap), mat in pairings.items():
        G[off[a]:off[a] + circles[a].n, off[ap]:off[ap] + circles[ap].n] = mat
    for a in circles:
        for i, mom in enumerate(incoming[a]):
            row = off[a] + i
            for ap, cp in circles.items():
                h = HeavisideMask.build(cp, mom.nu, np.real(mom.rho)).values
                blk = slice(off[ap], off[ap] + cp.n)
                K[row, blk] = poisson_factor(lam, cp.epsilon_prime) * cp.weights * h * G[row, blk]
    rad = float(np.max(np.abs(np.linalg.eigvals(K)))) if n else 0.0
    if rad >= max_norm:
        raise KernelError(f"kernel too large: spectral radius {rad:.3g}")
    S = np.linalg.solve(np.eye(n) + K, G)
    cond = float(np.linalg.cond(np.eye(n) + K))
    out = {}
    for a in circles:
        for app in circles:
            out[(a, app)] = SMatrixKernel(
                lam, (a, app), S[off[a]:off[a] + circles[a].n, off[app]:off[app] + circles[app].n],
                circles[a], circles[app], {"spectral_radius": rad, "condition": cond})
    return out


def _inverse_system(kernels: dict, mom: ComplexMomentum, lam: float, source: tuple):
    circles = {}
    for (a, b), k in kernels.items():
        circles[a] = k.circle_in
        circles[b] = k.circle_out
    off, n = _offsets(circles)
    alpha, i0 = source
    f = np.zeros(n, dtype=complex)
    T = np.zeros((n, n), dtype=complex)
    masks = {ap: HeavisideMask.build(c, mom.nu, np.real(mom.rho)).values
             for ap, c in circles.items()}
    for (ap, app), k in kernels.items():
        rows = slice(off[app], off[app] + circles[app].n)
        cols = slice(off[ap], off[ap] + circles[ap].n)
        coef = poisson_factor(lam, circles[ap].epsilon_prime) * circles[ap].weights * masks[ap]
        T[rows, cols] = k.values.T * coef[None, :]
        if ap == alpha:
            f[rows] = k.values[i0]
    return T, f, circles, off, masks


def invert_smatrix(kernels: dict, mom: ComplexMomentum, lam: float, source: tuple,
                   max_cond: float = 1e6):
    """Solve (Id - T)Φ = f for Φ_{α'}(ρ'_j) = G_{αα'}(ρ, ρ'_j).

    ``source = (α, i)`` names the incoming node ρ of circle α whose row of S♯
    forms f; ``mom`` carries its decomposition. Returns ({α': Φ_{α'}}, cond).
    """
    T, f, circles, off, _ = _inverse_system(kernels, mom, lam, source)
    A = np.eye(len(f)) - T
    cond = float(np.linalg.cond(A))
    if cond > max_cond:
        raise ConditioningError(f"ill-conditioned: condition number {cond:.3g}")
    phi = np.linalg.solve(A, f)
    return {a: phi[off[a]:off[a] + circles[a].n] for a in circles}, cond


def invert_smatrix_near_forward(kernels: dict, mom: ComplexMomentum, lam: float,
                                source: tuple, max_cond: float = 1e6):
    """π₁Φ from the kernel restricted to ν·ω ≥ ν·Re ρ on every circle.

    Only rows and columns in V₁ are read. Returns ({α': (indices, values)}, cond).
    """
    T, f, circles, off, masks = _inverse_system(kernels, mom, lam, source)
    keep = np.concatenate([off[a] + np.flatnonzero(masks[a] > 0) for a in sorted(circles)])
    keep = keep.astype(int)
    A = np.eye(len(keep)) - T[np.ix_(keep, keep)]
    cond = float(np.linalg.cond(A)) if len(keep) else 1.0
    if cond > max_cond:
        raise ConditioningError(f"ill-conditioned: condition number {cond:.3g}")
    phi = np.linalg.solve(A, f[keep]) if len(keep) else np.zeros(0, dtype=complex)
    out = {}
    for a in sorted(circles):
        sel = (keep >= off[a]) & (keep < off[a] + circles[a].n)
        out[a] = (keep[sel] - off[a], phi[sel])
    return out, cond


def sibling_channels_excluded(mom: ComplexMomentum, circles: dict, alpha: int) -> dict:
    """For each α' ≠ α, whether every node of its circle has ν·ω' < z."""
    z = float(np.real(mom.z))
    return {a: bool(np.max(c.nodes @ mom.nu) < z) for a, c in circles.items() if a != alpha}


def rotate(v, angle):
    c, s = np.cos(angle), np.sin(angle)
    return np.array([c * v[0] - s * v[1], s * v[0] + c * v[1]])
