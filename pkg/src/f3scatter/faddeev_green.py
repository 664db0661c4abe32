"""Conjugated Faddeev-type Green's function G_a(ρ) and its real-axis limit.

G_a(ρ) acts as a Fourier multiplier in X_a composed with the subsystem
resolvent: for each dual point ξ the X^a slice is moved to the H^a
eigenbasis and divided by ``E_k - F_ρ(ξ)``, with
``F_ρ(ξ) = ε_α - |ξ|^2 - 2ρ·ξ``. Bound-channel entries whose dual cell meets
a zero of ``E_k - F_ρ`` are replaced by the exact cell average of the
(locally integrable) multiplier.

All fields are in plane-wave-removed gauge and use the memory layout of
:mod:`f3scatter.geometry`.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.fft
from scipy import integrate

from .geometry import GridPair, weighted_norm
from .subsystem import SpectralData, near_threshold


class AdmissibilityError(ValueError):
    pass


class GridSingularityError(ArithmeticError):
    pass


class ExtrapolationError(ArithmeticError):
    pass


UNDERFLOW = 1e-14


@dataclass(frozen=True)
class ComplexMomentum:
    """ρ = zν + ρ⊥ together with the incident channel data."""

    z: complex
    nu: np.ndarray
    rho_perp: np.ndarray
    eps_alpha: float
    incident: int
    eps0: float
    in_circ: bool = False
    in_plus: bool = False
    s_empty: bool = True

    @property
    def rho(self) -> np.ndarray:
        return self.z * self.nu + self.rho_perp

    @property
    def lam(self) -> complex:
        lam = self.z**2 + float(self.rho_perp @ self.rho_perp) + self.eps_alpha
        return lam.real if np.imag(self.z) == 0 else lam

    @property
    def perp_energy(self) -> float:
        return float(self.rho_perp @ self.rho_perp) + self.eps_alpha

    def shifted(self, dz: complex) -> "ComplexMomentum":
        """Same ν, ρ⊥ and channel at z + dz (no admissibility re-check)."""
        z = self.z + dz
        return ComplexMomentum(z, self.nu, self.rho_perp, self.eps_alpha, self.incident,
                               self.eps0, np.imag(z) != 0, self.in_plus, self.s_empty)


def momentum(z, nu, rho_perp, spectral: SpectralData, channel: int,
             thresholds=None) -> ComplexMomentum:
    """Validate (z, ν, ρ⊥) for incident channel ``channel`` and set region flags.

    ``thresholds`` is the full Λ' used to exclude real energies; it defaults
    to Λ'_a.
    """
    nu = np.asarray(nu, dtype=float)
    rho_perp = np.asarray(rho_perp, dtype=float)
    z = complex(z)
    if abs(np.linalg.norm(nu) - 1) > 1e-12:
        raise AdmissibilityError("|nu| must be 1")
    if abs(nu @ rho_perp) > 1e-12:
        raise AdmissibilityError("nu and rho_perp must be orthogonal")
    eps_alpha = float(spectral.eigenvalues[channel])
    if eps_alpha >= 0:
        raise AdmissibilityError(f"channel {channel} is not bound")
    if np.linalg.norm(rho_perp) >= np.sqrt(-eps_alpha):
        raise AdmissibilityError("|rho_perp| >= sqrt(-eps_alpha): characteristic set non-empty")
    lam_a = spectral.lambda_prime
    perp = float(rho_perp @ rho_perp) + eps_alpha
    eps0 = spectral.epsilon0
    if not (eps_alpha < perp < eps0):
        raise AdmissibilityError(
            f"|rho_perp|^2 + eps_alpha = {perp} outside the open interval ({eps_alpha}, {eps0})")
    if near_threshold(perp, lam_a, 1e-9):
        raise AdmissibilityError("|rho_perp|^2 + eps_alpha lies on a threshold")
    in_circ = z.imag != 0
    if z.imag < 0:
        raise AdmissibilityError("Im z > 0 is the fixed sign convention")
    in_plus = z.imag > 0
    if z.imag == 0:
        if z.real < 0:
            raise AdmissibilityError("real z must be non-negative")
        lam = z.real**2 + perp
        thr = lam_a if thresholds is None else thresholds
        if not (eps_alpha < lam < eps0):
            raise AdmissibilityError(f"lambda = {lam} outside ({eps_alpha}, {eps0})")
        if near_threshold(lam, thr, 1e-9):
            raise AdmissibilityError(f"lambda = {lam} lies on a threshold")
        in_plus = True
    return ComplexMomentum(z, nu, rho_perp, eps_alpha, int(channel), eps0,
                           in_circ, in_plus, True)


def f_rho(mom: ComplexMomentum, xi) -> np.ndarray:
    """F_ρ(ξ) = ε_α - |ξ|^2 - 2ρ·ξ (ξ along the last axis)."""
    xi = np.asarray(xi, dtype=float)
    return mom.eps_alpha - np.sum(xi**2, axis=-1) - 2 * (xi @ mom.rho)


# --- cell averages ---------------------------------------------------------

_GX, _GW = np.polynomial.legendre.leggauss(24)
# graded map t -> 3t^2 - 2t^3 on [0, 1] clusters nodes at both ends, which
# tames the logarithmic endpoint behaviour at the breakpoints
_T = 0.5 * (_GX + 1)
_S = 3 * _T**2 - 2 * _T**3
_DS = (6 * _T - 6 * _T**2) * 0.5 * _GW


def _x_moments(a, b, r0, bcoef):
    """∫_a^b {1, x} dx / (x^2 + 2 r0 x + B), elementwise over arrays."""
    disc = np.sqrt(r0 * r0 - bcoef + 0j)
    # larger root by the sign-matched sum, smaller one from r1 r2 = B (no cancellation)
    flip = np.real(np.conj(r0) * disc) < 0
    disc = np.where(flip, -disc, disc)
    r2 = -r0 - disc
    with np.errstate(divide="ignore", invalid="ignore"):
        r1 = np.where(r2 != 0, bcoef / r2, -r0 + disc)
    big = np.abs(disc) > 1e-7 * np.abs(b - a)
    with np.errstate(divide="ignore", invalid="ignore"):
        l1 = np.log((b - r1) / (a - r1))
        l2 = np.log((b - r2) / (a - r2))
        m0 = np.where(big, (l1 - l2) / (r1 - r2), 1.0 / (a + r0) - 1.0 / (b + r0))
        m1 = np.where(big, (r1 * l1 - r2 * l2) / (r1 - r2),
                      np.log((b + r0) / (a + r0)) + r0 * (1.0 / (b + r0) - 1.0 / (a + r0)))
    return m0, m1


def _root_parts(c1, c0):
    """Real parts of the roots of y^2 + c1 y + c0 (arrays)."""
    d = np.sqrt(c1 * c1 - 4 * c0 + 0j)
    return np.stack([(0.5 * (-c1 + d)).real, (0.5 * (-c1 - d)).real], -1)


def box_moments(a, b, ylo, yhi, rho, shift) -> np.ndarray:
    """∫∫ {1, x, y, xy} / q over boxes [a, b] x [ylo, yhi], q = shift + |ξ|^2 + 2ρ·ξ.

    Exact in x; in y, graded Gauss-Legendre on the pieces between the real
    parts of the points where a root of q(., y) meets an x edge or the two
    roots coalesce. Inputs are arrays of equal length; returns shape (n, 4).
    """
    a, b, ylo, yhi = (np.asarray(v, dtype=float) for v in (a, b, ylo, yhi))
    r0, r1 = complex(rho[0]), complex(rho[1])
    bp = [_root_parts(2 * r1, shift + x0 * x0 + 2 * r0 * x0) for x0 in (a, b)]
    bp.append(_root_parts(2 * r1 * np.ones_like(a), (shift - r0 * r0) * np.ones_like(a)))
    # isolated real zeros: Im q = 0 on the line Im ρ·ξ = 0, then Re q = 0 along it
    im = np.imag(np.asarray(rho, dtype=complex))
    if np.linalg.norm(im) > 0:
        mu = np.array([-im[1], im[0]]) / np.linalg.norm(im)
        pp = float(np.real(np.asarray(rho)) @ mu)
        if pp * pp - shift >= 0:
            ts = -pp + np.array([1, -1]) * np.sqrt(pp * pp - shift)
            bp.append(np.broadcast_to(ts * mu[1], (len(a), 2)))
    inner = np.clip(np.concatenate(bp, -1), ylo[:, None], yhi[:, None])
    pts = np.sort(np.concatenate([ylo[:, None], inner, yhi[:, None]], -1), -1)
    lo, hi = pts[:, :-1, None], pts[:, 1:, None]
    y = lo + (hi - lo) * _S
    wy = (hi - lo) * _DS
    bcoef = shift + y * y + 2 * r1 * y
    m0, m1 = _x_moments(a[:, None, None], b[:, None, None], r0, bcoef)
    # pieces thinner than 1e-12 of the box carry a log-bounded integrand
    # times a vanishing weight; dropping them avoids inf * 0
    live = (hi - lo) > 1e-12 * (yhi - ylo)[:, None, None]
    m0 = np.where(live, m0, 0)
    m1 = np.where(live, m1, 0)
    return np.stack([np.sum(wy * m0, (1, 2)), np.sum(wy * m1, (1, 2)),
                     np.sum(wy * y * m0, (1, 2)), np.sum(wy * y * m1, (1, 2))], -1)


def box_averages(centers, delta, rho, shift) -> np.ndarray:
    """Averages of 1/q over the dual cells centred at ``centers`` (2-D)."""
    centers = np.atleast_2d(centers)
    hx, hy = delta
    m = box_moments(centers[:, 0] - hx / 2, centers[:, 0] + hx / 2,
                    centers[:, 1] - hy / 2, centers[:, 1] + hy / 2, rho, shift)
    return m[:, 0] / (hx * hy)


def tent_weights(nodes, delta, rho, shift) -> np.ndarray:
    """(1/|cell|) ∫ T_j / q with T_j the bilinear hat centred on node j (2-D).

    Summing φ_j times these weights integrates the bilinear interpolant of φ
    against 1/q exactly, which converges at second order where a plain cell
    average is only first order.
    """
    nodes = np.atleast_2d(nodes)
    hx, hy = delta
    xc, yc = nodes[:, 0], nodes[:, 1]
    out = np.zeros(len(nodes), dtype=complex)
    for sx in (-1, 1):
        for sy in (-1, 1):
            a = np.minimum(xc, xc + sx * hx)
            lo = np.minimum(yc, yc + sy * hy)
            m = box_moments(a, a + hx, lo, lo + hy, rho, shift)
            # T = (bx + ax x)(by + ay y) on this quarter
            ax, bx = -sx / hx, 1 + sx * xc / hx
            ay, by = -sy / hy, 1 + sy * yc / hy
            out += bx * by * m[:, 0] + ax * by * m[:, 1] + bx * ay * m[:, 2] + ax * ay * m[:, 3]
    return out / (hx * hy)


def cell_average(center, delta, rho, shift) -> complex:
    """Average of 1/(shift + |ξ|^2 + 2ρ·ξ) over the box ``center ± delta/2``."""
    center = np.asarray(center, dtype=float)
    delta = np.asarray(delta, dtype=float)
    if len(center) != 2:
        return _cell_average_tensor(center, delta, rho, shift)
    return complex(box_averages(center[None], delta, rho, shift)[0])


def _cell_average_tensor(center, delta, rho, shift, n=24):
    """Box average for dim X_a > 2: exact in the first axis, Gauss in the rest."""
    rho = np.asarray(rho, dtype=complex)
    a, b = center[0] - delta[0] / 2, center[0] + delta[0] / 2
    rest = len(center) - 1
    grids = np.meshgrid(*[center[1 + i] + 0.5 * delta[1 + i] * _GX for i in range(rest)],
                        indexing="ij")
    wts = np.ones_like(grids[0])
    for i, g in enumerate(np.meshgrid(*[_GW] * rest, indexing="ij")):
        wts = wts * g * 0.5 * delta[1 + i]
    y = np.stack(grids, -1)
    bcoef = shift + np.sum(y**2, -1) + 2 * (y @ rho[1:])
    val, _ = _x_moments(a, b, rho[0], bcoef)
    return complex(np.sum(val * wts) / np.prod(delta))


def _perp_unit(nu):
    return np.array([-nu[1], nu[0]])


def singular_points(mom: ComplexMomentum, shift: float) -> np.ndarray:
    """Real zeros of ``shift + |ξ|^2 + 2ρ·ξ`` for Im z != 0 (2-D X_a).

    They lie on ν·ξ = 0 where |ξ⊥ + ρ⊥|^2 = |ρ⊥|^2 - shift.
    """
    if len(mom.nu) != 2:
        raise NotImplementedError("singular points are tabulated for dim X_a = 2")
    mu = _perp_unit(mom.nu)
    p = float(mom.rho_perp @ mu)
    rad = p * p - shift
    if rad < 0:
        return np.zeros((0, 2))
    ts = {-p + np.sqrt(rad), -p - np.sqrt(rad)}
    return np.array([t * mu for t in sorted(ts)])


def _cells_containing(points, grid: GridPair, slack=1e-12) -> np.ndarray:
    """Flat dual-grid indices whose cells contain any of ``points``."""
    dxi = grid.dual_spacing
    freqs = grid.xa_freqs
    hits = set()
    for pt in points:
        per_axis = []
        for ax, (x, d) in enumerate(zip(pt, dxi)):
            idx = np.flatnonzero(np.abs(freqs[ax] - x) <= d / 2 * (1 + slack) + 1e-14)
            per_axis.append(idx)
        for combo in np.array(np.meshgrid(*per_axis, indexing="ij")).reshape(len(pt), -1).T:
            hits.add(int(np.ravel_multi_index(tuple(combo), grid.xa_shape)))
    return np.array(sorted(hits), dtype=int)


def _cells_on_circle(center, radius, grid: GridPair) -> np.ndarray:
    """Flat indices of dual cells meeting the sphere |ξ - center| = radius."""
    xi = grid.dual_mesh().reshape(-1, grid.dim_xa)
    half = grid.dual_spacing / 2
    d = np.abs(xi - center)
    near = np.maximum(d - half, 0.0)
    far = d + half
    dmin = np.sqrt(np.sum(near**2, -1))
    dmax = np.sqrt(np.sum(far**2, -1))
    return np.flatnonzero((dmin <= radius) & (radius <= dmax))


def _nodes_near_circle(center, radius, grid: GridPair, band: float) -> np.ndarray:
    """Flat indices of dual nodes within ``band`` spacings of the circle."""
    xi = grid.dual_mesh().reshape(-1, grid.dim_xa)
    dist = np.abs(np.linalg.norm(xi - center, axis=-1) - radius)
    return np.flatnonzero(dist <= band * float(np.max(grid.dual_spacing)))


def _cells_taylor(rho, shift, grid: GridPair) -> np.ndarray:
    """Cells whose circumscribed ball may contain a zero (any dimension)."""
    xi = grid.dual_mesh().reshape(-1, grid.dim_xa)
    q = shift + np.sum(xi**2, -1) + 2 * (xi @ rho)
    grad = np.linalg.norm(2 * (xi + rho[None]), axis=-1)
    r = 0.5 * np.linalg.norm(grid.dual_spacing)
    return np.flatnonzero(np.abs(q) <= grad * r + r * r)


# dual-grid nodes within this many spacings of the real singular circle get
# hat-weighted averages
REAL_BAND = 6.0


def singular_cells(mom: ComplexMomentum, shift: float, grid: GridPair,
                   real_circle: bool = False, band: float = REAL_BAND) -> np.ndarray:
    """Dual cells where the multiplier for channel offset ``shift`` is averaged.

    ``real_circle`` selects the band about the real-axis singular sphere
    |ξ + Re ρ|^2 = |Re ρ|^2 - shift (2-D) or the cells meeting it (higher
    dimension); the set stays fixed along an η → 0 family.
    """
    if real_circle:
        re_rho = np.real(mom.rho)
        rad2 = float(re_rho @ re_rho) - shift
        cells = set()
        if rad2 > 0:
            if grid.dim_xa == 2:
                cells |= set(_nodes_near_circle(-re_rho, np.sqrt(rad2), grid, band).tolist())
            else:
                cells |= set(_cells_on_circle(-re_rho, np.sqrt(rad2), grid).tolist())
        if grid.dim_xa == 2 and np.imag(mom.z) != 0:
            cells |= set(_cells_containing(singular_points(mom, shift), grid).tolist())
        return np.array(sorted(cells), dtype=int)
    if np.imag(mom.z) == 0:
        raise GridSingularityError("real z needs the real-circle cell set")
    if grid.dim_xa == 2:
        return _cells_containing(singular_points(mom, shift), grid)
    return _cells_taylor(mom.rho, shift, grid)


@dataclass
class MultiplierTable:
    """Per-(k, ξ) values of (E_k - F_ρ(ξ))^{-1}, shape ``(n_perp, n_xa)``."""

    mom: ComplexMomentum
    values: np.ndarray
    symbol: np.ndarray          # E_k - F_ρ(ξ), unaveraged
    averaged: dict = field(default_factory=dict)   # k -> flat cell indices
    scheme: str = "box"

    @property
    def n_averaged(self) -> int:
        return sum(len(v) for v in self.averaged.values())


def strip_cells(mom: ComplexMomentum, grid: GridPair, width: float) -> np.ndarray:
    """Dual cells within ``width`` half-projections of the line ν·ξ = 0.

    For large Im z the symbol varies on the scale 1/Im z across this strip,
    so point values there are under-resolved. The set does not depend on z.
    """
    xi = grid.dual_mesh().reshape(-1, grid.dim_xa)
    half = 0.5 * float(np.abs(mom.nu) @ grid.dual_spacing)
    return np.flatnonzero(np.abs(xi @ mom.nu) <= width * half)


def build_table(mom: ComplexMomentum, spectral: SpectralData, grid: GridPair,
                real_circle: bool = False, band: float = REAL_BAND,
                strip_width: float = 0.0) -> MultiplierTable:
    """Multiplier table at Im z > 0.

    With ``real_circle`` (used for boundary values) the bound-channel entries
    in a band about the real singular circle are hat-weighted averages;
    otherwise only the cells containing the isolated zeros are box-averaged.
    ``strip_width > 0`` also box-averages the bound-channel cells of
    :func:`strip_cells`, which large-|z| evaluations need (2-D only).
    """
    if np.imag(mom.z) <= 0:
        raise GridSingularityError("the multiplier table needs Im z > 0")
    xi = grid.dual_mesh().reshape(-1, grid.dim_xa)
    fvals = f_rho(mom, xi)
    ev = spectral.eigenvalues
    symbol = ev[:, None] - fvals[None, :]
    averaged = {}
    bound = np.flatnonzero(ev < mom.eps0)
    mask = np.zeros(symbol.shape, dtype=bool)
    for k in bound:
        shift = float(ev[k] - mom.eps_alpha)
        cells = singular_cells(mom, shift, grid, real_circle=real_circle, band=band)
        if strip_width > 0 and grid.dim_xa == 2 and not real_circle:
            cells = np.union1d(cells, strip_cells(mom, grid, strip_width))
        if len(cells):
            averaged[int(k)] = cells
            mask[k, cells] = True
    bad = (np.abs(symbol) < UNDERFLOW) & ~mask
    if np.any(bad):
        raise GridSingularityError("multiplier denominator below underflow threshold "
                                   "at a non-averaged entry")
    with np.errstate(divide="ignore", invalid="ignore"):
        values = 1.0 / symbol
    dxi = grid.dual_spacing
    scheme = "tent" if real_circle and grid.dim_xa == 2 else "box"
    for k, cells in averaged.items():
        shift = float(ev[k] - mom.eps_alpha)
        if grid.dim_xa != 2:
            values[k, cells] = [_cell_average_tensor(xi[c], dxi, mom.rho, shift) for c in cells]
        elif scheme == "tent":
            values[k, cells] = tent_weights(xi[cells], dxi, mom.rho, shift)
        else:
            values[k, cells] = box_averages(xi[cells], dxi, mom.rho, shift)
    if not np.all(np.isfinite(values)):
        raise GridSingularityError("non-finite multiplier entry after averaging")
    return MultiplierTable(mom, values, symbol, averaged, scheme)


class GreenOperator:
    """Applies G_a(ρ), P_a(ρ) and the singular-mode projector for one momentum."""

    def __init__(self, mom: ComplexMomentum, spectral: SpectralData, grid: GridPair,
                 table: MultiplierTable | None = None, real_circle: bool = False,
                 strip_width: float = 0.0):
        self.mom = mom
        self.spectral = spectral
        self.grid = grid
        self.table = table if table is not None else build_table(
            mom, spectral, grid, real_circle=real_circle, strip_width=strip_width)
        self.q = np.ascontiguousarray(spectral.eigenvectors)
        self._axes = grid.xa_fft_axes

    # basis changes on (n_perp, n_xa) complex arrays via the interleaved real view
    def _to_eigen(self, a):
        return (self.q.T @ a.view(np.float64)).view(np.complex128)

    def _from_eigen(self, a):
        return (self.q @ a.view(np.float64)).view(np.complex128)

    def _fft(self, f):
        return scipy.fft.fftn(np.asarray(f, dtype=complex), axes=self._axes).reshape(
            self.grid.n_perp, -1)

    def _ifft(self, a):
        return scipy.fft.ifftn(a.reshape(self.grid.shape), axes=self._axes,
                               overwrite_x=True)

    def apply(self, f: np.ndarray) -> np.ndarray:
        coef = self._to_eigen(self._fft(f))
        coef *= self.table.values
        return self._ifft(self._from_eigen(coef))

    def apply_adjoint(self, f: np.ndarray) -> np.ndarray:
        """L^2 adjoint: the same construction with the conjugate multiplier."""
        coef = self._to_eigen(self._fft(f))
        coef *= np.conj(self.table.values)
        return self._ifft(self._from_eigen(coef))

    def apply_p(self, f: np.ndarray) -> np.ndarray:
        """Discrete Δ + 2ρ·D + V_a - ε_α built directly from H^a (no eigenbasis)."""
        xi = self.grid.dual_mesh().reshape(-1, self.grid.dim_xa)
        sym = np.sum(xi**2, -1) + 2 * (xi @ self.mom.rho) - self.mom.eps_alpha
        fh = self._fft(f)
        out = self._ifft(fh * sym[None, :])
        flat = np.asarray(f, dtype=complex).reshape(self.grid.n_perp, -1)
        out += (self.spectral.hamiltonian @ flat.view(np.float64)).view(
            np.complex128).reshape(self.grid.shape)
        return out

    def singular_part(self, f: np.ndarray) -> np.ndarray:
        """Component of f on the averaged (ξ, k) modes."""
        if not self.table.averaged:
            return np.zeros(self.grid.shape, dtype=complex)
        fh = self._fft(f)
        coef = np.zeros_like(fh)
        for k, cells in self.table.averaged.items():
            coef[k, cells] = self.q[:, k] @ fh[:, cells]
        return self._ifft(self._from_eigen(coef))

    def regular_part(self, f: np.ndarray) -> np.ndarray:
        return np.asarray(f, dtype=complex) - self.singular_part(f)


def apply_green_a(mom: ComplexMomentum, spectral: SpectralData, grid: GridPair,
                  f: np.ndarray) -> np.ndarray:
    return GreenOperator(mom, spectral, grid).apply(f)


def richardson(etas, values):
    """Polynomial extrapolation to η = 0 and a spread-based error estimate."""
    etas = np.asarray(etas, dtype=float)
    n = len(etas)

    def extrap(idx):
        e = etas[idx]
        w = np.array([np.prod([-e[m] / (e[j] - e[m]) for m in range(len(e)) if m != j])
                      for j in range(len(e))])
        return sum(wj * values[i] for wj, i in zip(w, idx))

    order = np.argsort(etas)
    full = extrap(list(order))
    if n < 2:
        return full, np.inf
    lower = extrap(list(order[: n - 1]))
    return full, float(np.linalg.norm(np.ravel(full - lower)))


def real_limit_green(mom: ComplexMomentum, spectral: SpectralData, grid: GridPair,
                     f: np.ndarray, eta_schedule=(0.02, 0.01, 0.005),
                     tol: float = 1e-2):
    """G_a at real z as the η → 0+ Richardson limit of G_a(z + iη).

    Returns (field, error_estimate); the averaged-cell set is the real-axis
    singular sphere for every η so the family is smooth in η.
    """
    if np.imag(mom.z) != 0:
        raise AdmissibilityError("real_limit_green takes real z")
    etas = sorted(eta_schedule, reverse=True)
    if any(e2 >= e1 for e1, e2 in zip(etas, etas[1:])):
        raise ValueError("eta schedule must be strictly decreasing")
    vals = [GreenOperator(mom.shifted(1j * eta), spectral, grid, real_circle=True).apply(f)
            for eta in etas]
    out, err = richardson(etas, vals)
    scale = max(np.linalg.norm(out), 1e-300)
    if err / scale > tol:
        raise ExtrapolationError(f"extrapolation spread {err / scale:.3g} exceeds {tol}")
    return out, err


def boundary_operator(mom: ComplexMomentum, spectral: SpectralData, grid: GridPair,
                      eta: float = 1e-9) -> GreenOperator:
    """G_a(z + i0) evaluated directly with exact cell averages at tiny η."""
    return GreenOperator(mom.shifted(1j * eta), spectral, grid, real_circle=True)


# --- scalar continuum oracles ------------------------------------------------

def gaussian_hat(xi, center, width):
    """Transform of exp(-|w - c|^2 / (2 s^2)) in 2-D: 2π s^2 e^{-iξ·c} e^{-s^2|ξ|^2/2}."""
    xi = np.asarray(xi, dtype=float)
    return (2 * np.pi * width**2 * np.exp(-1j * (xi @ np.asarray(center, dtype=float)))
            * np.exp(-0.5 * width**2 * np.sum(xi**2, -1)))


def _circle_arcs(mom: ComplexMomentum, k: float, n: int = 64):
    """Gauss nodes on the circle |ξ + Re ρ| = k split at the cut ν·ξ = 0.

    Returns (angles, weights, side) with side = sign(ν·ξ) on each arc; the
    weights of the arcs total 2π.
    """
    re_rho = np.real(mom.rho)
    c = float(mom.nu @ re_rho) / k
    base = np.arctan2(mom.nu[1], mom.nu[0])
    if abs(c) >= 1:
        edges = [base, base + 2 * np.pi]
    else:
        d = np.arccos(c)
        edges = [base - d, base + d, base - d + 2 * np.pi]
    x, w = np.polynomial.legendre.leggauss(n)
    th, wt, side = [], [], []
    for lo, hi in zip(edges[:-1], edges[1:]):
        t = 0.5 * (lo + hi) + 0.5 * (hi - lo) * x
        e = np.array([np.cos(0.5 * (lo + hi)), np.sin(0.5 * (lo + hi))])
        th.append(t)
        wt.append(0.5 * (hi - lo) * w)
        side.append(np.full(n, np.sign(float(mom.nu @ (-re_rho + k * e)))))
    return np.concatenate(th), np.concatenate(wt), np.concatenate(side)


def split_formula_pairing(mom: ComplexMomentum, shift: float, phi, rmax: float = 12.0,
                          n_theta: int = 96) -> complex:
    """(2π)^-2 ∫ φ(ξ) m(ξ) dξ for the real-axis scalar multiplier of one channel.

    m = (D + i0)^{-1} on ν·ξ > 0 and (D - i0)^{-1} on ν·ξ < 0 with
    D = |ξ + Re ρ|^2 - k^2, k^2 = |Re ρ|^2 - shift; evaluated in polar
    coordinates about -Re ρ as a principal value in the radius plus the signed
    half residue on the circle. ``phi`` is vectorized over ξ of shape (..., 2).
    """
    re_rho = np.real(mom.rho)
    k2 = float(re_rho @ re_rho) - shift
    k = np.sqrt(k2) if k2 > 0 else None

    def radial(th):
        e = np.array([np.cos(th), np.sin(th)])

        def g(r, part):
            val = phi((-re_rho + r * e)[None])[0] * r
            val = val / (r + k) if k is not None else val / (r * r - k2)
            return val.real if part == 0 else val.imag

        out = 0j
        for part in (0, 1):
            if k is not None:
                v, _ = integrate.quad(g, 0, rmax, args=(part,), weight="cauchy", wvar=k,
                                      limit=200, epsabs=1e-13, epsrel=1e-11)
            else:
                v, _ = integrate.quad(g, 0, rmax, args=(part,), limit=200,
                                      epsabs=1e-13, epsrel=1e-11)
            out += v if part == 0 else 1j * v
        return out

    # the principal-value part is smooth and periodic in θ
    thetas = 2 * np.pi * np.arange(n_theta) / n_theta
    total = sum(radial(t) for t in thetas) * (2 * np.pi / n_theta)
    if k is not None:
        # 1/(D ± i0) = PV ∓ iπ δ(D); δ(r^2 - k^2) r dr -> 1/2
        th, wt, side = _circle_arcs(mom, k)
        xi = -re_rho + k * np.stack([np.cos(th), np.sin(th)], -1)
        total += -0.5j * np.pi * np.sum(wt * side * phi(xi))
    return complex(total / (2 * np.pi) ** 2)


def scalar_channel_pairing(mom: ComplexMomentum, phi, grid: GridPair,
                           band: float = REAL_BAND) -> complex:
    """(2π)^-2 Σ_ξ φ(ξ) m(ξ) |cell| with the boundary-value table of one bare channel.

    The X^a factor is replaced by the single level ε_α, so ``m`` is the
    real-circle (tent-weighted) multiplier of :func:`build_table` for the
    incident channel alone; compare with :func:`split_formula_pairing` at
    shift 0. ``mom`` should sit just above the real axis.
    """
    spec = SpectralData(np.array([mom.eps_alpha]), np.eye(1), 1.0, mom.eps_alpha, mom.eps0,
                        (0,), np.zeros((1, 1)))
    table = build_table(mom, spec, grid, real_circle=True, band=band)
    xi = grid.dual_mesh().reshape(-1, grid.dim_xa)
    cell = float(np.prod(grid.dual_spacing))
    return complex(np.sum(phi(xi) * table.values[0]) * cell / (2 * np.pi) ** grid.dim_xa)


def poisson_circle_term(mom: ComplexMomentum, shift: float, phi, n: int = 64) -> complex:
    """-(2π)^-d π i k^{d-2} ∫_{|ω|=1} H(ν·ξ) φ(ξ) dω with ξ = k ω - Re ρ."""
    d = len(mom.nu)
    re_rho = np.real(mom.rho)
    k2 = float(re_rho @ re_rho) - shift
    if k2 <= 0:
        return 0.0j
    k = np.sqrt(k2)
    th, wt, side = _circle_arcs(mom, k, n)
    xi = -re_rho + k * np.stack([np.cos(th), np.sin(th)], -1)
    heav = np.where(side > 0, 1.0, 0.0)
    integral = np.sum(wt * heav * phi(xi))
    return complex(-(2 * np.pi) ** (-d) * np.pi * 1j * k ** (d - 2) * integral)


def regularized_jump(mom: ComplexMomentum, shift: float, phi,
                     eps_list=(4e-3, 2e-3, 1e-3), rmax: float = 12.0,
                     rtol: float = 1e-8) -> complex:
    """(2π)^-2 ∫ H(ν·ξ) φ [(D + iε)^{-1} - (D - iε)^{-1}] dξ extrapolated to ε → 0.

    Polar coordinates about -Re ρ. Near the circle, u = r^2 - k^2 = ε tan t
    turns the radial Lorentzian into -i ∫ φ dt; away from it composite Gauss
    in r is used, and the angle is integrated adaptively. The half-plane ν·ξ > 0 enters through the radial
    lower limit, so no delta-function identity is used.
    """
    re_rho = np.real(mom.rho)
    k2 = float(re_rho @ re_rho) - shift
    rez = float(mom.nu @ re_rho)
    base = np.arctan2(mom.nu[1], mom.nu[0])
    pts = []
    if k2 > 0 and abs(rez) < np.sqrt(k2):
        dcut = np.arccos(rez / np.sqrt(k2))
        pts = [base - dcut, base + dcut]
    gx, gw = np.polynomial.legendre.leggauss(16)

    def composite(lo, hi, n):
        edges = np.linspace(lo, hi, n + 1)
        mid, half = 0.5 * (edges[1:] + edges[:-1]), 0.5 * np.diff(edges)
        return (mid[:, None] + half[:, None] * gx).ravel(), (half[:, None] * gw).ravel()

    def inner(th, eps):
        e = np.array([np.cos(th), np.sin(th)])
        ne = float(mom.nu @ e)
        if ne <= 0:
            return np.zeros(2)
        r0 = max(rez / ne, 0.0)
        if r0 >= rmax:
            return np.zeros(2)
        # |u| <= ub with u = r^2 - k^2 holds the peak; outside it the
        # Lorentzian is smooth in r
        ub = 0.5 * k2 if k2 > 0 else 0.0
        ra = np.sqrt(max(k2 - ub, 0.0))
        rb = np.sqrt(k2 + ub) if k2 > 0 else r0
        val = 0j
        for lo, hi in ((r0, min(ra, rmax)), (max(rb, r0), rmax)):
            if hi > lo:
                r, w = composite(lo, hi, 16)
                dval = r * r - k2
                val += np.sum(w * phi(-re_rho + r[:, None] * e) * r
                              * (-2j * eps) / (dval * dval + eps * eps))
        lo, hi = max(r0, ra), min(rb, rmax)
        if k2 > 0 and hi > lo:
            t, w = composite(np.arctan((lo * lo - k2) / eps), np.arctan((hi * hi - k2) / eps), 32)
            r = np.sqrt(k2 + eps * np.tan(t))
            val += -1j * np.sum(w * phi(-re_rho + r[:, None] * e))
        return np.array([val.real, val.imag])

    vals = []
    for eps in eps_list:
        edges = sorted([base - np.pi / 2] + [p for p in pts] + [base + np.pi / 2])
        tot = np.zeros(2)
        for lo, hi in zip(edges[:-1], edges[1:]):
            v, _ = integrate.quad_vec(lambda t: inner(t, eps), lo, hi, epsabs=1e-2 * rtol,
                                      epsrel=rtol)
            tot += v
        vals.append(complex(tot[0], tot[1]) / (2 * np.pi) ** 2)
    out, _ = richardson(list(eps_list), vals)
    return complex(out)


def verify_poisson_split(mom: ComplexMomentum, shift: float, phi, rtol: float = 1e-8) -> dict:
    """Compare the regularized (−i0) − (+i0) jump against the circle term."""
    lhs = regularized_jump(mom, shift, phi, rtol=rtol)
    rhs = poisson_circle_term(mom, shift, phi)
    scale = max(abs(lhs), abs(rhs), 1e-300)
    return {"jump": lhs, "circle_term": rhs, "rel_diff": abs(lhs - rhs) / scale,
            "constant": -(2 * np.pi) ** (-len(mom.nu)) * np.pi * 1j
            * (float(np.real(mom.rho) @ np.real(mom.rho)) - shift) ** ((len(mom.nu) - 2) / 2)}


def green_norm_probe(mom_path, spectral: SpectralData, grid: GridPair, p: float, r: float,
                     probes) -> np.ndarray:
    """ℋ_r norms of G_a(ρ) f along a path of momenta, one row per probe."""
    if not p > 0:
        raise ValueError("need p > 0")
    if not r < 0:
        raise ValueError("need r < 0")
    if not r < p - 1:
        raise ValueError("need r < p - 1")
    psis = spectral.psis()
    out = np.zeros((len(probes), len(mom_path)))
    for j, mom in enumerate(mom_path):
        op = GreenOperator(mom, spectral, grid)
        for i, f in enumerate(probes):
            out[i, j] = weighted_norm(op.apply(f), r, psis, grid)
    return out


def closed_channel_bound(mom: ComplexMomentum, spectral: SpectralData, grid: GridPair) -> float:
    """sup_ξ ‖(Id - e_a) R^a(F_ρ(ξ))‖ ≤ sup_ξ min(|Re F - ε0|^{-1}, |Im F|^{-1})."""
    xi = grid.dual_mesh().reshape(-1, grid.dim_xa)
    fv = f_rho(mom, xi)
    b1 = np.where(fv.real < mom.eps0, 1.0 / np.abs(fv.real - mom.eps0), np.inf)
    with np.errstate(divide="ignore"):
        b2 = np.where(fv.imag != 0, 1.0 / np.abs(fv.imag), np.inf)
    return float(np.max(np.minimum(b1, b2)))
