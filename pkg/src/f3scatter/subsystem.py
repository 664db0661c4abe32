"""Subsystem Hamiltonian H^a on the X^a grid: spectrum, channels, thresholds and
the effective interaction felt by a bound cluster."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg
import scipy.sparse
import scipy.sparse.linalg

from .geometry import GridPair, PotentialSpec, GeometryError


class SpectrumError(ValueError):
    pass


# eigenvalues within this of zero are discretized continuum, not bound levels
BOUND_TOL = 1e-8


def laplacian_matrix(lengths, counts, kind: str = "spectral") -> np.ndarray:
    """Positive periodic Laplacian on a tensor grid as a dense real symmetric matrix."""
    mats = []
    for L, n in zip(lengths, counts):
        h = L / n
        if kind == "spectral":
            k = 2 * np.pi * np.fft.fftfreq(n, d=h)
            col = np.real(np.fft.ifft(k**2))
            m = col[(np.arange(n)[:, None] - np.arange(n)[None, :]) % n]
        elif kind == "stencil":
            m = (2 * np.eye(n) - np.roll(np.eye(n), 1, 0) - np.roll(np.eye(n), -1, 0)) / h**2
        else:
            raise ValueError(f"unknown laplacian {kind!r}")
        mats.append(m)
    out = mats[0]
    for m in mats[1:]:
        out = np.kron(out, np.eye(m.shape[0])) + np.kron(np.eye(out.shape[0]), m)
    return out


@dataclass(frozen=True)
class SpectralData:
    eigenvalues: np.ndarray   # ascending
    eigenvectors: np.ndarray  # columns, Euclidean-orthonormal
    weight: float             # quadrature weight per X^a node
    epsilon1: float
    epsilon0: float
    bound_channels: tuple     # indices with E_k <= epsilon1, E_k < 0
    hamiltonian: np.ndarray

    def psi(self, k: int) -> np.ndarray:
        """L^2-normalized eigenfunction (unit norm under the grid quadrature)."""
        return self.eigenvectors[:, k] / np.sqrt(self.weight)

    def psis(self, indices=None) -> np.ndarray:
        idx = self.bound_channels if indices is None else indices
        return np.array([self.psi(k) for k in idx])

    @property
    def negative(self) -> np.ndarray:
        return np.flatnonzero(self.eigenvalues < -BOUND_TOL)

    @property
    def lambda_prime(self) -> list:
        return lambda_prime_a(self.eigenvalues)

    def with_epsilon1(self, epsilon1: float) -> "SpectralData":
        channels, eps0, _ = _partition(self.eigenvalues, epsilon1)
        return SpectralData(self.eigenvalues, self.eigenvectors, self.weight,
                            float(epsilon1), eps0, tuple(channels), self.hamiltonian)


def lambda_prime_a(eigenvalues) -> list:
    """Discrete model of Λ'_a: {0} together with the negative eigenvalues."""
    return sorted({0.0} | {float(e) for e in eigenvalues if e < -BOUND_TOL})


def _partition(eigenvalues, epsilon1):
    if epsilon1 >= 0:
        raise SpectrumError("epsilon1 must be negative")
    ev = np.asarray(eigenvalues)
    if np.any(np.abs(ev - epsilon1) < 1e-9):
        raise SpectrumError(f"epsilon1={epsilon1} coincides with an eigenvalue")
    channels = [int(k) for k in np.flatnonzero(ev <= epsilon1)]
    lp = lambda_prime_a(ev)
    eps0 = min(e for e in lp if e > epsilon1)
    return channels, float(eps0), lp


def default_epsilon1(eigenvalues, n_channels: int = 1) -> float:
    """Midpoint between the highest channel in use and min(0, next eigenvalue)."""
    ev = np.sort(np.asarray(eigenvalues))
    top = ev[n_channels - 1]
    nxt = min(0.0, ev[n_channels]) if len(ev) > n_channels else 0.0
    nxt = 0.0 if nxt > -BOUND_TOL else nxt
    return float(0.5 * (top + nxt))


def eigensolve_subsystem(va: PotentialSpec, lengths, counts, laplacian: str = "spectral",
                         epsilon1: float | None = None,
                         n_channels: int = 1) -> SpectralData:
    """Dense symmetric eigendecomposition of Δ_{X^a} + V_a on the periodic grid."""
    lengths, counts = tuple(lengths), tuple(counts)
    mesh = np.stack(np.meshgrid(*[(np.arange(n) - n // 2) * (L / n)
                                  for L, n in zip(lengths, counts)], indexing="ij"), -1)
    v = va(mesh.reshape(-1, len(counts)))
    ham = laplacian_matrix(lengths, counts, laplacian) + np.diag(v)
    ev, vecs = scipy.linalg.eigh(ham)
    # deterministic sign: largest-magnitude entry positive
    piv = np.argmax(np.abs(vecs), axis=0)
    vecs = vecs * np.sign(vecs[piv, np.arange(len(ev))])
    if not np.any(ev < -BOUND_TOL):
        raise SpectrumError("no bound state: H^a has no negative eigenvalue")
    if epsilon1 is None:
        epsilon1 = default_epsilon1(ev, n_channels)
    channels, eps0, _ = _partition(ev, epsilon1)
    weight = float(np.prod([L / n for L, n in zip(lengths, counts)]))
    return SpectralData(ev, vecs, weight, float(epsilon1), eps0, tuple(channels), ham)


def channel_partition(spectral: SpectralData, epsilon1: float):
    """Return (channels, epsilon0, Λ'_a) for the cut ``epsilon1``."""
    channels, eps0, lp = _partition(spectral.eigenvalues, epsilon1)
    out = [make_channel(spectral, k) for k in channels]
    return out, eps0, lp


@dataclass(frozen=True)
class Channel:
    index: int
    energy: float
    psi: np.ndarray
    decay_rate: float


def fit_decay_rate(psi: np.ndarray, x: np.ndarray, lo: float = 1e-8,
                   hi: float = 1e-3) -> float:
    """Slope of -log|psi| against |x| over the exponential tail."""
    a = np.abs(psi) / np.max(np.abs(psi))
    r = np.abs(x)
    sel = (a < hi) & (a > lo)
    if sel.sum() < 4:
        return float("nan")
    slope, _ = np.polyfit(r[sel], np.log(a[sel]), 1)
    return float(-slope)


def make_channel(spectral: SpectralData, k: int, x: np.ndarray | None = None) -> Channel:
    psi = spectral.psi(k)
    if x is None:
        n = len(psi)
        x = (np.arange(n) - n // 2) * spectral.weight
    return Channel(k, float(spectral.eigenvalues[k]), psi, fit_decay_rate(psi, x))


@dataclass(frozen=True)
class EffectiveInteraction:
    values: np.ndarray   # V_alpha on the X_a grid
    fourier: np.ndarray  # continuum-normalized transform on the dual grid (FFT order)
    grid: GridPair

    def direct(self, zeta) -> complex:
        """Direct quadrature of ∫ e^{-iζ·w_a} V_α(w_a) dw_a at arbitrary real ζ."""
        return fourier_direct(self.values, self.grid, zeta)


def fourier_direct(values: np.ndarray, grid: GridPair, zeta) -> complex:
    w = grid.xa_mesh()
    phase = np.exp(-1j * (w @ np.asarray(zeta, dtype=float)))
    return complex(np.sum(phase * values) * grid.xa_cell)


def continuum_fft(values: np.ndarray, grid: GridPair) -> np.ndarray:
    """∫ e^{-iξ·w} f(w) dw on the dual grid (FFT order) for f on the X_a grid."""
    lead = values.ndim - grid.dim_xa
    out = np.fft.fftn(values, axes=tuple(range(lead, values.ndim)))
    # grid starts at -L/2 (index shift n//2): phase e^{-iξ·w_0}
    for ax, (xi, x) in enumerate(zip(grid.xa_freqs, grid.xa_axes)):
        shape = [1] * out.ndim
        shape[lead + ax] = len(xi)
        out = out * np.exp(-1j * xi * x[0]).reshape(shape)
    return out * grid.xa_cell


def effective_interaction(psi: np.ndarray, ia: np.ndarray, grid: GridPair) -> EffectiveInteraction:
    """V_α(w_a) = ∫ I_a |ψ_α|^2 dw^a and its Fourier transform on X_a."""
    dens = np.abs(np.asarray(psi).ravel()) ** 2
    vals = (dens @ ia.reshape(grid.n_perp, -1) * grid.xperp_cell).reshape(grid.xa_shape)
    return EffectiveInteraction(vals, continuum_fft(vals, grid), grid)


def _dirichlet_levels(spec: PotentialSpec, dim: int, length: float, h: float, k: int):
    """Lowest ``k`` eigenvalues of the second-order Dirichlet Δ + V_b on a cube."""
    n = int(round(length / h)) - 1
    x = (np.arange(n) + 1) * (length / (n + 1)) - length / 2
    h = length / (n + 1)
    if dim == 1:
        diag = 2 / h**2 + spec(x[:, None])
        off = np.full(n - 1, -1 / h**2)
        return scipy.linalg.eigh_tridiagonal(diag, off, select="i", select_range=(0, k - 1),
                                             eigvals_only=True)
    lap1 = scipy.sparse.diags([np.full(n - 1, -1.0), np.full(n, 2.0), np.full(n - 1, -1.0)],
                              [-1, 0, 1]) / h**2
    eye = scipy.sparse.identity(n)
    lap = lap1
    for _ in range(dim - 1):
        lap = scipy.sparse.kron(lap, eye) + scipy.sparse.kron(
            scipy.sparse.identity(lap.shape[0]), lap1)
    mesh = np.stack(np.meshgrid(*[x] * dim, indexing="ij"), -1).reshape(-1, dim)
    ham = (lap + scipy.sparse.diags(spec(mesh))).tocsc()
    vals = scipy.sparse.linalg.eigsh(ham, k=k, sigma=float(np.min(spec(mesh))) - 1.0,
                                     which="LM", return_eigenvectors=False)
    return np.sort(vals)


def sibling_levels(spec: PotentialSpec, dim: int, length: float = 40.0,
                   max_unknowns: int | None = None, rel_tol: float = 1e-3, k: int = 4) -> list:
    """Negative eigenvalues of Δ + V_b on X^b, from Dirichlet boxes grown until stable.

    Dirichlet walls only raise energies, so every negative level found is a
    genuine bound state. The box doubles while the lowest level is missing or
    still moving by more than ``rel_tol``, up to ``max_unknowns`` grid points
    (default 1e5 in one dimension, 3e4 otherwise). Weak 1-D wells bind with
    decay lengths far beyond the default box; in two dimensions the binding
    energy is exponentially small in 1/|V_b| and usually stays unresolved,
    i.e. indistinguishable from the threshold 0.
    """
    if spec.amplitude >= 0:
        return []
    h = spec.width / (8 if dim == 1 else 4)
    cap = max_unknowns or (100_000 if dim == 1 else 30_000)
    prev = None
    while (length / h) ** dim <= cap:
        ev = _dirichlet_levels(spec, dim, length, h, k)
        neg = ev[ev < -BOUND_TOL]
        if len(neg) and prev is not None and abs(neg[0] - prev) <= rel_tol * abs(neg[0]):
            return [float(e) for e in neg]
        prev = neg[0] if len(neg) else None
        length *= 2
    return [] if prev is None else [float(e) for e in neg]


def full_thresholds(spectral: SpectralData, siblings, sibling_dims,
                    length: float = 40.0) -> list:
    """Λ' as the union over 2-clusters of {0} and their bound levels."""
    out = set(lambda_prime_a(spectral.eigenvalues))
    for spec, dim in zip(siblings, sibling_dims):
        out |= set(sibling_levels(spec, dim, length))
    return sorted(out)


def near_threshold(value: float, thresholds, tol: float = 1e-6) -> bool:
    return any(abs(value - t) < tol for t in thresholds)


__all__ = [
    "SpectrumError", "SpectralData", "Channel", "EffectiveInteraction",
    "eigensolve_subsystem", "channel_partition", "effective_interaction",
    "full_thresholds", "near_threshold", "lambda_prime_a", "laplacian_matrix",
    "fourier_direct", "continuum_fft", "GeometryError",
]
