"""Cluster geometry, product grids, the intercluster interaction and hybrid norms.

Coordinates on the total space are ordered ``w = (w_a, w^a)``: the
``dim_xa`` collision-plane axes first, then the ``dim_xperp`` internal axes.

In memory a field is an array of shape ``(n_perp,) + xa_counts``: the
flattened X^a index first. With that layout the X^a basis change is a
single real matrix product on the interleaved complex data and the X_a FFTs
run over contiguous trailing axes. The binary field format stores X_a
outermost instead (see ``f3scatter.fileio``).
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


class GeometryError(ValueError):
    pass


@dataclass(frozen=True)
class OtherCluster:
    name: str
    proj: np.ndarray  # (d_b, dim_xa + dim_xperp), w -> w^b
    decay_mu: float = 3.0

    @property
    def dim(self) -> int:
        return self.proj.shape[0]


@dataclass(frozen=True)
class ClusterGeometry:
    dim_xa: int
    dim_xperp: int
    others: tuple = ()

    def __post_init__(self):
        if self.dim_xa < 2:
            raise GeometryError("dim X_a must be at least 2")
        if self.dim_xperp < 1:
            raise GeometryError("dim X^a must be at least 1")
        n = self.dim_xa + self.dim_xperp
        for b in self.others:
            proj = np.asarray(b.proj, dtype=float)
            if proj.ndim != 2 or proj.shape[1] != n:
                raise GeometryError(f"cluster {b.name}: proj must have {n} columns")
            if np.linalg.matrix_rank(proj) != proj.shape[0]:
                raise GeometryError(f"cluster {b.name}: proj lacks full row rank")
            if not self.transversal(b):
                raise GeometryError(
                    f"cluster {b.name}: X_a meets X_{b.name} nontrivially")

    @property
    def dim(self) -> int:
        return self.dim_xa + self.dim_xperp

    def transversal(self, b: OtherCluster, tol: float = 1e-10) -> bool:
        """SVD decision for X_a ∩ X_b = {0}: proj_b restricted to X_a is injective."""
        block = np.asarray(b.proj, dtype=float)[:, : self.dim_xa]
        s = np.linalg.svd(block, compute_uv=False)
        return len(s) >= self.dim_xa and s[self.dim_xa - 1] > tol * max(s[0], 1.0)


def _axis(length: float, count: int):
    h = length / count
    x = (np.arange(count) - count // 2) * h
    xi = 2 * np.pi * np.fft.fftfreq(count, d=h)
    return h, x, xi


@dataclass(frozen=True)
class GridPair:
    xa_lengths: tuple
    xa_counts: tuple
    xperp_lengths: tuple
    xperp_counts: tuple
    xa_h: tuple = field(init=False)
    xperp_h: tuple = field(init=False)
    xa_axes: tuple = field(init=False, repr=False)
    xperp_axes: tuple = field(init=False, repr=False)
    xa_freqs: tuple = field(init=False, repr=False)
    xperp_freqs: tuple = field(init=False, repr=False)

    def __post_init__(self):
        for name in ("xa", "xperp"):
            lengths = getattr(self, f"{name}_lengths")
            counts = getattr(self, f"{name}_counts")
            if len(lengths) != len(counts):
                raise GeometryError(f"{name}: lengths and counts differ in rank")
            for L, n in zip(lengths, counts):
                if L <= 0:
                    raise GeometryError(f"{name}: box length must be positive")
                if n % 2:
                    raise GeometryError(f"{name}: odd count {n}")
                if n < 8:
                    raise GeometryError(f"{name}: fewer than 8 points per axis")
            axes = [_axis(L, n) for L, n in zip(lengths, counts)]
            object.__setattr__(self, f"{name}_h", tuple(a[0] for a in axes))
            object.__setattr__(self, f"{name}_axes", tuple(a[1] for a in axes))
            object.__setattr__(self, f"{name}_freqs", tuple(a[2] for a in axes))

    @property
    def shape(self) -> tuple:
        return (self.n_perp,) + tuple(self.xa_counts)

    @property
    def n_perp(self) -> int:
        return int(np.prod(self.xperp_counts))

    @property
    def n_xa(self) -> int:
        return int(np.prod(self.xa_counts))

    @property
    def xa_fft_axes(self) -> tuple:
        return tuple(range(1, 1 + self.dim_xa))

    @property
    def xa_shape(self) -> tuple:
        return tuple(self.xa_counts)

    @property
    def dim_xa(self) -> int:
        return len(self.xa_counts)

    @property
    def xa_cell(self) -> float:
        return float(np.prod(self.xa_h))

    @property
    def xperp_cell(self) -> float:
        return float(np.prod(self.xperp_h))

    @property
    def cell(self) -> float:
        return self.xa_cell * self.xperp_cell

    @property
    def dual_spacing(self) -> np.ndarray:
        return 2 * np.pi / np.asarray(self.xa_lengths, dtype=float)

    def xa_mesh(self) -> np.ndarray:
        """Points of the X_a grid, shape ``xa_counts + (dim_xa,)``."""
        return np.stack(np.meshgrid(*self.xa_axes, indexing="ij"), axis=-1)

    def xperp_mesh(self) -> np.ndarray:
        """Points of the X^a grid, flattened: shape ``(n_perp, dim_xperp)``."""
        return np.stack(np.meshgrid(*self.xperp_axes, indexing="ij"),
                        axis=-1).reshape(self.n_perp, -1)

    def dual_mesh(self) -> np.ndarray:
        """Dual frequencies in FFT order, shape ``xa_counts + (dim_xa,)``."""
        return np.stack(np.meshgrid(*self.xa_freqs, indexing="ij"), axis=-1)

    def full_mesh(self) -> np.ndarray:
        """Points ``(w_a, w^a)`` in memory layout: shape ``self.shape + (dim,)``."""
        wa = np.broadcast_to(self.xa_mesh()[None], (self.n_perp,) + self.xa_shape
                             + (self.dim_xa,))
        wp = self.xperp_mesh().reshape((self.n_perp,) + (1,) * self.dim_xa + (-1,))
        wp = np.broadcast_to(wp, (self.n_perp,) + self.xa_shape + (wp.shape[-1],))
        return np.concatenate([wa, wp], axis=-1)


def build_grids(xa_lengths, xa_counts, xperp_lengths, xperp_counts) -> GridPair:
    return GridPair(tuple(float(v) for v in xa_lengths), tuple(int(v) for v in xa_counts),
                    tuple(float(v) for v in xperp_lengths),
                    tuple(int(v) for v in xperp_counts))


@dataclass(frozen=True)
class PotentialSpec:
    """Radial profile ``amplitude * shape(|x| / width)``."""

    profile: str
    amplitude: float
    width: float = 1.0

    def __call__(self, x: np.ndarray) -> np.ndarray:
        r = np.linalg.norm(np.atleast_1d(x), axis=-1) / self.width
        if self.profile == "gaussian":
            shape = np.exp(-0.5 * r**2)
        elif self.profile == "sech2":
            shape = 1.0 / np.cosh(r) ** 2
        elif self.profile == "bump":
            shape = np.zeros_like(r)
            inside = r < 1
            shape[inside] = np.exp(1.0 - 1.0 / (1.0 - r[inside] ** 2))
        else:
            raise GeometryError(f"unknown profile {self.profile!r}")
        return self.amplitude * shape

    def scaled(self, t: float) -> "PotentialSpec":
        return PotentialSpec(self.profile, self.amplitude * t, self.width)

    def weighted_sup(self, mu: float, rmax: float = 60.0) -> float:
        """sup over X^b of <w^b>^mu |V_b| (radial profiles, 1-D scan)."""
        r = np.linspace(0.0, rmax, 20001)
        vals = np.abs(self(r[:, None]))
        return float(np.max((1 + r**2) ** (mu / 2) * vals))


def _xa_boundary_mask(grid: GridPair) -> np.ndarray:
    mask = np.zeros(grid.shape, dtype=bool)
    for ax in grid.xa_fft_axes:
        idx = [slice(None)] * len(grid.shape)
        idx[ax] = 0
        mask[tuple(idx)] = True
    return mask


def assemble_intercluster(geom: ClusterGeometry, vb, grid: GridPair,
                          truncation_tol: float = 1e-10) -> np.ndarray:
    """I_a(w) = sum_b V_b(proj_b w) sampled on the product grid (real).

    The X_a faces of the box are where periodic wrap-around enters the
    Fourier multiplier; any V_b above ``truncation_tol`` times its peak there
    is an error.
    """
    vb = list(vb)
    if len(vb) != len(geom.others):
        raise GeometryError("need one PotentialSpec per other cluster")
    w = grid.full_mesh()
    ia = np.zeros(grid.shape)
    face = _xa_boundary_mask(grid)
    for b, spec in zip(geom.others, vb):
        vals = spec(w @ np.asarray(b.proj, dtype=float).T)
        peak = abs(spec.amplitude)
        if peak > 0 and np.max(np.abs(vals[face])) > truncation_tol * peak:
            raise GeometryError(
                f"cluster {b.name}: potential exceeds truncation tolerance on the "
                "X_a box boundary")
        ia += vals
    return ia


def japanese(x: np.ndarray) -> np.ndarray:
    """<x> = (1 + |x|^2)^(1/2) over the last axis."""
    return np.sqrt(1.0 + np.sum(np.asarray(x) ** 2, axis=-1))


def ia_decay_constant(ia: np.ndarray, mu: float, grid: GridPair) -> float:
    if mu <= 0:
        raise GeometryError("mu must be positive")
    wa = japanese(grid.xa_mesh())
    wp = japanese(grid.xperp_mesh())
    weight = (wa[None] ** mu) * wp.reshape((-1,) + (1,) * grid.dim_xa) ** (-mu)
    return float(np.max(weight * np.abs(ia)))


def geometric_constant(geom: ClusterGeometry, mu: float, grid: GridPair) -> float:
    """Grid maximum of sum_b <w_a>^mu <w^b>^-mu <w^a>^-mu."""
    w = grid.full_mesh()
    wa = japanese(w[..., : geom.dim_xa])
    wp = japanese(w[..., geom.dim_xa:])
    total = np.zeros(grid.shape)
    for b in geom.others:
        wb = japanese(w @ np.asarray(b.proj, dtype=float).T)
        total += (wa / (wb * wp)) ** mu
    return float(total.max())


def channel_coefficients(f: np.ndarray, psis: np.ndarray, grid: GridPair) -> np.ndarray:
    """Coefficients <psi_k, f(w_a, .)>, shape ``(len(psis),) + xa_counts``."""
    flat = f.reshape(grid.n_perp, -1)
    return (psis.conj() @ flat * grid.xperp_cell).reshape((len(psis),) + grid.xa_shape)


def weighted_norm(f: np.ndarray, p: float, psis: np.ndarray, grid: GridPair) -> float:
    """Norm of the hybrid space: <w_a>^p-weighted L^2 on the bound-channel part,
    plain L^2 on the remainder.

    ``psis`` holds the L^2-normalized bound channels spanning Range e_a, one
    per row, sampled on the X^a grid.
    """
    f = np.asarray(f)
    psis = np.atleast_2d(psis)
    coef = channel_coefficients(f, psis, grid)
    proj = (psis.T @ coef.reshape(len(psis), -1)).reshape(grid.shape)
    rest = f - proj
    wa = japanese(grid.xa_mesh())[None] ** p
    bound_sq = np.sum(np.abs(wa * coef) ** 2) * grid.xa_cell
    rest_sq = np.sum(np.abs(rest) ** 2) * grid.cell
    return float(np.sqrt(bound_sq + rest_sq))


def l2_norm(f: np.ndarray, grid: GridPair) -> float:
    return float(np.sqrt(np.sum(np.abs(f) ** 2) * grid.cell))
