"""Serialization: binary field blobs, kernel/pairing CSV tables and JSON reports.

Every writer is deterministic: fixed column order, repr-exact floats and
sorted JSON keys, so two runs with the same scenario give identical bytes.
"""
from __future__ import annotations

import csv
import io
import json
import struct
from pathlib import Path

import numpy as np

from .geometry import GridPair
from .scattering import CircleGrid, SMatrixKernel

MAGIC = b"F3FLD"
FIELD_VERSION = 1
KERNEL_COLUMNS = ["lam", "alpha_in", "alpha_out", "theta_in", "theta_out", "re", "im"]
KERNEL_NOTE = ("# rows: incoming node theta_in on circle alpha_in, outgoing node theta_out "
               "on circle alpha_out; outgoing index = geometric exit direction (antipodal "
               "pull-back absorbed into node indexing)")


class FormatError(ValueError):
    pass


def _header_size(rank: int) -> int:
    return 16 * -(-(7 + 4 * rank) // 16)


def encode_field(arr: np.ndarray) -> bytes:
    """Header (magic, u8 version, u8 rank, u32 LE counts, zero pad to 16 bytes)
    followed by interleaved re/im float64 LE in C order."""
    arr = np.asarray(arr, dtype="<c16", order="C")  # keeps rank 0, unlike ascontiguousarray
    head = MAGIC + struct.pack("<BB", FIELD_VERSION, arr.ndim)
    head += struct.pack(f"<{arr.ndim}I", *arr.shape)
    head += b"\0" * (_header_size(arr.ndim) - len(head))
    return head + arr.tobytes()


def decode_field(blob: bytes) -> np.ndarray:
    if blob[:5] != MAGIC:
        raise FormatError("not an F3FLD blob (bad magic)")
    version, rank = struct.unpack_from("<BB", blob, 5)
    if version != FIELD_VERSION:
        raise FormatError(f"unsupported field version {version}")
    shape = struct.unpack_from(f"<{rank}I", blob, 7)
    off = _header_size(rank)
    n = int(np.prod(shape)) if rank else 1
    if len(blob) != off + 16 * n:
        raise FormatError(f"payload size {len(blob) - off} does not match shape {shape}")
    return np.frombuffer(blob, dtype="<c16", offset=off).reshape(shape).astype(complex)


def write_field(path, f: np.ndarray, grid: GridPair | None = None) -> None:
    """Write a field; with ``grid`` the memory layout (X^a, X_a...) is stored
    with the X_a axes outermost and the X^a axis last."""
    arr = np.moveaxis(f, 0, -1) if grid is not None else f
    Path(path).write_bytes(encode_field(arr))


def read_field(path, grid: GridPair | None = None) -> np.ndarray:
    arr = decode_field(Path(path).read_bytes())
    if grid is not None:
        if arr.shape != grid.xa_shape + (grid.n_perp,):
            raise FormatError(f"field shape {arr.shape} does not match the grid")
        arr = np.ascontiguousarray(np.moveaxis(arr, -1, 0))
    return arr


def _num(x) -> str:
    return repr(float(x))


def write_csv(path, header, rows, note: str | None = None) -> None:
    buf = io.StringIO()
    if note:
        buf.write(note + "\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([_num(v) if isinstance(v, (float, np.floating)) else v for v in r])
    Path(path).write_text(buf.getvalue())


def read_csv(path) -> list:
    lines = [ln for ln in Path(path).read_text().splitlines() if not ln.startswith("#")]
    return list(csv.DictReader(lines))


def write_json(path, obj) -> None:
    Path(path).write_text(json.dumps(obj, sort_keys=True, indent=2, default=_json_default) + "\n")


def _json_default(o):
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, (np.floating, np.integer, np.bool_)):
        return o.item()
    if isinstance(o, complex):
        return [o.real, o.imag]
    raise TypeError(f"cannot serialize {type(o).__name__}")


def kernel_rows(kernels: dict) -> list:
    rows = []
    for (a, b) in sorted(kernels):
        k = kernels[(a, b)]
        for i, ti in enumerate(k.circle_in.thetas):
            for j, tj in enumerate(k.circle_out.thetas):
                v = k.values[i, j]
                rows.append([float(k.lam), a, b, float(ti), float(tj), float(v.real),
                             float(v.imag)])
    return rows


def write_kernels(path, kernels: dict) -> None:
    write_csv(path, KERNEL_COLUMNS, kernel_rows(kernels), KERNEL_NOTE)


def _weights_from_angles(thetas: np.ndarray) -> np.ndarray:
    """Trapezoid weights of a closed node set: half the two adjacent gaps.

    Exact for the piecewise-uniform circle rules, whose weights are always
    the mean of the neighbouring angular gaps.
    """
    order = np.argsort(thetas)
    t = thetas[order]
    gaps = np.diff(np.concatenate([t, t[:1] + 2 * np.pi]))
    w_sorted = 0.5 * (gaps + np.roll(gaps, 1))
    w = np.empty_like(w_sorted)
    w[order] = w_sorted
    return w


def read_kernels(path, eigenvalues) -> dict:
    """Inverse of :func:`write_kernels`; channel energies come from ``eigenvalues``."""
    rows = read_csv(path)
    if not rows or set(rows[0]) != set(KERNEL_COLUMNS):
        raise FormatError(f"kernel CSV needs columns {KERNEL_COLUMNS}")
    lams = {float(r["lam"]) for r in rows}
    if len(lams) != 1:
        raise FormatError("kernel CSV mixes energies")
    lam = lams.pop()
    blocks, angles = {}, {}
    for r in rows:
        a, b = int(r["alpha_in"]), int(r["alpha_out"])
        ti, tj = float(r["theta_in"]), float(r["theta_out"])
        blocks.setdefault((a, b), []).append((ti, tj, complex(float(r["re"]), float(r["im"]))))
        angles.setdefault(a, {})[ti] = None
        angles.setdefault(b, {})[tj] = None
    circles = {}
    for a, ts in angles.items():
        th = np.array(list(ts))
        circles[a] = CircleGrid(lam, float(eigenvalues[a]), a, th, _weights_from_angles(th))
    out = {}
    for (a, b), entries in blocks.items():
        ci, co = circles[a], circles[b]
        idx_i = {t: i for i, t in enumerate(ci.thetas)}
        idx_o = {t: j for j, t in enumerate(co.thetas)}
        vals = np.zeros((ci.n, co.n), dtype=complex)
        for ti, tj, v in entries:
            vals[idx_i[ti], idx_o[tj]] = v
        out[(a, b)] = SMatrixKernel(lam, (a, b), vals, ci, co)
    return out
