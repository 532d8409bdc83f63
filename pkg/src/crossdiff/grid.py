"""Cell-centred uniform grids on boxes, fields living on them, and discrete operators.

Boundary conditions are encoded by ghost-cell extension: ``dirichlet_zero``
uses the odd reflection (the value on a boundary face is zero) and
``neumann_zero`` the even reflection (zero normal difference).
"""
from __future__ import annotations

import struct
from dataclasses import dataclass, field
from typing import BinaryIO

import numpy as np
import scipy.sparse as sp
from scipy import ndimage

from . import kernels

DIRICHLET = "dirichlet_zero"
NEUMANN = "neumann_zero"
BOUNDARY_TAGS = (DIRICHLET, NEUMANN)

MAGIC = b"XDF1"


@dataclass(frozen=True)
class Grid:
    shape: tuple
    lengths: tuple = None
    origin: tuple = None

    def __post_init__(self):
        shape = tuple(int(n) for n in self.shape)
        if len(shape) not in (1, 2):
            raise ValueError("only 1D and 2D grids are supported")
        if min(shape) < 3:
            raise ValueError(f"need at least 3 cells per axis, got {shape}")
        lengths = tuple(float(x) for x in (self.lengths or (1.0,) * len(shape)))
        origin = tuple(float(x) for x in (self.origin or (0.0,) * len(shape)))
        if len(lengths) != len(shape) or len(origin) != len(shape):
            raise ValueError("lengths/origin must match the grid dimension")
        if min(lengths) <= 0:
            raise ValueError("domain lengths must be positive")
        object.__setattr__(self, "shape", shape)
        object.__setattr__(self, "lengths", lengths)
        object.__setattr__(self, "origin", origin)

    @property
    def dim(self) -> int:
        return len(self.shape)

    @property
    def h(self) -> tuple:
        return tuple(L / n for L, n in zip(self.lengths, self.shape))

    @property
    def cell_volume(self) -> float:
        return float(np.prod(self.h))

    @property
    def size(self) -> int:
        return int(np.prod(self.shape))

    def axes(self) -> list:
        return [o + (np.arange(n) + 0.5) * hh for o, n, hh in zip(self.origin, self.shape, self.h)]

    def centers(self) -> tuple:
        """Cell-centre coordinate arrays, each of ``self.shape``."""
        return tuple(np.meshgrid(*self.axes(), indexing="ij"))

    def describe(self) -> dict:
        return {"shape": list(self.shape), "lengths": list(self.lengths),
                "origin": list(self.origin)}


@dataclass(frozen=True)
class GridField:
    grid: Grid
    values: np.ndarray
    bc: str = DIRICHLET

    def __post_init__(self):
        if self.bc not in BOUNDARY_TAGS:
            raise ValueError(f"unknown boundary tag {self.bc!r}")
        v = np.array(self.values, dtype=np.float64)
        if v.ndim == self.grid.dim:
            v = v[None]
        if v.shape[1:] != self.grid.shape:
            raise ValueError(f"values of shape {v.shape} do not fit grid {self.grid.shape}")
        if not np.all(np.isfinite(v)):
            raise ValueError("field values must be finite")
        v.flags.writeable = False
        object.__setattr__(self, "values", v)

    @property
    def m(self) -> int:
        return self.values.shape[0]

    def with_values(self, values) -> "GridField":
        return GridField(self.grid, values, self.bc)

    def __add__(self, other):
        return self.with_values(self.values + _vals(other))

    def __sub__(self, other):
        return self.with_values(self.values - _vals(other))

    def __mul__(self, c):
        return self.with_values(self.values * c)

    __rmul__ = __mul__


def _vals(x):
    return x.values if isinstance(x, GridField) else x


def from_function(grid: Grid, fun, bc: str = DIRICHLET) -> GridField:
    """Sample ``fun(*coords)`` (scalar or stacked components) at cell centres."""
    vals = np.asarray(fun(*grid.centers()), dtype=float)
    return GridField(grid, vals, bc)


# ---------------------------------------------------------------------------
# differential operators


def laplacian(field: GridField, backend=None) -> GridField:
    vals = kernels.laplacian(field.values, field.bc == DIRICHLET, field.grid.h, backend)
    return field.with_values(vals)


def laplacian_values(values: np.ndarray, grid: Grid, bc: str, backend=None) -> np.ndarray:
    return kernels.laplacian(values, bc == DIRICHLET, grid.h, backend)


def laplacian_matrix(grid: Grid, bc: str) -> sp.csr_matrix:
    """Sparse matrix of the scalar discrete Laplacian (C-order cell numbering)."""
    ghost = -1.0 if bc == DIRICHLET else 1.0
    mats = []
    for n, h in zip(grid.shape, grid.h):
        main = np.full(n, -2.0)
        main[0] += ghost
        main[-1] += ghost
        off = np.ones(n - 1)
        mats.append(sp.diags([off, main, off], [-1, 0, 1]) / (h * h))
    if grid.dim == 1:
        return sp.csr_matrix(mats[0])
    ix, iy = sp.identity(grid.shape[0]), sp.identity(grid.shape[1])
    return sp.csr_matrix(sp.kron(mats[0], iy) + sp.kron(ix, mats[1]))


def face_differences(values: np.ndarray, grid: Grid, bc: str):
    """Differences across every cell face, including boundary faces.

    Returns a list over axes of ``(diff, mid, weight)``: the difference
    quotient at the faces, the face-midpoint state (mean of the two adjacent
    cells, ghosts included) and the quadrature weight of each face (one half on
    boundary faces, which makes sum(weight * D F * D G) * h^N equal to
    -<Lap F, G>).
    """
    sign = -1.0 if bc == DIRICHLET else 1.0
    out = []
    for ax, h in enumerate(grid.h):
        axis = ax + 1
        first = np.take(values, [0], axis=axis)
        last = np.take(values, [-1], axis=axis)
        ext = np.concatenate([sign * first, values, sign * last], axis=axis)
        n = ext.shape[axis]
        lo = np.take(ext, np.arange(0, n - 1), axis=axis)
        hi = np.take(ext, np.arange(1, n), axis=axis)
        wshape = [1] * grid.dim
        wshape[ax] = n - 1
        w = np.ones(n - 1)
        w[0] = w[-1] = 0.5
        out.append(((hi - lo) / h, 0.5 * (hi + lo), w.reshape(wshape)))
    return out


# ---------------------------------------------------------------------------
# quadrature and norms


def integrate(field: GridField) -> np.ndarray:
    """Midpoint rule per component."""
    axes = tuple(range(1, field.values.ndim))
    return field.values.sum(axis=axes) * field.grid.cell_volume


def inner(a: GridField | np.ndarray, b: GridField | np.ndarray, grid: Grid) -> float:
    return float(np.sum(_vals(a) * _vals(b)) * grid.cell_volume)


def lp_norm(field: GridField, p: float) -> float:
    """Discrete L^p norm, Euclidean across components; ``p = inf`` is the max."""
    if p < 1:
        raise ValueError(f"p must be >= 1, got {p}")
    mag = np.sqrt(np.sum(field.values**2, axis=0))
    if np.isinf(p):
        return float(mag.max())
    return float((np.sum(mag**p) * field.grid.cell_volume) ** (1.0 / p))


# ---------------------------------------------------------------------------
# mollification


def _reflect_index(i: np.ndarray, n: int, odd: bool):
    j = np.mod(i, 2 * n)
    inside = j < n
    idx = np.where(inside, j, 2 * n - 1 - j)
    sign = np.where(inside | (not odd), 1.0, -1.0)
    return idx, sign


def extend(values: np.ndarray, pad: int, bc: str) -> np.ndarray:
    """Pad every spatial axis by ``pad`` cells using the boundary reflection rule."""
    odd = bc == DIRICHLET
    out = values
    for axis in range(1, values.ndim):
        n = values.shape[axis]
        idx, sign = _reflect_index(np.arange(-pad, n + pad), n, odd)
        shape = [1] * out.ndim
        shape[axis] = len(idx)
        out = np.take(out, idx, axis=axis) * sign.reshape(shape)
    return out


def bump_kernel(grid: Grid, radius: float) -> np.ndarray:
    """exp(-1/(1-|x/R|^2)) sampled on cell offsets, normalised to unit discrete mass."""
    r = [int(np.floor(radius / h)) for h in grid.h]
    offs = np.meshgrid(*[np.arange(-k, k + 1) * h for k, h in zip(r, grid.h)], indexing="ij")
    s2 = sum(o * o for o in offs) / radius**2
    ker = np.where(s2 < 1.0, np.exp(-1.0 / np.where(s2 < 1.0, 1.0 - s2, 1.0)), 0.0)
    return ker / ker.sum()


def mollify(field: GridField, radius: float) -> GridField:
    """Convolve with a unit-mass bump of the given radius; constants are fixed points."""
    hmax = max(field.grid.h)
    if radius < hmax * (1 - 1e-12):
        raise ValueError(f"mollification radius {radius} is below the grid spacing {hmax}")
    ker = bump_kernel(field.grid, radius)
    pad = max(ker.shape) // 2
    ext = extend(field.values, pad, field.bc)
    out = np.empty_like(field.values)
    for a in range(field.m):
        full = ndimage.correlate(ext[a], ker, mode="constant", cval=0.0)
        sl = tuple(slice(pad, pad + n) for n in field.grid.shape)
        out[a] = full[sl]
    return field.with_values(out)


# ---------------------------------------------------------------------------
# mean oscillation


@dataclass(frozen=True)
class OscillationProfile:
    radii: tuple
    values: tuple
    time_index: int | None = None
    centers: tuple = field(default=(), compare=False)

    def __post_init__(self):
        r = np.asarray(self.radii, float)
        if np.any(np.diff(r) >= 0):
            raise ValueError("radii must be strictly decreasing")
        if np.any(np.asarray(self.values) < 0):
            raise ValueError("oscillations are nonnegative")

    def at(self, radius: float) -> float:
        i = int(np.argmin(np.abs(np.asarray(self.radii) - radius)))
        return self.values[i]

    def to_json(self) -> dict:
        return {"time_index": self.time_index, "radii": list(self.radii),
                "values": list(self.values)}


def ball_offsets(grid: Grid, radius: float) -> np.ndarray:
    r = [int(np.floor(radius / h + 1e-12)) for h in grid.h]
    offs = np.meshgrid(*[np.arange(-k, k + 1) for k in r], indexing="ij")
    d2 = sum((o * h) ** 2 for o, h in zip(offs, grid.h))
    keep = d2 <= radius**2 * (1 + 1e-12)
    return np.stack([o[keep] for o in offs], axis=1).astype(np.int64)


def mean_oscillation(field: GridField, radii, backend=None) -> OscillationProfile:
    """Sup over the centre lattice of the ball mean of |F - (F)_ball| per radius.

    Balls are truncated to the domain; centres whose ball keeps fewer than four
    cells are skipped.
    """
    hmax = max(field.grid.h)
    radii = sorted((float(r) for r in radii), reverse=True)
    if any(r < 2 * hmax * (1 - 1e-12) for r in radii):
        raise ValueError(f"oscillation radii must be at least 2h = {2 * hmax}")
    vals, centers = [], []
    for R in radii:
        osc, i, j = kernels.mean_oscillation(field.values, ball_offsets(field.grid, R), 4,
                                             backend)
        vals.append(float(osc))
        centers.append((int(i), int(j)) if field.grid.dim == 2 else (int(i),))
    return OscillationProfile(tuple(radii), tuple(vals), None, tuple(centers))


# ---------------------------------------------------------------------------
# field dump format


def write_field(field: GridField, fh: BinaryIO) -> None:
    """XDF1: magic, N (u8), extents (u32 each), m (u32), boundary tag (u8), then
    little-endian float64 values, component-blocked and row-major."""
    g = field.grid
    fh.write(MAGIC)
    fh.write(struct.pack("<B", g.dim))
    fh.write(struct.pack("<" + "I" * g.dim, *g.shape))
    fh.write(struct.pack("<I", field.m))
    fh.write(struct.pack("<B", BOUNDARY_TAGS.index(field.bc)))
    fh.write(np.ascontiguousarray(field.values, dtype="<f8").tobytes())


def read_field(fh: BinaryIO, grid: Grid | None = None) -> GridField:
    if fh.read(4) != MAGIC:
        raise ValueError("not an XDF1 field dump")
    (dim,) = struct.unpack("<B", fh.read(1))
    shape = struct.unpack("<" + "I" * dim, fh.read(4 * dim))
    (m,) = struct.unpack("<I", fh.read(4))
    (tag,) = struct.unpack("<B", fh.read(1))
    count = m * int(np.prod(shape))
    data = np.frombuffer(fh.read(8 * count), dtype="<f8")
    if data.size != count:
        raise ValueError("truncated field dump")
    if grid is None:
        grid = Grid(shape)
    elif grid.shape != tuple(shape):
        raise ValueError(f"dump extents {shape} do not match grid {grid.shape}")
    return GridField(grid, data.reshape((m,) + tuple(shape)).astype(np.float64), BOUNDARY_TAGS[tag])


def save_field(field: GridField, path) -> None:
    with open(path, "wb") as fh:
        write_field(field, fh)


def load_field(path, grid: Grid | None = None) -> GridField:
    with open(path, "rb") as fh:
        return read_field(fh, grid)
