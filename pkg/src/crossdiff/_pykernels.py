"""Reference numpy implementations of the hot kernels.

Arrays are ``(m, nx, ny)`` with ``ny == 1`` for one-dimensional grids, so the
same code serves both dimensions. ``odd`` selects the boundary ghost rule:
odd extension (zero Dirichlet) when true, even extension (zero Neumann)
otherwise.
"""
import numpy as np


def laplacian(values, odd, hx, hy, dim):
    m, nx, ny = values.shape
    sign = -1.0 if odd else 1.0
    out = np.empty_like(values)
    ext = np.empty((m, nx + 2, ny))
    ext[:, 1:-1] = values
    ext[:, 0] = sign * values[:, 0]
    ext[:, -1] = sign * values[:, -1]
    out[:] = (ext[:, 2:] - 2.0 * values + ext[:, :-2]) / (hx * hx)
    if dim == 2:
        ext = np.empty((m, nx, ny + 2))
        ext[:, :, 1:-1] = values
        ext[:, :, 0] = sign * values[:, :, 0]
        ext[:, :, -1] = sign * values[:, :, -1]
        out += (ext[:, :, 2:] - 2.0 * values + ext[:, :, :-2]) / (hy * hy)
    return out


def _shifted(values, di, dj):
    """values[c + (di, dj)] over all centers c, with a validity mask."""
    m, nx, ny = values.shape
    out = np.zeros_like(values)
    mask = np.zeros((nx, ny), dtype=bool)
    xs = slice(max(0, -di), min(nx, nx - di))
    ys = slice(max(0, -dj), min(ny, ny - dj))
    xs_src = slice(xs.start + di, xs.stop + di)
    ys_src = slice(ys.start + dj, ys.stop + dj)
    out[:, xs, ys] = values[:, xs_src, ys_src]
    mask[xs, ys] = True
    return out, mask


def mean_oscillation(values, offsets, min_cells):
    """Sup over centers of the ball average of |F - (F)_ball|.

    Returns ``(sup, ix, iy)``; centers whose truncated ball holds fewer than
    ``min_cells`` cells are skipped. ``(-1, -1)`` marks an empty lattice.
    """
    m, nx, ny = values.shape
    total = np.zeros((m, nx, ny))
    count = np.zeros((nx, ny))
    shifts = []
    for di, dj in offsets:
        s, mask = _shifted(values, int(di), int(dj))
        shifts.append((s, mask))
        total += s
        count += mask
    avg = total / np.maximum(count, 1.0)
    dev = np.zeros((nx, ny))
    for s, mask in shifts:
        d = np.sqrt(np.sum((s - avg) ** 2, axis=0))
        dev += np.where(mask, d, 0.0)
    osc = dev / np.maximum(count, 1.0)
    osc = np.where(count >= min_cells, osc, -1.0)
    flat = int(np.argmax(osc))
    ix, iy = divmod(flat, ny)
    if osc[ix, iy] < 0:
        return 0.0, -1, -1
    return float(osc[ix, iy]), ix, iy
