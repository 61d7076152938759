"""Pure numpy kernels: the reference implementation of the hot loops.

The compiled extension ``ellrad.kernels._core`` provides the same three
functions with identical accumulation order; results agree to roughly
1e-14 relative (only vectorized rounding differs).
"""

import numpy as np

NAME = "numpy"

_KIND_DISK, _KIND_ELLIPSE, _KIND_RECT, _KIND_GAUSS = 0, 1, 2, 3


def eval_shapes(table, x, y):
    """Evaluate a shape-table phantom at coordinate arrays ``x``, ``y``."""
    x = np.asarray(x, float)
    y = np.asarray(y, float)
    out = np.zeros(np.broadcast(x, y).shape)
    for row in np.asarray(table, float):
        kind = int(row[0])
        dx = x - row[1]
        dy = y - row[2]
        amp = row[7]
        if kind == _KIND_DISK:
            out += np.where(dx * dx + dy * dy <= row[4], amp, 0.0)
        elif kind == _KIND_ELLIPSE:
            out += np.where(dx * dx * row[5] + dy * dy * row[6] <= 1.0,
                            amp, 0.0)
        elif kind == _KIND_RECT:
            u = row[5] * dx + row[6] * dy
            v = -row[6] * dx + row[5] * dy
            out += np.where((np.abs(u) <= row[3]) & (np.abs(v) <= row[4]),
                            amp, 0.0)
        elif kind == _KIND_GAUSS:
            out += amp * np.exp((dx * dx + dy * dy) * row[4])
        else:
            raise ValueError(f"unknown shape kind {kind}")
    return out


def forward_reduce(table, x, y, w, cell, n_cells):
    """Accumulate ``eval * w`` into per-cell sums (ordered, deterministic)."""
    vals = eval_shapes(table, x, y)
    return np.bincount(cell, weights=vals * w, minlength=n_cells)


def backproject(values, frx, fry, ftx, fty, ds, l0, dl, px, py):
    """Weighted backprojection of a sinogram onto flat pixel arrays.

    For each pixel the scan angles are accumulated in grid order; the
    sinogram is interpolated linearly in the diameter coordinate and
    treated as zero outside its grid.
    """
    px = np.asarray(px, float)
    py = np.asarray(py, float)
    n_l = values.shape[1]
    acc = np.zeros(px.shape)
    for i in range(frx.shape[0]):
        dxr = px - frx[i]
        dyr = py - fry[i]
        rr = np.sqrt(dxr * dxr + dyr * dyr)
        dxt = px - ftx[i]
        dyt = py - fty[i]
        rt = np.sqrt(dxt * dxt + dyt * dyt)
        t = (rr + rt - l0) / dl
        inside = (t >= 0.0) & (t <= n_l - 1.0)
        j = np.minimum(np.floor(t), n_l - 2)
        j = np.maximum(j, 0).astype(np.intp)
        fr = t - j
        row = values[i]
        gval = (1.0 - fr) * row[j] + fr * row[j + 1]
        wx = dxr / rr + dxt / rt
        wy = dyr / rr + dyt / rt
        acc += np.where(inside, np.sqrt(wx * wx + wy * wy) * gval, 0.0)
    return acc * ds
