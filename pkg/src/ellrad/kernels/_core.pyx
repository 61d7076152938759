# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled kernels for the hot loops.

Same contracts and accumulation order as ``ellrad.kernels.numpy_backend``;
selected automatically at import when this extension is built.  All loops
release the GIL so thread-level workers scale.
"""

import numpy as np

from libc.math cimport exp, fabs, floor, sqrt

NAME = "cython"


cdef inline double _shape_sum(const double[:, ::1] tab, double x, double y) noexcept nogil:
    cdef Py_ssize_t m = tab.shape[0]
    cdef Py_ssize_t i
    cdef int kind
    cdef double acc = 0.0
    cdef double dx, dy, u, v
    for i in range(m):
        kind = <int> tab[i, 0]
        dx = x - tab[i, 1]
        dy = y - tab[i, 2]
        if kind == 0:    # disk: [3]=r, [4]=r^2
            if dx * dx + dy * dy <= tab[i, 4]:
                acc += tab[i, 7]
        elif kind == 1:  # ellipse: [3]=rx, [4]=ry, [5]=1/rx^2, [6]=1/ry^2
            if dx * dx * tab[i, 5] + dy * dy * tab[i, 6] <= 1.0:
                acc += tab[i, 7]
        elif kind == 2:  # rect: [3]=hx, [4]=hy, [5]=cos, [6]=sin
            u = tab[i, 5] * dx + tab[i, 6] * dy
            v = -tab[i, 6] * dx + tab[i, 5] * dy
            if fabs(u) <= tab[i, 3] and fabs(v) <= tab[i, 4]:
                acc += tab[i, 7]
        else:            # gaussian: [3]=sigma, [4]=-1/(2 sigma^2)
            acc += tab[i, 7] * exp((dx * dx + dy * dy) * tab[i, 4])
    return acc


def eval_shapes(table, x, y):
    """Evaluate a shape-table phantom at coordinate arrays ``x``, ``y``."""
    xa = np.ascontiguousarray(x, dtype=np.float64)
    ya = np.ascontiguousarray(y, dtype=np.float64)
    xa, ya = np.broadcast_arrays(xa, ya)
    shape = xa.shape
    cdef const double[:, ::1] tab = np.ascontiguousarray(table, dtype=np.float64).reshape(-1, 8)
    cdef const double[::1] xv = np.ascontiguousarray(xa).ravel()
    cdef const double[::1] yv = np.ascontiguousarray(ya).ravel()
    out = np.empty(xv.shape[0], dtype=np.float64)
    cdef double[::1] ov = out
    cdef Py_ssize_t k, n = xv.shape[0]
    with nogil:
        for k in range(n):
            ov[k] = _shape_sum(tab, xv[k], yv[k])
    return out.reshape(shape)


def forward_reduce(table, x, y, w, cell, n_cells):
    """Accumulate ``eval * w`` into per-cell sums (ordered, deterministic)."""
    cdef const double[:, ::1] tab = np.ascontiguousarray(table, dtype=np.float64).reshape(-1, 8)
    cdef const double[::1] xv = np.ascontiguousarray(x, dtype=np.float64).ravel()
    cdef const double[::1] yv = np.ascontiguousarray(y, dtype=np.float64).ravel()
    cdef const double[::1] wv = np.ascontiguousarray(w, dtype=np.float64).ravel()
    cdef const Py_ssize_t[::1] cv = np.ascontiguousarray(cell, dtype=np.intp).ravel()
    out = np.zeros(int(n_cells), dtype=np.float64)
    cdef double[::1] ov = out
    cdef Py_ssize_t k, n = xv.shape[0]
    with nogil:
        for k in range(n):
            ov[cv[k]] += _shape_sum(tab, xv[k], yv[k]) * wv[k]
    return out


def backproject(values, frx, fry, ftx, fty, double ds, double l0, double dl,
                px, py):
    """Weighted backprojection of a sinogram onto flat pixel arrays."""
    cdef const double[:, ::1] vals = np.ascontiguousarray(values, dtype=np.float64)
    cdef const double[::1] rx = np.ascontiguousarray(frx, dtype=np.float64)
    cdef const double[::1] ry = np.ascontiguousarray(fry, dtype=np.float64)
    cdef const double[::1] tx = np.ascontiguousarray(ftx, dtype=np.float64)
    cdef const double[::1] ty = np.ascontiguousarray(fty, dtype=np.float64)
    cdef const double[::1] pxv = np.ascontiguousarray(px, dtype=np.float64).ravel()
    cdef const double[::1] pyv = np.ascontiguousarray(py, dtype=np.float64).ravel()
    out = np.zeros(pxv.shape[0], dtype=np.float64)
    cdef double[::1] ov = out
    cdef Py_ssize_t n_s = rx.shape[0]
    cdef Py_ssize_t n_l = vals.shape[1]
    cdef Py_ssize_t npix = pxv.shape[0]
    cdef Py_ssize_t p, i, j
    cdef double dxr, dyr, rr, dxt, dyt, rt, t, fr, gval, wx, wy, acc
    with nogil:
        for p in range(npix):
            acc = 0.0
            for i in range(n_s):
                dxr = pxv[p] - rx[i]
                dyr = pyv[p] - ry[i]
                rr = sqrt(dxr * dxr + dyr * dyr)
                dxt = pxv[p] - tx[i]
                dyt = pyv[p] - ty[i]
                rt = sqrt(dxt * dxt + dyt * dyt)
                t = (rr + rt - l0) / dl
                if t < 0.0 or t > n_l - 1.0:
                    continue
                j = <Py_ssize_t> floor(t)
                if j > n_l - 2:
                    j = n_l - 2
                fr = t - j
                gval = (1.0 - fr) * vals[i, j] + fr * vals[i, j + 1]
                wx = dxr / rr + dxt / rt
                wy = dyr / rr + dyt / rt
                acc += sqrt(wx * wx + wy * wy) * gval
            ov[p] = acc * ds
    return out
