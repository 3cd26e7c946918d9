# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled counterparts of ``kernels._reference``.

Every floating-point expression is grouped exactly as in the reference so
the two backends return bit-for-bit identical results.  Within one parity
pass of ``sor_fill`` no two updated pixels are 4-neighbours, so the
sequential updates here match the reference's vectorised gather/scatter.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport fabs

cnp.import_array()


def sor_fill(double[:, :, ::1] frag, object hole, double omega, double tol, int max_iter):
    """See ``kernels._reference.sor_fill``."""
    cdef Py_ssize_t H = frag.shape[0]
    cdef Py_ssize_t W = frag.shape[1]
    cdef Py_ssize_t C = frag.shape[2]

    rows_np, cols_np = np.nonzero(np.asarray(hole))
    parity_np = (rows_np + cols_np) & 1
    r0_np = np.ascontiguousarray(rows_np[parity_np == 0], dtype=np.intp)
    c0_np = np.ascontiguousarray(cols_np[parity_np == 0], dtype=np.intp)
    r1_np = np.ascontiguousarray(rows_np[parity_np == 1], dtype=np.intp)
    c1_np = np.ascontiguousarray(cols_np[parity_np == 1], dtype=np.intp)

    cdef Py_ssize_t[::1] r0 = r0_np
    cdef Py_ssize_t[::1] c0 = c0_np
    cdef Py_ssize_t[::1] r1 = r1_np
    cdef Py_ssize_t[::1] c1 = c1_np
    cdef Py_ssize_t n0 = r0.shape[0]
    cdef Py_ssize_t n1 = r1.shape[0]

    cdef Py_ssize_t sweep, k, ch, rr, cc, up, down, lf, rt
    cdef double avg, step, astep, worst
    cdef Py_ssize_t done = max_iter

    with nogil:
        for sweep in range(1, max_iter + 1):
            worst = 0.0
            for k in range(n0):
                rr = r0[k]
                cc = c0[k]
                up = rr - 1 if rr > 0 else 0
                down = rr + 1 if rr < H - 1 else H - 1
                lf = cc - 1 if cc > 0 else 0
                rt = cc + 1 if cc < W - 1 else W - 1
                for ch in range(C):
                    avg = (((frag[up, cc, ch] + frag[down, cc, ch])
                            + frag[rr, lf, ch]) + frag[rr, rt, ch]) * 0.25
                    step = omega * (avg - frag[rr, cc, ch])
                    frag[rr, cc, ch] = frag[rr, cc, ch] + step
                    astep = fabs(step)
                    if astep > worst:
                        worst = astep
            for k in range(n1):
                rr = r1[k]
                cc = c1[k]
                up = rr - 1 if rr > 0 else 0
                down = rr + 1 if rr < H - 1 else H - 1
                lf = cc - 1 if cc > 0 else 0
                rt = cc + 1 if cc < W - 1 else W - 1
                for ch in range(C):
                    avg = (((frag[up, cc, ch] + frag[down, cc, ch])
                            + frag[rr, lf, ch]) + frag[rr, rt, ch]) * 0.25
                    step = omega * (avg - frag[rr, cc, ch])
                    frag[rr, cc, ch] = frag[rr, cc, ch] + step
                    astep = fabs(step)
                    if astep > worst:
                        worst = astep
            if worst < tol:
                done = sweep
                break
    return done


def accumulate_window(double[:, :, ::1] weighted, double[:, ::1] weight,
                      double[:, :, ::1] plain, cnp.int32_t[:, ::1] coverage,
                      double[:, :, ::1] pixels,
                      Py_ssize_t top, Py_ssize_t left, Py_ssize_t cy, Py_ssize_t cx):
    """See ``kernels._reference.accumulate_window``."""
    cdef Py_ssize_t h = pixels.shape[0]
    cdef Py_ssize_t w = pixels.shape[1]
    cdef Py_ssize_t C = pixels.shape[2]
    cdef Py_ssize_t i, j, ch, rr, cc, dr, dc
    cdef double ay, ax, a, wv

    with nogil:
        for i in range(h):
            rr = top + i
            dr = rr - cy
            if dr < 0:
                dr = -dr
            ay = (2.0 * dr) / h
            for j in range(w):
                cc = left + j
                dc = cc - cx
                if dc < 0:
                    dc = -dc
                ax = (2.0 * dc) / w
                a = ay if ay > ax else ax
                wv = 1.0 - a
                if wv < 0.0:
                    wv = 0.0
                for ch in range(C):
                    weighted[rr, cc, ch] = weighted[rr, cc, ch] + wv * pixels[i, j, ch]
                    plain[rr, cc, ch] = plain[rr, cc, ch] + pixels[i, j, ch]
                weight[rr, cc] = weight[rr, cc] + wv
                coverage[rr, cc] = coverage[rr, cc] + 1
