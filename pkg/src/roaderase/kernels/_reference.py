"""Pure-NumPy reference implementations of the hot kernels.

The compiled backend in ``_native.pyx`` mirrors these functions operation by
operation; both must stay bit-for-bit interchangeable.  Keep any change to
the arithmetic (expression grouping, clamping, reduction order) in sync.
"""

import numpy as np


def sor_fill(frag, hole, omega, tol, max_iter):
    """Relax hole pixels toward the discrete harmonic fill, in place.

    Red-black successive over-relaxation: each sweep updates the even-parity
    hole pixels from the current buffer, then the odd-parity ones.  Four
    neighbours, clamped at the fragment border.  ``omega=1`` is plain
    neighbour-averaging (Gauss-Seidel); larger values accelerate convergence
    to the same fixed point.

    Parameters
    ----------
    frag : (H, W, C) float64 array, modified in place.
    hole : (H, W) uint8 array, nonzero marks pixels to fill.
    omega : relaxation factor in [1, 2).
    tol : stop when the largest per-pixel update of a sweep falls below this.
    max_iter : sweep cap.

    Returns the number of sweeps executed.
    """
    H, W, _ = frag.shape
    rows, cols = np.nonzero(hole)
    passes = []
    for parity in (0, 1):
        sel = ((rows + cols) & 1) == parity
        r = rows[sel]
        c = cols[sel]
        up = np.maximum(r - 1, 0)
        down = np.minimum(r + 1, H - 1)
        left = np.maximum(c - 1, 0)
        right = np.minimum(c + 1, W - 1)
        passes.append((r, c, up, down, left, right))

    for sweep in range(1, max_iter + 1):
        worst = 0.0
        for r, c, up, down, left, right in passes:
            if r.size == 0:
                continue
            avg = (((frag[up, c] + frag[down, c]) + frag[r, left]) + frag[r, right]) * 0.25
            step = omega * (avg - frag[r, c])
            frag[r, c] += step
            m = np.abs(step).max()
            if m > worst:
                worst = m
        if worst < tol:
            return sweep
    return max_iter


def accumulate_window(weighted, weight, plain, coverage, pixels, top, left, cy, cx):
    """Accumulate one window's pixels into the fusion buffers.

    The per-pixel weight is 1 at the window centre ``(cy, cx)`` and decays
    linearly with the centre distance, scaled per axis by the window side so
    it reaches 0 on the window boundary; negative values clamp to 0.

    ``weighted`` (H, W, C), ``weight`` (H, W) and ``plain`` (H, W, C) are
    float64 accumulators; ``coverage`` (H, W) int32 counts contributing
    windows.  ``pixels`` is the (h, w, C) float64 window content placed at
    ``(top, left)``.
    """
    h, w, _ = pixels.shape
    dr = np.abs(np.arange(top, top + h) - cy).astype(np.float64)
    dc = np.abs(np.arange(left, left + w) - cx).astype(np.float64)
    ay = (2.0 * dr) / h
    ax = (2.0 * dc) / w
    wgt = 1.0 - np.maximum(ay[:, None], ax[None, :])
    np.maximum(wgt, 0.0, out=wgt)

    ys = slice(top, top + h)
    xs = slice(left, left + w)
    weighted[ys, xs] += wgt[:, :, None] * pixels
    weight[ys, xs] += wgt
    plain[ys, xs] += pixels
    coverage[ys, xs] += 1
