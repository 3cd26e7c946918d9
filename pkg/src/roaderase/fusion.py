"""Fusion of overlapping per-window inpaintings.

Each window contributes to a pixel with a weight that is 1 at the window
centre and decays linearly to 0 on the window boundary with the Chebyshev
(max-coordinate) distance; the fused value is the weight-normalized average
over all contributing windows.  Accumulation runs in a fixed window order so
results are reproducible bit for bit.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import kernels
from .windows import PatchWindow, plan_windows


@dataclass(frozen=True)
class InpaintResult:
    """One window's refilled content, covering exactly its inpaint box."""

    window: PatchWindow
    pixels: np.ndarray  # (h, w, 3) float64 in [0, 1]


class InpaintError(RuntimeError):
    """An inpainter failed on one window."""

    def __init__(self, window: PatchWindow, cause: Exception):
        box = window.inpaint_box
        super().__init__(
            f"inpainter failed on window at (top={box.top}, left={box.left}, "
            f"h={box.height}, w={box.width}): {cause}"
        )
        self.window = window
        self.__cause__ = cause


def fusion_weight(pixel: tuple[int, int], window: PatchWindow) -> float:
    """Unnormalized contribution weight of ``window`` at ``pixel`` (row, col).

    1 at the window centre, 0 on the inpaint-box boundary, clamped to >= 0;
    pixels outside the inpaint box get 0 (the window does not contribute).
    """
    row, col = pixel
    if not window.inpaint_box.contains(row, col):
        return 0.0
    cy, cx = window.center
    side_y, side_x = window.side
    ay = (2.0 * abs(row - cy)) / side_y
    ax = (2.0 * abs(col - cx)) / side_x
    return max(0.0, 1.0 - max(ay, ax))


def fuse(results: list[InpaintResult], image_shape: tuple[int, int],
         fallback: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Blend per-window inpaintings into one image.

    Covered pixels receive the weighted average of the contributing windows;
    pixels covered only with zero total weight (possible on clamped box
    boundaries) fall back to the unweighted mean of their contributors;
    uncovered pixels are copied from ``fallback``.

    Returns ``(fused, coverage)`` with coverage counting contributing
    windows per pixel.  The input order of ``results`` does not matter:
    accumulation always runs in (top, left) window order.
    """
    h, w = image_shape
    fallback = np.asarray(fallback, dtype=np.float64)
    if fallback.shape[:2] != (h, w):
        raise ValueError("fallback image does not match image_shape")

    weighted = np.zeros((h, w, 3), dtype=np.float64)
    weight = np.zeros((h, w), dtype=np.float64)
    plain = np.zeros((h, w, 3), dtype=np.float64)
    coverage = np.zeros((h, w), dtype=np.int32)

    ordered = sorted(
        results,
        key=lambda r: (r.window.inpaint_box.top, r.window.inpaint_box.left,
                       r.window.inpaint_box.height, r.window.inpaint_box.width),
    )
    for res in ordered:
        box = res.window.inpaint_box
        if box.bottom > h or box.right > w or box.top < 0 or box.left < 0:
            raise ValueError(f"inpaint box {box} exceeds image shape {(h, w)}")
        pixels = np.ascontiguousarray(res.pixels, dtype=np.float64)
        if pixels.shape != (box.height, box.width, 3):
            raise ValueError("result pixels do not match the window's inpaint box")
        cy, cx = res.window.center
        kernels.accumulate_window(weighted, weight, plain, coverage, pixels,
                                  box.top, box.left, cy, cx)

    fused = fallback.copy()
    covered = coverage > 0
    positive = weight > 0
    np.divide(weighted, weight[:, :, None], out=fused, where=positive[:, :, None])
    degenerate = covered & ~positive
    if degenerate.any():
        fused[degenerate] = plain[degenerate] / coverage[degenerate, None]
    return fused, coverage


def inpaint_roi(image: np.ndarray, roi: np.ndarray, inpainter,
                patch_side: int = 200, overlap: float = 0.7,
                jobs: int = 1) -> np.ndarray:
    """Erase and refill the ROI of ``image`` window by window.

    Plans the sliding-window grid, masks each window's inpaint box
    intersected with the ROI for ``inpainter`` (a callable taking a context
    fragment and a hole mask and returning the filled fragment), then fuses
    the per-window results.  Pixels outside the ROI are returned unchanged.

    Window calls are independent; ``jobs > 1`` runs them in a thread pool.
    Fusion itself is a sequential reduction, so the result does not depend
    on ``jobs``.
    """
    image = np.asarray(image, dtype=np.float64)
    roi = np.asarray(roi).astype(bool)
    if image.shape[:2] != roi.shape:
        raise ValueError("image and roi spatial dimensions differ")

    windows = plan_windows(roi, patch_side=patch_side, overlap=overlap)
    if not windows:
        return image.copy()

    def run_window(window: PatchWindow) -> InpaintResult:
        ctx = window.context_box
        fragment = image[ctx.slices].copy()
        hole = np.zeros(fragment.shape[:2], dtype=np.uint8)
        box = window.inpaint_box
        ys = slice(box.top - ctx.top, box.bottom - ctx.top)
        xs = slice(box.left - ctx.left, box.right - ctx.left)
        hole[ys, xs] = roi[box.slices]
        try:
            filled = inpainter(fragment, hole)
        except Exception as exc:
            raise InpaintError(window, exc) from exc
        filled = np.asarray(filled, dtype=np.float64)
        if filled.shape != fragment.shape:
            raise InpaintError(
                window, ValueError(f"inpainter returned shape {filled.shape}, "
                                   f"expected {fragment.shape}"))
        return InpaintResult(window=window, pixels=filled[ys, xs])

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(run_window, windows))
    else:
        results = [run_window(win) for win in windows]

    fused, _ = fuse(results, roi.shape, fallback=image)
    fused[~roi] = image[~roi]
    return fused
