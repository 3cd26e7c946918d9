"""Sliding-window placement over the drivable area.

Windows are planned on a regular grid whose stride is derived from the
patch side and the relative overlap; the last row/column is clamped to the
image edge so border pixels stay covered.  Windows whose inner box misses
the region of interest entirely are dropped.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

DEFAULT_PATCH_SIDE = 200
DEFAULT_OVERLAP = 0.7


@dataclass(frozen=True)
class Box:
    """Axis-aligned pixel rectangle, half-open: rows [top, top+height)."""

    top: int
    left: int
    height: int
    width: int

    @property
    def bottom(self) -> int:
        return self.top + self.height

    @property
    def right(self) -> int:
        return self.left + self.width

    @property
    def slices(self) -> tuple[slice, slice]:
        return slice(self.top, self.bottom), slice(self.left, self.right)

    def contains(self, row: int, col: int) -> bool:
        return self.top <= row < self.bottom and self.left <= col < self.right


@dataclass(frozen=True)
class PatchWindow:
    """One sliding-window placement.

    ``inpaint_box`` is the region that gets erased and refilled;
    ``context_box`` is the concentric surrounding region (double side,
    clamped to the image) shown to the inpainter as visible context.
    ``center`` is the integer pixel nearest the geometric centre of the
    inpaint box.
    """

    center: tuple[int, int]
    inpaint_box: Box
    context_box: Box

    @property
    def side(self) -> tuple[int, int]:
        return self.inpaint_box.height, self.inpaint_box.width


def tile_starts(extent: int, side: int, stride: int) -> list[int]:
    """Grid start offsets along one axis, final tile clamped to the edge."""
    if side >= extent:
        return [0]
    starts = list(range(0, extent - side + 1, stride))
    if starts[-1] != extent - side:
        starts.append(extent - side)
    return starts


def make_window(top: int, left: int, side_y: int, side_x: int,
                image_shape: tuple[int, int]) -> PatchWindow:
    """Build the window anchored at (top, left) with its clamped context box."""
    h, w = image_shape
    inpaint = Box(top, left, side_y, side_x)
    cy = top + side_y // 2
    cx = left + side_x // 2
    ctop = max(0, top - side_y // 2)
    cleft = max(0, left - side_x // 2)
    cbottom = min(h, top + side_y + side_y // 2)
    cright = min(w, left + side_x + side_x // 2)
    context = Box(ctop, cleft, cbottom - ctop, cright - cleft)
    return PatchWindow(center=(cy, cx), inpaint_box=inpaint, context_box=context)


def plan_windows(roi: np.ndarray, patch_side: int = DEFAULT_PATCH_SIDE,
                 overlap: float = DEFAULT_OVERLAP) -> list[PatchWindow]:
    """Plan the sliding-window grid over the ROI.

    Returns row-major windows whose inpaint box intersects the ROI.  With an
    empty ROI the plan is empty; a patch side exceeding the image collapses
    to a single window clamped to the image.

    Raises ``ValueError`` for an out-of-range overlap or a degenerate patch
    side.
    """
    if not 0 <= overlap < 1:
        raise ValueError(f"overlap must be in [0, 1), got {overlap}")
    if patch_side < 2:
        raise ValueError(f"patch_side must be >= 2, got {patch_side}")
    roi = np.asarray(roi).astype(bool)
    if roi.ndim != 2:
        raise ValueError("roi must be a 2-d mask")
    if not roi.any():
        return []

    h, w = roi.shape
    side_y = min(patch_side, h)
    side_x = min(patch_side, w)
    # round-half-up to the nearest integer pixel
    stride = max(1, int(patch_side * (1.0 - overlap) + 0.5))

    windows = []
    for top in tile_starts(h, side_y, stride):
        for left in tile_starts(w, side_x, stride):
            if roi[top:top + side_y, left:left + side_x].any():
                windows.append(make_window(top, left, side_y, side_x, (h, w)))
    return windows
