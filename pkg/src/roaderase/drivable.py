"""Drivable-area ROI from a semantic class-id map.

The ROI is the union of the configured road classes plus every connected
component of other classes that is fully enclosed by them (4-connectivity;
a component is enclosed when it cannot reach the image border through
non-road pixels), minus an optional ego-vehicle mask.
"""

from __future__ import annotations

import numpy as np
from scipy import ndimage

# 4-connectivity structuring element for component analysis
_CROSS = np.array([[0, 1, 0], [1, 1, 1], [0, 1, 0]], dtype=bool)


def _road_mask(sem: np.ndarray, road_ids) -> np.ndarray:
    sem = np.asarray(sem)
    if sem.ndim != 2:
        raise ValueError("semantic map must be 2-d")
    road_ids = list(road_ids)
    if not road_ids:
        raise ValueError("road_ids must be nonempty")
    return np.isin(sem, road_ids)


def enclosed_components(road: np.ndarray) -> np.ndarray:
    """Non-road pixels with no 4-connected path to the image border.

    Labels the non-road pixels and drops every component that touches the
    border; whatever remains is sealed inside the road region.
    """
    non_road = ~road
    labels, count = ndimage.label(non_road, structure=_CROSS)
    if count == 0:
        return np.zeros_like(road)
    border_ids = np.unique(np.concatenate([
        labels[0, :], labels[-1, :], labels[:, 0], labels[:, -1]]))
    open_to_border = np.zeros(count + 1, dtype=bool)
    open_to_border[border_ids] = True
    open_to_border[0] = True  # background label: road pixels
    return ~open_to_border[labels]


def derive_roi(sem: np.ndarray, road_ids, ego_mask: np.ndarray | None = None) -> np.ndarray:
    """Drivable-area mask: road classes, plus enclosed non-road islands,
    minus the ego vehicle.  A map without road pixels yields an empty mask.
    """
    road = _road_mask(sem, road_ids)
    roi = road | enclosed_components(road)
    if ego_mask is not None:
        ego = np.asarray(ego_mask).astype(bool)
        if ego.shape != roi.shape:
            raise ValueError("ego mask dimensions do not match the semantic map")
        roi &= ~ego
    return roi


def segmentation_alone_score(sem: np.ndarray, road_ids) -> np.ndarray:
    """Baseline heatmap scoring 1.0 on the enclosed non-road islands.

    Everything the segmentation already explains (the road classes) scores
    0; only non-road groups sealed inside the road light up.  The support is
    by construction a subset of ``derive_roi``'s output.
    """
    road = _road_mask(sem, road_ids)
    return enclosed_components(road).astype(np.float32)
