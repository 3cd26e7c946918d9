"""Procedural toy road scenes for desk-scale training and tests.

Artifact plumbing, not a dataset reproduction: flat or striped road bands
with lane markings (which diffusion inpainting smears, giving the
discrepancy model realistic false-positive bait), geometric obstacles with
saturated colors, and a simulated segmentation map.  Everything is a pure
function of its seed.
"""

from __future__ import annotations

import numpy as np

from .synth import ObjectCutout, paste_obstacles

TOY_SHAPE = (128, 256)  # (H, W)

# toy semantic vocabulary
CLS_BACKGROUND = 0
CLS_ROAD = 1
CLS_UNKNOWN = 2


def _shape_mask(rng: np.random.Generator, size: int) -> np.ndarray:
    kind = rng.integers(3)
    yy, xx = np.mgrid[0:size, 0:size]
    if kind == 0:  # ellipse
        ry = rng.uniform(0.3, 0.5) * size
        rx = rng.uniform(0.3, 0.5) * size
        mask = ((yy - size / 2) / ry) ** 2 + ((xx - size / 2) / rx) ** 2 <= 1.0
    elif kind == 1:  # rectangle
        mh = int(rng.integers(size // 2, size))
        mw = int(rng.integers(size // 2, size))
        mask = (yy < mh) & (xx < mw)
    else:  # triangle
        mask = xx >= np.abs(2 * (yy - size / 2))
    return mask


def toy_cutout_bank(seed: int, count: int = 40) -> list[ObjectCutout]:
    """Bank of solid-colored geometric obstacles sized 8..26 px."""
    rng = np.random.default_rng(seed)
    bank = []
    while len(bank) < count:
        size = int(rng.integers(8, 27))
        mask = _shape_mask(rng, size)
        if mask.sum() < 12:
            continue
        color = rng.uniform(0.0, 1.0, 3)
        # keep colors away from road grays
        color[int(rng.integers(3))] = rng.uniform(0.75, 1.0)
        shade = 1.0 - 0.25 * (np.mgrid[0:size, 0:size][0] / size)
        rgb = np.clip(color[None, None, :] * shade[:, :, None], 0, 1)
        rows, cols = np.nonzero(mask)
        top, bottom = rows.min(), rows.max() + 1
        left, right = cols.min(), cols.max() + 1
        bank.append(ObjectCutout(
            rgb=rgb[top:bottom, left:right],
            alpha=mask[top:bottom, left:right],
            source_class="toy",
            bbox_extent=(int(right - left), int(bottom - top)),
            area=int(mask.sum()),
        ))
    return bank


def toy_clean_frame(seed: int, shape: tuple[int, int] = TOY_SHAPE) -> dict:
    """A clean road scene: image, drivable-area ROI and semantic map."""
    rng = np.random.default_rng(seed)
    h, w = shape
    horizon = int(rng.integers(h // 5, h // 3))

    image = np.zeros((h, w, 3), dtype=np.float64)
    # sky and roadside
    image[:horizon] = np.array([0.55, 0.65, 0.8]) + rng.normal(0, 0.01, (horizon, w, 3))
    side = rng.normal(0, 0.02, (h - horizon, w, 3)) + np.array([0.25, 0.45, 0.2])
    image[horizon:] = side

    # road band with a gently wavy upper edge
    ys = np.arange(h)[:, None]
    edge = horizon + 4 + 3 * np.sin(np.arange(w) / rng.uniform(20, 40))[None, :]
    roi = ys >= edge
    base = rng.uniform(0.38, 0.52)
    grad = np.linspace(0.0, rng.uniform(0.03, 0.08), h)[:, None]
    road = base + grad + rng.normal(0, 0.008, (h, w))
    road_rgb = np.repeat(road[:, :, None], 3, axis=2)

    # dashed lane markings: high-contrast structure the inpainter smears
    marks = np.zeros((h, w), dtype=bool)
    for _ in range(int(rng.integers(2, 4))):
        row = int(rng.integers(horizon + 12, h - 6))
        thickness = int(rng.integers(2, 4))
        period = int(rng.integers(24, 40))
        duty = int(period * rng.uniform(0.4, 0.6))
        phase = int(rng.integers(period))
        cols = (np.arange(w) + phase) % period < duty
        marks[row:row + thickness, cols] = True
    road_rgb[marks] = rng.uniform(0.85, 0.95)

    image = np.where(roi[:, :, None], road_rgb, image)
    np.clip(image, 0, 1, out=image)

    sem = np.full((h, w), CLS_BACKGROUND, dtype=np.uint8)
    sem[roi] = CLS_ROAD
    return {"image": image, "roi": roi, "sem": sem}


def toy_eval_frame(seed: int, cutouts: list[ObjectCutout],
                   shape: tuple[int, int] = TOY_SHAPE,
                   count_range: tuple[int, int] = (1, 3),
                   segmenter_miss_prob: float = 0.5) -> dict:
    """A scene with planted obstacles and ground-truth labels.

    The semantic map simulates an imperfect segmenter: each obstacle is
    marked as non-road only with probability ``1 - segmenter_miss_prob``.
    """
    frame = toy_clean_frame(seed, shape)
    rng = np.random.default_rng(np.random.SeedSequence([seed, 1]))
    image, mask, info = paste_obstacles(frame["image"], frame["roi"], cutouts, rng,
                                        count_range=count_range)
    sem = frame["sem"].copy()
    from scipy import ndimage

    labels_cc, count = ndimage.label(mask)
    for comp in range(1, count + 1):
        if rng.random() >= segmenter_miss_prob:
            sem[labels_cc == comp] = CLS_UNKNOWN
    labels = mask.astype(np.uint8)
    return {"image": image, "roi": frame["roi"], "sem": sem,
            "labels": labels, "paste_info": info}
