"""Semi-synthetic training data: object cutouts pasted onto the drivable
area, plus the high-frequency augmentation (blur and two-scale noise) that
keeps the discrepancy model from overreacting to rough road textures.

All randomness flows through explicit generators seeded from the schedule,
so regenerating a dataset reproduces it byte for byte.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

# extraction filters: reject cutouts too large to be a plausible distant
# obstacle or too small to survive augmentation
SIZE_MIN = 10
SIZE_MAX = 150
AREA_MIN = 100
AREA_MAX = 5000

DEFAULT_BLUR_SIGMA = 1.0
DEFAULT_NOISE_SCALES = ((0.04, 1), (0.08, 16))  # (amplitude, cell size)
DEFAULT_COUNT_RANGE = (1, 6)
PLACEMENT_ATTEMPTS = 50


@dataclass
class ObjectCutout:
    """A pastable object: RGB fragment plus its binary support."""

    rgb: np.ndarray  # (h, w, 3) float in [0, 1]
    alpha: np.ndarray  # (h, w) bool
    source_class: int | str
    bbox_extent: tuple[int, int]  # (w, h)
    area: int

    def mirrored(self) -> "ObjectCutout":
        return ObjectCutout(self.rgb[:, ::-1].copy(), self.alpha[:, ::-1].copy(),
                            self.source_class, self.bbox_extent, self.area)


@dataclass
class ExtractionReport:
    accepted: int = 0
    rejected_extent: int = 0
    rejected_area: int = 0
    warnings: list[str] = field(default_factory=list)


def _cutout_from_mask(image: np.ndarray, mask: np.ndarray, source_class,
                      report: ExtractionReport) -> ObjectCutout | None:
    rows, cols = np.nonzero(mask)
    if rows.size == 0:
        return None
    top, bottom = rows.min(), rows.max() + 1
    left, right = cols.min(), cols.max() + 1
    w, h = right - left, bottom - top
    if not SIZE_MIN <= max(w, h) <= SIZE_MAX:
        report.rejected_extent += 1
        return None
    area = int(rows.size)
    if not AREA_MIN <= area <= AREA_MAX:
        report.rejected_area += 1
        return None
    report.accepted += 1
    return ObjectCutout(
        rgb=np.asarray(image, dtype=np.float64)[top:bottom, left:right].copy(),
        alpha=mask[top:bottom, left:right].copy(),
        source_class=source_class,
        bbox_extent=(int(w), int(h)),
        area=area,
    )


def extract_cutouts(sem: np.ndarray, image: np.ndarray,
                    instance_classes: dict[int, np.ndarray | None] | None = None,
                    component_classes: list[int] | None = None,
                    ) -> tuple[list[ObjectCutout], ExtractionReport]:
    """Extract filtered object cutouts from one labelled frame.

    ``instance_classes`` maps a class id to its instance-id map (one cutout
    per instance); a missing map degrades that class to connected-component
    extraction with a warning.  ``component_classes`` are classes without
    instance labels (one cutout per 4-connected component).
    """
    sem = np.asarray(sem)
    report = ExtractionReport()
    cutouts: list[ObjectCutout] = []
    structure = np.array([[0, 1, 0], [1, 1, 1], [0, 1, 0]], dtype=bool)

    def from_components(class_id):
        class_mask = sem == class_id
        labels, count = ndimage.label(class_mask, structure=structure)
        for comp in range(1, count + 1):
            cut = _cutout_from_mask(image, labels == comp, class_id, report)
            if cut is not None:
                cutouts.append(cut)

    for class_id, inst in (instance_classes or {}).items():
        if inst is None:
            report.warnings.append(
                f"class {class_id}: no instance map, falling back to connected components")
            from_components(class_id)
            continue
        inst = np.asarray(inst)
        class_mask = sem == class_id
        for inst_id in np.unique(inst[class_mask]):
            cut = _cutout_from_mask(image, class_mask & (inst == inst_id), class_id, report)
            if cut is not None:
                cutouts.append(cut)

    for class_id in component_classes or []:
        from_components(class_id)
    return cutouts, report


def paste_obstacles(image: np.ndarray, roi: np.ndarray, cutouts: list[ObjectCutout],
                    rng: np.random.Generator,
                    count_range: tuple[int, int] = DEFAULT_COUNT_RANGE,
                    max_attempts: int = PLACEMENT_ATTEMPTS,
                    mirror_prob: float = 0.5,
                    ) -> tuple[np.ndarray, np.ndarray, dict]:
    """Composite randomly chosen cutouts onto the ROI.

    Placements are rejection-sampled uniformly over the origin grid and
    accepted only when the cutout's support lies fully inside the ROI, so
    accepted positions are uniform over the valid ones.  A slot that finds
    no valid position within ``max_attempts`` is dropped and flagged.

    Returns ``(image_with_obstacles, obstacle_mask, info)``.
    """
    if not cutouts:
        raise ValueError("cutouts must be nonempty")
    image = np.asarray(image, dtype=np.float64).copy()
    roi = np.asarray(roi).astype(bool)
    h, w = roi.shape
    mask = np.zeros((h, w), dtype=bool)

    wanted = int(rng.integers(count_range[0], count_range[1] + 1))
    placed = 0
    for _ in range(wanted):
        cut = cutouts[int(rng.integers(len(cutouts)))]
        if rng.random() < mirror_prob:
            cut = cut.mirrored()
        ch, cw = cut.alpha.shape
        if ch > h or cw > w:
            continue
        for _ in range(max_attempts):
            top = int(rng.integers(0, h - ch + 1))
            left = int(rng.integers(0, w - cw + 1))
            region = roi[top:top + ch, left:left + cw]
            if region[cut.alpha].all():
                patch = image[top:top + ch, left:left + cw]
                patch[cut.alpha] = cut.rgb[cut.alpha]
                mask[top:top + ch, left:left + cw] |= cut.alpha
                placed += 1
                break

    info = {"requested": wanted, "placed": placed, "short": placed < wanted}
    return image, mask, info


def _bilinear_cell_noise(rng: np.random.Generator, shape: tuple[int, int],
                         amplitude: float, cell: int) -> np.ndarray:
    """Zero-mean noise drawn on a coarse cell grid, bilinearly upsampled."""
    h, w = shape
    gh = h // cell + 2
    gw = w // cell + 2
    grid = rng.normal(0.0, amplitude, (gh, gw))
    ys = np.arange(h) / cell
    xs = np.arange(w) / cell
    y0 = ys.astype(np.int64)
    x0 = xs.astype(np.int64)
    fy = (ys - y0)[:, None]
    fx = (xs - x0)[None, :]
    tl = grid[y0[:, None], x0[None, :]]
    tr = grid[y0[:, None], x0[None, :] + 1]
    bl = grid[y0[:, None] + 1, x0[None, :]]
    br = grid[y0[:, None] + 1, x0[None, :] + 1]
    top = tl + (tr - tl) * fx
    bottom = bl + (br - bl) * fx
    return top + (bottom - top) * fy


def blur_rgb(image: np.ndarray, sigma: float) -> np.ndarray:
    """Gaussian blur of an (H, W, 3) image, channels untouched."""
    if sigma <= 0:
        return np.asarray(image, dtype=np.float64).copy()
    return ndimage.gaussian_filter(np.asarray(image, dtype=np.float64),
                                   sigma=(sigma, sigma, 0))


def augment_high_freq(image: np.ndarray, rng: np.random.Generator,
                      blur_sigma: float = DEFAULT_BLUR_SIGMA,
                      noise_scales=DEFAULT_NOISE_SCALES) -> np.ndarray:
    """Blur, then add zero-mean noise at a fine and a coarse scale.

    The noise is achromatic (shared across channels).  ``blur_sigma=0`` and
    zero amplitudes make this the identity; the result is clamped to [0, 1].
    """
    out = blur_rgb(image, blur_sigma)
    h, w = out.shape[:2]
    for amplitude, cell in noise_scales:
        if amplitude <= 0:
            continue
        if cell <= 1:
            noise = rng.normal(0.0, amplitude, (h, w))
        else:
            noise = _bilinear_cell_noise(rng, (h, w), amplitude, int(cell))
        out += noise[:, :, None]
    np.clip(out, 0.0, 1.0, out=out)
    return out


@dataclass(frozen=True)
class ScheduleEntry:
    frame_id: str
    crop_top: int
    crop_left: int
    seed: int
    padded: bool = False

    def to_dict(self) -> dict:
        return {"frame_id": self.frame_id, "crop_top": self.crop_top,
                "crop_left": self.crop_left, "seed": self.seed, "padded": self.padded}

    @classmethod
    def from_dict(cls, d: dict) -> "ScheduleEntry":
        return cls(d["frame_id"], d["crop_top"], d["crop_left"], d["seed"],
                   d.get("padded", False))


def _valid_crop_origins(roi: np.ndarray, crop_h: int, crop_w: int) -> tuple[np.ndarray, np.ndarray]:
    """Origins whose crop window contains at least one ROI pixel."""
    h, w = roi.shape
    integral = np.zeros((h + 1, w + 1), dtype=np.int64)
    integral[1:, 1:] = roi.astype(np.int64).cumsum(0).cumsum(1)
    oh = h - crop_h + 1
    ow = w - crop_w + 1
    counts = (integral[crop_h:crop_h + oh, crop_w:crop_w + ow]
              - integral[:oh, crop_w:crop_w + ow]
              - integral[crop_h:crop_h + oh, :ow]
              + integral[:oh, :ow])
    return np.nonzero(counts > 0)


def build_epoch_plan(frames: list[tuple[str, np.ndarray]],
                     crop_size: tuple[int, int] = (384, 768),
                     epochs: int = 65, seed: int = 0) -> list[list[ScheduleEntry]]:
    """Pre-defined crop schedule: for every epoch, an ordered list of
    (frame id, crop origin, sample seed).

    The whole schedule is a pure function of the seed, so every model
    variant trains on the same sample sequence.  Crop origins are sampled
    among positions overlapping the frame's ROI; frames smaller than the
    crop are scheduled at the origin and flagged for reflection padding.
    """
    if not frames:
        raise ValueError("frames must be nonempty")
    crop_h, crop_w = crop_size
    rng = np.random.default_rng(seed)

    origin_cache = {}
    for frame_id, roi in frames:
        roi = np.asarray(roi).astype(bool)
        if roi.shape[0] < crop_h or roi.shape[1] < crop_w:
            origin_cache[frame_id] = None  # needs padding
        else:
            rows, cols = _valid_crop_origins(roi, crop_h, crop_w)
            if rows.size == 0:
                # ROI empty: fall back to the centre crop
                rows = np.array([(roi.shape[0] - crop_h) // 2])
                cols = np.array([(roi.shape[1] - crop_w) // 2])
            origin_cache[frame_id] = (rows, cols)

    schedule: list[list[ScheduleEntry]] = []
    frame_ids = [fid for fid, _ in frames]
    for _ in range(epochs):
        order = rng.permutation(len(frame_ids))
        entries = []
        for idx in order:
            fid = frame_ids[idx]
            sample_seed = int(rng.integers(0, 2**63 - 1))
            origins = origin_cache[fid]
            if origins is None:
                entries.append(ScheduleEntry(fid, 0, 0, sample_seed, padded=True))
            else:
                pick = int(rng.integers(origins[0].size))
                entries.append(ScheduleEntry(fid, int(origins[0][pick]),
                                             int(origins[1][pick]), sample_seed))
        schedule.append(entries)
    return schedule


def reflect_pad_to(image: np.ndarray, min_h: int, min_w: int) -> np.ndarray:
    """Reflection-pad the trailing spatial edges up to the requested size."""
    pad_h = max(0, min_h - image.shape[0])
    pad_w = max(0, min_w - image.shape[1])
    if pad_h == 0 and pad_w == 0:
        return image
    pad = [(0, pad_h), (0, pad_w)] + [(0, 0)] * (image.ndim - 2)
    return np.pad(image, pad, mode="reflect")
