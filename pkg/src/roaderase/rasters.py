"""Raster I/O.

Images are 8-bit RGB PNGs; label/ROI masks are 8-bit single-channel PNGs
with the 0/1/255 convention; heatmaps are 16-bit grayscale PNGs storing
score = value / 65535; semantic maps are 8- or 16-bit single-channel
rasters with a JSON class-vocabulary sidecar.  Writers are deterministic:
identical arrays produce identical bytes.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np
from PIL import Image

HEATMAP_SCALE = 65535


def load_image(path) -> np.ndarray:
    """8-bit RGB raster to (H, W, 3) float64 in [0, 1]."""
    with Image.open(path) as img:
        arr = np.asarray(img.convert("RGB"), dtype=np.float64)
    return arr / 255.0


def save_image(path, image: np.ndarray) -> None:
    arr = np.clip(np.asarray(image, dtype=np.float64), 0.0, 1.0)
    data = (arr * 255.0).round().astype(np.uint8)
    Image.fromarray(data, mode="RGB").save(path, format="PNG")


def load_mask(path) -> np.ndarray:
    """Single-channel 8-bit raster, returned as uint8 (0/1/255)."""
    with Image.open(path) as img:
        arr = np.asarray(img.convert("L"), dtype=np.uint8)
    return arr


def save_mask(path, mask: np.ndarray) -> None:
    arr = np.asarray(mask)
    if arr.dtype == bool:
        arr = arr.astype(np.uint8)
    Image.fromarray(arr.astype(np.uint8), mode="L").save(path, format="PNG")


def load_heatmap(path) -> np.ndarray:
    """16-bit grayscale raster to float32 scores in [0, 1]."""
    with Image.open(path) as img:
        arr = np.asarray(img, dtype=np.float64)
    return (arr / HEATMAP_SCALE).astype(np.float32)


def save_heatmap(path, heatmap: np.ndarray) -> None:
    arr = np.clip(np.asarray(heatmap, dtype=np.float64), 0.0, 1.0)
    data = (arr * HEATMAP_SCALE).round().astype(np.uint16)
    Image.fromarray(data).save(path, format="PNG")


def load_semantic(path) -> np.ndarray:
    with Image.open(path) as img:
        arr = np.asarray(img)
    if arr.ndim != 2:
        raise ValueError(f"{path}: semantic map must be single-channel")
    return arr.astype(np.int64)


def save_semantic(path, sem: np.ndarray) -> None:
    sem = np.asarray(sem)
    if sem.max(initial=0) > 65535 or sem.min(initial=0) < 0:
        raise ValueError("class ids must fit 16-bit unsigned")
    if sem.max(initial=0) > 255:
        Image.fromarray(sem.astype(np.uint16)).save(path, format="PNG")
    else:
        Image.fromarray(sem.astype(np.uint8), mode="L").save(path, format="PNG")


def load_vocab(path) -> dict[str, int]:
    """Class-vocabulary sidecar: name -> class id."""
    with open(path) as f:
        data = json.load(f)
    return {str(k): int(v) for k, v in data["classes"].items()}


def save_vocab(path, classes: dict[str, int]) -> None:
    with open(path, "w") as f:
        json.dump({"version": 1, "classes": dict(sorted(classes.items()))},
                  f, indent=2, sort_keys=True)
        f.write("\n")


def write_json(path, payload: dict) -> None:
    with open(path, "w") as f:
        json.dump(payload, f, indent=2, sort_keys=True)
        f.write("\n")


def read_json(path) -> dict:
    with open(path) as f:
        return json.load(f)


def frame_ids(directory) -> list[str]:
    """Sorted frame ids discovered from the PNGs in a directory."""
    directory = Path(directory)
    if not directory.is_dir():
        return []
    return sorted(p.stem for p in directory.glob("*.png"))
