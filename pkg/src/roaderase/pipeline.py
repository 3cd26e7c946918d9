"""End-to-end orchestration: dataset generation, training, inference and
evaluation, plus the ablation-variant switchboard.

Dataset tree written by ``generate_data`` (toy source)::

    out/
      manifest.json                  seeds, splits, epoch schedule
      train/ (and val/)
        images/<id>.png              pasted obstacles, blur+noise applied
        inpainted/<id>.png           sliding-window inpainting of the ROI
        masks/<id>.png               0 background, 1 obstacle, 255 ignore
        roi/<id>.png
      eval/
        images/ labels/ roi/ sem/    held-out frames with ground truth
        vocab.json

Inference never reads label masks; evaluation always restricts the valid
pixel set to the ground-truth ROI, even when detection ran on a predicted
one (that mismatch is exactly what the unreachable-TPR diagnostic reports).
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np
import torch

from . import __version__, rasters
from .config import (
    MODEL_VARIANTS,
    VARIANTS,
    ConfigError,
    PipelineConfig,
    config_hash,
    ensure_exists,
)
from .drivable import derive_roi, segmentation_alone_score
from .fusion import inpaint_roi
from .inpaint import make_inpainter
from .metrics import EvalFrame, export_curves, pool_frames, write_report_csv, write_report_json
from .model import build_model
from .synth import (
    ScheduleEntry,
    augment_high_freq,
    blur_rgb,
    build_epoch_plan,
    paste_obstacles,
    reflect_pad_to,
)
from .toyroads import CLS_BACKGROUND, CLS_ROAD, CLS_UNKNOWN, toy_clean_frame, toy_cutout_bank, toy_eval_frame
from .train import TrainConfig, load_checkpoint, train

TOY_VOCAB = {"background": CLS_BACKGROUND, "road": CLS_ROAD, "unknown": CLS_UNKNOWN}


def derive_seed(*parts) -> int:
    """Stable sub-seed from a tuple of ints/strings."""
    encoded = [p if isinstance(p, int) else int.from_bytes(str(p).encode(), "big")
               for p in parts]
    return int(np.random.SeedSequence(encoded).generate_state(1, np.uint64)[0])


def augment_params(cfg: PipelineConfig, variant: str | None = None):
    """Blur sigma and noise scales for the given variant's training data."""
    variant = variant or cfg.variant
    aug = cfg.augment
    blur = 0.0 if variant == "no_blur" else aug.blur_sigma
    if variant == "no_noise_aug":
        noise = ((0.0, 1), (0.0, aug.noise_coarse_cell))
    else:
        noise = ((aug.noise_fine_amplitude, 1),
                 (aug.noise_coarse_amplitude, aug.noise_coarse_cell))
    return blur, noise


def _build_inpainter(cfg: PipelineConfig):
    return make_inpainter(cfg.inpainter.kind, tol=cfg.inpainter.tol,
                          max_iter=cfg.inpainter.max_iter,
                          command=cfg.inpainter.command)


# --------------------------------------------------------------- generate

def generate_data(cfg: PipelineConfig, out_dir, force: bool = False, log=None) -> dict:
    """Build the semi-synthetic training set (toy source).

    Per training frame: paste random cutouts onto the drivable area, inpaint
    the ROI of the pasted image, apply the variant's blur+noise to the image
    stream only, and write the triplet.  Also writes held-out eval frames
    with ground-truth labels and the deterministic epoch schedule.
    """
    if cfg.data.source != "toy":
        raise ConfigError("generate-data currently supports the toy source; "
                          "disk datasets are prepared externally")
    out_dir = Path(out_dir)
    manifest_path = out_dir / "manifest.json"
    if manifest_path.exists() and not force:
        raise FileExistsError(f"{manifest_path} exists; pass --force to overwrite")

    shape = (cfg.data.frame_height, cfg.data.frame_width)
    bank = toy_cutout_bank(derive_seed(cfg.seed, "bank"), count=cfg.data.cutout_bank)
    inpainter = _build_inpainter(cfg)
    blur, noise = augment_params(cfg)
    count_range = (cfg.data.obstacle_count_min, cfg.data.obstacle_count_max)

    splits = {"train": cfg.data.train_frames, "val": cfg.data.val_frames}
    manifest_splits: dict[str, list[str]] = {}
    rois = []
    for split, count in splits.items():
        split_dir = out_dir / split
        for sub in ("images", "inpainted", "masks", "roi"):
            (split_dir / sub).mkdir(parents=True, exist_ok=True)
        ids = []
        for i in range(count):
            frame_id = f"{split}{i:04d}"
            clean = toy_clean_frame(derive_seed(cfg.seed, split, i, "frame"), shape)
            paste_rng = np.random.default_rng(derive_seed(cfg.seed, split, i, "paste"))
            pasted, mask, _ = paste_obstacles(clean["image"], clean["roi"], bank,
                                              paste_rng, count_range=count_range)
            inpainted = inpaint_roi(pasted, clean["roi"], inpainter,
                                    patch_side=cfg.windows.patch_side,
                                    overlap=cfg.windows.overlap, jobs=cfg.jobs)
            aug_rng = np.random.default_rng(derive_seed(cfg.seed, split, i, "augment"))
            image_aug = augment_high_freq(pasted, aug_rng, blur_sigma=blur,
                                          noise_scales=noise)
            rasters.save_image(split_dir / "images" / f"{frame_id}.png", image_aug)
            rasters.save_image(split_dir / "inpainted" / f"{frame_id}.png", inpainted)
            rasters.save_mask(split_dir / "masks" / f"{frame_id}.png", mask.astype(np.uint8))
            rasters.save_mask(split_dir / "roi" / f"{frame_id}.png", clean["roi"])
            ids.append(frame_id)
            if split == "train":
                rois.append((frame_id, clean["roi"]))
            if log:
                log(f"generated {split} frame {frame_id}")
        manifest_splits[split] = ids

    eval_ids = []
    if cfg.data.eval_frames:
        eval_dir = out_dir / "eval"
        for sub in ("images", "labels", "roi", "sem"):
            (eval_dir / sub).mkdir(parents=True, exist_ok=True)
        for i in range(cfg.data.eval_frames):
            frame_id = f"eval{i:04d}"
            frame = toy_eval_frame(derive_seed(cfg.seed, "eval", i, "frame"), bank,
                                   shape, count_range=(1, 3))
            rasters.save_image(eval_dir / "images" / f"{frame_id}.png", frame["image"])
            rasters.save_mask(eval_dir / "labels" / f"{frame_id}.png", frame["labels"])
            rasters.save_mask(eval_dir / "roi" / f"{frame_id}.png", frame["roi"])
            rasters.save_semantic(eval_dir / "sem" / f"{frame_id}.png", frame["sem"])
            eval_ids.append(frame_id)
            if log:
                log(f"generated eval frame {frame_id}")
        rasters.save_vocab(eval_dir / "vocab.json", TOY_VOCAB)

    crop = tuple(cfg.train.crop)
    schedule = build_epoch_plan(rois, crop_size=crop, epochs=cfg.train.epochs,
                                seed=derive_seed(cfg.seed, "schedule")) if rois else []
    manifest = {
        "version": 1,
        "seed": cfg.seed,
        "variant": cfg.variant,
        "config_hash": config_hash(cfg),
        "code_version": __version__,
        "frame_shape": list(shape),
        "crop": list(crop),
        "splits": manifest_splits,
        "eval": eval_ids,
        "augment": {"blur_sigma": blur, "noise_scales": [list(p) for p in noise]},
        "schedule": [[e.to_dict() for e in epoch] for epoch in schedule],
    }
    rasters.write_json(manifest_path, manifest)
    return manifest


# ----------------------------------------------------------------- train

class DiskScheduleSource:
    """Feeds training batches from a generated dataset in schedule order."""

    def __init__(self, data_dir, manifest: dict, tcfg: TrainConfig,
                 two_copies: bool = False):
        self.data_dir = Path(data_dir)
        self.manifest = manifest
        self.tcfg = tcfg
        self.two_copies = two_copies
        self.crop = tuple(manifest.get("crop", tcfg.crop))
        self.schedule = [[ScheduleEntry.from_dict(e) for e in epoch]
                         for epoch in manifest["schedule"]]
        if len(self.schedule) < tcfg.epochs:
            raise ConfigError(
                f"schedule covers {len(self.schedule)} epochs, need {tcfg.epochs}")
        self._cache: dict[tuple[str, str], dict] = {}

    def _load(self, split: str, frame_id: str) -> dict:
        key = (split, frame_id)
        if key not in self._cache:
            base = self.data_dir / split
            self._cache[key] = {
                "image": rasters.load_image(base / "images" / f"{frame_id}.png"),
                "inpainted": rasters.load_image(base / "inpainted" / f"{frame_id}.png"),
                "labels": rasters.load_mask(base / "masks" / f"{frame_id}.png"),
                "roi": rasters.load_mask(base / "roi" / f"{frame_id}.png") != 0,
            }
        return self._cache[key]

    def _sample(self, split: str, entry: ScheduleEntry) -> dict:
        data = self._load(split, entry.frame_id)
        ch, cw = self.crop
        ys = slice(entry.crop_top, entry.crop_top + ch)
        xs = slice(entry.crop_left, entry.crop_left + cw)

        def crop(arr):
            if entry.padded:
                arr = reflect_pad_to(arr, entry.crop_top + ch, entry.crop_left + cw)
            return arr[ys, xs]

        return {
            "original": crop(data["image"]),
            "inpainted": crop(data["inpainted"]),
            "labels": crop(data["labels"]),
            "roi": crop(data["roi"]),
        }

    def _batches(self, samples):
        bs = self.tcfg.batch_size
        for i in range(0, len(samples), bs):
            chunk = samples[i:i + bs]
            original = torch.from_numpy(
                np.stack([s["original"].transpose(2, 0, 1) for s in chunk])).float()
            inpainted = torch.from_numpy(
                np.stack([s["inpainted"].transpose(2, 0, 1) for s in chunk])).float()
            if self.two_copies:
                inpainted = original.clone()
            yield {
                "original": original,
                "inpainted": inpainted,
                "labels": torch.from_numpy(
                    np.stack([s["labels"] for s in chunk]).astype(np.int64)),
                "roi": torch.from_numpy(np.stack([s["roi"] for s in chunk])),
            }

    def epoch_batches(self, epoch: int):
        entries = self.schedule[epoch - 1]
        return self._batches([self._sample("train", e) for e in entries])

    def val_batches(self):
        val_ids = self.manifest["splits"].get("val", [])
        samples = [self._sample("val", ScheduleEntry(fid, 0, 0, 0,
                                padded=self._needs_padding(fid)))
                   for fid in val_ids]
        return self._batches(samples)

    def _needs_padding(self, frame_id: str) -> bool:
        h, w = self.manifest["frame_shape"]
        return h < self.crop[0] or w < self.crop[1]


def run_training(cfg: PipelineConfig, data_dir, out_dir, log=None) -> dict:
    data_dir = Path(ensure_exists(data_dir, "dataset directory"))
    manifest = rasters.read_json(ensure_exists(data_dir / "manifest.json", "manifest"))
    tcfg = cfg.train
    torch.manual_seed(tcfg.seed)
    model = build_model(cfg.model)
    source = DiskScheduleSource(data_dir, manifest, tcfg,
                                two_copies=(cfg.variant == "no_inpainting"))
    return train(model, source, tcfg, out_dir, log=log)


# ----------------------------------------------------------------- infer

def _load_roi(cfg: PipelineConfig, frames_dir: Path, frame_id: str) -> np.ndarray:
    if cfg.data.roi_source == "ground-truth":
        return rasters.load_mask(frames_dir / "roi" / f"{frame_id}.png") != 0
    sem = rasters.load_semantic(frames_dir / "sem" / f"{frame_id}.png")
    ego_path = frames_dir / "ego" / f"{frame_id}.png"
    ego = rasters.load_mask(ego_path) != 0 if ego_path.exists() else None
    return derive_roi(sem, cfg.data.road_ids, ego_mask=ego)


def infer_frames(cfg: PipelineConfig, frames_dir, out_dir, log=None,
                 variant: str | None = None) -> dict:
    """Score frames into 16-bit heatmaps plus JSON sidecars.

    Never reads label masks.  Per-frame failures are recorded and skipped;
    the returned dict lists them so the caller can set the exit status.
    """
    variant = variant or cfg.variant
    if variant not in VARIANTS:
        raise ConfigError(f"unknown variant {variant!r}")
    frames_dir = Path(ensure_exists(frames_dir, "frames directory"))
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    ids = rasters.frame_ids(frames_dir / "images")
    if not ids:
        raise ConfigError(f"no frames found under {frames_dir / 'images'}")

    model = None
    if variant in MODEL_VARIANTS:
        ckpt = cfg.checkpoint_for(variant)
        if not ckpt:
            raise ConfigError(f"variant {variant!r} needs a checkpoint")
        model, _ = load_checkpoint(ensure_exists(ckpt, "checkpoint"))
    inpainter = _build_inpainter(cfg)
    needs_inpainting = variant in ("full", "no_discrepancy", "no_noise_aug", "no_blur")
    blur_sigma = 0.0 if variant == "no_blur" else cfg.augment.blur_sigma

    def score_frame(frame_id: str) -> np.ndarray:
        image = rasters.load_image(frames_dir / "images" / f"{frame_id}.png")
        roi = _load_roi(cfg, frames_dir, frame_id)
        if roi.shape != image.shape[:2]:
            raise ValueError(f"{frame_id}: roi and image dimensions differ")
        if variant == "segmentation_alone":
            sem = rasters.load_semantic(frames_dir / "sem" / f"{frame_id}.png")
            heat = segmentation_alone_score(sem, cfg.data.road_ids)
            heat[~roi] = 0.0
            return heat
        if not roi.any():
            return np.zeros(roi.shape, dtype=np.float32)
        if needs_inpainting:
            inpainted = inpaint_roi(image, roi, inpainter,
                                    patch_side=cfg.windows.patch_side,
                                    overlap=cfg.windows.overlap, jobs=1)
        if variant == "no_discrepancy":
            heat = np.abs(image - inpainted).mean(axis=2).astype(np.float32)
            heat[~roi] = 0.0
            return heat
        blurred = blur_rgb(image, blur_sigma)
        second = blurred if variant == "no_inpainting" else inpainted
        return model.heatmap(blurred, second, roi)

    def run_one(frame_id: str):
        try:
            heat = score_frame(frame_id)
            rasters.save_heatmap(out_dir / f"{frame_id}.png", heat)
            rasters.write_json(out_dir / f"{frame_id}.json", {
                "frame_id": frame_id,
                "roi_source": cfg.data.roi_source,
                "variant": variant,
                "config_hash": config_hash(cfg),
            })
            if log:
                log(f"scored {frame_id}")
            return frame_id, None
        except Exception as exc:  # per-frame isolation
            if log:
                log(f"FAILED {frame_id}: {exc}")
            return frame_id, f"{type(exc).__name__}: {exc}"

    if cfg.jobs > 1:
        with ThreadPoolExecutor(max_workers=cfg.jobs) as pool:
            outcomes = list(pool.map(run_one, ids))
    else:
        outcomes = [run_one(fid) for fid in ids]

    failures = {fid: err for fid, err in outcomes if err is not None}
    run_manifest = {
        "variant": variant,
        "roi_source": cfg.data.roi_source,
        "config_hash": config_hash(cfg),
        "seed": cfg.seed,
        "code_version": __version__,
        "frames": ids,
        "failures": failures,
    }
    rasters.write_json(out_dir / "run_manifest.json", run_manifest)
    return run_manifest


# -------------------------------------------------------------- evaluate

def load_eval_frames(heatmaps_dir, frames_dir) -> list[EvalFrame]:
    """Pair heatmaps with ground-truth labels and ROI masks by frame id."""
    heatmaps_dir = Path(heatmaps_dir)
    frames_dir = Path(frames_dir)
    heat_ids = set(rasters.frame_ids(heatmaps_dir))
    label_ids = set(rasters.frame_ids(frames_dir / "labels"))
    if heat_ids != label_ids:
        missing_labels = sorted(heat_ids - label_ids)
        missing_heat = sorted(label_ids - heat_ids)
        raise ValueError(
            "unmatched frames: "
            f"no labels for {missing_labels or 'none'}, "
            f"no heatmaps for {missing_heat or 'none'}")
    frames = []
    for fid in sorted(heat_ids):
        frames.append(EvalFrame(
            frame_id=fid,
            heatmap=rasters.load_heatmap(heatmaps_dir / f"{fid}.png"),
            labels=rasters.load_mask(frames_dir / "labels" / f"{fid}.png"),
            roi=rasters.load_mask(frames_dir / "roi" / f"{fid}.png") != 0,
        ))
    return frames


def evaluate_frames(cfg: PipelineConfig, heatmaps_dir, frames_dir, out_dir,
                    stem: str = "report", log=None):
    """Pool all frames, write the JSON/CSV reports and sampled curves.

    The valid pixel set always comes from the ground-truth ROI masks in
    ``frames_dir``, regardless of which ROI inference used.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    frames = load_eval_frames(heatmaps_dir, frames_dir)
    report = pool_frames(frames)
    write_report_json(report, out_dir / f"{stem}.json")
    write_report_csv(report, out_dir / f"{stem}.csv")
    export_curves(report, out_dir, stem=stem)
    if log:
        ap = "n/a" if report.ap is None else f"{report.ap:.4f}"
        fpr = "n/a" if report.fpr95 is None else f"{report.fpr95:.4f}"
        log(f"pooled AP {ap}  FPR95 {fpr}  reachable {report.tpr95_reachable}")
    return report


# ---------------------------------------------------------------- ablate

REFERENCE_FOOTNOTE = (
    "Reference scores at full scale (1920x1080 frames, Cityscapes-trained "
    "model, pretrained generative inpainter, all-weather road obstacles): "
    "AP 81.9, FPR95 3.7. Not reproducible at desk scale; listed for context."
)


def run_ablation(cfg: PipelineConfig, frames_dir, out_dir,
                 variants: list[str], log=None) -> list[dict]:
    """Run infer+evaluate per variant on the same frames; emit a table."""
    out_dir = Path(out_dir)
    for variant in variants:  # validate everything before any work
        if variant in MODEL_VARIANTS:
            ckpt = cfg.checkpoint_for(variant)
            if not ckpt or not Path(ckpt).exists():
                raise ConfigError(f"variant {variant!r} is not runnable: "
                                  f"checkpoint {ckpt!r} missing")

    rows = []
    for variant in variants:
        if log:
            log(f"--- variant {variant}")
        heat_dir = out_dir / variant / "heatmaps"
        eval_dir = out_dir / variant / "eval"
        manifest = infer_frames(cfg, frames_dir, heat_dir, log=log, variant=variant)
        if manifest["failures"]:
            raise RuntimeError(f"variant {variant}: frame failures "
                               f"{sorted(manifest['failures'])}")
        report = evaluate_frames(cfg, heat_dir, frames_dir, eval_dir, log=log)
        rows.append({"variant": variant,
                     "ap": report.ap,
                     "fpr95": report.fpr95,
                     "tpr95_reachable": report.tpr95_reachable})

    import csv as _csv

    with open(out_dir / "ablation.csv", "w", newline="") as f:
        writer = _csv.DictWriter(f, fieldnames=["variant", "ap", "fpr95",
                                                "tpr95_reachable"])
        writer.writeheader()
        for row in rows:
            writer.writerow(row)

    lines = [f"{'variant':<20} {'AP':>8} {'FPR95':>8} {'95%TPR':>8}"]
    for row in rows:
        ap = "n/a" if row["ap"] is None else f"{row['ap']:.4f}"
        fpr = "n/a" if row["fpr95"] is None else f"{row['fpr95']:.4f}"
        reach = "yes" if row["tpr95_reachable"] else "NO"
        lines.append(f"{row['variant']:<20} {ap:>8} {fpr:>8} {reach:>8}")
    lines.append("")
    lines.append(REFERENCE_FOOTNOTE)
    text = "\n".join(lines) + "\n"
    (out_dir / "ablation.txt").write_text(text)
    if log:
        log(text)
    return rows
