"""ROI-restricted pixel-level anomaly metrics.

Average Precision and FPR at a target TPR over a threshold sweep of the
distinct score values, with ties grouped (detection rule: score >= t, so
pixels sharing a score enter and leave the positive set together).

Score 0 is special: heatmaps are defined to be exactly 0 where the detector
does not operate, so "no detection" and "lowest detection score" collide
there.  Lowering the threshold to 0 is treated as a genuine operating point
only when background pixels actually attain a 0 score (mass ties at zero).
If the TPR target is first met at threshold 0 and the zero-score tie group
contains no negatives — obstacle pixels sitting outside the detector's
scored region — the target is reported as unreachable with FPR fixed at 1.0.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

DEFAULT_TPR_TARGET = 0.95
IGNORE_LABEL = 255


def threshold_sweep(scores: np.ndarray, labels: np.ndarray):
    """Cumulative TP/FP counts at every distinct score, descending.

    Returns ``(thresholds, tp, fp)`` where ``tp[k]`` / ``fp[k]`` count the
    pixels with score >= ``thresholds[k]``.
    """
    scores = np.asarray(scores, dtype=np.float64).ravel()
    labels = np.asarray(labels).ravel().astype(np.int64)
    if scores.size != labels.size:
        raise ValueError("scores and labels differ in length")
    if scores.size == 0:
        raise ValueError("empty score set")
    order = np.argsort(-scores, kind="stable")
    s = scores[order]
    y = labels[order]
    last = np.append(np.nonzero(np.diff(s) != 0)[0], s.size - 1)
    tp = np.cumsum(y)[last]
    fp = np.cumsum(1 - y)[last]
    return s[last], tp, fp


def average_precision(scores, labels) -> float | None:
    """Area under the precision-recall curve with step interpolation.

    Sum over the descending threshold sweep of (recall step) x (precision at
    that threshold).  Returns ``None`` when there are no positive pixels
    (undefined); 1.0 when there are no negatives.
    """
    _, tp, fp = threshold_sweep(scores, labels)
    n_pos = int(tp[-1])
    if n_pos == 0:
        return None
    if int(fp[-1]) == 0:
        return 1.0
    precision = tp / (tp + fp)
    recall = tp / n_pos
    return float(np.sum(np.diff(recall, prepend=0.0) * precision))


def fpr_at_tpr(scores, labels, tpr_target: float = DEFAULT_TPR_TARGET):
    """False-positive rate at the lowest-FPR operating point with
    TPR >= ``tpr_target``.

    Returns ``(fpr, reachable)``.  Unreachable targets (see the module
    docstring for the zero-score convention) yield ``(1.0, False)``.  With
    no positives the point is undefined: ``(None, False)``; with no
    negatives there is nothing to false-alarm on: ``(0.0, True)``.
    """
    thresholds, tp, fp = threshold_sweep(scores, labels)
    n_pos = int(tp[-1])
    n_neg = int(fp[-1])
    if n_pos == 0:
        return None, False
    if n_neg == 0:
        return 0.0, True
    tpr = tp / n_pos
    hit = np.nonzero(tpr >= tpr_target)[0]
    if hit.size == 0:
        return 1.0, False
    k = int(hit[0])
    group_fp = int(fp[k]) - (int(fp[k - 1]) if k > 0 else 0)
    if thresholds[k] <= 0.0 and group_fp == 0:
        return 1.0, False
    return float(fp[k] / n_neg), True


@dataclass
class EvalFrame:
    """One frame to score: heatmap, ground-truth labels (0 background,
    1 obstacle, 255 ignore) and the evaluation ROI mask."""

    frame_id: str
    heatmap: np.ndarray
    labels: np.ndarray
    roi: np.ndarray

    def valid_pixels(self):
        """Scores and binary labels of pixels inside the ROI and not ignored."""
        heatmap = np.asarray(self.heatmap, dtype=np.float64)
        labels = np.asarray(self.labels)
        roi = np.asarray(self.roi).astype(bool)
        if not heatmap.shape == labels.shape == roi.shape:
            raise ValueError(f"frame {self.frame_id}: heatmap/labels/roi shapes differ")
        valid = roi & (labels != IGNORE_LABEL)
        return heatmap[valid], labels[valid].astype(np.int64)


@dataclass
class MetricReport:
    """Metrics for one frame or a pooled pixel set."""

    ap: float | None
    fpr95: float | None
    tpr95_reachable: bool
    tpr_target: float
    positive_fraction: float
    n_valid: int
    n_positive: int
    n_negative: int
    flags: list[str]
    pr_curve: np.ndarray  # columns: recall, precision, threshold
    roc_curve: np.ndarray  # columns: fpr, tpr, threshold
    frames: dict[str, "MetricReport"] = field(default_factory=dict)

    def to_dict(self, with_frames: bool = True) -> dict:
        d = {
            "ap": self.ap,
            "fpr95": self.fpr95,
            "tpr95_reachable": self.tpr95_reachable,
            "tpr_target": self.tpr_target,
            "positive_fraction": self.positive_fraction,
            "n_valid": self.n_valid,
            "n_positive": self.n_positive,
            "n_negative": self.n_negative,
            "flags": list(self.flags),
        }
        if with_frames and self.frames:
            d["frames"] = {fid: rep.to_dict(with_frames=False)
                           for fid, rep in sorted(self.frames.items())}
        return d


def evaluate_pixels(scores, labels, tpr_target: float = DEFAULT_TPR_TARGET) -> MetricReport:
    """Compute the full report for one flat pixel set."""
    scores = np.asarray(scores, dtype=np.float64).ravel()
    labels = np.asarray(labels).ravel().astype(np.int64)
    flags: list[str] = []
    empty = np.zeros((0, 3))
    if scores.size == 0:
        flags.append("no_valid_pixels")
        return MetricReport(None, None, False, tpr_target, 0.0, 0, 0, 0,
                            flags, empty, empty)

    thresholds, tp, fp = threshold_sweep(scores, labels)
    n_pos = int(tp[-1])
    n_neg = int(fp[-1])
    n_valid = n_pos + n_neg

    ap = average_precision(scores, labels)
    fpr95, reachable = fpr_at_tpr(scores, labels, tpr_target)
    if n_pos == 0:
        flags.append("no_positives")
    if n_neg == 0:
        flags.append("no_negatives")
    if n_pos and n_neg and not reachable:
        flags.append("tpr_target_unreachable")

    if n_pos and n_neg:
        pr = np.column_stack([tp / n_pos, tp / (tp + fp), thresholds])
        roc = np.column_stack([fp / n_neg, tp / n_pos, thresholds])
    else:
        pr = roc = empty
    return MetricReport(ap, fpr95, reachable, tpr_target, n_pos / n_valid,
                        n_valid, n_pos, n_neg, flags, pr, roc)


def pool_frames(frames: list[EvalFrame], tpr_target: float = DEFAULT_TPR_TARGET) -> MetricReport:
    """Dataset-level report: pixels pooled across frames, metrics computed
    once on the pooled set, per-frame reports attached as diagnostics."""
    if not frames:
        raise ValueError("pool_frames needs at least one frame")
    per_frame = {}
    scores_parts = []
    labels_parts = []
    for frame in frames:
        s, y = frame.valid_pixels()
        per_frame[frame.frame_id] = evaluate_pixels(s, y, tpr_target)
        scores_parts.append(s)
        labels_parts.append(y)
    pooled = evaluate_pixels(np.concatenate(scores_parts),
                             np.concatenate(labels_parts), tpr_target)
    pooled.frames = per_frame
    return pooled


def _downsample_indices(n: int, limit: int, keep: list[int]) -> np.ndarray:
    if n <= limit:
        return np.arange(n)
    base = np.linspace(0, n - 1, limit - len(keep)).round().astype(np.int64)
    return np.unique(np.concatenate([base, np.asarray(keep, dtype=np.int64)]))


def _curve_rows(curve: np.ndarray, limit: int, keep: list[int]):
    idx = _downsample_indices(curve.shape[0], limit, keep)
    for row in curve[idx]:
        yield [f"{float(v):.17g}" for v in row]


def export_curves(report: MetricReport, out_dir, stem: str = "pooled",
                  max_points: int = 2000) -> dict[str, Path]:
    """Write PR and ROC point lists as CSV plus a rendered plot.

    Curves longer than ``max_points`` are downsampled, always preserving the
    endpoints and the operating point where TPR first meets the target.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = {}

    keep: list[int] = []
    roc = report.roc_curve
    if roc.shape[0]:
        keep = [0, roc.shape[0] - 1]
        hit = np.nonzero(roc[:, 1] >= report.tpr_target)[0]
        if hit.size:
            keep.append(int(hit[0]))

    for name, curve, header in (("pr", report.pr_curve, ["recall", "precision", "threshold"]),
                                ("roc", report.roc_curve, ["fpr", "tpr", "threshold"])):
        path = out_dir / f"{stem}_{name}_curve.csv"
        with open(path, "w", newline="") as f:
            writer = csv.writer(f)
            writer.writerow(header)
            writer.writerows(_curve_rows(curve, max_points, keep))
        paths[name] = path

    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, (ax_pr, ax_roc) = plt.subplots(1, 2, figsize=(10, 4))
    if report.pr_curve.shape[0]:
        ax_pr.plot(report.pr_curve[:, 0], report.pr_curve[:, 1])
    ax_pr.set_xlabel("recall")
    ax_pr.set_ylabel("precision")
    ax_pr.set_xlim(0, 1)
    ax_pr.set_ylim(0, 1.05)
    ap_txt = "n/a" if report.ap is None else f"{report.ap:.4f}"
    ax_pr.set_title(f"PR (AP={ap_txt})")
    if report.roc_curve.shape[0]:
        ax_roc.plot(report.roc_curve[:, 0], report.roc_curve[:, 1])
    ax_roc.axhline(report.tpr_target, color="gray", lw=0.8, ls="--")
    ax_roc.set_xlabel("FPR")
    ax_roc.set_ylabel("TPR")
    ax_roc.set_xlim(0, 1)
    ax_roc.set_ylim(0, 1.05)
    fpr_txt = "n/a" if report.fpr95 is None else f"{report.fpr95:.4f}"
    ax_roc.set_title(f"ROC (FPR@{report.tpr_target:.2f}={fpr_txt})")
    fig.tight_layout()
    plot_path = out_dir / f"{stem}_curves.png"
    fig.savefig(plot_path, dpi=100)
    plt.close(fig)
    paths["plot"] = plot_path
    return paths


def write_report_json(report: MetricReport, path) -> None:
    with open(path, "w") as f:
        json.dump(report.to_dict(), f, indent=2, sort_keys=True)
        f.write("\n")


def write_report_csv(report: MetricReport, path) -> None:
    """Flat per-frame table with the pooled row first."""
    fields = ["frame_id", "ap", "fpr95", "tpr95_reachable", "positive_fraction",
              "n_valid", "n_positive", "n_negative", "flags"]

    def row(fid: str, rep: MetricReport) -> list:
        return [fid,
                "" if rep.ap is None else f"{rep.ap:.17g}",
                "" if rep.fpr95 is None else f"{rep.fpr95:.17g}",
                int(rep.tpr95_reachable),
                f"{rep.positive_fraction:.17g}",
                rep.n_valid, rep.n_positive, rep.n_negative,
                ";".join(rep.flags)]

    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(fields)
        writer.writerow(row("POOLED", report))
        for fid in sorted(report.frames):
            writer.writerow(row(fid, report.frames[fid]))
