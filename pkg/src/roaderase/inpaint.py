"""Pluggable inpainters.

An inpainter is any callable ``(fragment, hole) -> fragment`` where
``fragment`` is an (H, W, 3) float array in [0, 1] and ``hole`` is an (H, W)
mask of pixels to synthesize; visible pixels must come back unchanged.  The
baseline here is a deterministic diffusion fill; external pretrained models
plug in through ``CommandInpainter`` without code changes.
"""

from __future__ import annotations

import math
import pickle
import subprocess
import tempfile
from pathlib import Path

import numpy as np

from . import kernels

DEFAULT_TOL = 1e-4
DEFAULT_MAX_ITER = 2000


def relaxation_factor(hole: np.ndarray) -> float:
    """Over-relaxation factor tuned to the hole's bounding-box size."""
    rows, cols = np.nonzero(hole)
    if rows.size == 0:
        return 1.0
    n = max(int(rows.max() - rows.min() + 1), int(cols.max() - cols.min() + 1))
    return 2.0 / (1.0 + math.sin(math.pi / (n + 1)))


class DiffusionInpainter:
    """Baseline fill: iterative neighbour-averaging diffusion from the hole
    boundary, run to convergence (max per-sweep update below ``tol``) or to
    the sweep cap.  Deterministic; over-relaxation only accelerates the
    approach to the same harmonic fixed point.

    A hole with no visible pixels left in the fragment cannot diffuse from
    anywhere and is filled with the global fragment mean instead.
    """

    name = "diffusion"

    def __init__(self, tol: float = DEFAULT_TOL, max_iter: int = DEFAULT_MAX_ITER):
        if tol <= 0 or max_iter < 1:
            raise ValueError("tol must be positive and max_iter >= 1")
        self.tol = float(tol)
        self.max_iter = int(max_iter)

    def __call__(self, fragment: np.ndarray, hole: np.ndarray) -> np.ndarray:
        fragment = np.ascontiguousarray(fragment, dtype=np.float64)
        hole = np.ascontiguousarray(np.asarray(hole) != 0)
        if fragment.ndim != 3 or fragment.shape[2] != 3:
            raise ValueError("fragment must be (H, W, 3)")
        if hole.shape != fragment.shape[:2]:
            raise ValueError("hole mask does not match the fragment")
        if not hole.any():
            return fragment

        out = fragment.copy()
        visible = ~hole
        if not visible.any():
            out[:] = fragment.reshape(-1, 3).mean(axis=0)
            return out

        out[hole] = fragment[visible].mean(axis=0)
        omega = relaxation_factor(hole)
        kernels.sor_fill(out, hole.view(np.uint8), omega, self.tol, self.max_iter)
        np.clip(out, 0.0, 1.0, out=out)
        out[visible] = fragment[visible]
        return out


class CommandInpainter:
    """Adapter for an external inpainter invoked as a subprocess.

    The fragment and hole are pickled to a temporary file, the command is
    run with the input and output paths appended, and the output file must
    contain the pickled filled fragment.  This keeps pretrained generative
    models out of process and out of this package's dependencies.
    """

    name = "command"

    def __init__(self, command: list[str]):
        if not command:
            raise ValueError("command must be a non-empty argument list")
        self.command = list(command)

    def __call__(self, fragment: np.ndarray, hole: np.ndarray) -> np.ndarray:
        with tempfile.TemporaryDirectory(prefix="roaderase-inpaint-") as tmp:
            in_path = Path(tmp) / "request.pkl"
            out_path = Path(tmp) / "response.pkl"
            with open(in_path, "wb") as f:
                pickle.dump({"fragment": np.asarray(fragment, dtype=np.float64),
                             "hole": np.asarray(hole) != 0}, f, protocol=4)
            subprocess.run(self.command + [str(in_path), str(out_path)], check=True)
            with open(out_path, "rb") as f:
                filled = pickle.load(f)
        filled = np.asarray(filled, dtype=np.float64)
        if filled.shape != np.asarray(fragment).shape:
            raise ValueError(f"external inpainter returned shape {filled.shape}")
        return filled


def make_inpainter(kind: str, *, tol: float = DEFAULT_TOL,
                   max_iter: int = DEFAULT_MAX_ITER,
                   command: list[str] | None = None):
    """Build an inpainter from configuration."""
    if kind == "diffusion":
        return DiffusionInpainter(tol=tol, max_iter=max_iter)
    if kind == "command":
        if not command:
            raise ValueError("inpainter kind 'command' requires a command list")
        return CommandInpainter(command)
    raise ValueError(f"unknown inpainter kind {kind!r}")
