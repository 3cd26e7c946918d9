"""Training loop for the discrepancy model.

Single logical worker, deterministic batch order taken from the epoch plan,
Adam with a reduce-on-plateau learning rate, checkpoint kept at the best
validation loss.  Checkpoints are plain pickles of numpy arrays plus the
configs and seed (format-versioned), which makes them byte-stable across
runs and independent of the torch serialization format.
"""

from __future__ import annotations

import csv
import pickle
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import torch

from .model import DiscrepancyModel, ModelConfig, build_model, weighted_bce

CHECKPOINT_FORMAT_VERSION = 1


@dataclass
class TrainConfig:
    epochs: int = 65
    lr: float = 1e-4
    plateau_patience: int = 5
    plateau_factor: float = 0.1
    pos_weight: float = 20.0
    batch_size: int = 4
    crop: tuple[int, int] = (384, 768)  # (h, w)
    seed: int = 0

    def __post_init__(self):
        if min(self.epochs, self.batch_size, self.plateau_patience) < 1:
            raise ValueError("epochs, batch_size and plateau_patience must be >= 1")
        if self.lr <= 0 or self.pos_weight <= 0:
            raise ValueError("lr and pos_weight must be positive")
        if not 0.0 < self.plateau_factor < 1.0:
            raise ValueError("plateau_factor must be in (0, 1)")
        self.crop = tuple(self.crop)

    def to_dict(self) -> dict:
        return {"epochs": self.epochs, "lr": self.lr,
                "plateau_patience": self.plateau_patience,
                "plateau_factor": self.plateau_factor,
                "pos_weight": self.pos_weight, "batch_size": self.batch_size,
                "crop": list(self.crop), "seed": self.seed}

    @classmethod
    def from_dict(cls, d: dict) -> "TrainConfig":
        return cls(epochs=d["epochs"], lr=d["lr"],
                   plateau_patience=d["plateau_patience"],
                   plateau_factor=d["plateau_factor"],
                   pos_weight=d["pos_weight"], batch_size=d["batch_size"],
                   crop=tuple(d["crop"]), seed=d["seed"])


class PlateauScheduler:
    """Multiply the learning rate by ``factor`` after ``patience``
    consecutive epochs without strict validation-loss improvement."""

    def __init__(self, optimizer, patience: int, factor: float):
        self.optimizer = optimizer
        self.patience = patience
        self.factor = factor
        self.best = float("inf")
        self.bad_epochs = 0

    @property
    def lr(self) -> float:
        return self.optimizer.param_groups[0]["lr"]

    def step(self, val_loss: float) -> bool:
        """Record one epoch's validation loss; True if the lr was reduced."""
        if val_loss < self.best:
            self.best = val_loss
            self.bad_epochs = 0
            return False
        self.bad_epochs += 1
        if self.bad_epochs >= self.patience:
            for group in self.optimizer.param_groups:
                group["lr"] *= self.factor
            self.bad_epochs = 0
            return True
        return False


def save_checkpoint(path, model: DiscrepancyModel, tcfg: TrainConfig,
                    epoch: int, val_loss: float) -> None:
    payload = {
        "format_version": CHECKPOINT_FORMAT_VERSION,
        "model_config": model.cfg.to_dict(),
        "train_config": tcfg.to_dict(),
        "seed": tcfg.seed,
        "epoch": epoch,
        "val_loss": val_loss,
        "state": {k: v.detach().cpu().numpy().copy()
                  for k, v in model.state_dict().items()},
    }
    with open(path, "wb") as f:
        pickle.dump(payload, f, protocol=4)


def load_checkpoint(path) -> tuple[DiscrepancyModel, dict]:
    with open(path, "rb") as f:
        payload = pickle.load(f)
    version = payload.get("format_version")
    if version != CHECKPOINT_FORMAT_VERSION:
        raise ValueError(f"unsupported checkpoint format version {version!r}")
    model = build_model(ModelConfig.from_dict(payload["model_config"]))
    state = {k: torch.from_numpy(np.asarray(v)) for k, v in payload["state"].items()}
    model.load_state_dict(state)
    model.eval()
    return model, payload


def write_history(path, rows: list[dict]) -> None:
    with open(path, "w", newline="") as f:
        writer = csv.DictWriter(f, fieldnames=["epoch", "train_loss", "val_loss", "lr"])
        writer.writeheader()
        for row in rows:
            writer.writerow({"epoch": row["epoch"],
                             "train_loss": f"{row['train_loss']:.17g}",
                             "val_loss": f"{row['val_loss']:.17g}",
                             "lr": f"{row['lr']:.17g}"})


def _batch_loss(model: DiscrepancyModel, batch: dict, pos_weight: float) -> torch.Tensor:
    pred = model(batch["original"], batch["inpainted"])
    return weighted_bce(pred, batch["labels"], pos_weight=pos_weight, valid=batch["roi"])


def train(model: DiscrepancyModel, source, tcfg: TrainConfig, out_dir,
          log=None) -> dict:
    """Run the optimization.

    ``source`` must provide ``epoch_batches(epoch) -> iterable`` and
    ``val_batches() -> iterable`` of dicts with keys ``original`` and
    ``inpainted`` ((B, 3, h, w) float tensors), ``labels`` ((B, h, w) with
    0/1/255) and ``roi`` ((B, h, w) bool).  Batches must arrive in schedule
    order; everything else about determinism follows from the seed.

    Returns a summary dict; the best-validation checkpoint and the history
    CSV land in ``out_dir``.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    checkpoint_path = out_dir / "checkpoint.pkl"
    history_path = out_dir / "history.csv"

    torch.manual_seed(tcfg.seed)
    optimizer = torch.optim.Adam(model.parameters(), lr=tcfg.lr)
    scheduler = PlateauScheduler(optimizer, tcfg.plateau_patience, tcfg.plateau_factor)

    history: list[dict] = []
    best_val = float("inf")
    best_epoch = -1
    for epoch in range(1, tcfg.epochs + 1):
        model.train()
        losses = []
        for batch_idx, batch in enumerate(source.epoch_batches(epoch)):
            optimizer.zero_grad()
            loss = _batch_loss(model, batch, tcfg.pos_weight)
            if not torch.isfinite(loss):
                raise RuntimeError(
                    f"non-finite loss at epoch {epoch}, batch {batch_idx}")
            loss.backward()
            optimizer.step()
            losses.append(float(loss.detach()))

        model.eval()
        val_losses = []
        with torch.no_grad():
            for batch in source.val_batches():
                val_losses.append(float(_batch_loss(model, batch, tcfg.pos_weight)))
        train_loss = float(np.mean(losses)) if losses else 0.0
        val_loss = float(np.mean(val_losses)) if val_losses else train_loss

        if val_loss < best_val:
            best_val = val_loss
            best_epoch = epoch
            save_checkpoint(checkpoint_path, model, tcfg, epoch, val_loss)

        lr_before = scheduler.lr
        scheduler.step(val_loss)
        history.append({"epoch": epoch, "train_loss": train_loss,
                        "val_loss": val_loss, "lr": lr_before})
        write_history(history_path, history)
        if log:
            log(f"epoch {epoch}/{tcfg.epochs} train {train_loss:.4f} "
                f"val {val_loss:.4f} lr {lr_before:.2e}")

    return {"best_epoch": best_epoch, "best_val_loss": best_val,
            "history": history, "checkpoint": checkpoint_path,
            "history_csv": history_path}
