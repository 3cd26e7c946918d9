import numpy as np
import pytest
import torch

from roaderase.model import ModelConfig, build_model
from roaderase.train import (
    PlateauScheduler,
    TrainConfig,
    load_checkpoint,
    save_checkpoint,
    train,
)


class ArraySource:
    """In-memory sample source with a fixed batch order."""

    def __init__(self, samples, batch_size=4, nan_epoch=None):
        self.samples = samples
        self.batch_size = batch_size
        self.nan_epoch = nan_epoch

    def _batches(self, samples, poison=False):
        for i in range(0, len(samples), self.batch_size):
            chunk = samples[i:i + self.batch_size]
            batch = {
                "original": torch.stack([s["original"] for s in chunk]),
                "inpainted": torch.stack([s["inpainted"] for s in chunk]),
                "labels": torch.stack([s["labels"] for s in chunk]),
                "roi": torch.stack([s["roi"] for s in chunk]),
            }
            if poison:
                batch["original"] = batch["original"] * float("nan")
            yield batch

    def epoch_batches(self, epoch):
        return self._batches(self.samples, poison=(epoch == self.nan_epoch))

    def val_batches(self):
        return self._batches(self.samples[:2])


def _toy_samples(n=8, size=16, seed=0):
    # learnable task: the original stream carries a bright planted square
    # that the inpainted stream lacks; labels mark the square
    g = torch.Generator().manual_seed(seed)
    samples = []
    for _ in range(n):
        base = torch.rand(3, size, size, generator=g) * 0.4 + 0.3
        original = base.clone()
        labels = torch.zeros(size, size, dtype=torch.long)
        top = int(torch.randint(0, size - 6, (1,), generator=g))
        left = int(torch.randint(0, size - 6, (1,), generator=g))
        original[:, top:top + 6, left:left + 6] = torch.rand(3, 1, 1, generator=g) * 0.2 + 0.8
        labels[top:top + 6, left:left + 6] = 1
        samples.append({
            "original": original,
            "inpainted": base,
            "labels": labels,
            "roi": torch.ones(size, size, dtype=torch.bool),
        })
    return samples


def _tcfg(**kw):
    defaults = dict(epochs=2, lr=1e-3, plateau_patience=5, plateau_factor=0.1,
                    pos_weight=5.0, batch_size=4, crop=(16, 16), seed=0)
    defaults.update(kw)
    return TrainConfig(**defaults)


class TestPlateauScheduler:
    def test_drops_exactly_after_patience_bad_epochs(self):
        model = build_model(ModelConfig(backbone="small"))
        opt = torch.optim.Adam(model.parameters(), lr=1e-4)
        sched = PlateauScheduler(opt, patience=5, factor=0.1)
        reduced_at = []
        for epoch in range(1, 9):
            if sched.step(1.0):  # constant validation loss
                reduced_at.append(epoch)
        assert reduced_at[0] == 6
        assert sched.lr == pytest.approx(1e-5)

    def test_improvement_resets_counter(self):
        model = build_model(ModelConfig(backbone="small"))
        opt = torch.optim.Adam(model.parameters(), lr=1e-4)
        sched = PlateauScheduler(opt, patience=2, factor=0.5)
        assert not sched.step(1.0)
        assert not sched.step(1.0)
        assert not sched.step(0.5)  # improvement: counter back to zero
        assert not sched.step(0.6)
        assert sched.step(0.6)
        assert sched.lr == pytest.approx(5e-5)


class TestTrainLoop:
    def test_two_epoch_bookkeeping(self, tmp_path):
        torch.manual_seed(0)
        model = build_model(ModelConfig(backbone="small"))
        result = train(model, ArraySource(_toy_samples()), _tcfg(), tmp_path)
        assert len(result["history"]) == 2
        assert result["checkpoint"].exists()
        assert result["history_csv"].exists()
        lines = result["history_csv"].read_text().strip().splitlines()
        assert lines[0] == "epoch,train_loss,val_loss,lr"
        assert len(lines) == 3

    def test_nan_loss_aborts_with_batch_id(self, tmp_path):
        torch.manual_seed(0)
        model = build_model(ModelConfig(backbone="small"))
        source = ArraySource(_toy_samples(), nan_epoch=2)
        with pytest.raises(RuntimeError, match="epoch 2, batch 0"):
            train(model, source, _tcfg(epochs=3), tmp_path)

    def test_training_reduces_loss(self, tmp_path):
        torch.manual_seed(0)
        model = build_model(ModelConfig(backbone="small"))
        source = ArraySource(_toy_samples(), batch_size=2)
        result = train(model, source, _tcfg(epochs=10, lr=3e-3), tmp_path)
        hist = result["history"]
        assert hist[-1]["train_loss"] < 0.5 * hist[0]["train_loss"]

    def test_deterministic_across_runs(self, tmp_path):
        outs = []
        for run in ("a", "b"):
            torch.manual_seed(123)
            model = build_model(ModelConfig(backbone="small"))
            train(model, ArraySource(_toy_samples()), _tcfg(epochs=3), tmp_path / run)
            outs.append(((tmp_path / run / "checkpoint.pkl").read_bytes(),
                         (tmp_path / run / "history.csv").read_bytes()))
        assert outs[0] == outs[1]


class TestCheckpoint:
    def test_round_trip(self, tmp_path):
        torch.manual_seed(1)
        model = build_model(ModelConfig(backbone="small"))
        tcfg = _tcfg()
        path = tmp_path / "ckpt.pkl"
        save_checkpoint(path, model, tcfg, epoch=3, val_loss=0.25)
        restored, payload = load_checkpoint(path)
        assert payload["format_version"] == 1
        assert payload["epoch"] == 3
        assert payload["seed"] == tcfg.seed
        assert payload["train_config"] == tcfg.to_dict()
        x = torch.rand(1, 3, 32, 32, generator=torch.Generator().manual_seed(5))
        with torch.no_grad():
            assert torch.equal(model(x, x), restored(x, x))

    def test_rejects_unknown_format(self, tmp_path):
        import pickle

        path = tmp_path / "bad.pkl"
        with open(path, "wb") as f:
            pickle.dump({"format_version": 999}, f)
        with pytest.raises(ValueError, match="format version"):
            load_checkpoint(path)

    def test_save_is_byte_stable(self, tmp_path):
        torch.manual_seed(2)
        model = build_model(ModelConfig(backbone="small"))
        a = tmp_path / "a.pkl"
        b = tmp_path / "b.pkl"
        save_checkpoint(a, model, _tcfg(), 1, 0.5)
        save_checkpoint(b, model, _tcfg(), 1, 0.5)
        assert a.read_bytes() == b.read_bytes()


def test_train_config_validation():
    with pytest.raises(ValueError):
        TrainConfig(epochs=0)
    with pytest.raises(ValueError):
        TrainConfig(plateau_factor=1.5)
    with pytest.raises(ValueError):
        TrainConfig(lr=-1)
    cfg = TrainConfig()
    assert TrainConfig.from_dict(cfg.to_dict()) == cfg
