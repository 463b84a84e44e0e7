"""Training loop with per-epoch frequency-band evaluation and checkpointing."""
from __future__ import annotations

import dataclasses
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional

import numpy as np

from ..autodiff import functional as F
from ..autodiff.nn import manual_seed
from ..autodiff.tensor import Tensor, backward, get_tape
from ..checkpoint import checkpoint_save
from .data import Splits, iterate_batches
from .evaluate import FrequencyEvalSet, eval_frequency
from .optim import SGD, AdamW, CosineSchedule


@dataclass
class TrainRecipe:
    optimizer: str = "sgd"
    base_lr: float = 0.1
    momentum: float = 0.9
    betas: tuple = (0.9, 0.999)
    weight_decay: float = 5e-4
    batch_size: int = 128
    epochs: int = 100
    warmup_epochs: int = 0
    label_smoothing: float = 0.0
    crop_pad: int = 4
    flip: bool = True
    seed: int = 0
    radii: list = field(default_factory=lambda: [6, 12, 18])
    eval_cut: Optional[float] = 10.0
    checkpoint_every: int = 1
    train_subset: Optional[int] = None
    test_subset: Optional[int] = None

    def __post_init__(self):
        self.optimizer = self.optimizer.lower()
        if self.optimizer not in ("sgd", "adamw"):
            raise ValueError(f"optimizer must be sgd or adamw, got {self.optimizer!r}")
        if self.base_lr <= 0 or self.batch_size <= 0 or self.epochs <= 0:
            raise ValueError("base_lr, batch_size and epochs must be positive")
        if self.warmup_epochs < 0 or self.warmup_epochs >= self.epochs and self.warmup_epochs:
            raise ValueError("warmup_epochs must be smaller than epochs")
        self.betas = tuple(self.betas)
        self.radii = [float(r) for r in self.radii]

    @classmethod
    def resnet_cifar(cls, **kw) -> "TrainRecipe":
        """SGD 0.1, momentum 0.9, wd 5e-4, batch 128, cosine, 100 epochs."""
        return cls(**{**dict(optimizer="sgd", base_lr=0.1, momentum=0.9, weight_decay=5e-4, batch_size=128,
                             epochs=100), **kw})

    @classmethod
    def gmnet(cls, **kw) -> "TrainRecipe":
        """AdamW 3e-3, wd 0.03, betas (0.9, 0.999), 5 warmup epochs, label smoothing 0.1."""
        return cls(**{**dict(optimizer="adamw", base_lr=3e-3, weight_decay=0.03, warmup_epochs=5,
                             label_smoothing=0.1, epochs=300), **kw})

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["betas"] = list(self.betas)
        return d


def _num(x: float) -> Optional[float]:
    return None if math.isinf(x) else float(x)


@dataclass
class MetricsRecord:
    epoch: int
    loss: float  # mean training loss of the epoch
    lr: float  # learning rate of the last step
    accuracy: float
    test_loss: float
    band_r_low: list
    band_r_high: list
    band_accuracy: list
    cut_r: Optional[float] = None
    cut_accuracy: Optional[list] = None
    split: str = "test"

    def to_json(self) -> str:
        d = dataclasses.asdict(self)
        d["band_r_low"] = [_num(v) for v in self.band_r_low]
        d["band_r_high"] = [_num(v) for v in self.band_r_high]
        return json.dumps(d, sort_keys=True)


class TrainingDiverged(RuntimeError):
    def __init__(self, epoch: int, step: int, checkpoint: Optional[Path]):
        self.epoch, self.step, self.checkpoint = epoch, step, checkpoint
        where = f"; last good checkpoint kept at {checkpoint}" if checkpoint else ""
        super().__init__(f"non-finite values at epoch {epoch} step {step}{where}")


@dataclass
class TrainResult:
    model: object
    metrics: list
    checkpoint: Optional[Path]


def make_optimizer(recipe: TrainRecipe, params):
    if recipe.optimizer == "sgd":
        return SGD(params, recipe.base_lr, recipe.momentum, recipe.weight_decay)
    return AdamW(params, recipe.base_lr, recipe.betas, weight_decay=recipe.weight_decay)


def train(model, recipe: TrainRecipe, data: Splits, out_dir=None, model_config=None,
          eval_sets: Optional[tuple] = None, on_epoch: Optional[Callable[[MetricsRecord], None]] = None,
          ) -> TrainResult:
    """Run ``recipe`` on ``data``; one :class:`MetricsRecord` per epoch.

    With ``out_dir`` the records are appended to ``metrics.jsonl`` and the
    weights saved to ``checkpoint.gmck`` every ``checkpoint_every`` epochs
    (and once before the first step).
    """
    manual_seed(recipe.seed)
    rng = np.random.default_rng(recipe.seed)
    train_set = data.train.subset(recipe.train_subset, recipe.seed)
    test_set = data.test.subset(recipe.test_subset, recipe.seed)
    if eval_sets is None:
        bands = FrequencyEvalSet.build(test_set, recipe.radii)
        cut = FrequencyEvalSet.build(test_set, [recipe.eval_cut]) if recipe.eval_cut else None
    else:
        bands, cut = eval_sets

    steps_per_epoch = math.ceil(len(train_set) / recipe.batch_size)
    sched = CosineSchedule(recipe.base_lr, recipe.epochs * steps_per_epoch, recipe.warmup_epochs * steps_per_epoch)
    opt = make_optimizer(recipe, model.parameters())

    out = Path(out_dir) if out_dir is not None else None
    ckpt = None
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
        (out / "metrics.jsonl").write_text("")
        ckpt = out / "checkpoint.gmck"
        checkpoint_save(model, ckpt, model_config)

    metrics, step = [], 0
    for epoch in range(1, recipe.epochs + 1):
        model.train()
        total, count, lr = 0.0, 0, sched(step)
        for x, y in iterate_batches(train_set, recipe.batch_size, rng, True, recipe.crop_pad, recipe.flip):
            lr = opt.lr = sched(step)
            try:
                loss = F.softmax_cross_entropy(model(Tensor(x)), y, recipe.label_smoothing)
                ok = np.isfinite(loss.data).all()
            except FloatingPointError:
                ok = False
            if not ok:
                get_tape().reset()
                raise TrainingDiverged(epoch, step, ckpt)
            backward(loss)
            opt.step()
            opt.zero_grad()
            total += float(loss.data) * len(y)
            count += len(y)
            step += 1
        try:
            res = eval_frequency(model, bands)
            rec = MetricsRecord(epoch, total / count, lr, res.accuracy, res.loss,
                                [lo for lo, _ in res.edges], [hi for _, hi in res.edges], res.band_accuracy)
            if cut is not None:
                rec.cut_r, rec.cut_accuracy = cut.radii[0], eval_frequency(model, cut).band_accuracy
        except FloatingPointError:
            # eval-mode activations overflowed (e.g. stale normalisation statistics)
            raise TrainingDiverged(epoch, step, ckpt) from None
        metrics.append(rec)
        if out is not None:
            with open(out / "metrics.jsonl", "a") as fh:
                fh.write(rec.to_json() + "\n")
            if epoch % recipe.checkpoint_every == 0 or epoch == recipe.epochs:
                checkpoint_save(model, ckpt, model_config)
        if on_epoch is not None:
            on_epoch(rec)
    return TrainResult(model, metrics, ckpt)
