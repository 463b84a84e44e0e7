"""Accuracy on raw test images and on each radial frequency band of them."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from ..autodiff import functional as F
from ..autodiff.tensor import Tensor, no_grad
from ..spectral import band_edges, band_split, normalize_radii
from .data import Dataset


@dataclass
class FrequencyEvalSet:
    """Raw test images plus one band-filtered copy per radial band.

    Band images are normalised with the raw set's channel statistics and are
    not clipped.
    """

    radii: list
    labels: np.ndarray
    raw: np.ndarray
    bands: list = field(repr=False)

    @property
    def edges(self) -> list[tuple[float, float]]:
        return band_edges(self.radii)

    @classmethod
    def build(cls, data: Dataset, radii: Sequence[float], chunk: int = 1000) -> "FrequencyEvalSet":
        cuts = normalize_radii(radii)
        parts = [[] for _ in range(len(cuts) + 1)]
        for s in range(0, len(data), chunk):
            split = band_split(data.images[s:s + chunk], cuts)
            for b, comp in enumerate(split.components):
                parts[b].append(data.normalize(comp))
        bands = [np.concatenate(p) for p in parts]
        return cls(cuts, data.labels.copy(), data.normalize(data.images), bands)

    def __len__(self):
        return len(self.labels)


@dataclass
class FrequencyResult:
    accuracy: float
    loss: float
    edges: list
    band_accuracy: list

    def as_map(self) -> dict:
        out = {"raw": self.accuracy}
        for (lo, hi), acc in zip(self.edges, self.band_accuracy):
            out[(lo, hi)] = acc
        return out


def predict(model, images: np.ndarray, labels: Optional[np.ndarray] = None, batch_size: int = 256):
    """Eval-mode predictions; returns ``(pred, mean loss or nan)``."""
    was_training = model.training
    model.eval()
    preds, total = [], 0.0
    try:
        with no_grad():
            for s in range(0, len(images), batch_size):
                logits = model(Tensor(images[s:s + batch_size]))
                preds.append(np.argmax(logits.data, axis=1))
                if labels is not None:
                    ce = F.softmax_cross_entropy(logits, labels[s:s + batch_size])
                    total += float(ce.data) * len(logits.data)
    finally:
        model.train(was_training)
    pred = np.concatenate(preds) if preds else np.zeros(0, dtype=np.int64)
    return pred, (total / len(images) if labels is not None and len(images) else math.nan)


def eval_frequency(model, eval_set: FrequencyEvalSet, batch_size: int = 256) -> FrequencyResult:
    """Accuracy on the raw images and, from separate forward passes, on each band."""
    pred, loss = predict(model, eval_set.raw, eval_set.labels, batch_size)
    acc = float(np.mean(pred == eval_set.labels))
    band_acc = [float(np.mean(predict(model, b, None, batch_size)[0] == eval_set.labels)) for b in eval_set.bands]
    return FrequencyResult(acc, loss, eval_set.edges, band_acc)
