"""High/low spectral energy ratios at the gate taps of a GmNet."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from ..autodiff.tensor import Tensor, no_grad
from ..spectral import energy_ratio_high_low, write_metric_csv

TAPS = ("gate_in", "gate_out", "dw1")
TAP_LABELS = {"gate_in": "f", "gate_out": "g", "dw1": "dw1"}


class MissingTapError(KeyError):
    pass


@dataclass
class SpectralReport:
    rows: list = field(default_factory=list)  # dicts with layer, stage, metric, value

    def stage_means(self, metric: str) -> dict[int, float]:
        by_stage: dict[int, list] = {}
        for r in self.rows:
            if r["metric"] == metric and r["layer"] != "stage":
                by_stage.setdefault(int(r["stage"]), []).append(r["value"])
        return {s: float(np.mean(v)) for s, v in sorted(by_stage.items())}

    def write_csv(self, path) -> None:
        write_metric_csv(self.rows, path)


def spectral_probe(model, probe_batch, taps: Sequence[str] = TAPS) -> SpectralReport:
    """One eval-mode forward pass; every block's taps are transformed channel by channel.

    Rows hold ``ratio_<f|g|dw1>`` per block and their per-stage means
    (``layer == "stage"``).
    """
    blocks_fn = getattr(model, "gmnet_blocks", None)
    if blocks_fn is None:
        raise MissingTapError(f"{type(model).__name__}: model exposes no gate taps")
    blocks = blocks_fn()
    for _, _, blk in blocks:
        blk.record_taps = True
        blk.taps = {}
    was_training = model.training
    model.eval()
    try:
        with no_grad():
            model(Tensor(np.asarray(getattr(probe_batch, "data", probe_batch))))
    finally:
        model.train(was_training)
        for _, _, blk in blocks:
            blk.record_taps = False
    report = SpectralReport()
    for name, stage, blk in blocks:
        for tap in taps:
            if tap not in blk.taps:
                raise MissingTapError(f"{name}: tap {tap!r} was not recorded")
            r = energy_ratio_high_low(blk.taps[tap])
            report.rows.append({"layer": name, "stage": stage, "metric": f"ratio_{TAP_LABELS.get(tap, tap)}",
                                "value": r.value})
        blk.taps = {}
    for tap in taps:
        metric = f"ratio_{TAP_LABELS.get(tap, tap)}"
        for stage, v in report.stage_means(metric).items():
            report.rows.append({"layer": "stage", "stage": stage, "metric": metric, "value": v})
    return report
