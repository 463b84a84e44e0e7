"""Directional comparison of gated ResNet-18 variants across frequency bands.

Four models (baseline, gate-ReLU, gate-ReLU6, gate-GELU) are trained with
the same recipe for every seed.  Three majority-vote properties are then
checked on the final epoch:

* (a) gate-ReLU overall accuracy >= baseline,
* (b) gate-ReLU6 highest-band accuracy >= gate-GELU,
* (c) gate-GELU lowest-band accuracy >= gate-ReLU.
"""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

from ..models import ModelConfig, build_model
from .data import Splits
from .evaluate import FrequencyEvalSet
from .train import TrainRecipe, train

DYNAMICS_MODELS = {
    "baseline": dict(variant="baseline", activation="relu"),
    "gate_relu": dict(variant="gate", activation="relu"),
    "gate_relu6": dict(variant="gate", activation="relu6"),
    "gate_gelu": dict(variant="gate", activation="gelu"),
}


@dataclass
class DynamicsOutcome:
    finals: dict  # (model, seed) -> last MetricsRecord
    seeds: list

    def _votes(self, better: str, worse: str, pick: Callable) -> int:
        return sum(pick(self.finals[better, s]) >= pick(self.finals[worse, s]) for s in self.seeds)

    def checks(self) -> dict[str, tuple[int, int]]:
        """(wins, seeds) per property."""
        n = len(self.seeds)
        return {
            "a": (self._votes("gate_relu", "baseline", lambda r: r.accuracy), n),
            "b": (self._votes("gate_relu6", "gate_gelu", lambda r: r.band_accuracy[-1]), n),
            "c": (self._votes("gate_gelu", "gate_relu", lambda r: r.band_accuracy[0]), n),
        }

    def majority(self, prop: str) -> bool:
        wins, n = self.checks()[prop]
        return 3 * wins >= 2 * n


def learning_dynamics(data: Splits, recipe: TrainRecipe, seeds: Sequence[int] = (0, 1, 2), width: int = 64,
                      log: Optional[Callable[[str], None]] = None) -> DynamicsOutcome:
    test = data.test.subset(recipe.test_subset, recipe.seed)
    eval_sets = (FrequencyEvalSet.build(test, recipe.radii), None)
    finals = {}
    for seed in seeds:
        for name, kw in DYNAMICS_MODELS.items():
            cfg = ModelConfig(family="resnet18", num_classes=data.train.num_classes, width=width, **kw)
            model = build_model(cfg, seed=seed)
            res = train(model, dataclasses.replace(recipe, seed=seed, eval_cut=None), data, eval_sets=eval_sets)
            finals[name, seed] = res.metrics[-1]
            if log:
                last = res.metrics[-1]
                log(f"{name} seed={seed} acc={last.accuracy:.4f} bands={[round(a, 4) for a in last.band_accuracy]}")
    return DynamicsOutcome(finals, list(seeds))
