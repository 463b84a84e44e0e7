"""Ablation suites over gate activations, gate designs and block components."""
from __future__ import annotations

import csv
import dataclasses
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from ..cost import count_params
from ..models import GmNetConfig, ModelConfig, build_model
from .data import Splits
from .evaluate import FrequencyEvalSet
from .train import TrainRecipe, train

SUITES = ("activation_sweep", "glu_design_sweep", "contribution_breakdown")


class BudgetMismatch(ValueError):
    pass


@dataclass
class Variant:
    name: str
    overrides: dict  # GmNetConfig fields


def suite_variants(suite: str) -> list[Variant]:
    if suite == "activation_sweep":
        return [Variant(a, dict(activation=a)) for a in ("identity", "relu", "gelu", "relu6")]
    if suite == "glu_design_sweep":
        return [Variant(g, dict(glu=g, activation="relu6"))
                for g in ("ln", "dw", "pool_diff", "fc", "simple", "fc_sigma")]
    if suite == "contribution_breakdown":
        lin_act = dict(mixer="linear", mlp="act")
        return [
            Variant("baseline", dict(lin_act, activation="relu")),
            Variant("+dwconv7", dict(mixer="dw", mlp="act", activation="relu")),
            Variant("+gate_identity", dict(mixer="linear", mlp="gate", activation="identity")),
            Variant("+gate_relu", dict(mixer="linear", mlp="gate", activation="relu")),
            Variant("+gate_gelu", dict(mixer="linear", mlp="gate", activation="gelu")),
            Variant("+gate_relu6", dict(mixer="linear", mlp="gate", activation="relu6")),
            Variant("+relu6", dict(lin_act, activation="relu6")),
            Variant("full", dict(mixer="dw", mlp="gate", activation="relu6")),
        ]
    raise ValueError(f"unknown suite {suite!r}; choose from {SUITES}")


def _params(cfg: GmNetConfig) -> int:
    return count_params(build_model(ModelConfig(family="gmnet", gmnet=cfg), seed=0))


def match_budget(cfg: GmNetConfig, target: int, lo: float = 0.05, hi: float = 16.0, iters: int = 40) -> GmNetConfig:
    """Scale every stage's mlp ratio by one factor so the parameter count lands closest to ``target``."""
    base = list(cfg.ratios)

    def at(s):
        return dataclasses.replace(cfg, ratios=[r * s for r in base])

    best = (abs(_params(cfg) - target), cfg)
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        c = at(mid)
        p = _params(c)
        best = min(best, (abs(p - target), c), key=lambda t: t[0])
        if p < target:
            lo = mid
        else:
            hi = mid
        if hi - lo < 1e-4:
            break
    return best[1]


@dataclass
class AblationConfig:
    suite: str
    base: GmNetConfig
    recipe: TrainRecipe
    seeds: list = field(default_factory=lambda: [0, 1, 2])
    tolerance: float = 0.03
    match: Optional[bool] = None  # default: only contribution_breakdown is budget-matched
    reference: str = "full"


def plan_variants(cfg: AblationConfig) -> list[tuple[Variant, GmNetConfig, int]]:
    """Variant configs and their parameter counts; raises before any training if budgets disagree."""
    variants = suite_variants(cfg.suite)
    match = cfg.suite == "contribution_breakdown" if cfg.match is None else cfg.match
    built = [(v, dataclasses.replace(cfg.base, **v.overrides)) for v in variants]
    if match:
        ref = next((c for v, c in built if v.name == cfg.reference), built[-1][1])
        target = _params(ref)
        built = [(v, c if v.name == cfg.reference else match_budget(c, target)) for v, c in built]
    plan = [(v, c, _params(c)) for v, c in built]
    if match:
        counts = np.array([p for _, _, p in plan], dtype=float)
        spread = (counts.max() - counts.min()) / counts.min()
        if spread > cfg.tolerance:
            detail = ", ".join(f"{v.name}={p}" for v, _, p in plan)
            raise BudgetMismatch(f"parameter budgets differ by {spread:.1%} (> {cfg.tolerance:.0%}): {detail}")
    return plan


def aggregate_rows(rows: list[dict]) -> list[dict]:
    """mean, std (population, 0 for one seed) and n_seeds per (variant, metric); single seeds flagged."""
    keyed: dict[tuple, list] = {}
    for r in rows:
        keyed.setdefault((r["variant"], r["metric"]), []).append(r["value"])
    out = []
    for (variant, metric), vals in keyed.items():
        arr = np.asarray(vals, dtype=float)
        out.append({"variant": variant, "seed": "mean", "metric": metric, "value": float(arr.mean())})
        out.append({"variant": variant, "seed": "std", "metric": metric, "value": float(arr.std())})
        out.append({"variant": variant, "seed": "n_seeds", "metric": metric, "value": len(arr)})
        if len(arr) == 1:
            out.append({"variant": variant, "seed": "single_seed", "metric": metric, "value": 1})
    return out


def run_ablation(cfg: AblationConfig, data: Splits, out_csv=None,
                 log: Optional[Callable[[str], None]] = None) -> list[dict]:
    """Train every variant for every seed; returns per-seed rows followed by aggregate rows."""
    plan = plan_variants(cfg)
    rec = cfg.recipe
    test = data.test.subset(rec.test_subset, rec.seed)
    eval_sets = (FrequencyEvalSet.build(test, rec.radii),
                 FrequencyEvalSet.build(test, [rec.eval_cut]) if rec.eval_cut else None)
    rows = []
    for variant, gcfg, n_params in plan:
        for seed in cfg.seeds:
            model_cfg = ModelConfig(family="gmnet", gmnet=gcfg)
            model = build_model(model_cfg, seed=seed)
            result = train(model, dataclasses.replace(rec, seed=seed), data, eval_sets=eval_sets)
            last = result.metrics[-1]
            vals = {"params": n_params, "accuracy": last.accuracy, "train_loss": last.loss}
            for (lo, hi), acc in zip(zip(last.band_r_low, last.band_r_high), last.band_accuracy):
                vals[f"band_{lo:g}_{hi:g}"] = acc
            if last.cut_accuracy is not None:
                vals["low_acc"], vals["high_acc"] = last.cut_accuracy
            for metric, value in vals.items():
                rows.append({"variant": variant.name, "seed": seed, "metric": metric, "value": value})
            if log:
                log(f"{cfg.suite} {variant.name} seed={seed} acc={last.accuracy:.4f} params={n_params}")
    rows += aggregate_rows(rows)
    if out_csv is not None:
        with open(out_csv, "w", newline="") as fh:
            w = csv.DictWriter(fh, fieldnames=["variant", "seed", "metric", "value"])
            w.writeheader()
            w.writerows(rows)
    return rows
