"""
Where does the gate push the energy?
====================================

The probe records the input and output of every gate and measures how
much spectral energy lies outside the central low-frequency quarter.
Kernel bandwidth summarises how wide each depth-wise filter's passband is.
"""
import numpy as np

from spectral_gate import spectral
from spectral_gate.harness.data import synth_splits
from spectral_gate.harness.probe import spectral_probe
from spectral_gate.harness.train import TrainRecipe, train
from spectral_gate.models import GmNetConfig, ModelConfig, build_model

data = synth_splits(seed=0, n_train=256, n_test=64, classes=4, size=16)
probe = data.test.normalize(data.test.images[:64])
recipe = TrainRecipe(optimizer="adamw", base_lr=3e-3, weight_decay=0.03, batch_size=32, epochs=2,
                     crop_pad=0, flip=False, radii=[2, 4], eval_cut=None)

models = {}
for act in ("relu6", "gelu"):
    cfg = GmNetConfig(c1=40, depths=[1, 1, 1, 1], ratios=[3, 3, 3, 3], num_classes=4, stem_stride=1, activation=act)
    models[act] = build_model(ModelConfig(family="gmnet", gmnet=cfg), seed=0)
    train(models[act], recipe, data)
    rep = spectral_probe(models[act], probe)
    f, g = rep.stage_means("ratio_f"), rep.stage_means("ratio_g")
    print(act, " ".join(f"s{s}: {f[s]:.2f}->{g[s]:.2f}" for s in f))

# %%
# A delta kernel passes everything; a box filter is much narrower.
print("delta bandwidth", spectral.kernel_bandwidth(np.pad([[1.0]], 3)).value)
print("box bandwidth  ", spectral.kernel_bandwidth(np.full((7, 7), 1 / 49)).value)

# %%
# Mean bandwidth of the first depth-wise conv in each stage of the trained models.
for act, model in models.items():
    named = [(n, stage, blk.dw1.weight.data) for n, stage, blk in model.gmnet_blocks()]
    rows = spectral.bandwidth_histograms(named, bins=5)
    means = [r for r in rows if r["metric"] == "mean_bandwidth"]
    print(act, " ".join(f"{r['layer']}: {r['value']:.3f}" for r in means))
