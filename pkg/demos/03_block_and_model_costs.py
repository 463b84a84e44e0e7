"""
Blocks, models and what they cost
=================================

The GmNet block is a depth-wise conv, a pair of 1x1 convs around a gate,
and a second depth-wise conv, wrapped in a residual with layer scale.
"""
import numpy as np

from spectral_gate.autodiff import Tensor, no_grad
from spectral_gate.blocks import BlockConfig, GmNetBlock
from spectral_gate.cost import count_flops, count_params
from spectral_gate.models import GMNET_REFERENCE, ModelConfig, build_model

block = GmNetBlock(BlockConfig(dim=32, mlp_ratio=3, activation="relu6"))
with no_grad():
    y = block(Tensor(np.random.default_rng(0).standard_normal((2, 32, 14, 14)).astype(np.float32)))
print("block output", y.shape, "params", count_params(block))

# %%
# Four GmNet scales at 224x224.  FLOPs are multiply-accumulates here; pass
# ``convention="2mac"`` to count multiplies and adds separately.
for scale, (p_ref, f_ref) in GMNET_REFERENCE.items():
    model = build_model(ModelConfig(family="gmnet", scale=scale, num_classes=1000), seed=0)
    p, f = count_params(model), count_flops(model, 224)
    print(f"GmNet-{scale.upper()}: {p / 1e6:6.3f}M params (ref {p_ref / 1e6:.1f}M), "
          f"{f / 1e9:.3f}G MACs (ref {f_ref / 1e9:.1f}G)")

# %%
# CIFAR-sized baselines.
for label, cfg in [("ResNet-18", ModelConfig(family="resnet18")),
                   ("ResNet-18 gate/relu6", ModelConfig(family="resnet18", variant="gate", activation="relu6")),
                   ("MobileNetV2", ModelConfig(family="mobilenetv2_glu", gate=None)),
                   ("MobileNetV2 gate/relu6", ModelConfig(family="mobilenetv2_glu", gate="relu6"))]:
    model = build_model(cfg, seed=0)
    print(f"{label:>24}: {count_params(model) / 1e6:.3f}M params, {count_flops(model, 32) / 1e6:.1f}M MACs")
