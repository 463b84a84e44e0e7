"""End-to-end acceptance checks, one test per numbered criterion.

A summary line per criterion is printed at the end of the session by the
hook in ``conftest.py``.
"""
import itertools
import os

import numpy as np
import pytest

from spectral_gate import spectral, verify
from spectral_gate.autodiff import get_tape
from spectral_gate.harness.ablation import AblationConfig, BudgetMismatch, plan_variants, run_ablation
from spectral_gate.harness.data import find_cifar_dir, load_cifar10, synth_splits
from spectral_gate.harness.dynamics import learning_dynamics
from spectral_gate.harness.probe import spectral_probe
from spectral_gate.harness.train import TrainRecipe, train
from spectral_gate.models import GmNetConfig, ModelConfig, build_model, gmnet_config


@pytest.fixture(autouse=True)
def _clean_tape():
    get_tape().reset()
    yield
    get_tape().reset()


def _rows_pass(rows, record_property):
    for row in rows:
        print(row.line())
    failed = [r for r in rows if not r.passed]
    record_property("detail", "; ".join(f"{r.name}: {r.measured}" for r in failed) or f"{len(rows)} checks")
    assert not failed, "; ".join(f"{r.name} measured {r.measured}, expected {r.expected}" for r in failed)


@pytest.mark.criterion(1, "GmNet S1-S4 params within 3%, MAC FLOPs at 224 within 10%")
def test_model_costs(record_property):
    _rows_pass(verify.counts_suite(), record_property)


@pytest.mark.criterion(2, "convolution theorem residual < 1e-10, product support within 2*omega")
def test_convolution_theorem(record_property):
    _rows_pass(verify.conv_theorem_suite(n_pairs=100, size=64), record_property)


def _thousand_images():
    root = find_cifar_dir(os.environ.get("SPECTRAL_GATE_DATA"))
    if root is not None:
        return load_cifar10(root).test.images[:1000], "CIFAR-10"
    # stand-in with CIFAR's storage precision: 8-bit levels scaled to [0, 1]
    levels = np.random.default_rng(0).integers(0, 256, (1000, 3, 32, 32))
    return (levels / 255.0).astype(np.float32), "synthetic 8-bit images (CIFAR-10 not found)"


@pytest.mark.criterion(3, "band decomposition sums back to the image within 1e-5 (float32)")
def test_decomposition_exact(record_property):
    images, source = _thousand_images()
    worst = {}
    for radii in ([0, 6, 12, 18, np.inf], [10]):
        split = spectral.band_split(images, radii)
        assert all(c.dtype == np.float32 for c in split.components)
        worst[str(radii)] = float(np.max(np.abs(split.reconstruct() - images)))
    record_property("detail", f"{source}; " + ", ".join(f"{k}: {v:.1e}" for k, v in worst.items()))
    assert max(worst.values()) < 1e-5


def _direct_dft_centred(x):
    h, w = x.shape
    u, y = np.arange(h)[:, None], np.arange(h)[None, :]
    v, z = np.arange(w)[:, None], np.arange(w)[None, :]
    kernel = np.exp(-2j * np.pi * (u * y / h)[:, None, :, None]) * np.exp(-2j * np.pi * (v * z / w)[None, :, None, :])
    raw = np.einsum("uvyz,yz->uv", kernel, x)  # full four-index sum
    return np.roll(raw, (h // 2, w // 2), axis=(0, 1))


@pytest.mark.criterion(4, "fast transform equals the direct DFT within 1e-9 on every grid up to 16x16")
def test_transform_oracle(record_property):
    rng = np.random.default_rng(0)
    worst = 0.0
    for h, w in itertools.product(range(1, 17), repeat=2):
        x = rng.standard_normal((h, w))
        spec = spectral.dft2_forward(x)
        worst = max(worst, float(np.max(np.abs(spec.coeffs - _direct_dft_centred(x)))))
        worst = max(worst, float(np.max(np.abs(spectral.dft2_inverse(spec) - x))))
    record_property("detail", f"max error {worst:.1e} over 256 grids")
    assert worst < 1e-9


@pytest.mark.criterion(5, "finite-difference gradients within 1e-4 for all layers and block variants")
def test_gradients(record_property):
    _rows_pass(verify.gradcheck_suite(), record_property)


@pytest.mark.criterion(6, "decay exponents: step 1+-0.3, relu 2+-0.3, gelu >= relu + 1")
def test_decay_ordering(record_property):
    _rows_pass(verify.decay_suite(), record_property)


@pytest.mark.criterion(7, "CIFAR-10 ResNet-18 gate directional properties (reduced 30 epoch / 10k mode)")
def test_learning_dynamics(record_property):
    root = find_cifar_dir(os.environ.get("SPECTRAL_GATE_DATA"))
    if root is None:
        pytest.fail("CIFAR-10 binary batches not found (set SPECTRAL_GATE_DATA); "
                    "this criterion needs the real dataset and cannot be substituted")
    recipe = TrainRecipe.resnet_cifar(epochs=30, train_subset=10_000, radii=[6, 12, 18])
    outcome = learning_dynamics(load_cifar10(root), recipe, seeds=(0, 1, 2), log=print)
    checks = outcome.checks()
    record_property("detail", ", ".join(f"({k}) {w}/{n}" for k, (w, n) in checks.items()))
    assert outcome.majority("a") and outcome.majority("b")


@pytest.mark.criterion(8, "ReLU6 gate output is higher-frequency than GELU's in most stages")
def test_probe_direction(record_property):
    data = synth_splits(0, 256, 64, classes=4, size=16)
    probe = data.test.normalize(data.test.images[:64])
    recipe = TrainRecipe(optimizer="adamw", base_lr=3e-3, weight_decay=0.03, batch_size=32, epochs=2,
                         crop_pad=0, flip=False, radii=[2, 4], eval_cut=None)
    ratios = {}
    for act in ("relu6", "gelu"):
        cfg = GmNetConfig(c1=40, depths=[1, 1, 1, 1], ratios=[3, 3, 3, 3], num_classes=4, stem_stride=1,
                          activation=act)
        model = build_model(ModelConfig(family="gmnet", gmnet=cfg), seed=0)
        train(model, recipe, data)
        ratios[act] = spectral_probe(model, probe).stage_means("ratio_g")
    wins = sum(ratios["relu6"][s] > ratios["gelu"][s] for s in ratios["relu6"])
    detail = " ".join(f"s{s}:{ratios['relu6'][s]:.2f}/{ratios['gelu'][s]:.2f}" for s in ratios["relu6"])
    print(f"relu6/gelu post-gate ratios {detail}")
    record_property("detail", f"{wins}/{len(ratios['relu6'])} stages")
    assert 2 * wins > len(ratios["relu6"])


@pytest.mark.criterion(9, "contribution-breakdown budgets within 3% before training; violation aborts")
def test_matched_budget(record_property):
    base = gmnet_config("s3", num_classes=1000)
    plan = plan_variants(AblationConfig("contribution_breakdown", base, TrainRecipe()))
    counts = np.array([p for _, _, p in plan], dtype=float)
    spread = (counts.max() - counts.min()) / counts.min()
    record_property("detail", f"{len(plan)} variants, spread {spread:.3%}, ~{counts.mean() / 1e6:.2f}M")
    assert len(plan) == 8 and spread <= 0.03

    class NoData:
        def __getattr__(self, name):
            raise AssertionError("training started despite a budget violation")

    small = GmNetConfig(c1=8, depths=[1, 1, 1, 1], ratios=[3, 3, 3, 3], num_classes=4, stem_stride=1)
    with pytest.raises(BudgetMismatch):
        run_ablation(AblationConfig("contribution_breakdown", small, TrainRecipe(), tolerance=-1.0), NoData())


@pytest.mark.criterion(10, "fixed-seed training reproduces metrics.jsonl bitwise")
def test_determinism(tmp_path, record_property):
    data = synth_splits(3, 128, 64, classes=4, size=16)
    recipe = TrainRecipe(optimizer="adamw", base_lr=3e-3, weight_decay=0.03, batch_size=32, epochs=2,
                         radii=[2, 4, 6], eval_cut=4, crop_pad=2, flip=True, seed=3)
    blobs = []
    for run in ("first", "second"):
        cfg = GmNetConfig(c1=8, depths=[1, 1, 1, 1], ratios=[3, 3, 3, 3], num_classes=4, stem_stride=1,
                          drop_path=0.1)
        train(build_model(ModelConfig(family="gmnet", gmnet=cfg), seed=3), recipe, data, tmp_path / run)
        blobs.append((tmp_path / run / "metrics.jsonl").read_bytes())
    records = len(blobs[0].splitlines())
    record_property("detail", f"{len(blobs[0])} bytes, {records} records")
    assert blobs[0] == blobs[1]
