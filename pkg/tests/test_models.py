import struct

import numpy as np
import pytest

from spectral_gate.autodiff import Conv2d, Sequential, Tensor, get_tape, no_grad
from spectral_gate.checkpoint import (CheckpointChecksumError, CheckpointFormatError, CheckpointShapeError,
                                      CheckpointTruncatedError, checkpoint_load, checkpoint_save, crc64_xz,
                                      decode_state, encode_state, load_state)
from spectral_gate.cost import count_flops, count_params, cost_report
from spectral_gate.models import (GMNET_REFERENCE, GmNet, GmNetConfig, ModelConfig, build_model,
                                  gmnet_config)


@pytest.fixture(autouse=True)
def _clean_tape():
    get_tape().reset()
    yield
    get_tape().reset()


def tiny_gmnet(**kw):
    cfg = GmNetConfig(c1=8, depths=[1, 1, 1, 1], ratios=[2, 2, 2, 2], num_classes=5, stem_stride=1, **kw)
    return ModelConfig(family="gmnet", gmnet=cfg, num_classes=5)


class TestConfigs:
    def test_table_values(self):
        s1, s4 = gmnet_config("s1"), gmnet_config("GmNet-S4")
        assert (s1.c1, s1.depths, s1.ratios) == (40, [2, 2, 10, 2], [3, 3, 3, 2])
        assert (s4.c1, s4.depths, s4.ratios) == (68, [3, 3, 11, 3], [4, 4, 4, 4])
        assert gmnet_config("s2").depths == [2, 2, 8, 3]
        assert gmnet_config("s3").ratios == [4, 4, 4, 4]

    def test_unknown_scale(self):
        with pytest.raises(ValueError):
            gmnet_config("s9")

    def test_unknown_family(self):
        with pytest.raises(ValueError):
            ModelConfig(family="vit")

    def test_unknown_variant(self):
        with pytest.raises(ValueError):
            ModelConfig(family="resnet18", variant="wide")

    def test_round_trip_dict(self):
        cfg = tiny_gmnet(activation="gelu", glu="dw")
        again = ModelConfig.from_dict(cfg.to_dict())
        assert again.gmnet.activation.value == "gelu" and again.gmnet.glu.value == "dw"
        assert again.to_dict() == cfg.to_dict()


class TestCost:
    def test_hand_count(self):
        conv = Sequential(Conv2d(3, 8, 1))
        assert count_params(conv) == 32
        assert count_flops(conv, 4, convention="2mac", include_bias=False) == 768
        assert count_flops(conv, 4, convention="2mac", include_bias=True) == 768 + 128
        assert count_flops(conv, 4, convention="mac", include_bias=False) == 384

    def test_bad_convention(self):
        with pytest.raises(ValueError):
            count_flops(Sequential(Conv2d(3, 8, 1)), 4, convention="flop")

    def test_resolution_scaling(self):
        m = build_model(tiny_gmnet(), seed=0)
        head = m.head.weight.size  # the linear head does not scale with resolution
        conv_only = count_flops(m, 32, include_bias=False) - head
        conv_double = count_flops(m, 64, include_bias=False) - head
        assert conv_double == 4 * conv_only
        assert count_params(m) == count_params(build_model(tiny_gmnet(), seed=1))

    def test_flops_exclude_bn(self):
        m = build_model(tiny_gmnet(), seed=0)
        before = count_flops(m, 16)
        m.norm.running_var[:] = 7.0
        assert count_flops(m, 16) == before

    @pytest.mark.parametrize("scale", ["s1", "s3", "s4"])
    def test_table_counts(self, scale):
        rep = cost_report(build_model(ModelConfig(scale=scale, num_classes=1000)), 224)
        p_ref, f_ref = GMNET_REFERENCE[scale]
        assert abs(rep.params / p_ref - 1) < 0.03
        assert abs(rep.flops / f_ref - 1) < 0.10

    def test_resnet_variants_same_params(self):
        counts = {count_params(build_model(ModelConfig(family="resnet18", variant=v, activation=a, width=8)))
                  for v, a in [("baseline", "relu"), ("ewp", "relu"), ("gate", "relu"), ("gate", "gelu")]}
        assert len(counts) == 1

    def test_resnet18_full_width(self):
        # standard CIFAR ResNet-18 with a 10-way head
        assert count_params(build_model(ModelConfig(family="resnet18"))) == 11_173_962

    def test_mobilenet_gate_adds_nothing(self):
        a = build_model(ModelConfig(family="mobilenetv2_glu", gate="relu6"))
        b = build_model(ModelConfig(family="mobilenetv2_glu", gate=None))
        assert count_params(a) == count_params(b) == 2_236_682


class TestForward:
    @pytest.mark.parametrize("scale", ["s1", "s2", "s3", "s4"])
    @pytest.mark.parametrize("batch", [1, 3])
    def test_logit_shapes(self, scale, batch):
        m = build_model(ModelConfig(scale=scale, cifar=True, num_classes=10), seed=0).eval()
        with no_grad():
            assert m(Tensor(np.zeros((batch, 3, 32, 32)))).shape == (batch, 10)

    @pytest.mark.parametrize("cfg", [ModelConfig(family="resnet18", variant="gate", width=8),
                                     ModelConfig(family="mobilenetv2_glu", width_mult=0.25)])
    def test_other_families(self, cfg):
        m = build_model(cfg, seed=0).eval()
        with no_grad():
            assert m(Tensor(np.zeros((2, 3, 32, 32)))).shape == (2, 10)

    def test_eval_deterministic(self):
        m = build_model(tiny_gmnet(), seed=0).eval()
        x = Tensor(np.random.default_rng(0).standard_normal((2, 3, 16, 16)).astype(np.float32))
        with no_grad():
            assert np.array_equal(m(x).data, m(x).data)

    def test_seed_controls_init(self):
        a = build_model(tiny_gmnet(), seed=4).state_dict()
        b = build_model(tiny_gmnet(), seed=4).state_dict()
        assert all(np.array_equal(a[k], b[k]) for k in a)

    def test_float64_build(self):
        cfg = tiny_gmnet()
        cfg.dtype = "float64"
        m = build_model(cfg)
        assert all(p.dtype == np.float64 for p in m.parameters())


def crc64_xz_reference(data: bytes) -> int:
    poly, crc = 0xC96C5795D7870F42, 0xFFFFFFFFFFFFFFFF
    for byte in data:
        crc ^= byte
        for _ in range(8):
            crc = (crc >> 1) ^ poly if crc & 1 else crc >> 1
    return crc ^ 0xFFFFFFFFFFFFFFFF


class TestCheckpoint:
    def test_crc_check_value(self):
        assert crc64_xz(b"123456789") == 0x995DC9BBDF1939FA
        blob = np.random.default_rng(0).bytes(300)
        assert crc64_xz(blob) == crc64_xz_reference(blob)

    def test_layout(self):
        blob = encode_state({"w": np.arange(6, dtype=np.float32).reshape(2, 3)})
        assert blob[:4] == b"GMCK"
        assert struct.unpack_from("<II", blob, 4) == (1, 1)
        assert struct.unpack_from("<H", blob, 12) == (1,)
        assert blob[14:15] == b"w"
        assert struct.unpack_from("<BBII", blob, 15) == (1, 2, 2, 3)
        assert np.frombuffer(blob[25:49], "<f4").tolist() == [0, 1, 2, 3, 4, 5]
        assert struct.unpack("<Q", blob[-8:])[0] == crc64_xz(blob[:-8])
        assert len(blob) == 57

    def test_round_trip_bitwise(self, tmp_path):
        cfg = tiny_gmnet()
        m = build_model(cfg, seed=0)
        m.train()
        m(Tensor(np.random.default_rng(1).standard_normal((4, 3, 8, 8)).astype(np.float32)))  # move BN stats
        get_tape().reset()
        checkpoint_save(m, tmp_path / "m.gmck", cfg)
        loaded = checkpoint_load(tmp_path / "m.gmck")
        a, b = m.state_dict(), loaded.state_dict()
        assert list(a) == list(b)
        assert all(a[k].dtype == b[k].dtype and a[k].tobytes() == b[k].tobytes() for k in a)
        x = Tensor(np.random.default_rng(2).standard_normal((2, 3, 8, 8)).astype(np.float32))
        with no_grad():
            assert m.eval()(x).data.tobytes() == loaded.eval()(x).data.tobytes()

    def test_float64_round_trip(self):
        state = {"a": np.random.default_rng(0).standard_normal((3, 1, 2))}
        assert decode_state(encode_state(state))["a"].tobytes() == state["a"].tobytes()

    def test_shape_mismatch_names_tensor(self, tmp_path):
        m = build_model(tiny_gmnet(), seed=0)
        checkpoint_save(m, tmp_path / "m.gmck")
        other = build_model(ModelConfig(family="gmnet", gmnet=GmNetConfig(
            c1=8, depths=[1, 1, 1, 1], ratios=[3, 2, 2, 2], num_classes=5, stem_stride=1)), seed=0)
        before = {k: v.copy() for k, v in other.state_dict().items()}
        with pytest.raises(CheckpointShapeError, match=r"stages\.0\.0\.fc1\.weight"):
            checkpoint_load(tmp_path / "m.gmck", other)
        after = other.state_dict()
        assert all(np.array_equal(before[k], after[k]) for k in before)

    def test_bad_magic_and_version(self, tmp_path):
        blob = bytearray(encode_state({"w": np.zeros(3, np.float32)}))
        with pytest.raises(CheckpointFormatError, match="magic"):
            decode_state(b"XXXX" + bytes(blob[4:]))
        blob[4] = 2
        with pytest.raises(CheckpointFormatError, match="version"):
            decode_state(bytes(blob))

    def test_truncated(self, tmp_path):
        blob = encode_state({"w": np.zeros((4, 4), np.float32)})
        path = tmp_path / "t.gmck"
        path.write_bytes(blob[:40])
        with pytest.raises(CheckpointTruncatedError):
            load_state(path)
        with pytest.raises(CheckpointTruncatedError):
            decode_state(blob[:6])

    def test_corrupted_payload(self):
        blob = bytearray(encode_state({"w": np.ones(4, np.float32)}))
        blob[-10] ^= 0xFF
        with pytest.raises(CheckpointChecksumError):
            decode_state(bytes(blob))

    def test_missing_sidecar(self, tmp_path):
        m = build_model(tiny_gmnet(), seed=0)
        checkpoint_save(m, tmp_path / "m.gmck")
        with pytest.raises(FileNotFoundError):
            checkpoint_load(tmp_path / "m.gmck")
