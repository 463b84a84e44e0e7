import csv
import math

import numpy as np
import pytest

from spectral_gate import spectral as S


def brute_dft2(x):
    """Direct double sum, then moved to the centred layout by explicit index arithmetic."""
    h, w = x.shape
    raw = np.zeros((h, w), dtype=complex)
    for u in range(h):
        for v in range(w):
            acc = 0j
            for y in range(h):
                for xx in range(w):
                    acc += x[y, xx] * np.exp(-2j * np.pi * (u * y / h + v * xx / w))
            raw[u, v] = acc
    out = np.zeros_like(raw)
    for u in range(h):
        for v in range(w):
            out[(u + h // 2) % h, (v + w // 2) % w] = raw[u, v]
    return out


class TestTransforms:
    def test_constant_image_single_dc(self):
        spec = S.dft2_forward(np.full((6, 5), 2.5))
        dc = spec.dc_index
        assert dc == (3, 2)
        assert spec.coeffs[dc] == pytest.approx(2.5 * 30)
        rest = np.delete(spec.coeffs.ravel(), dc[0] * 5 + dc[1])
        assert np.max(np.abs(rest)) < 1e-12

    def test_single_tone_peaks(self):
        w, k = 16, 3
        x = np.tile(np.cos(2 * np.pi * k * np.arange(w) / w), (8, 1))
        mag = np.abs(S.dft2_forward(x).coeffs)
        peaks = {tuple(int(v) for v in p) for p in np.argwhere(mag > 1e-6 * mag.max())}
        assert peaks == {(4, 8 - k), (4, 8 + k)}

    @pytest.mark.parametrize("shape", [(8, 8), (5, 7), (16, 16)])
    def test_matches_brute_force(self, shape):
        x = np.random.default_rng(0).standard_normal(shape)
        np.testing.assert_allclose(S.dft2_forward(x).coeffs, brute_dft2(x), rtol=0, atol=1e-9)

    @pytest.mark.parametrize("dtype,tol", [(np.float32, 1e-6), (np.float64, 1e-10)])
    def test_round_trip(self, dtype, tol):
        x = np.random.default_rng(1).standard_normal((32, 32)).astype(dtype)
        back = S.dft2_inverse(S.dft2_forward(x))
        assert np.max(np.abs(back - x)) < tol

    def test_parseval(self):
        x = np.random.default_rng(2).standard_normal((17, 12))
        spec = S.dft2_forward(x)
        assert spec.energy() / x.size == pytest.approx(np.sum(x ** 2), rel=1e-6)

    def test_rejects_non_2d(self):
        with pytest.raises(ValueError):
            S.dft2_forward(np.zeros(4))


class TestRadialDecompose:
    def setup_method(self):
        self.img = np.random.default_rng(3).random((3, 32, 32)).astype(np.float32)

    def test_zero_radius(self):
        low, high = S.radial_decompose(self.img, 0)
        assert np.max(np.abs(low)) == 0.0
        assert np.max(np.abs(high - self.img)) < 1e-6

    def test_beyond_diagonal(self):
        low, high = S.radial_decompose(self.img, 30)
        assert np.max(np.abs(high)) == 0.0
        assert np.max(np.abs(low - self.img)) < 1e-6

    @pytest.mark.parametrize("r", [0, 1, 3.5, 6, 12, 17.9, 23, 40])
    def test_partition(self, r):
        low, high = S.radial_decompose(self.img, r)
        assert low.dtype == np.float32
        assert np.max(np.abs(low + high - self.img)) < 1e-5
        mask = S.RadialMask(r, 32, 32)
        assert not np.any(mask.low & mask.high)
        assert np.all(mask.low | mask.high)

    def test_boundary_is_high(self):
        mask = S.RadialMask(2, 8, 8)
        assert not mask.low[4, 6]  # distance exactly 2
        assert mask.low[4, 5]

    def test_channels_independent(self):
        low, _ = S.radial_decompose(self.img, 6)
        low1, _ = S.radial_decompose(self.img[1], 6)
        np.testing.assert_array_equal(low[1], low1)

    def test_energy_monotone(self):
        x = self.img[0].astype(np.float64)
        prev_low, prev_high = -1.0, math.inf
        for r in np.linspace(0, 25, 40):
            low, high = S.radial_decompose(x, r)
            el, eh = np.sum(low ** 2), np.sum(high ** 2)
            assert el >= prev_low - 1e-9 and eh <= prev_high + 1e-9
            prev_low, prev_high = el, eh

    def test_negative_radius(self):
        with pytest.raises(ValueError):
            S.radial_decompose(self.img, -1)


class TestBandSplit:
    def test_four_bands_sum(self):
        img = np.random.default_rng(4).random((3, 32, 32)).astype(np.float32)
        split = S.band_split(img, [0, 6, 12, 18, math.inf])
        assert split.radii == [6, 12, 18]
        assert len(split.components) == 4
        assert np.max(np.abs(split.reconstruct() - img)) < 1e-5

    def test_single_radius_matches_decompose(self):
        img = np.random.default_rng(5).standard_normal((16, 16))
        low, high = S.radial_decompose(img, 5)
        split = S.band_split(img, [5])
        np.testing.assert_array_equal(split.components[0], low)
        np.testing.assert_array_equal(split.components[1], high)

    def test_dc_only_image(self):
        split = S.band_split(np.full((8, 8), 3.0), [2, 4])
        np.testing.assert_allclose(split.components[0], 3.0, atol=1e-12)
        for comp in split.components[1:]:
            assert np.max(np.abs(comp)) < 1e-12

    @pytest.mark.parametrize("radii", [[6, 6], [12, 6], [0, -1, 3], [], [0, math.inf], [3, math.nan]])
    def test_bad_radii(self, radii):
        with pytest.raises(ValueError):
            S.band_split(np.zeros((8, 8)), radii)

    def test_band_membership(self):
        masks = S.band_masks(16, 16, [3, 6])
        d = S.radial_distance(16, 16)
        assert np.all(masks[1] == ((d >= 3) & (d < 6)))
        assert np.sum(masks, axis=0).max() == 1

    def test_energy_fractions_sum_to_one(self):
        img = np.random.default_rng(6).random((32, 32))
        frac = S.band_energy_fractions(img, [6, 12, 18])
        assert frac.sum() == pytest.approx(1.0)


class TestConvolutionTheorem:
    def test_circular_convolution_loop_oracle(self):
        rng = np.random.default_rng(7)
        a, b = rng.standard_normal((4, 5)), rng.standard_normal((4, 5))
        ref = np.zeros((4, 5))
        for k1 in range(4):
            for k2 in range(5):
                ref[k1, k2] = sum(a[m1, m2] * b[(k1 - m1) % 4, (k2 - m2) % 5]
                                  for m1 in range(4) for m2 in range(5))
        np.testing.assert_allclose(S.circular_convolve2d(a, b).real, ref, atol=1e-12)

    def test_delta(self):
        u = np.zeros((8, 8))
        u[0, 0] = 1.0
        assert S.verify_convolution_theorem(u, u) < 1e-12

    def test_random(self):
        rng = np.random.default_rng(8)
        assert S.verify_convolution_theorem(rng.standard_normal((12, 10)), rng.standard_normal((12, 10))) < 1e-12

    def test_product_to_sum(self):
        w = 32
        x = np.arange(w)
        u = np.tile(np.cos(2 * np.pi * 3 * x / w), (4, 1))
        v = np.tile(np.cos(2 * np.pi * 5 * x / w), (4, 1))
        mag = np.abs(S.dft2_forward(u * v).coeffs)
        ks = sorted({abs(int(c) - w // 2) for _, c in np.argwhere(mag > 1e-9 * mag.max())})
        assert ks == [2, 8]

    def test_band_limited_support_doubles(self):
        rng = np.random.default_rng(9)
        omega = 5.0
        u = S.band_limited_field((64, 64), omega, rng)
        rep = S.product_support(u, omega)
        assert rep.outside_fraction < 1e-9
        assert 1.6 * omega < rep.max_radius <= 2 * omega + 1e-9

    def test_shape_mismatch(self):
        with pytest.raises(ValueError):
            S.verify_convolution_theorem(np.zeros((4, 4)), np.zeros((4, 5)))


@pytest.fixture(scope="module")
def fits():
    return {name: S.activation_decay_fit(name) for name in ("step", "relu", "relu6", "gelu", "silu")}


class TestDecayFit:
    def test_step(self, fits):
        assert fits["step"].exponent == pytest.approx(1.0, abs=0.3)

    def test_relu(self, fits):
        assert fits["relu"].exponent == pytest.approx(2.0, abs=0.3)
        assert fits["relu6"].exponent == pytest.approx(2.0, abs=0.3)

    def test_gelu_smoother(self, fits):
        assert fits["gelu"].exponent > 3
        assert fits["gelu"].exponent >= fits["relu"].exponent + 1

    def test_ordering(self, fits):
        assert fits["step"].exponent < fits["relu"].exponent < fits["gelu"].exponent

    def test_fields_reported(self, fits):
        f = fits["relu"]
        assert math.isfinite(f.exponent) and f.residual >= 0 and f.n_points > 50
        lo, hi = f.omega_range
        assert hi / lo == pytest.approx(100.0)

    def test_detrended_identity_is_degenerate(self):
        fit = S.activation_decay_fit("identity", detrend=True)
        assert fit.degenerate and fit.exponent == 0.0

    def test_zero_function_is_degenerate(self):
        fit = S.activation_decay_fit(lambda t: np.zeros_like(t))
        assert fit.degenerate

    def test_unknown_activation(self):
        with pytest.raises(ValueError):
            S.activation_decay_fit("tanhshrink")


class TestEnergyRatio:
    def test_constant(self):
        r = S.energy_ratio_high_low(np.full((16, 16), 4.0))
        assert r.value == 0.0 and not r.low_energy_zero

    def test_checkerboard(self):
        y, x = np.mgrid[:8, :8]
        r = S.energy_ratio_high_low((-1.0) ** (x + y))
        assert r.low_energy_zero and math.isinf(r.value)

    def test_two_tone_against_oracle(self):
        h = w = 16
        a, b, k = 1.5, 0.7, 7
        x = np.arange(w)
        img = a + b * np.tile(np.cos(2 * np.pi * k * x / w), (h, 1))
        coeffs = brute_dft2(img)
        e = np.abs(coeffs) ** 2
        low = np.zeros((h, w), bool)
        low[4:12, 4:12] = True
        oracle = e[~low].sum() / e[low].sum()
        assert oracle == pytest.approx(2 * b ** 2 / (4 * a ** 2))
        assert S.energy_ratio_high_low(img).value == pytest.approx(oracle, rel=1e-9)

    def test_spectrum_input(self):
        img = np.random.default_rng(10).standard_normal((16, 16))
        assert S.energy_ratio_high_low(S.dft2_forward(img)).value == pytest.approx(
            S.energy_ratio_high_low(img).value)

    def test_feature_map_average(self):
        rng = np.random.default_rng(11)
        fmap = rng.standard_normal((2, 3, 8, 8))
        per = [S.energy_ratio_high_low(fmap[n, c]).value for n in range(2) for c in range(3)]
        assert S.energy_ratio_high_low(fmap).value == pytest.approx(np.mean(per))

    def test_dead_channels_skipped(self):
        fmap = np.zeros((1, 2, 8, 8))
        fmap[0, 0] = np.random.default_rng(12).standard_normal((8, 8))
        assert S.energy_ratio_high_low(fmap).value == pytest.approx(S.energy_ratio_high_low(fmap[0, 0]).value)

    def test_quarter_area(self):
        for h, w in [(8, 8), (32, 32), (16, 12)]:
            m = S.central_quarter_mask(h, w)
            assert m.sum() == h * w // 4
            assert m[h // 2, w // 2]


def lattice_delta_bandwidth(n, fraction):
    """Flat spectrum: count lattice points inside the disc, radius by radius."""
    r_max = n / 2
    dists = sorted(math.hypot(i, j) for i in range(-n // 2, n // 2) for j in range(-n // 2, n // 2)
                   if math.hypot(i, j) <= r_max)
    need = fraction * len(dists)
    count = 0
    for d in dists:
        count += 1
        if count >= need - 1e-9:
            return d / r_max


class TestKernelBandwidth:
    def test_delta_flat_spectrum(self):
        k = np.zeros((7, 7))
        k[3, 3] = 1.0
        bw = S.kernel_bandwidth(k)
        assert bw.value == pytest.approx(lattice_delta_bandwidth(64, 0.9), abs=1e-12)
        assert bw.value == pytest.approx(math.sqrt(0.9), abs=0.01)

    def test_box_below_delta(self):
        delta = np.zeros((7, 7))
        delta[3, 3] = 1
        assert S.kernel_bandwidth(np.full((7, 7), 1 / 49)).value < S.kernel_bandwidth(delta).value

    def test_scale_invariant(self):
        k = np.random.default_rng(13).standard_normal((7, 7))
        base = S.kernel_bandwidth(k).value
        assert 0 < base <= 1
        for c in (-3.0, 1e-3, 250.0):
            assert S.kernel_bandwidth(c * k).value == base

    def test_zero_kernel(self):
        bw = S.kernel_bandwidth(np.zeros((3, 3)))
        assert bw.zero_kernel and bw.value == 0.0

    def test_too_large(self):
        with pytest.raises(ValueError):
            S.kernel_bandwidth(np.ones((9, 9)), pad_to=8)

    def test_histogram_csv(self, tmp_path):
        w = np.random.default_rng(14).standard_normal((4, 1, 7, 7))
        rows = S.bandwidth_histograms([("stages.0.0.dw1", "0", w)], bins=5)
        assert sum(r["value"] for r in rows if r["metric"].startswith("hist")) == 4
        path = tmp_path / "bw.csv"
        S.write_metric_csv(rows, path)
        with open(path) as fh:
            reader = csv.reader(fh)
            assert next(reader) == ["layer", "stage", "metric", "value"]
            assert len(list(reader)) == 6
