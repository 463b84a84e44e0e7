"""2-D Fourier toolkit: radial band decomposition and frequency diagnostics.

All spectra are DC-centred: the zero-frequency coefficient of an ``H x W``
grid sits at ``(H // 2, W // 2)``.  The forward transform is unnormalised,
so a constant image ``c`` has the single coefficient ``c * H * W`` and
Parseval reads ``sum |x|^2 == sum |X|^2 / (H * W)``.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Callable, Iterable, NamedTuple, Sequence

import numpy as np

from .activations import Activation, numpy_activation

# --------------------------------------------------------------------------
# transforms
# --------------------------------------------------------------------------


@dataclass
class Spectrum:
    coeffs: np.ndarray
    height: int
    width: int
    source_norm: str = "backward"

    @property
    def dc_index(self) -> tuple[int, int]:
        return self.height // 2, self.width // 2

    def energy(self) -> float:
        return float(np.sum(np.abs(self.coeffs) ** 2))


def centered_fft2(x: np.ndarray) -> np.ndarray:
    """Unnormalised FFT over the last two axes, shifted so DC is centred."""
    return np.fft.fftshift(np.fft.fft2(x, axes=(-2, -1)), axes=(-2, -1))


def centered_ifft2(z: np.ndarray) -> np.ndarray:
    return np.fft.ifft2(np.fft.ifftshift(z, axes=(-2, -1)), axes=(-2, -1))


def dft2_forward(image) -> Spectrum:
    image = np.asarray(image)
    if image.ndim != 2 or min(image.shape) < 1:
        raise ValueError(f"dft2_forward expects a non-empty 2-D image, got shape {image.shape}")
    h, w = image.shape
    return Spectrum(centered_fft2(image), h, w)


def dft2_inverse(spec: Spectrum) -> np.ndarray:
    out = centered_ifft2(spec.coeffs)
    return out.real


def radial_distance(height: int, width: int) -> np.ndarray:
    """Euclidean distance of every centred-grid coefficient from DC, in pixels."""
    ky = np.arange(height) - height // 2
    kx = np.arange(width) - width // 2
    return np.sqrt(ky[:, None] ** 2 + kx[None, :] ** 2)


# --------------------------------------------------------------------------
# radial decomposition
# --------------------------------------------------------------------------


@dataclass
class RadialMask:
    """Low region ``d < cutoff``; the high region is its exact complement."""

    cutoff: float
    height: int
    width: int

    def __post_init__(self):
        if self.cutoff < 0:
            raise ValueError(f"cutoff must be non-negative, got {self.cutoff}")

    @property
    def low(self) -> np.ndarray:
        return radial_distance(self.height, self.width) < self.cutoff

    @property
    def high(self) -> np.ndarray:
        return ~self.low


def _split_by_masks(image: np.ndarray, masks: Sequence[np.ndarray]) -> list[np.ndarray]:
    z = centered_fft2(np.asarray(image, dtype=np.result_type(image, np.float32)))
    out_dtype = np.asarray(image).dtype if np.asarray(image).dtype.kind == "f" else np.float64
    return [centered_ifft2(z * m).real.astype(out_dtype, copy=False) for m in masks]


def radial_decompose(image, r: float) -> tuple[np.ndarray, np.ndarray]:
    """Split ``image`` (``..., H, W``; channel-wise) into low and high parts at radius ``r``."""
    image = np.asarray(image)
    h, w = image.shape[-2:]
    mask = RadialMask(r, h, w)
    low, high = _split_by_masks(image, [mask.low, mask.high])
    return low, high


def normalize_radii(radii: Iterable[float]) -> list[float]:
    """Interior cut radii: drops a leading 0 and a trailing inf, checks ordering."""
    vals = [float(r) for r in radii]
    if vals and vals[0] == 0.0:
        vals = vals[1:]
    if vals and math.isinf(vals[-1]):
        vals = vals[:-1]
    if not vals:
        raise ValueError("at least one positive finite radius is required")
    if any(not math.isfinite(r) or r <= 0 for r in vals):
        raise ValueError(f"radii must be positive and finite between the brackets, got {list(radii)}")
    if any(b <= a for a, b in zip(vals, vals[1:])):
        raise ValueError(f"radii must be strictly increasing, got {vals}")
    return vals


def band_edges(radii: Iterable[float]) -> list[tuple[float, float]]:
    """``[(0, r1), (r1, r2), ..., (rk, inf)]`` for the given cut radii."""
    cuts = [0.0] + normalize_radii(radii) + [math.inf]
    return list(zip(cuts[:-1], cuts[1:]))


@dataclass
class BandSplit:
    radii: list[float]
    components: list[np.ndarray] = field(repr=False)

    @property
    def edges(self) -> list[tuple[float, float]]:
        return band_edges(self.radii)

    def reconstruct(self) -> np.ndarray:
        return np.sum(self.components, axis=0)


def band_masks(height: int, width: int, radii: Iterable[float]) -> list[np.ndarray]:
    d = radial_distance(height, width)
    return [(d >= lo) & (d < hi) for lo, hi in band_edges(radii)]


def band_split(image, radii: Iterable[float]) -> BandSplit:
    """Band ``i`` keeps coefficients with ``r[i-1] <= d < r[i]`` (``r[0]=0``, ``r[-1]=inf``)."""
    image = np.asarray(image)
    cuts = normalize_radii(radii)
    h, w = image.shape[-2:]
    return BandSplit(cuts, _split_by_masks(image, band_masks(h, w, cuts)))


def band_energy_fractions(image, radii: Iterable[float]) -> np.ndarray:
    """Share of spectral energy per band (summed over any leading axes)."""
    image = np.asarray(image)
    h, w = image.shape[-2:]
    e = np.abs(centered_fft2(image)) ** 2
    e = e.reshape(-1, h, w).sum(axis=0)
    parts = np.array([e[m].sum() for m in band_masks(h, w, radii)])
    return parts / parts.sum()


# --------------------------------------------------------------------------
# convolution theorem
# --------------------------------------------------------------------------


def circular_convolve2d(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Direct 2-D circular convolution ``c[k] = sum_m a[m] b[(k - m) mod N]``.

    Evaluated as one circulant matrix product per row offset, so no FFT is
    involved.
    """
    h, w = a.shape
    cols = (np.arange(w)[None, :] - np.arange(w)[:, None]) % w  # [j, k] -> (k - j) mod w
    out = np.zeros((h, w), dtype=np.result_type(a, b, np.complex128))
    for m1 in range(h):
        shifted = np.roll(b, m1, axis=0)  # row k1 holds b[(k1 - m1) mod h]
        out += shifted @ a[m1][cols]
    return out


def verify_convolution_theorem(u, v) -> float:
    """Max abs difference between ``u * v`` and ``F^-1(U (*) V) / (H W)``."""
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    if u.shape != v.shape or u.ndim != 2:
        raise ValueError(f"u and v must be 2-D of equal shape, got {u.shape} and {v.shape}")
    h, w = u.shape
    conv = circular_convolve2d(np.fft.fft2(u), np.fft.fft2(v)) / (h * w)
    return float(np.max(np.abs(np.fft.ifft2(conv) - u * v)))


def band_limited_field(shape: tuple[int, int], omega: float, rng: np.random.Generator) -> np.ndarray:
    """Real random image whose spectrum lies inside radius ``omega`` (inclusive)."""
    h, w = shape
    d = radial_distance(h, w)
    z = (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) * (d <= omega)
    # real part of the inverse keeps the (symmetric) support
    return centered_ifft2(z).real


class SupportReport(NamedTuple):
    omega: float
    outside_fraction: float  # product energy beyond radius 2*omega / total
    max_radius: float  # largest radius carrying more than `tol` of the peak energy


def product_support(u: np.ndarray, omega: float, tol: float = 1e-12) -> SupportReport:
    """Spectral support of the self-product ``u * u`` relative to ``2 * omega``."""
    h, w = u.shape
    e = np.abs(centered_fft2(u * u)) ** 2
    d = radial_distance(h, w)
    outside = float(e[d > 2 * omega + 1e-9].sum() / e.sum())
    max_r = float(d[e > tol * e.max()].max())
    return SupportReport(omega, outside, max_r)


# --------------------------------------------------------------------------
# activation smoothness vs spectral decay
# --------------------------------------------------------------------------

PROBE_FUNCTIONS: dict[str, Callable[[np.ndarray], np.ndarray]] = {
    "step": lambda t: (t >= 0).astype(float),
}


@dataclass
class DecayFit:
    activation: str
    exponent: float
    residual: float
    omega_range: tuple[float, float]
    n_points: int
    degenerate: bool = False


def _resolve_fn(activation) -> tuple[str, Callable]:
    if callable(activation) and not isinstance(activation, (str, Activation)):
        return getattr(activation, "__name__", "custom"), activation
    if isinstance(activation, str) and activation.lower() in PROBE_FUNCTIONS:
        return activation.lower(), PROBE_FUNCTIONS[activation.lower()]
    act = Activation.parse(activation)
    return act.value, numpy_activation(act)


def taper(t: np.ndarray, half_width: float, power: int = 2) -> np.ndarray:
    """Hann window over ``[-T, T]`` raised to ``power`` (power 1 is plain Hann)."""
    w = 0.5 * (1.0 + np.cos(np.pi * t / half_width))
    return np.where(np.abs(t) <= half_width, w, 0.0) ** power


def activation_decay_fit(activation, half_width: float = 8.0, n_samples: int = 4096,
                         taper_power: int = 2, detrend: bool = False,
                         floor: float = 1e-12) -> DecayFit:
    """Fit ``|F(w)| ~ w^-n`` for a tapered activation over the middle two decades of ``w``.

    The slope is fitted on ~200 log-spaced frequency bins; bins below
    ``floor * max|F|`` (round-off) are dropped.  ``detrend`` subtracts the
    least-squares line first, which makes the identity degenerate.
    """
    name, fn = _resolve_fn(activation)
    t = np.linspace(-half_width, half_width, n_samples, endpoint=False)
    dt = t[1] - t[0]
    y = np.asarray(fn(t), dtype=np.float64)
    scale = float(np.max(np.abs(y))) if y.size else 0.0
    if detrend:
        y = y - np.polyval(np.polyfit(t, y, 1), t)
    mag = np.abs(np.fft.rfft(y * taper(t, half_width, taper_power))) * dt
    omega = 2 * np.pi * np.fft.rfftfreq(n_samples, dt)
    centre = math.sqrt(omega[1] * omega[-1])
    lo, hi = centre / 10.0, centre * 10.0
    band = np.nonzero((omega >= lo) & (omega <= hi))[0]
    idx = np.unique(np.round(np.geomspace(band[0], band[-1], 200)).astype(int))
    peak = mag.max()
    if peak <= 1e-300 or np.max(np.abs(y)) <= 1e-9 * scale:
        return DecayFit(name, 0.0, 0.0, (lo, hi), 0, degenerate=True)
    idx = idx[mag[idx] > floor * peak]
    if len(idx) < 10:
        return DecayFit(name, 0.0, 0.0, (lo, hi), len(idx), degenerate=True)
    lx, ly = np.log(omega[idx]), np.log(mag[idx])
    slope, icpt = np.polyfit(lx, ly, 1)
    resid = float(np.sqrt(np.mean((ly - (slope * lx + icpt)) ** 2)))
    return DecayFit(name, float(-slope), resid, (lo, hi), len(idx))


# --------------------------------------------------------------------------
# energy ratios and kernel bandwidth
# --------------------------------------------------------------------------


class EnergyRatio(NamedTuple):
    value: float
    low_energy_zero: bool


def central_quarter_mask(height: int, width: int) -> np.ndarray:
    """Centred rectangle with half the extent per axis (a quarter of the area)."""
    hh, hw = max(1, height // 2), max(1, width // 2)
    y0 = height // 2 - hh // 2
    x0 = width // 2 - hw // 2
    m = np.zeros((height, width), dtype=bool)
    m[y0:y0 + hh, x0:x0 + hw] = True
    return m


def _ratio_maps(x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    h, w = x.shape[-2:]
    e = np.abs(centered_fft2(x)) ** 2
    m = central_quarter_mask(h, w)
    return e[..., ~m].sum(axis=-1), e[..., m].sum(axis=-1)


def energy_ratio_high_low(x) -> EnergyRatio:
    """High/low spectral energy ratio; low is the central quarter-area region.

    ``x`` may be a :class:`Spectrum`, a 2-D image, or a ``(C, H, W)`` /
    ``(N, C, H, W)`` feature map, in which case each channel is transformed
    and the ratios are averaged.  Channels with no energy at all are skipped.
    """
    if isinstance(x, Spectrum):
        e = np.abs(x.coeffs) ** 2
        m = central_quarter_mask(x.height, x.width)
        high, low = np.array([e[~m].sum()]), np.array([e[m].sum()])
    else:
        arr = np.asarray(getattr(x, "data", x), dtype=np.float64)
        if arr.ndim < 2:
            raise ValueError("energy_ratio_high_low needs at least a 2-D array")
        high, low = _ratio_maps(arr)
        high, low = high.ravel(), low.ravel()
    total = high + low
    scale = total.max() if total.size else 0.0
    live = total > 1e-30 * max(scale, 1e-300)
    if not live.any():
        return EnergyRatio(0.0, False)
    high, low = high[live], low[live]
    if np.any(low <= 1e-30 * scale):
        return EnergyRatio(math.inf, True)
    return EnergyRatio(float(np.mean(high / low)), False)


class Bandwidth(NamedTuple):
    value: float
    zero_kernel: bool


def kernel_bandwidth(kernel, pad_to: int = 64, energy_fraction: float = 0.9) -> Bandwidth:
    """Normalised radius enclosing ``energy_fraction`` of a kernel's power spectrum.

    The kernel is zero-padded to ``pad_to x pad_to``; only coefficients inside
    the inscribed disc (radius ``pad_to / 2``) take part, and the result is
    the enclosing radius divided by ``pad_to / 2``.
    """
    k = np.asarray(kernel, dtype=np.float64)
    if k.ndim != 2 or k.shape[0] > pad_to or k.shape[1] > pad_to:
        raise ValueError(f"kernel {k.shape} must be 2-D and no larger than {pad_to}")
    if not 0 < energy_fraction <= 1:
        raise ValueError("energy_fraction must lie in (0, 1]")
    padded = np.zeros((pad_to, pad_to))
    padded[:k.shape[0], :k.shape[1]] = k
    e = np.abs(centered_fft2(padded)) ** 2
    r_max = pad_to / 2
    d = radial_distance(pad_to, pad_to)
    inside = d <= r_max
    dist, energy = d[inside], e[inside]
    total = energy.sum()
    if total <= 1e-300:
        return Bandwidth(0.0, True)
    order = np.argsort(dist, kind="stable")
    cum = np.cumsum(energy[order])
    pos = int(np.searchsorted(cum, energy_fraction * total * (1 - 1e-12)))
    return Bandwidth(float(dist[order][min(pos, len(cum) - 1)] / r_max), False)


def layer_bandwidths(weight: np.ndarray, pad_to: int = 64, energy_fraction: float = 0.9) -> np.ndarray:
    """Bandwidth of every 2-D kernel slice of an OIHW weight tensor."""
    w = np.asarray(weight)
    flat = w.reshape(-1, w.shape[-2], w.shape[-1])
    return np.array([kernel_bandwidth(k, pad_to, energy_fraction).value for k in flat])


def bandwidth_histograms(named_weights: Iterable[tuple[str, str, np.ndarray]], bins: int = 20,
                         pad_to: int = 64, energy_fraction: float = 0.9) -> list[dict]:
    """Histogram rows ``{layer, stage, metric, value}`` for each spatial conv kernel set."""
    edges = np.linspace(0.0, 1.0, bins + 1)
    rows = []
    for layer, stage, weight in named_weights:
        bw = layer_bandwidths(weight, pad_to, energy_fraction)
        counts, _ = np.histogram(bw, bins=edges)
        for lo, hi, c in zip(edges[:-1], edges[1:], counts):
            rows.append({"layer": layer, "stage": stage, "metric": f"hist[{lo:.2f},{hi:.2f})", "value": int(c)})
        rows.append({"layer": layer, "stage": stage, "metric": "mean_bandwidth", "value": float(bw.mean())})
    return rows


CSV_FIELDS = ("layer", "stage", "metric", "value")


def write_metric_csv(rows: Iterable[dict], path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=CSV_FIELDS)
        writer.writeheader()
        for row in rows:
            writer.writerow({k: row[k] for k in CSV_FIELDS})
