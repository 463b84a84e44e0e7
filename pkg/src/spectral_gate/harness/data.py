"""Datasets: the CIFAR-10 binary format, a synthetic frequency-band task, and a seeded batch iterator."""
from __future__ import annotations

import os
from dataclasses import dataclass
from pathlib import Path
from typing import Iterator, Optional, Sequence

import numpy as np

from ..spectral import band_edges, band_masks, centered_ifft2, normalize_radii

CIFAR_MEAN = np.array([0.4914, 0.4822, 0.4465], dtype=np.float32)
CIFAR_STD = np.array([0.2470, 0.2435, 0.2616], dtype=np.float32)
CIFAR_TRAIN_FILES = [f"data_batch_{i}.bin" for i in range(1, 6)]
CIFAR_TEST_FILE = "test_batch.bin"
RECORD_BYTES = 1 + 3 * 32 * 32
DATA_ENV = "SPECTRAL_GATE_DATA"


@dataclass
class Dataset:
    """Unnormalised images ``(N, C, H, W)`` with labels and the channel statistics used to normalise them."""

    images: np.ndarray
    labels: np.ndarray
    mean: np.ndarray
    std: np.ndarray
    num_classes: int = 10
    name: str = "dataset"

    def __post_init__(self):
        if len(self.images) != len(self.labels):
            raise ValueError(f"{len(self.images)} images but {len(self.labels)} labels")

    def __len__(self):
        return len(self.labels)

    def normalize(self, images: np.ndarray) -> np.ndarray:
        return ((images - self.mean[:, None, None]) / self.std[:, None, None]).astype(np.float32)

    def subset(self, n: Optional[int], seed: int = 0) -> "Dataset":
        """First ``n`` items of a seeded permutation (the whole set when ``n`` is None or too large)."""
        if n is None or n >= len(self):
            return self
        idx = np.sort(np.random.default_rng(seed).permutation(len(self))[:n])
        return Dataset(self.images[idx], self.labels[idx], self.mean, self.std, self.num_classes, self.name)


@dataclass
class Splits:
    train: Dataset
    test: Dataset


def parse_cifar_records(blob: bytes, filename: str = "<bytes>") -> tuple[np.ndarray, np.ndarray]:
    """Byte 0 is the label, bytes 1..3072 the R, G, B planes of a 32×32 image."""
    if len(blob) == 0 or len(blob) % RECORD_BYTES:
        raise ValueError(f"{filename}: size {len(blob)} is not a whole number of {RECORD_BYTES}-byte records")
    rec = np.frombuffer(blob, dtype=np.uint8).reshape(-1, RECORD_BYTES)
    labels = rec[:, 0].astype(np.int64)
    if labels.max() > 9:
        raise ValueError(f"{filename}: label {labels.max()} out of range")
    images = rec[:, 1:].reshape(-1, 3, 32, 32).astype(np.float32) / 255.0
    return images, labels


def find_cifar_dir(root=None) -> Optional[Path]:
    """Locate the binary batches under ``root`` or ``$SPECTRAL_GATE_DATA``; None when absent."""
    root = root or os.environ.get(DATA_ENV)
    if not root:
        return None
    for cand in (Path(root), Path(root) / "cifar-10-batches-bin"):
        if (cand / CIFAR_TEST_FILE).exists():
            return cand
    return None


def _read(path: Path, expected_records: int) -> tuple[np.ndarray, np.ndarray]:
    if not path.exists():
        raise FileNotFoundError(f"{path}: CIFAR-10 batch file is missing")
    blob = path.read_bytes()
    if len(blob) != expected_records * RECORD_BYTES:
        raise ValueError(f"{path}: expected {expected_records * RECORD_BYTES} bytes, found {len(blob)} (truncated?)")
    return parse_cifar_records(blob, str(path))


def load_cifar10(directory=None) -> Splits:
    """50k train + 10k test images in [0, 1] with the standard channel statistics."""
    d = find_cifar_dir(directory)
    if d is None:
        where = directory or os.environ.get(DATA_ENV) or "<unset>"
        raise FileNotFoundError(f"{Path(where) / CIFAR_TEST_FILE}: CIFAR-10 binary batches not found")
    parts = [_read(d / f, 10000) for f in CIFAR_TRAIN_FILES]
    tr_x = np.concatenate([p[0] for p in parts])
    tr_y = np.concatenate([p[1] for p in parts])
    te_x, te_y = _read(d / CIFAR_TEST_FILE, 10000)
    return Splits(Dataset(tr_x, tr_y, CIFAR_MEAN, CIFAR_STD, 10, "cifar10-train"),
                  Dataset(te_x, te_y, CIFAR_MEAN, CIFAR_STD, 10, "cifar10-test"))


def default_band_radii(classes: int, size: int) -> list[float]:
    """Evenly spaced cuts so ``classes`` bands cover radius 0 .. size/2."""
    return list(np.linspace(0, size / 2, classes + 1)[1:-1])


def synth_frequency_dataset(seed: int, n: int, classes: int = 4, size: int = 32, channels: int = 3,
                            radii: Optional[Sequence[float]] = None, noise_fraction: float = 0.05) -> Dataset:
    """Images whose class is the radial band holding their energy.

    Each channel is random complex noise restricted to band ``label``; white
    noise carrying ``noise_fraction`` of the energy is added on top.  Images
    are zero-mean per channel at the DC bin except for class 0.
    """
    if classes < 2:
        raise ValueError("need at least two classes")
    radii = normalize_radii(radii if radii is not None else default_band_radii(classes, size))
    if len(band_edges(radii)) != classes:
        raise ValueError(f"{len(radii)} cuts give {len(radii) + 1} bands, not {classes}")
    rng = np.random.default_rng(seed)
    masks = band_masks(size, size, radii)
    labels = rng.integers(0, classes, n)
    images = np.empty((n, channels, size, size), dtype=np.float32)
    for i, k in enumerate(labels):
        z = (rng.standard_normal((channels, size, size)) + 1j * rng.standard_normal((channels, size, size)))
        sig = centered_ifft2(z * masks[k]).real
        sig /= np.sqrt(np.mean(sig ** 2, axis=(1, 2), keepdims=True)) + 1e-12
        noise = rng.standard_normal((channels, size, size))
        noise *= np.sqrt(noise_fraction / (1 - noise_fraction)) / np.sqrt(np.mean(noise ** 2))
        images[i] = sig + noise
    mean = images.mean(axis=(0, 2, 3)).astype(np.float32)
    std = images.std(axis=(0, 2, 3)).astype(np.float32)
    return Dataset(images, labels.astype(np.int64), mean, std, classes, f"synth-bands-{seed}")


def synth_splits(seed: int, n_train: int, n_test: int, classes: int = 4, size: int = 32, **kw) -> Splits:
    train = synth_frequency_dataset(seed, n_train, classes, size, **kw)
    test = synth_frequency_dataset(seed + 10_000, n_test, classes, size, **kw)
    test.mean, test.std = train.mean, train.std
    return Splits(train, test)


def random_crop_flip(batch: np.ndarray, rng: np.random.Generator, crop_pad: int = 4, flip: bool = True) -> np.ndarray:
    n, c, h, w = batch.shape
    out = batch
    if crop_pad:
        padded = np.pad(batch, ((0, 0), (0, 0), (crop_pad, crop_pad), (crop_pad, crop_pad)))
        oy = rng.integers(0, 2 * crop_pad + 1, n)
        ox = rng.integers(0, 2 * crop_pad + 1, n)
        out = np.stack([padded[i, :, oy[i]:oy[i] + h, ox[i]:ox[i] + w] for i in range(n)])
    if flip:
        mask = rng.random(n) < 0.5
        out = out.copy() if out is batch else out
        out[mask] = out[mask, :, :, ::-1]
    return out


def iterate_batches(data: Dataset, batch_size: int, rng: np.random.Generator, shuffle: bool = True,
                    crop_pad: int = 0, flip: bool = False) -> Iterator[tuple[np.ndarray, np.ndarray]]:
    """Normalised float32 batches; order and augmentation come only from ``rng``."""
    order = rng.permutation(len(data)) if shuffle else np.arange(len(data))
    for start in range(0, len(order), batch_size):
        idx = order[start:start + batch_size]
        x = data.images[idx]
        if crop_pad or flip:
            x = random_crop_flip(x, rng, crop_pad, flip)
        yield data.normalize(x), data.labels[idx]
