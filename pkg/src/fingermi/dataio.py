"""Epoch file format, synthetic EEG generation, and dataset splitting.

The EEGF container is a small little-endian binary format:

    offset  field
    0       magic "EEGF"
    4       version        u32 (=1)
    8       fs             f32
    12      n_epochs       u32
    16      n_channels     u32
    20      n_samples      u32
    24      channel names  n_channels x 8 ASCII bytes, space padded
    ...     labels         n_epochs x u8 (class in 0..4)
    ...     data           n_epochs*n_channels*n_samples f32,
                           epoch-major then channel-major

Samples are stored as f32 (memory datasets stay f64); the rounding is far
below every tolerance used downstream.

The synthetic generator stands in for an unavailable private recording: each
trial is unit-variance pink noise on all channels plus a 10 Hz burst on a
class-specific channel subset, amplitude-modulated by a raised-cosine
envelope whose onset latency is also class-specific. Both spatial (which
channels) and temporal (when) structure are therefore informative. The
biased fixture variant makes two classes much easier to detect than the
rest, which reliably skews a plain cross-entropy model's predictions toward
them.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field

import numpy as np
from scipy import fft as _fft

from .prng import Pcg32, STREAM_SYNTH
from .signal import DEFAULT_CHANNELS, EpochedDataset

MAGIC = b"EEGF"
VERSION = 1
N_CLASSES = 5


class EegfError(ValueError):
    """Base class for malformed EEGF containers."""


class EegfMagicError(EegfError):
    pass


class EegfVersionError(EegfError):
    pass


class EegfSizeError(EegfError):
    """Declared sizes do not match the payload byte length."""


def write_eegf(ds: EpochedDataset, path) -> None:
    if ds.labels.size and (ds.labels.min() < 0 or ds.labels.max() >= N_CLASSES):
        raise ValueError(f"labels must lie in [0, {N_CLASSES})")
    n_epochs, n_channels, n_samples = ds.epochs.shape
    header = MAGIC + struct.pack("<IfIII", VERSION, ds.fs,
                                 n_epochs, n_channels, n_samples)
    names = b""
    for name in ds.channel_names:
        enc = name.encode("ascii")
        if len(enc) > 8:
            raise ValueError(f"channel name {name!r} exceeds 8 bytes")
        names += enc.ljust(8)
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(names)
        fh.write(ds.labels.astype(np.uint8).tobytes())
        fh.write(ds.epochs.astype("<f4").tobytes())


def read_eegf(path) -> EpochedDataset:
    with open(path, "rb") as fh:
        blob = fh.read()
    if len(blob) < 24:
        raise EegfSizeError(f"file is only {len(blob)} bytes, header needs 24")
    if blob[:4] != MAGIC:
        raise EegfMagicError(f"bad magic {blob[:4]!r}")
    version, fs, n_epochs, n_channels, n_samples = struct.unpack("<IfIII", blob[4:24])
    if version != VERSION:
        raise EegfVersionError(f"unsupported version {version}")
    expected = 24 + 8 * n_channels + n_epochs + 4 * n_epochs * n_channels * n_samples
    if len(blob) != expected:
        raise EegfSizeError(f"expected {expected} bytes, file has {len(blob)}")
    pos = 24
    names = tuple(blob[pos + 8 * i:pos + 8 * (i + 1)].decode("ascii").rstrip()
                  for i in range(n_channels))
    pos += 8 * n_channels
    labels = np.frombuffer(blob, dtype=np.uint8, count=n_epochs, offset=pos)
    if labels.size and labels.max() >= N_CLASSES:
        raise EegfError(f"label {labels.max()} out of range")
    pos += n_epochs
    data = np.frombuffer(blob, dtype="<f4", offset=pos)
    epochs = data.reshape(n_epochs, n_channels, n_samples).astype(np.float64)
    return EpochedDataset(float(fs), names, epochs, labels.astype(np.int64))


# ---------------------------------------------------------------------------
# synthetic EEG
# ---------------------------------------------------------------------------

# overlapping subsets around the central electrode row (C3..C4 region), so
# classes are not trivially separable by channel alone
_DEFAULT_CHANNEL_MAP = (
    (9, 10, 11),
    (10, 11, 12),
    (11, 12, 13),
    (12, 13, 14),
    (13, 14, 15),
)
_DEFAULT_LATENCY = (0.2, 0.9, 1.6, 2.3, 2.9)


@dataclass
class SynthSpec:
    n_trials_per_class: int = 25
    n_channels: int = 24
    fs: float = 250.0
    duration: float = 4.0
    snr: float = 1.0
    class_channel_map: tuple[tuple[int, ...], ...] = _DEFAULT_CHANNEL_MAP
    class_latency: tuple[float, ...] = _DEFAULT_LATENCY
    class_gain: tuple[float, ...] = (1.0, 1.0, 1.0, 1.0, 1.0)
    burst_duration: float = 1.0
    burst_hz: float = 10.0
    seed: int = 0

    def __post_init__(self):
        if len(self.class_channel_map) != N_CLASSES or len(self.class_latency) != N_CLASSES:
            raise ValueError(f"need {N_CLASSES} channel subsets and latencies")
        for subset in self.class_channel_map:
            if any(not 0 <= ch < self.n_channels for ch in subset):
                raise ValueError(f"channel subset {subset} outside 0..{self.n_channels - 1}")
        for lat in self.class_latency:
            if not 0 <= lat < self.duration:
                raise ValueError(f"latency {lat} outside [0, {self.duration})")


def _pink_noise(rng: Pcg32, n_channels: int, n_samples: int) -> np.ndarray:
    """1/f-shaped noise, exactly unit variance per channel."""
    white = rng.normal(n_channels * n_samples).reshape(n_channels, n_samples)
    spec = _fft.rfft(white, axis=1)
    freqs = np.arange(spec.shape[1], dtype=np.float64)
    scale = np.zeros_like(freqs)
    scale[1:] = 1.0 / np.sqrt(freqs[1:])
    shaped = _fft.irfft(spec * scale, n=n_samples, axis=1)
    std = shaped.std(axis=1, keepdims=True)
    return shaped / np.where(std > 0, std, 1.0)


def _burst(spec: SynthSpec, label: int, phase: float) -> np.ndarray:
    t = np.arange(round(spec.duration * spec.fs)) / spec.fs
    t0 = spec.class_latency[label]
    t1 = min(t0 + spec.burst_duration, spec.duration)
    env = np.zeros_like(t)
    inside = (t >= t0) & (t < t1)
    env[inside] = 0.5 * (1.0 - np.cos(2.0 * np.pi * (t[inside] - t0)
                                      / spec.burst_duration))
    return env * np.sin(2.0 * np.pi * spec.burst_hz * t + phase)


def synth_dataset(spec: SynthSpec) -> EpochedDataset:
    """Generate n_trials_per_class trials per class, deterministically."""
    rng = Pcg32(spec.seed, STREAM_SYNTH)
    n_samples = round(spec.duration * spec.fs)
    n_trials = spec.n_trials_per_class * N_CLASSES
    epochs = np.empty((n_trials, spec.n_channels, n_samples))
    labels = np.empty(n_trials, dtype=np.int64)
    names = (DEFAULT_CHANNELS if spec.n_channels == len(DEFAULT_CHANNELS)
             else tuple(f"S{i:02d}" for i in range(spec.n_channels)))
    i = 0
    for label in range(N_CLASSES):
        for _ in range(spec.n_trials_per_class):
            trial = _pink_noise(rng, spec.n_channels, n_samples)
            phase = 2.0 * np.pi * rng.uniform()
            burst = spec.snr * spec.class_gain[label] * _burst(spec, label, phase)
            for ch in spec.class_channel_map[label]:
                trial[ch] += burst
            epochs[i] = trial
            labels[i] = label
            i += 1
    return EpochedDataset(spec.fs, names, epochs, labels)


SYNTH_PRESETS = {
    # clearly learnable: strong bursts, distinct latencies
    "separable": SynthSpec(snr=4.0),
    # no class signal at all: accuracy must sit at chance
    "noise": SynthSpec(snr=0.0),
}


def make_biased_fixture(seed: int = 0, snr: float = 1.5) -> EpochedDataset:
    """Balanced labels, unbalanced separability.

    Classes 0-1 carry double-amplitude bursts; classes 2-3 are faint
    near-copies of them (same channels, slightly shifted latency) and class 4
    sits faintly in between, so a plain cross-entropy model funnels its
    predictions into classes 0-1.
    """
    spec = SynthSpec(
        snr=snr,
        class_gain=(2.0, 2.0, 1.0, 1.0, 1.0),
        class_channel_map=(
            (9, 10, 11), (12, 13, 14),
            (9, 10, 11), (12, 13, 14),
            (10, 11, 12, 13),
        ),
        class_latency=(0.4, 2.4, 0.7, 2.1, 1.4),
        seed=seed,
    )
    return synth_dataset(spec)


# ---------------------------------------------------------------------------
# dataset splitting
# ---------------------------------------------------------------------------

def stratified_kfold(labels, k: int = 5, seed: int = 0) -> list[tuple[np.ndarray, np.ndarray]]:
    """k stratified (train, test) index pairs.

    Test folds partition the index set; each holds ceil(n_c/k) or
    floor(n_c/k) trials of every class c. Within-class order is shuffled by
    the seed before dealing, so folds are reproducible.
    """
    labels = np.asarray(labels)
    if k < 2:
        raise ValueError(f"k must be >= 2 (k={k} leaves no train set)")
    rng = Pcg32(seed, 0)
    fold_bins: list[list[int]] = [[] for _ in range(k)]
    for cls in np.unique(labels):
        idx = np.flatnonzero(labels == cls)
        if idx.size < k:
            raise ValueError(f"class {cls} has {idx.size} trials, fewer than k={k}")
        rng.shuffle(idx)
        for pos, trial in enumerate(idx):
            fold_bins[pos % k].append(int(trial))
    folds = []
    all_idx = np.arange(labels.size)
    for test_list in fold_bins:
        test = np.sort(np.asarray(test_list, dtype=np.int64))
        mask = np.ones(labels.size, dtype=bool)
        mask[test] = False
        folds.append((all_idx[mask], test))
    return folds
