"""Preprocessing chain: power-line notch, anti-aliased decimation, channel
selection, task-window epoching, and optional per-epoch normalization.

The notch is a biquad (RBJ audio-cookbook coefficients) run forward and
backward for zero phase. Decimation low-passes with a 101-tap Hamming
windowed-sinc FIR (cutoff 0.8 of the output Nyquist), applied zero-phase via
centered convolution over reflect-padded edges, then keeps every factor-th
sample. No band-pass filtering is applied anywhere; z-scoring is a separate,
toggleable step (config key preprocess.zscore, default on) because the
upstream processing it stands in for is not fully specified.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.signal import lfilter

# the 24 electrodes nearest the motor cortex, in recording order
DEFAULT_CHANNELS = (
    "F3", "F1", "Fz", "F2", "F4",
    "FC3", "FC1", "FC2", "FC4",
    "C3", "C1", "Cz", "C2", "C4",
    "CP3", "CP1", "CPz", "CP2", "CP4",
    "P3", "P1", "Pz", "P2", "P4",
)

NOTCH_HZ = 60.0
NOTCH_Q = 30.0
DECIMATE_FACTOR = 4
FIR_TAPS = 101
TASK_WINDOW = (0.0, 4.0)  # seconds relative to task onset


@dataclass
class Recording:
    """Continuous multichannel signal with task-onset events."""

    fs: float
    channel_names: tuple[str, ...]
    data: np.ndarray                      # [channels, samples]
    events: tuple[tuple[int, int], ...]   # (sample index, class label)

    def __post_init__(self):
        self.data = np.asarray(self.data, dtype=np.float64)
        self.channel_names = tuple(self.channel_names)
        self.events = tuple((int(s), int(l)) for s, l in self.events)
        if self.data.ndim != 2 or self.data.shape[0] != len(self.channel_names):
            raise ValueError(
                f"data must be [channels, samples] with one row per name; "
                f"got {self.data.shape} for {len(self.channel_names)} names")
        for s, _ in self.events:
            if not 0 <= s < self.data.shape[1]:
                raise ValueError(f"event at sample {s} outside recording")


@dataclass
class EpochedDataset:
    """Fixed-length labelled trials: epochs [trials, channels, samples]."""

    fs: float
    channel_names: tuple[str, ...]
    epochs: np.ndarray
    labels: np.ndarray

    def __post_init__(self):
        self.epochs = np.asarray(self.epochs, dtype=np.float64)
        self.labels = np.asarray(self.labels, dtype=np.int64)
        self.channel_names = tuple(self.channel_names)
        if self.epochs.ndim != 3:
            raise ValueError(f"epochs must be 3-d, got shape {self.epochs.shape}")
        if self.epochs.shape[1] != len(self.channel_names):
            raise ValueError("channel count does not match channel names")
        if self.labels.shape != (self.epochs.shape[0],):
            raise ValueError("need exactly one label per trial")

    @property
    def n_trials(self) -> int:
        return self.epochs.shape[0]

    def subset(self, idx) -> "EpochedDataset":
        return EpochedDataset(self.fs, self.channel_names,
                              self.epochs[idx], self.labels[idx])


def _reflect_pad(x: np.ndarray, pad: int) -> np.ndarray:
    return np.pad(x, [(0, 0)] * (x.ndim - 1) + [(pad, pad)], mode="reflect")


def notch_coefficients(f0: float, fs: float, q: float) -> tuple[np.ndarray, np.ndarray]:
    """Second-order IIR notch (b, a), unity passband gain."""
    if not 0 < f0 < fs / 2:
        raise ValueError(f"notch frequency {f0} Hz must lie below Nyquist {fs / 2} Hz")
    w0 = 2.0 * np.pi * f0 / fs
    alpha = np.sin(w0) / (2.0 * q)
    b = np.array([1.0, -2.0 * np.cos(w0), 1.0])
    a = np.array([1.0 + alpha, -2.0 * np.cos(w0), 1.0 - alpha])
    return b / a[0], a / a[0]


def notch_filter(rec: Recording, f0: float = NOTCH_HZ, q: float = NOTCH_Q) -> Recording:
    """Zero-phase 60 Hz notch: biquad applied forward then backward.

    Edge transients are tamed by reflect-padding three filter lengths at
    each end before the two passes.
    """
    b, a = notch_coefficients(f0, rec.fs, q)
    pad = 3 * max(len(a), len(b))
    x = _reflect_pad(rec.data, pad)
    y = lfilter(b, a, x, axis=-1)
    y = lfilter(b, a, y[..., ::-1], axis=-1)[..., ::-1]
    return Recording(rec.fs, rec.channel_names, y[..., pad:-pad], rec.events)


def design_lowpass(fs: float, cutoff: float, taps: int = FIR_TAPS) -> np.ndarray:
    """Hamming windowed-sinc low-pass with exactly unit DC gain."""
    if taps % 2 != 1:
        raise ValueError("tap count must be odd for a zero-phase centered FIR")
    n = np.arange(taps) - (taps - 1) / 2
    h = 2.0 * cutoff / fs * np.sinc(2.0 * cutoff / fs * n)
    h *= np.hamming(taps)
    return h / h.sum()


def decimate(rec: Recording, factor: int = DECIMATE_FACTOR) -> Recording:
    """Anti-alias low-pass then keep every factor-th sample.

    Cutoff is 0.8 of the output Nyquist. Event sample indices rescale by
    1/factor (floor); output fs is fs/factor.
    """
    if factor < 1:
        raise ValueError(f"decimation factor must be >= 1, got {factor}")
    if factor == 1:
        return rec
    h = design_lowpass(rec.fs, 0.8 * (rec.fs / 2.0 / factor))
    half = len(h) // 2
    x = _reflect_pad(rec.data, half)
    y = np.empty_like(rec.data)
    for ch in range(x.shape[0]):
        y[ch] = np.convolve(x[ch], h, mode="valid")
    out = y[:, ::factor]
    events = tuple((s // factor, l) for s, l in rec.events)
    return Recording(rec.fs / factor, rec.channel_names, out, events)


def select_channels(rec: Recording, names=DEFAULT_CHANNELS) -> Recording:
    """Subset/reorder rows to the requested channel order."""
    index = {name: i for i, name in enumerate(rec.channel_names)}
    missing = [n for n in names if n not in index]
    if missing:
        raise ValueError(f"unknown channel name(s): {', '.join(missing)}")
    rows = [index[n] for n in names]
    return Recording(rec.fs, tuple(names), rec.data[rows], rec.events)


def epoch(rec: Recording, window: tuple[float, float] = TASK_WINDOW) -> EpochedDataset:
    """Cut one fixed-length trial per event; window is (start, end) seconds
    relative to the event sample."""
    t0, t1 = window
    if t1 <= t0:
        raise ValueError("epoch window must have positive length")
    offset = round(t0 * rec.fs)
    length = round((t1 - t0) * rec.fs)
    n_samples = rec.data.shape[1]
    epochs = np.empty((len(rec.events), rec.data.shape[0], length))
    labels = np.empty(len(rec.events), dtype=np.int64)
    for i, (s, label) in enumerate(rec.events):
        start = s + offset
        if start < 0 or start + length > n_samples:
            raise ValueError(
                f"event {i} at sample {s}: window [{start}, {start + length}) "
                f"exceeds recording of {n_samples} samples")
        epochs[i] = rec.data[:, start:start + length]
        labels[i] = label
    return EpochedDataset(rec.fs, rec.channel_names, epochs, labels)


def zscore_epochs(ds: EpochedDataset) -> EpochedDataset:
    """Standardize each (trial, channel) trace to zero mean, unit variance.

    Flat traces are only mean-centered. This normalization is an assumption,
    not part of the published chain; disable with preprocess.zscore=off.
    """
    mean = ds.epochs.mean(axis=2, keepdims=True)
    std = ds.epochs.std(axis=2, keepdims=True)
    std = np.where(std > 0, std, 1.0)
    return EpochedDataset(ds.fs, ds.channel_names,
                          (ds.epochs - mean) / std, ds.labels)
