"""Training loop, stratified cross-validation, metrics, and the exact
Wilcoxon signed-rank validation used to compare decoders across subjects.

Determinism contract: identical (dataset, config, seed) produces a
bit-identical CvReport. Per-fold seeds derive as seed + fold_index; the
shuffle and dropout streams are separate PCG32 sequences of the fold seed.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, asdict
from fractions import Fraction

import numpy as np
from scipy.stats import rankdata

from . import losses as losses_mod
from .dataio import stratified_kfold
from .losses import LossSpec, PredictionHistogram
from .models import ModelSpec, Network, apply_max_norm, forward, init_params
from .optim import adam_init, adam_step
from .prng import Pcg32, STREAM_DROPOUT, STREAM_SHUFFLE
from .signal import EpochedDataset
from .tensor import backprop, log_softmax

EVAL_BATCH = 32


class TrainingDiverged(FloatingPointError):
    """Loss went non-finite; message carries the epoch/batch location."""


@dataclass
class TrainConfig:
    epochs: int = 100
    batch_size: int = 16
    loss: LossSpec = field(default_factory=LossSpec)
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    seed: int = 0
    shuffle: bool = True

    def __post_init__(self):
        if self.epochs < 1 or self.batch_size < 1:
            raise ValueError("epochs and batch_size must be >= 1")

    def echo(self) -> dict:
        d = asdict(self)
        d["loss"] = {"kind": self.loss.kind,
                     "weights": list(self.loss.weights) if self.loss.weights else None}
        return d


@dataclass
class EvalResult:
    accuracy: float
    confusion: np.ndarray          # rows true, columns predicted
    histogram: PredictionHistogram


@dataclass
class CvReport:
    model: str
    fold_accuracies: list[float]
    mean_accuracy: float
    std_accuracy: float
    confusion: np.ndarray          # pooled over folds: every trial tested once
    per_class_recall: list[float]
    prediction_histogram: list[int]
    config: dict

    def to_json(self) -> str:
        payload = {
            "model": self.model,
            "fold_accuracies": self.fold_accuracies,
            "mean_accuracy": self.mean_accuracy,
            "std_accuracy": self.std_accuracy,
            "confusion": self.confusion.tolist(),
            "per_class_recall": self.per_class_recall,
            "prediction_histogram": self.prediction_histogram,
            "config": self.config,
        }
        return json.dumps(payload, sort_keys=True, indent=2) + "\n"

    @staticmethod
    def from_json(text: str) -> "CvReport":
        d = json.loads(text)
        return CvReport(d["model"], d["fold_accuracies"], d["mean_accuracy"],
                        d["std_accuracy"], np.asarray(d["confusion"]),
                        d["per_class_recall"], d["prediction_histogram"],
                        d["config"])


def _batches(n: int, batch_size: int, order: np.ndarray):
    for start in range(0, n, batch_size):
        yield order[start:start + batch_size]


def train(network: Network, dataset: EpochedDataset, config: TrainConfig) -> list[float]:
    """Mini-batch Adam training; returns mean training loss per epoch.

    Each step: forward in training mode, loss per config.loss, backprop,
    Adam update, then the max-norm projection.
    """
    if dataset.n_trials == 0:
        raise ValueError("cannot train on an empty dataset")
    network.train_mode()
    state = adam_init(network.params, config.lr, config.beta1,
                      config.beta2, config.epsilon)
    shuffle_rng = Pcg32(config.seed, STREAM_SHUFFLE)
    drop_rng = Pcg32(config.seed, STREAM_DROPOUT)
    x_all = dataset.epochs[:, None, :, :]
    history = []
    for ep in range(config.epochs):
        order = np.arange(dataset.n_trials)
        if config.shuffle:
            shuffle_rng.shuffle(order)
        ep_loss, n_batches = 0.0, 0
        for bi, idx in enumerate(_batches(dataset.n_trials, config.batch_size, order)):
            logits = forward(network, x_all[idx], drop_rng)
            loss = config.loss.compute(log_softmax(logits), dataset.labels[idx])
            value = float(loss.data)
            if not np.isfinite(value):
                raise TrainingDiverged(
                    f"non-finite loss at epoch {ep}, batch {bi}")
            backprop(loss)
            adam_step(state, network.params)
            for p in network.params.values():
                p.grad = None
            apply_max_norm(network)
            ep_loss += value
            n_batches += 1
        history.append(ep_loss / n_batches)
    return history


def evaluate(network: Network, dataset: EpochedDataset,
             batch_size: int = EVAL_BATCH) -> EvalResult:
    """Argmax decoding over the dataset; logit ties break to the lowest
    class index."""
    if dataset.n_trials == 0:
        raise ValueError("cannot evaluate an empty dataset")
    network.eval_mode()
    k = network.spec.n_classes
    confusion = np.zeros((k, k), dtype=np.int64)
    x_all = dataset.epochs[:, None, :, :]
    for start in range(0, dataset.n_trials, batch_size):
        idx = slice(start, start + batch_size)
        logits = forward(network, x_all[idx]).data
        pred = logits.argmax(axis=1)  # first max = lowest class index
        for t, p in zip(dataset.labels[idx], pred):
            confusion[t, p] += 1
    accuracy = float(np.trace(confusion) / dataset.n_trials)
    hist = PredictionHistogram(confusion.sum(axis=0))
    return EvalResult(accuracy, confusion, hist)


def run_cv(dataset: EpochedDataset, spec: ModelSpec, config: TrainConfig,
           k: int = 5) -> CvReport:
    """k-fold stratified CV with a fresh network per fold; the pooled
    confusion matrix tests every trial exactly once."""
    folds = stratified_kfold(dataset.labels, k, config.seed)
    n_classes = spec.n_classes
    fold_acc: list[float] = []
    pooled = np.zeros((n_classes, n_classes), dtype=np.int64)
    for fold, (train_idx, test_idx) in enumerate(folds):
        fold_seed = config.seed + fold
        net = init_params(spec, fold_seed)
        fold_config = TrainConfig(config.epochs, config.batch_size, config.loss,
                                  config.lr, config.beta1, config.beta2,
                                  config.epsilon, fold_seed, config.shuffle)
        train(net, dataset.subset(train_idx), fold_config)
        result = evaluate(net, dataset.subset(test_idx))
        fold_acc.append(result.accuracy)
        pooled += result.confusion
    row_sums = pooled.sum(axis=1)
    recall = np.where(row_sums > 0, np.diag(pooled) / row_sums, 0.0)
    return CvReport(
        model=spec.name,
        fold_accuracies=fold_acc,
        mean_accuracy=float(np.mean(fold_acc)),
        std_accuracy=float(np.std(fold_acc)),
        confusion=pooled,
        per_class_recall=[float(r) for r in recall],
        prediction_histogram=[int(v) for v in pooled.sum(axis=0)],
        config=config.echo(),
    )


def make_cv_trainer(dataset: EpochedDataset, spec: ModelSpec, config: TrainConfig,
                    k: int = 5):
    """Adapter for losses.weight_sweep: maps a weight vector to one CV run."""

    def trainer(weights, seed):
        cfg = TrainConfig(config.epochs, config.batch_size,
                          LossSpec("bwce", tuple(float(w) for w in weights)),
                          config.lr, config.beta1, config.beta2,
                          config.epsilon, seed, config.shuffle)
        report = run_cv(dataset, spec, cfg, k)
        return (report.mean_accuracy, report.confusion,
                PredictionHistogram(np.asarray(report.prediction_histogram)))

    return trainer


# ---------------------------------------------------------------------------
# statistics
# ---------------------------------------------------------------------------

MAX_EXACT_N = 20


def wilcoxon_signed_rank(a, b) -> tuple[float, Fraction]:
    """Exact one-sided Wilcoxon signed-rank test of a > b.

    Zero differences are dropped; absolute differences are ranked with
    average ranks on ties; W is the sum of ranks of positive differences.
    The p-value enumerates all 2^n sign assignments (exact, so it is
    returned as a Fraction).
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape or a.ndim != 1:
        raise ValueError("need two equal-length 1-d score vectors")
    diff = a - b
    diff = diff[diff != 0]
    n = diff.size
    if n == 0:
        raise ValueError("all paired differences are zero; no test possible")
    if n > MAX_EXACT_N:
        raise ValueError(f"exact enumeration supports n <= {MAX_EXACT_N}, got {n}")
    ranks = rankdata(np.abs(diff))
    w = float(ranks[diff > 0].sum())
    # integer arithmetic: 2x ranks are integers even with average ties
    ranks2 = np.rint(ranks * 2).astype(np.int64)
    w2 = int(np.rint(w * 2))
    count = 0
    for mask in range(1 << n):
        s = 0
        m = mask
        i = 0
        while m:
            if m & 1:
                s += ranks2[i]
            m >>= 1
            i += 1
        if s >= w2:
            count += 1
    return w, Fraction(count, 1 << n)


def summarize_table(columns: dict[str, list[float]]) -> dict[str, tuple[float, float]]:
    """Arithmetic mean and population standard deviation per model column."""
    out = {}
    for name, vals in columns.items():
        arr = np.asarray(vals, dtype=np.float64)
        out[name] = (float(arr.mean()), float(arr.std()))
    return out


def check_reported_means(columns: dict[str, list[float]],
                         reported: dict[str, float],
                         tol: float = 5e-4) -> list[str]:
    """Provenance notes for any column whose quoted average disagrees with
    the column arithmetic."""
    notes = []
    stats = summarize_table(columns)
    for name, quoted in reported.items():
        if name not in stats:
            continue
        computed = stats[name][0]
        if abs(computed - quoted) > tol:
            notes.append(
                f"{name}: column mean computes to {computed:.4f} but the quoted "
                f"average is {quoted:.4f}; reporting the computed value")
    return notes


# ---------------------------------------------------------------------------
# report serialization
# ---------------------------------------------------------------------------

def write_report_json(report: CvReport, path) -> None:
    with open(path, "w") as fh:
        fh.write(report.to_json())


def write_confusion_csv(confusion: np.ndarray, path) -> None:
    k = confusion.shape[0]
    with open(path, "w", newline="") as fh:
        fh.write("true\\pred," + ",".join(str(i) for i in range(k)) + "\n")
        for i in range(k):
            fh.write(str(i) + "," + ",".join(str(int(v)) for v in confusion[i]) + "\n")


def write_folds_csv(report: CvReport, path) -> None:
    with open(path, "w", newline="") as fh:
        fh.write("fold,accuracy\n")
        for i, acc in enumerate(report.fold_accuracies):
            fh.write(f"{i},{acc!r}\n")
        fh.write(f"mean,{report.mean_accuracy!r}\n")
        fh.write(f"std,{report.std_accuracy!r}\n")
