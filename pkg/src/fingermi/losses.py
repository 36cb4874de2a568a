"""Cross-entropy losses and the prediction-bias weight heuristic.

Three entry points share one implementation so that the unweighted loss and
the weighted loss with all-ones weights are bit-identical:

  * cross_entropy          - plain mean negative log-likelihood
  * weighted_cross_entropy - per-class factors alpha (inverse class counts
                             for the imbalance use case)
  * bias_weighted_cross_entropy - per-class factors tuned round by round to
                             counter skewed prediction histograms

`adjust_weights` implements the heuristic schedule: after each evaluation
round, classes predicted more often than the uniform share lose 0.05 of
weight and classes predicted less often gain 0.05, clamped to fixed bounds.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .tensor import Tensor, mul, smul, take_per_row

WEIGHT_STEP = 0.05
WEIGHT_BOUNDS = (0.5, 1.5)
SHARE_TOLERANCE = 0.02


@dataclass(frozen=True)
class LossSpec:
    """Which loss to train with; weights must be strictly positive."""

    kind: str = "ce"  # ce | wce | bwce
    weights: tuple[float, ...] | None = None

    def __post_init__(self):
        if self.kind not in ("ce", "wce", "bwce"):
            raise ValueError(f"unknown loss kind {self.kind!r}")
        if self.kind == "ce":
            if self.weights is not None:
                raise ValueError("plain cross-entropy takes no weights")
        else:
            if self.weights is None:
                raise ValueError(f"{self.kind} requires a weight vector")
            if min(self.weights) <= 0:
                raise ValueError("class weights must be strictly positive")

    def compute(self, log_probs: Tensor, labels) -> Tensor:
        if self.kind == "ce":
            return cross_entropy(log_probs, labels)
        w = np.asarray(self.weights, dtype=np.float64)
        if self.kind == "wce":
            return weighted_cross_entropy(log_probs, labels, w)
        return bias_weighted_cross_entropy(log_probs, labels, w)


@dataclass
class PredictionHistogram:
    """Per-class counts of argmax predictions over an evaluation set."""

    counts: np.ndarray

    def __post_init__(self):
        self.counts = np.asarray(self.counts, dtype=np.int64)
        if self.counts.ndim != 1 or self.counts.size == 0:
            raise ValueError("histogram needs a 1-d nonempty count vector")
        if (self.counts < 0).any():
            raise ValueError("histogram counts must be nonnegative")

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    def shares(self) -> np.ndarray:
        if self.total == 0:
            raise ValueError("empty prediction histogram")
        return self.counts / self.total


def _check_labels(log_probs: Tensor, labels) -> np.ndarray:
    labels = np.asarray(labels)
    k = log_probs.data.shape[1]
    if labels.min(initial=0) < 0 or labels.max(initial=0) >= k:
        raise ValueError(f"labels must lie in [0, {k})")
    return labels


def _weighted_nll(log_probs: Tensor, labels, weights: np.ndarray | None) -> Tensor:
    labels = _check_labels(log_probs, labels)
    n = log_probs.data.shape[0]
    picked = take_per_row(log_probs, labels)
    if weights is None:
        weights = np.ones(log_probs.data.shape[1])
    if weights.shape != (log_probs.data.shape[1],):
        raise ValueError(
            f"weight vector length {weights.shape} does not match "
            f"{log_probs.data.shape[1]} classes")
    if (weights <= 0).any():
        raise ValueError("class weights must be strictly positive")
    scaled = mul(picked, Tensor(weights[labels]))
    return smul(scaled.sum(), -1.0 / n)


def cross_entropy(log_probs: Tensor, labels) -> Tensor:
    """Mean of -log p(true class); pair with log_softmax upstream."""
    return _weighted_nll(log_probs, labels, None)


def weighted_cross_entropy(log_probs: Tensor, labels, alpha) -> Tensor:
    """Mean of -alpha[true] * log p(true class)."""
    return _weighted_nll(log_probs, labels, np.asarray(alpha, dtype=np.float64))


def bias_weighted_cross_entropy(log_probs: Tensor, labels, w) -> Tensor:
    """Identical functional form to weighted_cross_entropy; separate entry
    point so bias-mitigation runs are labelled distinctly in reports."""
    return _weighted_nll(log_probs, labels, np.asarray(w, dtype=np.float64))


def class_frequency_weights(counts) -> np.ndarray:
    """alpha_i = 1 / count_i, the imbalance-correction convention."""
    counts = np.asarray(counts, dtype=np.float64)
    if (counts <= 0).any():
        raise ValueError("class counts must be positive")
    return 1.0 / counts


def adjust_weights(w, hist: PredictionHistogram, step: float = WEIGHT_STEP,
                   bounds: tuple[float, float] = WEIGHT_BOUNDS,
                   tol: float = SHARE_TOLERANCE) -> np.ndarray:
    """One heuristic update: -step for over-predicted classes, +step for
    under-predicted ones, clamped to bounds; near-uniform classes unchanged."""
    w = np.asarray(w, dtype=np.float64)
    lo, hi = bounds
    if (w < lo - 1e-12).any() or (w > hi + 1e-12).any():
        raise ValueError(f"weights must start within bounds {bounds}")
    shares = hist.shares()
    if shares.size != w.size:
        raise ValueError("weight vector and histogram class counts disagree")
    uniform = 1.0 / w.size
    out = w.copy()
    out[shares > uniform + tol] -= step
    out[shares < uniform - tol] += step
    return np.clip(out, lo, hi)


class SweepAborted(RuntimeError):
    """A sweep round failed; `.completed` holds the finished rounds."""

    def __init__(self, message: str, completed: list):
        super().__init__(message)
        self.completed = completed


@dataclass
class SweepRound:
    round_index: int
    weights: np.ndarray
    mean_accuracy: float
    confusion: np.ndarray
    histogram: PredictionHistogram


def weight_sweep(trainer, rounds: int, seed: int,
                 n_classes: int = 5) -> list[SweepRound]:
    """Drive repeated CV rounds, re-weighting after each.

    `trainer(weights, seed) -> (mean_accuracy, confusion, histogram)` runs a
    full cross-validation with the given per-class loss weights. Round 0 uses
    all-ones weights (the plain cross-entropy baseline); each later round uses
    `adjust_weights` on the previous round's prediction histogram. The same
    seed is passed to every round so weight effects are paired comparisons.
    """
    if rounds < 1:
        raise ValueError("rounds must be >= 1")
    w = np.ones(n_classes)
    results: list[SweepRound] = []
    for r in range(rounds):
        try:
            acc, confusion, hist = trainer(w, seed)
        except Exception as e:
            raise SweepAborted(f"trainer failed in round {r}: {e}", results) from e
        results.append(SweepRound(r, w.copy(), float(acc),
                                  np.asarray(confusion), hist))
        w = adjust_weights(w, hist)
    return results


def write_sweep_csv(rounds: list[SweepRound], path) -> None:
    """round, w1..wK, mean_accuracy, per-class recall columns."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        k = rounds[0].weights.size if rounds else 0
        writer.writerow(["round"] + [f"w{i+1}" for i in range(k)]
                        + ["mean_accuracy"] + [f"recall_{i+1}" for i in range(k)])
        for r in rounds:
            row_sums = r.confusion.sum(axis=1)
            recall = np.where(row_sums > 0, np.diag(r.confusion) / row_sums, 0.0)
            writer.writerow([r.round_index] + [repr(float(v)) for v in r.weights]
                            + [repr(r.mean_accuracy)]
                            + [repr(float(v)) for v in recall])
