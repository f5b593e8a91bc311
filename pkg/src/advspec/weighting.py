"""Reweighting of the empirical data distribution from black-box predictions.

A frozen classifier is queried once through its ``predict`` method only;
per-sample scores s_i = 1 - c_i (c_i = predicted probability of the true
class) are turned into a probability vector p over dataset indices:

    uniform: p_i = 1/N
    hard:    p_i proportional to round(1 - c_i), round-half-up
    soft:    p_i = exp(w * (s_i - max s)) / sum_j exp(w * (s_j - max s))

Minibatches are then drawn i.i.d. with replacement from p, which realizes
the reweighted distribution without touching the training loss.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import Protocol, Sequence

import numpy as np

__all__ = [
    "SupportsPredict",
    "WeightingError",
    "WeightingScheme",
    "PredictionScores",
    "SampleWeights",
    "collect_scores",
    "compute_weights",
    "weighted_sample",
    "weights_to_csv",
]


class SupportsPredict(Protocol):
    """The whole black-box contract: batched inputs to probability rows."""

    def predict(self, x: np.ndarray) -> np.ndarray: ...


class WeightingError(ValueError):
    """Invalid scores, degenerate weights, or an unusable scheme."""


@dataclass(frozen=True)
class WeightingScheme:
    """One of uniform, hard, or soft(temperature w >= 0)."""

    variant: str
    temperature: float = 0.0

    def __post_init__(self):
        if self.variant not in ("uniform", "hard", "soft"):
            raise WeightingError(f"unknown weighting variant {self.variant!r}")
        if self.temperature < 0:
            raise WeightingError(f"temperature must be nonnegative, got {self.temperature}")

    @staticmethod
    def uniform() -> "WeightingScheme":
        return WeightingScheme("uniform")

    @staticmethod
    def hard() -> "WeightingScheme":
        return WeightingScheme("hard")

    @staticmethod
    def soft(temperature: float) -> "WeightingScheme":
        return WeightingScheme("soft", temperature=float(temperature))

    def describe(self) -> str:
        if self.variant == "soft":
            return f"soft(w={self.temperature:g})"
        return self.variant


@dataclass
class PredictionScores:
    """Per-sample true-class probabilities c and derived scores s = 1 - c."""

    c: np.ndarray
    s: np.ndarray = field(init=False)

    def __post_init__(self):
        self.c = np.asarray(self.c, dtype=np.float64)
        if self.c.ndim != 1:
            raise WeightingError(f"scores must be a vector, got shape {self.c.shape}")
        if np.any(self.c < 0.0) or np.any(self.c > 1.0):
            raise WeightingError("true-class probabilities must lie in [0, 1]")
        self.s = 1.0 - self.c

    def __len__(self) -> int:
        return self.c.shape[0]


@dataclass
class SampleWeights:
    """Probability vector over dataset indices: nonnegative, sums to 1."""

    p: np.ndarray

    def __post_init__(self):
        self.p = np.asarray(self.p, dtype=np.float64)
        if self.p.ndim != 1 or len(self.p) < 1:
            raise WeightingError(f"weights must be a nonempty vector, got shape {self.p.shape}")
        if np.any(~np.isfinite(self.p)) or np.any(self.p < 0.0):
            raise WeightingError("weights must be finite and nonnegative")
        if abs(float(self.p.sum()) - 1.0) > 1e-9:
            raise WeightingError(f"weights must sum to 1, got {float(self.p.sum()):.12f}")

    def __len__(self) -> int:
        return self.p.shape[0]


def collect_scores(classifier: SupportsPredict, dataset) -> PredictionScores:
    """Query the frozen classifier once and record true-class probabilities.

    ``dataset`` needs ``X`` (N x B) and integer labels ``y``; only
    ``classifier.predict`` is ever called.
    """
    probs = np.asarray(classifier.predict(dataset.X), dtype=np.float64)
    n = dataset.X.shape[0]
    if probs.ndim != 2 or probs.shape[0] != n:
        raise WeightingError(f"predict returned shape {probs.shape}, expected ({n}, n_classes)")
    row_sums = probs.sum(axis=1)
    bad = np.where(np.abs(row_sums - 1.0) > 1e-6)[0]
    if bad.size:
        raise WeightingError(
            f"prediction row {bad[0]} is not a distribution (sum {row_sums[bad[0]]:.8f})"
        )
    y = np.asarray(dataset.y)
    if y.max() >= probs.shape[1]:
        raise WeightingError(f"label {y.max()} out of range for {probs.shape[1]} classes")
    return PredictionScores(c=probs[np.arange(n), y])


def compute_weights(scheme: WeightingScheme, scores: PredictionScores) -> SampleWeights:
    """Turn scores into the reweighted empirical distribution."""
    n = len(scores)
    if n < 1:
        raise WeightingError("need at least one sample")
    if scheme.variant == "uniform":
        return SampleWeights(np.full(n, 1.0 / n))
    if scheme.variant == "hard":
        kept = np.floor(scores.s + 0.5)  # round-half-up: c == 0.5 counts as misclassified
        total = kept.sum()
        if total == 0:
            raise WeightingError(
                "no misclassified data: hard weighting is empty for a perfect classifier"
            )
        return SampleWeights(kept / total)
    # soft: softmax over dataset indices, shifted by the max for stability
    z = scheme.temperature * (scores.s - scores.s.max())
    e = np.exp(z)
    return SampleWeights(e / e.sum())


def weighted_sample(weights: SampleWeights, batch: int, rng: np.random.Generator) -> np.ndarray:
    """Draw ``batch`` indices i.i.d. with replacement from the weights."""
    if batch < 1:
        raise WeightingError(f"batch must be >= 1, got {batch}")
    return rng.choice(len(weights), size=batch, replace=True, p=weights.p)


def weights_to_csv(path, weights: SampleWeights, scores: PredictionScores) -> None:
    """Export (index, score, weight) rows for the visualization CLI."""
    if len(weights) != len(scores):
        raise WeightingError(f"{len(weights)} weights vs {len(scores)} scores")
    path = Path(path)
    with open(path, "w", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(["index", "score", "weight"])
        for i in range(len(weights)):
            writer.writerow([i, f"{scores.s[i]:.17g}", f"{weights.p[i]:.17g}"])
