"""Black-box attack evaluation for trained generators.

Everything here touches the classifier exclusively through ``predict``;
there is no gradient path from attack code into classifier internals.
Runs own private seeded streams (seed + run index), so serial and
parallel execution produce identical reports.
"""

from __future__ import annotations

import csv
import json
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from advspec import gan, nn
from advspec.weighting import SupportsPredict

__all__ = [
    "AttackError",
    "AttackReport",
    "SpectralStats",
    "BaselineResult",
    "BaselineReport",
    "success_rate",
    "nearest_real_match",
    "substitution_to_csv",
    "spectral_stats",
    "latent_search_baseline",
    "baseline_report",
    "max_attack_workers",
]


class AttackError(ValueError):
    """Invalid attack evaluation request."""


@dataclass
class AttackReport:
    """Per-run success rates against one target class, plus aggregates."""

    target_class: int
    runs: list
    mean: float
    std: float
    classifier_accuracy_on_class: Optional[float]
    n_samples_per_run: int

    def to_dict(self) -> dict:
        return {
            "target_class": self.target_class,
            "runs": [float(r) for r in self.runs],
            "mean": self.mean,
            "std": self.std,
            "classifier_accuracy_on_class": self.classifier_accuracy_on_class,
            "n_samples_per_run": self.n_samples_per_run,
        }

    def to_json(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n")

    @staticmethod
    def from_json(path) -> "AttackReport":
        return AttackReport(**json.loads(Path(path).read_text()))


@dataclass
class SpectralStats:
    """Bandwise mean and population standard deviation of a sample set."""

    mean: np.ndarray
    std: np.ndarray

    def __post_init__(self):
        self.mean = np.asarray(self.mean, dtype=np.float64)
        self.std = np.asarray(self.std, dtype=np.float64)
        if self.mean.shape != self.std.shape or self.mean.ndim != 1:
            raise AttackError(f"inconsistent stats shapes {self.mean.shape} / {self.std.shape}")
        if np.any(self.std < 0):
            raise AttackError("negative standard deviation")


def max_attack_workers() -> int:
    """Worker cap from ADVSPEC_THREADS; 1 (serial) when unset."""
    raw = os.environ.get("ADVSPEC_THREADS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


def _flatten(samples: np.ndarray) -> np.ndarray:
    samples = np.asarray(samples, dtype=np.float64)
    return samples.reshape(samples.shape[0], -1)


def success_rate(
    generator: nn.Model,
    classifier: SupportsPredict,
    target_class: int,
    n_runs: int,
    n_per_run: int,
    seed: int,
    classifier_accuracy_on_class: Optional[float] = None,
) -> AttackReport:
    """Fraction of generated samples the classifier pushes off the target class.

    Per run: generate ``n_per_run`` samples with an rng seeded seed + run
    index, call ``predict`` once, count argmax != target_class. The mean is
    the arithmetic mean of run rates, the std their population std.
    """
    if n_runs < 1 or n_per_run < 1:
        raise AttackError(f"need n_runs >= 1 and n_per_run >= 1, got {n_runs}, {n_per_run}")

    def one_run(run_index: int) -> float:
        rng = np.random.default_rng(seed + run_index)
        samples = gan.generate(generator, n_per_run, rng)
        preds = np.asarray(classifier.predict(_flatten(samples))).argmax(axis=1)
        return float((preds != target_class).mean())

    workers = min(max_attack_workers(), n_runs)
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            rates = list(pool.map(one_run, range(n_runs)))
    else:
        rates = [one_run(i) for i in range(n_runs)]
    return AttackReport(
        target_class=int(target_class),
        runs=rates,
        mean=float(np.mean(rates)),
        std=float(np.std(rates)),
        classifier_accuracy_on_class=classifier_accuracy_on_class,
        n_samples_per_run=int(n_per_run),
    )


def nearest_real_match(generated: np.ndarray, real: np.ndarray) -> tuple:
    """For each real sample, the index of the L2-nearest generated sample.

    Returns (indices, distances); ties resolve to the lowest index.
    """
    gen = _flatten(generated)
    real_flat = _flatten(real)
    if gen.shape[0] < 1 or real_flat.shape[0] < 1:
        raise AttackError("both sample sets must be nonempty")
    if gen.shape[1] != real_flat.shape[1]:
        raise AttackError(f"band mismatch: generated {gen.shape[1]} vs real {real_flat.shape[1]}")
    indices = np.empty(real_flat.shape[0], dtype=np.int64)
    distances = np.empty(real_flat.shape[0])
    chunk = max(1, 2_000_000 // max(gen.shape[0], 1))
    for start in range(0, real_flat.shape[0], chunk):
        block = real_flat[start : start + chunk]
        d2 = ((block[:, None, :] - gen[None, :, :]) ** 2).sum(axis=2)
        idx = d2.argmin(axis=1)
        indices[start : start + chunk] = idx
        distances[start : start + chunk] = np.sqrt(d2[np.arange(len(block)), idx])
    return indices, distances


def substitution_to_csv(path, indices: np.ndarray, distances: np.ndarray) -> None:
    """Substitution table: real sample index, matched generated index, distance."""
    with open(path, "w", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(["real_index", "generated_index", "distance"])
        for i, (j, d) in enumerate(zip(indices, distances)):
            writer.writerow([i, int(j), f"{d:.17g}"])


def spectral_stats(samples: np.ndarray) -> SpectralStats:
    """Bandwise mean and population std of an (N, bands) sample set."""
    flat = _flatten(samples)
    if flat.shape[0] < 1:
        raise AttackError("need at least one sample")
    return SpectralStats(mean=flat.mean(axis=0), std=flat.std(axis=0))


# ---------------------------------------------------------------------------
# simplified latent-search baseline
# ---------------------------------------------------------------------------


@dataclass
class BaselineResult:
    """Outcome of one random-restart hill-climb in latent space."""

    sample: np.ndarray
    success: bool
    iterations_used: int
    queries: int


@dataclass
class BaselineReport:
    """Aggregate over restarts of the simplified latent-search baseline."""

    success_rate: float
    n_restarts: int
    iters_per_restart: int
    no_adversarial_found: int
    iterations_histogram: dict
    total_queries: int

    def to_dict(self) -> dict:
        return {
            "method": "simplified latent-search baseline",
            "success_rate": self.success_rate,
            "n_restarts": self.n_restarts,
            "iters_per_restart": self.iters_per_restart,
            "no_adversarial_found": self.no_adversarial_found,
            "iterations_histogram": self.iterations_histogram,
            "total_queries": self.total_queries,
        }

    def to_json(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n")


def latent_search_baseline(
    generator: nn.Model,
    classifier: SupportsPredict,
    target_class: int,
    iters: int,
    step: float,
    rng: np.random.Generator,
) -> BaselineResult:
    """Greedy hill-climb in z against the target-class confidence.

    Start from z ~ N(0, I); propose z' = z + step * noise, keep the
    proposal when the target-class probability drops, stop at the first
    misclassified sample or after ``iters`` proposals. Non-success is a
    valid outcome.
    """
    d = generator.input_shape[0]
    z = rng.normal(size=(1, d))

    def query(zv):
        sample = generator.predict(zv)
        probs = np.asarray(classifier.predict(_flatten(sample)))[0]
        return sample, probs

    sample, probs = query(z)
    queries = 1
    best = probs[target_class]
    if probs.argmax() != target_class:
        return BaselineResult(sample=sample[0], success=True, iterations_used=0, queries=queries)
    for it in range(1, iters + 1):
        cand = z + step * rng.normal(size=z.shape)
        cand_sample, cand_probs = query(cand)
        queries += 1
        if cand_probs.argmax() != target_class:
            return BaselineResult(sample=cand_sample[0], success=True, iterations_used=it, queries=queries)
        if cand_probs[target_class] < best:
            z, best, sample = cand, cand_probs[target_class], cand_sample
    return BaselineResult(sample=sample[0], success=False, iterations_used=iters, queries=queries)


def baseline_report(
    generator: nn.Model,
    classifier: SupportsPredict,
    target_class: int,
    n_restarts: int,
    iters: int,
    step: float,
    seed: int,
) -> BaselineReport:
    """Run the baseline over restarts with per-restart streams seed + index."""
    if n_restarts < 1:
        raise AttackError(f"need n_restarts >= 1, got {n_restarts}")
    results = [
        latent_search_baseline(
            generator, classifier, target_class, iters, step, np.random.default_rng(seed + i)
        )
        for i in range(n_restarts)
    ]
    histogram: dict = {}
    for r in results:
        if r.success:
            histogram[str(r.iterations_used)] = histogram.get(str(r.iterations_used), 0) + 1
    successes = sum(1 for r in results if r.success)
    return BaselineReport(
        success_rate=successes / n_restarts,
        n_restarts=n_restarts,
        iters_per_restart=iters,
        no_adversarial_found=n_restarts - successes,
        iterations_histogram=histogram,
        total_queries=sum(r.queries for r in results),
    )
