"""Data ingestion and synthetic dataset families.

Spectra live in an (N, bands) matrix normalized to [0, 1] per band with the
normalization constants kept for round-trips. Two synthetic generators
cover the experiments:

  * ``make_toy2d``: a 2-D Gaussian cloud labeled by the side of a fixed
    line, with label flips concentrated near the boundary so a trained
    linear classifier lands at a controllable accuracy.
  * ``make_synthetic_spectra``: smooth multi-Gaussian band profiles with
    shared bumps between classes to create controllable confusability.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

__all__ = [
    "DatasetError",
    "SpectraDataset",
    "Toy2D",
    "load_csv",
    "save_csv",
    "normalize",
    "denormalize",
    "make_toy2d",
    "toy_to_dataset",
    "GaussianBump",
    "ClassSpec",
    "make_synthetic_spectra",
    "default_confusable_specs",
    "split",
]


class DatasetError(ValueError):
    """Malformed input data or an invalid dataset request."""


@dataclass
class SpectraDataset:
    """N samples of B bands in [0, 1], integer labels, class names."""

    X: np.ndarray
    y: np.ndarray
    class_names: list
    band_min: Optional[np.ndarray] = None
    band_max: Optional[np.ndarray] = None

    def __post_init__(self):
        self.X = np.asarray(self.X, dtype=np.float64)
        self.y = np.asarray(self.y, dtype=np.int64)
        if self.X.ndim != 2 or self.X.shape[0] < 1:
            raise DatasetError(f"X must be (N, bands) with N >= 1, got {self.X.shape}")
        if self.y.shape != (self.X.shape[0],):
            raise DatasetError(f"labels shape {self.y.shape} != ({self.X.shape[0]},)")
        if self.X.min() < -1e-12 or self.X.max() > 1.0 + 1e-12:
            raise DatasetError("X must be normalized to [0, 1]")
        k = len(self.class_names)
        if self.y.min() < 0 or self.y.max() >= k:
            raise DatasetError(f"labels must lie in [0, {k})")

    @property
    def n_samples(self) -> int:
        return self.X.shape[0]

    @property
    def n_bands(self) -> int:
        return self.X.shape[1]

    @property
    def n_classes(self) -> int:
        return len(self.class_names)

    def class_subset(self, label: int) -> "SpectraDataset":
        mask = self.y == label
        if not mask.any():
            raise DatasetError(f"no samples with label {label}")
        return SpectraDataset(
            X=self.X[mask],
            y=self.y[mask],
            class_names=self.class_names,
            band_min=self.band_min,
            band_max=self.band_max,
        )


@dataclass
class Toy2D:
    """2-D point cloud labeled by the side of a line a*x + b*y + c = 0."""

    points: np.ndarray
    labels: np.ndarray
    boundary: tuple  # (a, b, c) with ||(a, b)|| = 1
    flipped: np.ndarray  # which labels were noise-flipped
    flip_prob: np.ndarray  # per-point flip probability used

    def __post_init__(self):
        a, b, _ = self.boundary
        norm = math.hypot(a, b)
        if abs(norm - 1.0) > 1e-9:
            raise DatasetError(f"boundary normal must be unit length, got {norm}")


# ---------------------------------------------------------------------------
# CSV schema: label,b0,...,b{B-1}; sidecar JSON holds normalization constants
# ---------------------------------------------------------------------------


def normalize(x: np.ndarray) -> tuple:
    """Per-band min-max to [0, 1]; constant bands map to 0."""
    x = np.asarray(x, dtype=np.float64)
    lo = x.min(axis=0)
    hi = x.max(axis=0)
    span = np.where(hi > lo, hi - lo, 1.0)
    return (x - lo) / span, lo, hi


def denormalize(x: np.ndarray, lo: np.ndarray, hi: np.ndarray) -> np.ndarray:
    span = np.where(hi > lo, hi - lo, 1.0)
    return np.asarray(x) * span + lo


def load_csv(path, class_names: Sequence[str], n_bands: int = 48) -> SpectraDataset:
    """Read `label,b0,...` rows; labels may be class names or indices."""
    path = Path(path)
    name_to_id = {name: i for i, name in enumerate(class_names)}
    rows = []
    labels = []
    with open(path, newline="") as f:
        reader = csv.reader(f)
        for lineno, row in enumerate(reader, start=1):
            if lineno == 1 and row and row[0].strip().lower() == "label":
                continue  # optional header
            if not row:
                continue
            if len(row) != n_bands + 1:
                raise DatasetError(f"{path}:{lineno}: expected {n_bands + 1} cells, got {len(row)}")
            raw = row[0].strip()
            if raw in name_to_id:
                labels.append(name_to_id[raw])
            else:
                try:
                    label = int(raw)
                except ValueError:
                    raise DatasetError(f"{path}:{lineno}: unknown label {raw!r}") from None
                if not 0 <= label < len(class_names):
                    raise DatasetError(f"{path}:{lineno}: unknown label {raw!r}")
                labels.append(label)
            try:
                rows.append([float(v) for v in row[1:]])
            except ValueError:
                raise DatasetError(f"{path}:{lineno}: non-numeric cell") from None
    if not rows:
        raise DatasetError(f"{path}: no data rows")
    x, lo, hi = normalize(np.array(rows))
    ds = SpectraDataset(X=x, y=np.array(labels), class_names=list(class_names), band_min=lo, band_max=hi)
    return ds


def save_csv(dataset: SpectraDataset, path) -> None:
    """Write denormalized rows plus a sidecar with the normalization constants."""
    path = Path(path)
    lo = dataset.band_min if dataset.band_min is not None else np.zeros(dataset.n_bands)
    hi = dataset.band_max if dataset.band_max is not None else np.ones(dataset.n_bands)
    raw = denormalize(dataset.X, lo, hi)
    with open(path, "w", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        for label, row in zip(dataset.y, raw):
            writer.writerow([int(label)] + [f"{v:.17g}" for v in row])
    sidecar = path.with_suffix(".norm.json")
    sidecar.write_text(
        json.dumps({"band_min": lo.tolist(), "band_max": hi.tolist()}, sort_keys=True) + "\n"
    )


# ---------------------------------------------------------------------------
# toy 2-D data
# ---------------------------------------------------------------------------

_TOY_BOUNDARY = (0.6, 0.8, -0.1)
_TOY_BANDWIDTH = 0.5  # flip-probability kernel width, in signed-distance units


def make_toy2d(
    n: int,
    margin_noise: float = 0.4,
    seed: int = 0,
    boundary: tuple = _TOY_BOUNDARY,
) -> Toy2D:
    """Gaussian cloud split by a line, with flips concentrated at the margin.

    A point at signed distance d from the line flips its side-label with
    probability margin_noise * exp(-d^2 / (2 * 0.5^2)), so the flipped
    fraction (hence the ceiling on any linear classifier's accuracy) is
    controlled by margin_noise. Points exactly on the line take label 1
    (the >= 0 side).
    """
    if n < 10:
        raise DatasetError(f"need n >= 10, got {n}")
    if not 0.0 <= margin_noise <= 1.0:
        raise DatasetError(f"margin_noise must lie in [0, 1], got {margin_noise}")
    a, b, c = boundary
    norm = math.hypot(a, b)
    a, b, c = a / norm, b / norm, c / norm
    rng = np.random.default_rng(seed)
    points = rng.normal(size=(n, 2))
    dist = points @ np.array([a, b]) + c
    labels = (dist >= 0.0).astype(np.int64)
    flip_prob = margin_noise * np.exp(-(dist**2) / (2.0 * _TOY_BANDWIDTH**2))
    flipped = rng.uniform(size=n) < flip_prob
    labels[flipped] = 1 - labels[flipped]
    return Toy2D(points=points, labels=labels, boundary=(a, b, c), flipped=flipped, flip_prob=flip_prob)


def toy_to_dataset(toy: Toy2D) -> SpectraDataset:
    """Min-max normalize the point cloud into a 2-band SpectraDataset."""
    x, lo, hi = normalize(toy.points)
    return SpectraDataset(
        X=x, y=toy.labels, class_names=["below", "above"], band_min=lo, band_max=hi
    )


def boundary_in_normalized_coords(toy: Toy2D, lo: np.ndarray, hi: np.ndarray) -> tuple:
    """Map the data-space line to the [0,1]-normalized frame, unit normal."""
    a, b, c = toy.boundary
    span = np.where(hi > lo, hi - lo, 1.0)
    an, bn = a * span[0], b * span[1]
    cn = a * lo[0] + b * lo[1] + c
    norm = math.hypot(an, bn)
    return (an / norm, bn / norm, cn / norm)


# ---------------------------------------------------------------------------
# synthetic spectra
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class GaussianBump:
    """One spectral feature: amplitude * exp(-(band - center)^2 / (2 width^2))."""

    center: float
    width: float
    amplitude: float

    def __post_init__(self):
        if self.width <= 0:
            raise DatasetError(f"bump width must be positive, got {self.width}")

    def profile(self, bands: np.ndarray) -> np.ndarray:
        return self.amplitude * np.exp(-((bands - self.center) ** 2) / (2.0 * self.width**2))

    def to_dict(self) -> dict:
        return {"center": self.center, "width": self.width, "amplitude": self.amplitude}

    @staticmethod
    def from_dict(d: dict) -> "GaussianBump":
        return GaussianBump(**d)


@dataclass(frozen=True)
class ClassSpec:
    """A class is a sum of bumps with per-sample amplitude jitter and band noise.

    ``variants`` partitions the class into subpopulations: each entry is
    (fraction, extra bumps added on top of the base ``bumps``); leftover
    fraction gets the base profile alone. Sharing a variant's bumps with
    another class's variant creates regions where only sample counts can
    decide the label, which is how the synthetic recipes control both
    per-class accuracy and classifier confidence.

    ``rare_bump``/``rare_fraction`` is shorthand for a single variant.
    """

    name: str
    bumps: tuple
    amp_jitter: float = 0.1
    noise: float = 0.02
    baseline: float = 0.1
    rare_bump: Optional[GaussianBump] = None
    rare_fraction: float = 0.0
    variants: tuple = ()

    def __post_init__(self):
        if not 0.0 <= self.rare_fraction <= 1.0:
            raise DatasetError(f"rare_fraction must lie in [0, 1], got {self.rare_fraction}")
        if self.rare_bump is not None and self.variants:
            raise DatasetError("use either rare_bump or variants, not both")
        total = 0.0
        for frac, extra in self.variants:
            if frac < 0.0:
                raise DatasetError(f"variant fraction must be nonnegative, got {frac}")
            total += frac
        if total > 1.0 + 1e-12:
            raise DatasetError(f"variant fractions sum to {total} > 1")

    def variant_table(self) -> list:
        """(fraction, extra-bumps) rows including the implicit plain remainder."""
        if self.rare_bump is not None and self.rare_fraction > 0.0:
            rows = [(self.rare_fraction, (self.rare_bump,))]
        else:
            rows = [(float(f), tuple(extra)) for f, extra in self.variants]
        used = sum(f for f, _ in rows)
        if used < 1.0 - 1e-12:
            rows.append((1.0 - used, ()))
        return rows

    def to_dict(self) -> dict:
        d = {
            "name": self.name,
            "bumps": [b.to_dict() for b in self.bumps],
            "amp_jitter": self.amp_jitter,
            "noise": self.noise,
            "baseline": self.baseline,
        }
        if self.rare_bump is not None:
            d["rare_bump"] = self.rare_bump.to_dict()
            d["rare_fraction"] = self.rare_fraction
        if self.variants:
            d["variants"] = [
                {"fraction": f, "bumps": [b.to_dict() for b in extra]} for f, extra in self.variants
            ]
        return d

    @staticmethod
    def from_dict(d: dict) -> "ClassSpec":
        d = dict(d)
        d["bumps"] = tuple(GaussianBump.from_dict(b) for b in d["bumps"])
        if "rare_bump" in d:
            d["rare_bump"] = GaussianBump.from_dict(d["rare_bump"])
        if "variants" in d:
            d["variants"] = tuple(
                (v["fraction"], tuple(GaussianBump.from_dict(b) for b in v["bumps"]))
                for v in d["variants"]
            )
        return ClassSpec(**d)


def make_synthetic_spectra(
    class_specs: Sequence[ClassSpec],
    n_per_class,
    bands: int = 48,
    seed: int = 0,
) -> SpectraDataset:
    """Sample smooth nonnegative spectra clipped to [0, 1].

    ``n_per_class`` is an int or one count per class; shared bumps between
    specs create classifier confusability.
    """
    if isinstance(n_per_class, int):
        counts = [n_per_class] * len(class_specs)
    else:
        counts = list(n_per_class)
    if len(counts) != len(class_specs):
        raise DatasetError(f"{len(counts)} counts for {len(class_specs)} classes")
    rng = np.random.default_rng(seed)
    grid = np.arange(bands, dtype=np.float64)
    xs, ys = [], []
    for label, (spec, count) in enumerate(zip(class_specs, counts)):
        block = np.full((count, bands), spec.baseline)
        for bump in spec.bumps:
            jitter = 1.0 + spec.amp_jitter * rng.normal(size=(count, 1))
            block += jitter * bump.profile(grid)[None, :]
        table = spec.variant_table()
        if len(table) > 1 or table[0][1]:
            fractions = np.array([f for f, _ in table])
            choice = rng.choice(len(table), size=count, p=fractions / fractions.sum())
            for vi, (_, extra) in enumerate(table):
                members = (choice == vi)[:, None]
                for bump in extra:
                    jitter = 1.0 + spec.amp_jitter * rng.normal(size=(count, 1))
                    block += members * jitter * bump.profile(grid)[None, :]
        block += spec.noise * rng.normal(size=(count, bands))
        xs.append(np.clip(block, 0.0, 1.0))
        ys.append(np.full(count, label, dtype=np.int64))
    x = np.vstack(xs)
    y = np.concatenate(ys)
    return SpectraDataset(
        X=x,
        y=y,
        class_names=[s.name for s in class_specs],
        band_min=np.zeros(bands),
        band_max=np.ones(bands),
    )


SPECTRA_FEATURE_FRACTIONS = (0.80, 0.40, 0.10)


def default_confusable_specs() -> list:
    """Pinned recipe: three attack-target classes plus a dominant background.

    Every class shares the band-12 base bump. Each target class carries a
    strong private feature on a fraction of its samples matching its
    target accuracy (0.80 / 0.40 / 0.10); featureless samples are
    indistinguishable from the "background" class, which outnumbers every
    target in that region, so a trained classifier recognizes exactly the
    featured slices. Per-class accuracies land near the feature fractions
    (empirically 0.80 / 0.43 / 0.09 over seeds with the default counts),
    the high / mid / low targets. Attack evaluations use the three target
    classes; the background exists only to absorb bare profiles.
    """
    shared = GaussianBump(center=12.0, width=4.0, amplitude=0.5)
    jitter, noise = 0.2, 0.03
    phi = SPECTRA_FEATURE_FRACTIONS
    return [
        ClassSpec(
            name="distinct",
            bumps=(shared,),
            amp_jitter=jitter,
            noise=noise,
            rare_bump=GaussianBump(center=34.0, width=3.0, amplitude=0.35),
            rare_fraction=phi[0],
        ),
        ClassSpec(
            name="blended",
            bumps=(shared,),
            amp_jitter=jitter,
            noise=noise,
            rare_bump=GaussianBump(center=43.0, width=2.5, amplitude=0.30),
            rare_fraction=phi[1],
        ),
        ClassSpec(
            name="shadowed",
            bumps=(shared,),
            amp_jitter=jitter,
            noise=noise,
            rare_bump=GaussianBump(center=22.0, width=2.5, amplitude=0.45),
            rare_fraction=phi[2],
        ),
        ClassSpec(name="background", bumps=(shared,), amp_jitter=jitter, noise=noise),
    ]


DEFAULT_SPECTRA_COUNTS = (700, 400, 300, 1200)
SPECTRA_TARGET_CLASSES = (0, 1, 2)


def split(dataset: SpectraDataset, train_fraction: float, seed: int = 0) -> tuple:
    """Deterministic stratified split into disjoint train/test datasets."""
    if not 0.0 < train_fraction < 1.0:
        raise DatasetError(f"train_fraction must lie in (0, 1), got {train_fraction}")
    rng = np.random.default_rng(seed)
    train_idx, test_idx = [], []
    for label in range(dataset.n_classes):
        idx = np.where(dataset.y == label)[0]
        if idx.size == 0:
            continue
        if idx.size < 2:
            raise DatasetError(f"class {label} has fewer than 2 samples; cannot split")
        perm = rng.permutation(idx)
        cut = int(round(train_fraction * idx.size))
        cut = min(max(cut, 1), idx.size - 1)  # both sides nonempty
        train_idx.append(perm[:cut])
        test_idx.append(perm[cut:])
    train_idx = np.sort(np.concatenate(train_idx))
    test_idx = np.sort(np.concatenate(test_idx))

    def take(idx):
        return SpectraDataset(
            X=dataset.X[idx],
            y=dataset.y[idx],
            class_names=dataset.class_names,
            band_min=dataset.band_min,
            band_max=dataset.band_max,
        )

    return take(train_idx), take(test_idx)
