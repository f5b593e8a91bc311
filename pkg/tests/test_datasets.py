"""Tests for CSV ingestion, toy 2-D data, synthetic spectra and splitting."""

import numpy as np
import pytest

from advspec import datasets as ds
from advspec.datasets import (
    ClassSpec,
    DatasetError,
    GaussianBump,
    SpectraDataset,
    default_confusable_specs,
    load_csv,
    make_synthetic_spectra,
    make_toy2d,
    save_csv,
    split,
    toy_to_dataset,
)


class TestCsv:
    def test_hand_written_fixture(self, tmp_path):
        path = tmp_path / "three.csv"
        path.write_text("0,0.0,2.0\n1,1.0,4.0\n0,2.0,0.0\n")
        data = load_csv(path, class_names=["a", "b"], n_bands=2)
        # per-band min-max: band0 spans [0,2], band1 spans [0,4]
        assert np.allclose(data.X, [[0.0, 0.5], [0.5, 1.0], [1.0, 0.0]])
        assert np.array_equal(data.y, [0, 1, 0])
        assert np.array_equal(data.band_min, [0.0, 0.0])
        assert np.array_equal(data.band_max, [2.0, 4.0])

    def test_header_and_label_names(self, tmp_path):
        path = tmp_path / "named.csv"
        path.write_text("label,b0,b1\na,0.0,1.0\nb,1.0,0.0\n")
        data = load_csv(path, class_names=["a", "b"], n_bands=2)
        assert np.array_equal(data.y, [0, 1])

    def test_write_read_roundtrip(self, tmp_path, rng):
        x = rng.uniform(size=(12, 5)) * 3.0 + 1.0
        xn, lo, hi = ds.normalize(x)
        data = SpectraDataset(X=xn, y=rng.integers(0, 2, 12), class_names=["a", "b"], band_min=lo, band_max=hi)
        path = tmp_path / "round.csv"
        save_csv(data, path)
        back = load_csv(path, class_names=["a", "b"], n_bands=5)
        assert np.allclose(back.X, data.X, atol=1e-12)
        assert np.array_equal(back.y, data.y)

    def test_empty_file_rejected(self, tmp_path):
        path = tmp_path / "empty.csv"
        path.write_text("")
        with pytest.raises(DatasetError, match="no data"):
            load_csv(path, class_names=["a"], n_bands=2)

    def test_ragged_row_names_line(self, tmp_path):
        path = tmp_path / "ragged.csv"
        path.write_text("0,1.0,2.0\n0,1.0\n")
        with pytest.raises(DatasetError, match=":2"):
            load_csv(path, class_names=["a"], n_bands=2)

    def test_unknown_label_names_line(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("weeds,1.0,2.0\n")
        with pytest.raises(DatasetError, match="unknown label"):
            load_csv(path, class_names=["grass"], n_bands=2)

    def test_non_numeric_cell(self, tmp_path):
        path = tmp_path / "nan.csv"
        path.write_text("0,1.0,oops\n")
        with pytest.raises(DatasetError, match="non-numeric"):
            load_csv(path, class_names=["a"], n_bands=2)

    def test_normalize_roundtrip(self, rng):
        x = rng.normal(size=(20, 4)) * 5.0
        xn, lo, hi = ds.normalize(x)
        assert np.allclose(ds.denormalize(xn, lo, hi), x, atol=1e-12)


class TestToy2d:
    def test_zero_noise_linearly_separable(self):
        toy = make_toy2d(200, margin_noise=0.0, seed=1)
        a, b, c = toy.boundary
        side = (toy.points @ np.array([a, b]) + c >= 0).astype(int)
        assert np.array_equal(side, toy.labels)
        assert not toy.flipped.any()

    def test_boundary_point_sign_convention(self):
        toy = make_toy2d(10, margin_noise=0.0, seed=0)
        a, b, c = toy.boundary
        # a point exactly on the line takes label 1 (the >= 0 side)
        on_line = np.array([[-c * a, -c * b]])
        dist = on_line @ np.array([a, b]) + c
        assert abs(dist[0]) < 1e-12
        assert int(dist[0] >= 0) == 1

    def test_flip_fraction_poisson_binomial_3_sigma(self):
        toy = make_toy2d(4000, margin_noise=0.4, seed=3)
        expected = toy.flip_prob.sum()
        var = (toy.flip_prob * (1 - toy.flip_prob)).sum()
        flips = int(toy.flipped.sum())
        assert abs(flips - expected) < 3 * np.sqrt(var) + 1

    def test_deterministic_under_seed(self):
        a = make_toy2d(50, seed=9)
        b = make_toy2d(50, seed=9)
        assert np.array_equal(a.points, b.points)
        assert np.array_equal(a.labels, b.labels)

    def test_too_few_points_rejected(self):
        with pytest.raises(DatasetError, match="n >= 10"):
            make_toy2d(5)

    def test_to_dataset_normalized(self):
        data = toy_to_dataset(make_toy2d(100, seed=2))
        assert data.X.min() >= 0.0 and data.X.max() <= 1.0
        assert data.n_bands == 2


class TestSyntheticSpectra:
    def test_single_class_zero_noise_identical_samples(self):
        spec = ClassSpec(
            name="only",
            bumps=(GaussianBump(center=10.0, width=3.0, amplitude=0.5),),
            amp_jitter=0.0,
            noise=0.0,
        )
        data = make_synthetic_spectra([spec], 5, bands=24, seed=0)
        assert np.allclose(data.X, data.X[0][None, :])

    def test_disjoint_single_bumps_nearly_separable(self):
        # two classes with far-apart bumps: nearest-mean in band space separates
        specs = [
            ClassSpec("a", (GaussianBump(8.0, 2.5, 0.6),), amp_jitter=0.05, noise=0.02),
            ClassSpec("b", (GaussianBump(36.0, 2.5, 0.6),), amp_jitter=0.05, noise=0.02),
        ]
        data = make_synthetic_spectra(specs, 60, bands=48, seed=1)
        means = [data.X[data.y == c].mean(axis=0) for c in (0, 1)]
        assign = np.array(
            [np.argmin([np.linalg.norm(x - m) for m in means]) for x in data.X]
        )
        assert (assign == data.y).mean() >= 0.99

    def test_values_clipped_to_unit_interval(self):
        spec = ClassSpec("hot", (GaussianBump(10.0, 5.0, 2.0),), noise=0.5)
        data = make_synthetic_spectra([spec], 30, bands=16, seed=2)
        assert data.X.min() >= 0.0 and data.X.max() <= 1.0

    def test_invalid_width_rejected(self):
        with pytest.raises(DatasetError, match="width"):
            GaussianBump(center=5.0, width=0.0, amplitude=0.3)

    def test_deterministic_under_seed(self):
        specs = default_confusable_specs()
        a = make_synthetic_spectra(specs, 20, seed=5)
        b = make_synthetic_spectra(specs, 20, seed=5)
        assert np.array_equal(a.X, b.X)

    def test_default_recipe_counts(self):
        specs = default_confusable_specs()
        data = make_synthetic_spectra(specs, ds.DEFAULT_SPECTRA_COUNTS, seed=0)
        assert data.n_classes == 4  # three attack targets plus background
        assert [int((data.y == c).sum()) for c in range(4)] == list(ds.DEFAULT_SPECTRA_COUNTS)

    def test_rare_fraction_subpopulation(self):
        spec = ClassSpec(
            "marked",
            (GaussianBump(10.0, 3.0, 0.3),),
            amp_jitter=0.0,
            noise=0.0,
            rare_bump=GaussianBump(40.0, 2.0, 0.4),
            rare_fraction=0.25,
        )
        data = make_synthetic_spectra([spec], 400, bands=48, seed=3)
        marked = data.X[:, 40] > 0.3
        frac = marked.mean()
        assert abs(frac - 0.25) < 3 * np.sqrt(0.25 * 0.75 / 400)


class TestSplit:
    def _data(self, n=90):
        rng = np.random.default_rng(4)
        return SpectraDataset(
            X=rng.uniform(size=(n, 3)),
            y=rng.integers(0, 3, n),
            class_names=["a", "b", "c"],
        )

    def test_partition_sizes(self):
        data = self._data()
        train, test = split(data, 0.7, seed=0)
        assert train.n_samples + test.n_samples == data.n_samples

    def test_stratification_within_one_sample(self):
        data = self._data(300)
        train, test = split(data, 0.6, seed=1)
        for c in range(3):
            total = (data.y == c).sum()
            got = (train.y == c).sum()
            assert abs(got - 0.6 * total) <= 1.0

    def test_same_seed_same_split(self):
        data = self._data()
        a_train, _ = split(data, 0.5, seed=3)
        b_train, _ = split(data, 0.5, seed=3)
        assert np.array_equal(a_train.X, b_train.X)

    def test_disjoint_exact_partition(self):
        data = self._data(60)
        # tag rows uniquely to verify the index partition
        data.X[:, 0] = np.linspace(0.0, 1.0, 60)
        train, test = split(data, 0.5, seed=2)
        tags = np.concatenate([train.X[:, 0], test.X[:, 0]])
        assert np.array_equal(np.sort(tags), data.X[:, 0])

    def test_tiny_class_rejected(self):
        data = SpectraDataset(
            X=np.random.default_rng(0).uniform(size=(5, 2)),
            y=np.array([0, 0, 0, 0, 1]),
            class_names=["a", "b"],
        )
        with pytest.raises(DatasetError, match="fewer than 2"):
            split(data, 0.5)

    def test_bad_fraction_rejected(self):
        with pytest.raises(DatasetError, match="fraction"):
            split(self._data(), 1.0)
