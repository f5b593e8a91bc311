"""Tests for attack evaluation: success rates, matching, stats, baseline."""

import numpy as np
import pytest

from advspec import attack, nn
from advspec.attack import (
    AttackError,
    baseline_report,
    latent_search_baseline,
    nearest_real_match,
    spectral_stats,
    success_rate,
)


class _ConstantClassifier:
    """Prediction-only classifier with a fixed argmax."""

    def __init__(self, winner, k=3):
        self.winner = winner
        self.k = k

    def predict(self, x):
        probs = np.full((x.shape[0], self.k), 0.1 / (self.k - 1))
        probs[:, self.winner] = 0.9
        return probs


def toy_generator(seed=0):
    return nn.build_generator(nn.dense_generator_config(4, 2, hidden=(8,), seed=seed))


class TestSuccessRate:
    def test_always_target_gives_zero(self):
        report = success_rate(toy_generator(), _ConstantClassifier(winner=1), 1, n_runs=3, n_per_run=16, seed=0)
        assert report.runs == [0.0, 0.0, 0.0]
        assert report.mean == 0.0

    def test_never_target_gives_one(self):
        report = success_rate(toy_generator(), _ConstantClassifier(winner=0), 2, n_runs=3, n_per_run=16, seed=0)
        assert report.mean == 1.0 and report.std == 0.0

    def test_mean_and_std_consistent_with_runs(self):
        class Flip:
            def __init__(self):
                self.calls = 0

            def predict(self, x):
                self.calls += 1
                k = 0 if self.calls % 2 else 1
                return _ConstantClassifier(winner=k).predict(x)

        report = success_rate(toy_generator(), Flip(), 0, n_runs=4, n_per_run=8, seed=1)
        assert abs(report.mean - float(np.mean(report.runs))) < 1e-12
        assert abs(report.std - float(np.std(report.runs))) < 1e-12

    def test_deterministic_given_seed(self):
        clf = _ConstantClassifier(winner=0)
        a = success_rate(toy_generator(), clf, 0, n_runs=2, n_per_run=8, seed=5)
        b = success_rate(toy_generator(), clf, 0, n_runs=2, n_per_run=8, seed=5)
        assert a.to_dict() == b.to_dict()

    def test_parallel_equals_serial(self, monkeypatch):
        clf = _ConstantClassifier(winner=0)
        serial = success_rate(toy_generator(), clf, 0, n_runs=4, n_per_run=8, seed=2)
        monkeypatch.setenv("ADVSPEC_THREADS", "4")
        parallel = success_rate(toy_generator(), clf, 0, n_runs=4, n_per_run=8, seed=2)
        assert serial.to_dict() == parallel.to_dict()

    def test_report_json_roundtrip(self, tmp_path):
        report = success_rate(toy_generator(), _ConstantClassifier(winner=0), 0, n_runs=2, n_per_run=4, seed=0)
        path = tmp_path / "report.json"
        report.to_json(path)
        assert attack.AttackReport.from_json(path).to_dict() == report.to_dict()


class TestNearestRealMatch:
    def test_exact_copy_matches_at_distance_zero(self, rng):
        real = rng.uniform(size=(5, 6))
        generated = np.vstack([rng.uniform(size=(4, 6)), real[2:3]])
        idx, dist = nearest_real_match(generated, real)
        assert idx[2] == 4
        assert dist[2] == 0.0

    def test_single_generated_sample(self, rng):
        real = rng.uniform(size=(7, 3))
        idx, dist = nearest_real_match(rng.uniform(size=(1, 3)), real)
        assert np.array_equal(idx, np.zeros(7))

    def test_matches_exhaustive_oracle_20x20(self, rng):
        gen = rng.uniform(size=(20, 8))
        real = rng.uniform(size=(20, 8))
        idx, dist = nearest_real_match(gen, real)
        for i in range(20):
            d = np.linalg.norm(gen - real[i], axis=1)
            assert idx[i] == d.argmin()
            assert abs(dist[i] - d.min()) < 1e-12

    def test_matches_exhaustive_oracle_1000x1000(self, rng):
        gen = rng.uniform(size=(1000, 4))
        real = rng.uniform(size=(1000, 4))
        idx, _ = nearest_real_match(gen, real)
        probe = rng.choice(1000, size=25, replace=False)
        for i in probe:
            d = np.linalg.norm(gen - real[i], axis=1)
            assert idx[i] == d.argmin()

    def test_band_mismatch_rejected(self, rng):
        with pytest.raises(AttackError, match="band"):
            nearest_real_match(rng.uniform(size=(3, 4)), rng.uniform(size=(3, 5)))

    def test_substitution_csv(self, tmp_path, rng):
        gen = rng.uniform(size=(4, 3))
        real = rng.uniform(size=(6, 3))
        idx, dist = nearest_real_match(gen, real)
        path = tmp_path / "sub.csv"
        attack.substitution_to_csv(path, idx, dist)
        lines = path.read_text().strip().splitlines()
        assert lines[0] == "real_index,generated_index,distance"
        assert len(lines) == 7


class TestSpectralStats:
    def test_single_sample_zero_std(self, rng):
        stats = spectral_stats(rng.uniform(size=(1, 5)))
        assert np.array_equal(stats.std, np.zeros(5))

    def test_constant_dataset(self):
        stats = spectral_stats(np.full((10, 4), 0.25))
        assert np.array_equal(stats.mean, np.full(4, 0.25))
        assert np.array_equal(stats.std, np.zeros(4))

    def test_two_pass_oracle_agreement(self, rng):
        x = rng.uniform(size=(50, 9))
        stats = spectral_stats(x)
        mean_oracle = np.array([x[:, b].sum() / 50 for b in range(9)])
        var_oracle = np.array([((x[:, b] - mean_oracle[b]) ** 2).sum() / 50 for b in range(9)])
        assert np.allclose(stats.mean, mean_oracle, atol=1e-12)
        assert np.allclose(stats.std, np.sqrt(var_oracle), atol=1e-12)

    def test_channel_shaped_input_flattens(self, rng):
        stats = spectral_stats(rng.uniform(size=(6, 1, 48)))
        assert stats.mean.shape == (48,)


class TestLatentSearchBaseline:
    def test_fixed_wrong_argmax_immediate_success(self):
        result = latent_search_baseline(
            toy_generator(), _ConstantClassifier(winner=2), 0, iters=10, step=0.1,
            rng=np.random.default_rng(0),
        )
        assert result.success and result.iterations_used == 0 and result.queries == 1

    def test_fixed_target_argmax_provable_failure(self):
        result = latent_search_baseline(
            toy_generator(), _ConstantClassifier(winner=0), 0, iters=5, step=0.1,
            rng=np.random.default_rng(0),
        )
        assert not result.success
        assert result.queries == 6  # initial + 5 proposals

    def test_budget_zero_returns_initial_sample(self):
        result = latent_search_baseline(
            toy_generator(), _ConstantClassifier(winner=0), 0, iters=0, step=0.1,
            rng=np.random.default_rng(3),
        )
        assert not result.success and result.queries == 1

    def test_report_counts_no_adversarial_found(self):
        report = baseline_report(
            toy_generator(), _ConstantClassifier(winner=0), 0, n_restarts=5, iters=3, step=0.1, seed=0
        )
        assert report.no_adversarial_found == 5
        assert report.success_rate == 0.0
        assert report.total_queries == 5 * 4

    def test_deterministic_under_seed(self):
        class Halfway:
            """Depends on the sample so the climb has something to do."""

            def predict(self, x):
                p = 1.0 / (1.0 + np.exp(-6 * (x[:, 0] - 0.5)))
                return np.stack([p, 1.0 - p], axis=1)

        a = baseline_report(toy_generator(), Halfway(), 0, n_restarts=6, iters=8, step=0.3, seed=4)
        b = baseline_report(toy_generator(), Halfway(), 0, n_restarts=6, iters=8, step=0.3, seed=4)
        assert a.to_dict() == b.to_dict()


class TestBlackBoxContract:
    def test_predict_only_object_is_sufficient(self):
        """The whole attack/weighting path runs on an object exposing predict only."""

        class PredictOnly:
            def predict(self, x):
                n = x.shape[0]
                probs = np.zeros((n, 2))
                probs[:, 0] = 0.25
                probs[:, 1] = 0.75
                return probs

        from advspec.datasets import SpectraDataset
        from advspec.weighting import WeightingScheme, collect_scores, compute_weights

        clf = PredictOnly()
        gen = toy_generator()
        report = success_rate(gen, clf, 1, n_runs=2, n_per_run=8, seed=0)
        assert report.mean == 0.0
        ds = SpectraDataset(
            X=np.random.default_rng(0).uniform(size=(10, 2)),
            y=np.zeros(10, dtype=int),
            class_names=["a", "b"],
        )
        weights = compute_weights(WeightingScheme.soft(8.0), collect_scores(clf, ds))
        assert abs(weights.p.sum() - 1.0) < 1e-9
        result = latent_search_baseline(gen, clf, 1, iters=2, step=0.1, rng=np.random.default_rng(0))
        assert result.queries >= 1
