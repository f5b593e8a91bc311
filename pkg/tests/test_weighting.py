"""Tests for score collection, weight computation and weighted sampling."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from advspec import weighting as wt
from advspec.datasets import SpectraDataset
from advspec.weighting import (
    PredictionScores,
    SampleWeights,
    WeightingError,
    WeightingScheme,
    compute_weights,
    collect_scores,
    weighted_sample,
)


class _FixedPredictor:
    """Prediction-only classifier returning preset probability rows."""

    def __init__(self, probs):
        self._probs = np.asarray(probs, dtype=np.float64)

    def predict(self, x):
        return np.tile(self._probs, (x.shape[0], 1)) if self._probs.ndim == 1 else self._probs


def _dataset(n=4, k=3, labels=None):
    rng = np.random.default_rng(0)
    return SpectraDataset(
        X=rng.uniform(size=(n, 5)),
        y=np.zeros(n, dtype=int) if labels is None else np.asarray(labels),
        class_names=[f"c{i}" for i in range(k)],
    )


class TestCollectScores:
    def test_perfect_classifier_zero_scores(self):
        ds = _dataset(n=3, labels=[0, 0, 0])
        scores = collect_scores(_FixedPredictor([1.0, 0.0, 0.0]), ds)
        assert np.array_equal(scores.c, [1.0, 1.0, 1.0])
        assert np.array_equal(scores.s, [0.0, 0.0, 0.0])

    def test_uniform_classifier(self):
        ds = _dataset(n=2, k=4, labels=[1, 3])
        scores = collect_scores(_FixedPredictor([0.25] * 4), ds)
        assert np.allclose(scores.s, 1.0 - 0.25)

    def test_non_distribution_rejected(self):
        ds = _dataset(n=2, labels=[0, 0])
        with pytest.raises(WeightingError, match="row"):
            collect_scores(_FixedPredictor([0.5, 0.2, 0.2]), ds)

    def test_toy_linear_classifier_misclassified_have_low_c(self):
        # known linear model: logits = [x0, -x0]; row softmax
        class Linear:
            def predict(self, x):
                logits = np.stack([x[:, 0], -x[:, 0]], axis=1)
                e = np.exp(logits - logits.max(axis=1, keepdims=True))
                return e / e.sum(axis=1, keepdims=True)

        x = np.array([[0.9, 0.1], [0.1, 0.9], [0.4, 0.2], [0.3, 0.3]])
        y = np.array([0, 0, 1, 1])  # second two are on the wrong side for this model
        ds = SpectraDataset(X=x, y=y, class_names=["a", "b"])
        scores = collect_scores(Linear(), ds)
        pred = Linear().predict(x).argmax(axis=1)
        assert np.array_equal(scores.c < 0.5, pred != y)


class TestComputeWeights:
    def test_uniform(self):
        w = compute_weights(WeightingScheme.uniform(), PredictionScores(c=np.full(4, 0.3)))
        assert np.array_equal(w.p, [0.25, 0.25, 0.25, 0.25])

    def test_soft_w0_equals_uniform_exactly(self):
        scores = PredictionScores(c=np.array([0.1, 0.6, 0.9]))
        soft = compute_weights(WeightingScheme.soft(0.0), scores)
        uniform = compute_weights(WeightingScheme.uniform(), scores)
        assert np.array_equal(soft.p, uniform.p)

    def test_soft_direct_arithmetic_oracle(self):
        # direct evaluation of the softmax formula for s=[0.9, 0.1], w=8
        s = np.array([0.9, 0.1])
        w = 8.0
        e = np.exp(w * (s - s.max()))
        expected = e / e.sum()
        got = compute_weights(WeightingScheme.soft(8.0), PredictionScores(c=1.0 - s))
        assert np.allclose(got.p, expected, atol=1e-15)
        assert np.allclose(got.p, [0.9983412, 0.0016588], atol=1e-7)

    def test_hard_rounding(self):
        got = compute_weights(WeightingScheme.hard(), PredictionScores(c=np.array([0.3, 0.6, 0.8])))
        assert np.array_equal(got.p, [1.0, 0.0, 0.0])

    def test_hard_half_counts_as_misclassified(self):
        got = compute_weights(WeightingScheme.hard(), PredictionScores(c=np.array([0.5, 0.9])))
        assert np.array_equal(got.p, [1.0, 0.0])

    def test_hard_all_correct_raises(self):
        with pytest.raises(WeightingError, match="no misclassified"):
            compute_weights(WeightingScheme.hard(), PredictionScores(c=np.array([0.9, 0.95])))

    def test_hard_support_is_c_below_half(self):
        c = np.array([0.1, 0.49, 0.5, 0.51, 0.99])
        got = compute_weights(WeightingScheme.hard(), PredictionScores(c=c))
        assert np.array_equal(got.p > 0, c <= 0.5)

    def test_negative_temperature_rejected(self):
        with pytest.raises(WeightingError, match="nonnegative"):
            WeightingScheme.soft(-1.0)

    @settings(max_examples=100, deadline=None)
    @given(
        st.lists(st.floats(min_value=0.0, max_value=1.0), min_size=1, max_size=30),
        st.floats(min_value=0.0, max_value=40.0),
    )
    def test_soft_weights_always_a_distribution(self, c, w):
        got = compute_weights(WeightingScheme.soft(w), PredictionScores(c=np.array(c)))
        assert abs(got.p.sum() - 1.0) <= 1e-9
        assert (got.p >= 0).all()

    @settings(max_examples=60, deadline=None)
    @given(
        st.lists(st.floats(min_value=0.0, max_value=0.5), min_size=2, max_size=20),
        st.floats(min_value=0.5, max_value=25.0),
        st.floats(min_value=0.0, max_value=0.5),
    )
    def test_soft_shift_invariance(self, s_raw, w, shift):
        # adding a constant to all scores leaves the weights unchanged
        s = np.array(s_raw)
        scheme = WeightingScheme.soft(w)
        base = compute_weights(scheme, PredictionScores(c=1.0 - s)).p
        moved = compute_weights(scheme, PredictionScores(c=1.0 - (s + shift))).p
        assert np.allclose(base, moved, atol=1e-12)

    def test_soft_monotone_in_scores(self):
        s = np.array([0.9, 0.5, 0.2, 0.85])
        got = compute_weights(WeightingScheme.soft(6.0), PredictionScores(c=1.0 - s)).p
        order = np.argsort(-s)
        assert np.all(np.diff(got[order]) < 0)

    def test_temperature_concentrates_mass(self):
        scores = PredictionScores(c=1.0 - np.array([0.9, 0.6, 0.4, 0.1]))
        low = compute_weights(WeightingScheme.soft(5.0), scores).p
        high = compute_weights(WeightingScheme.soft(15.0), scores).p
        assert high.max() > low.max()
        ent = lambda p: -(p[p > 0] * np.log(p[p > 0])).sum()
        assert ent(high) < ent(low)


class TestWeightedSample:
    def test_point_mass(self):
        idx = weighted_sample(SampleWeights(np.array([1.0, 0.0, 0.0])), 20, np.random.default_rng(1))
        assert np.array_equal(idx, np.zeros(20))

    def test_uniform_frequencies_within_3_sigma(self):
        n, draws = 8, 100_000
        w = SampleWeights(np.full(n, 1.0 / n))
        idx = weighted_sample(w, draws, np.random.default_rng(2))
        freq = np.bincount(idx, minlength=n) / draws
        sigma = np.sqrt((1 / n) * (1 - 1 / n) / draws)
        assert np.all(np.abs(freq - 1 / n) < 3 * sigma)

    def test_fixed_seed_reproducible(self):
        w = SampleWeights(np.array([0.2, 0.3, 0.5]))
        a = weighted_sample(w, 100, np.random.default_rng(7))
        b = weighted_sample(w, 100, np.random.default_rng(7))
        assert np.array_equal(a, b)

    def test_nan_weights_rejected(self):
        with pytest.raises(WeightingError, match="finite"):
            SampleWeights(np.array([np.nan, 1.0]))

    def test_batch_must_be_positive(self):
        with pytest.raises(WeightingError, match=">= 1"):
            weighted_sample(SampleWeights(np.array([1.0])), 0, np.random.default_rng(0))


class TestCsvExport:
    def test_weights_csv_sums_to_one(self, tmp_path):
        scores = PredictionScores(c=np.array([0.2, 0.5, 0.9]))
        w = compute_weights(WeightingScheme.soft(8.0), scores)
        path = tmp_path / "weights.csv"
        wt.weights_to_csv(path, w, scores)
        rows = path.read_text().strip().splitlines()
        assert rows[0] == "index,score,weight"
        total = sum(float(r.split(",")[2]) for r in rows[1:])
        assert abs(total - 1.0) < 1e-9
