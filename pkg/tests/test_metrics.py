import itertools

import numpy as np
import pytest

from vrnmf import (
    ContractError,
    DimensionError,
    matched_pair_scores,
    mrsa_matched,
    mrsa_pair,
    recovery_curve,
    segmentation_map,
)
from vrnmf.metrics import mrsa_cost_matrix


class TestMrsaPair:
    def test_identical_vectors(self):
        assert mrsa_pair([1.0, 2.0, 3.0], [1.0, 2.0, 3.0]) == 0.0

    def test_shift_and_scale_invariance(self):
        assert mrsa_pair([1.0, 2.0, 3.0], [3.0, 5.0, 7.0]) <= 1e-6  # y = 2x + 1

    def test_antipodal_pair_scores_100(self):
        assert mrsa_pair([1.0, 0.0], [0.0, 1.0]) == pytest.approx(100.0)

    def test_symmetry(self):
        rng = np.random.default_rng(0)
        for _ in range(50):
            x = rng.normal(0.0, 1.0, 6)
            y = rng.normal(0.0, 1.0, 6)
            assert mrsa_pair(x, y) == mrsa_pair(y, x)

    def test_invariance_properties_on_random_vectors(self):
        rng = np.random.default_rng(1)
        for _ in range(100):
            x = rng.normal(0.0, 1.0, 8)
            a = rng.uniform(0.1, 5.0)
            b = rng.normal(0.0, 2.0)
            assert mrsa_pair(x, a * x + b) <= 1e-5
            assert mrsa_pair(x, -x + b) >= 100.0 - 1e-5

    def test_range_bounds(self):
        rng = np.random.default_rng(2)
        for _ in range(200):
            v = mrsa_pair(rng.normal(0.0, 1.0, 5), rng.normal(0.0, 1.0, 5))
            assert 0.0 <= v <= 100.0

    def test_constant_vector_rejected(self):
        with pytest.raises(ContractError):
            mrsa_pair([2.0, 2.0, 2.0], [1.0, 2.0, 3.0])

    def test_length_mismatch_rejected(self):
        with pytest.raises(DimensionError):
            mrsa_pair([1.0, 2.0], [1.0, 2.0, 3.0])


class TestMrsaMatched:
    def test_identical_matrices(self):
        rng = np.random.default_rng(3)
        w = rng.uniform(0.0, 1.0, (6, 4))
        score, perm = mrsa_matched(w, w)
        assert score == 0.0
        assert perm == [0, 1, 2, 3]

    def test_reversed_columns(self):
        rng = np.random.default_rng(4)
        w = rng.uniform(0.0, 1.0, (6, 3))
        score, perm = mrsa_matched(w[:, ::-1], w)
        assert score == 0.0
        assert perm == [2, 1, 0]

    def test_matches_exhaustive_permutation_oracle(self):
        rng = np.random.default_rng(5)
        for r in (2, 3, 4, 5, 6):
            w = rng.uniform(0.0, 1.0, (8, r))
            w_true = rng.uniform(0.0, 1.0, (8, r))
            score, _ = mrsa_matched(w, w_true)
            cost = mrsa_cost_matrix(w, w_true)
            best = min(
                np.mean([cost[i, p[i]] for i in range(r)])
                for p in itertools.permutations(range(r))
            )
            assert score == pytest.approx(best, abs=1e-12)

    def test_invariant_under_column_permutations(self):
        rng = np.random.default_rng(6)
        w = rng.uniform(0.0, 1.0, (7, 4))
        w_true = rng.uniform(0.0, 1.0, (7, 4))
        base, _ = mrsa_matched(w, w_true)
        for _ in range(10):
            p1, p2 = rng.permutation(4), rng.permutation(4)
            assert mrsa_matched(w[:, p1], w_true[:, p2])[0] == pytest.approx(base, abs=1e-12)

    def test_per_pair_scores_consistent_with_mean(self):
        rng = np.random.default_rng(7)
        w = rng.uniform(0.0, 1.0, (9, 3))
        w_true = rng.uniform(0.0, 1.0, (9, 3))
        score, _ = mrsa_matched(w, w_true)
        pairs = matched_pair_scores(w, w_true)
        assert np.mean(pairs) == pytest.approx(score, abs=1e-12)

    def test_constant_column_names_offender(self):
        w = np.ones((5, 2))
        w[:, 1] = np.arange(5.0)
        with pytest.raises(ContractError, match="column"):
            mrsa_matched(w, w.copy())


class TestRecoveryCurve:
    def test_simple_counts(self):
        curve = recovery_curve([1.0, 2.0, 3.0], [2.5])
        assert curve == [(2.5, pytest.approx(2.0 / 3.0))]

    def test_boundary_thresholds(self):
        curve = recovery_curve([1.0, 2.0, 3.0], [0.0, 101.0])
        assert curve[0][1] == 0.0
        assert curve[1][1] == 1.0

    def test_matches_direct_counting_oracle(self):
        rng = np.random.default_rng(8)
        scores = rng.uniform(0.0, 100.0, 200)
        thresholds = np.sort(rng.uniform(0.0, 100.0, 25))
        curve = recovery_curve(scores, thresholds)
        for t, frac in curve:
            expected = sum(1 for s in scores if s < t) / len(scores)
            assert frac == pytest.approx(expected, abs=1e-15)

    def test_monotone_and_bounded(self):
        rng = np.random.default_rng(9)
        scores = rng.uniform(0.0, 100.0, 300)
        fracs = [f for _, f in recovery_curve(scores, np.linspace(0.0, 100.0, 50))]
        assert all(0.0 <= f <= 1.0 for f in fracs)
        assert all(b >= a for a, b in zip(fracs, fracs[1:]))

    def test_unsorted_thresholds_rejected(self):
        with pytest.raises(ContractError):
            recovery_curve([1.0], [5.0, 2.0])

    def test_empty_scores_rejected(self):
        with pytest.raises(DimensionError):
            recovery_curve([], [1.0])


class TestSegmentationMap:
    def test_dominant_component_labels(self):
        h = np.array([[0.1, 0.0], [0.8, 0.2], [0.05, 0.1]])
        labels = segmentation_map(h, width=2, height=1)
        np.testing.assert_array_equal(labels, [[2, 2]])

    def test_tie_breaks_to_lowest_component(self):
        h = np.full((3, 4), 1.0 / 3.0)
        labels = segmentation_map(h, width=2, height=2)
        np.testing.assert_array_equal(labels, np.ones((2, 2), dtype=int))

    def test_matches_argmax_oracle(self):
        rng = np.random.default_rng(10)
        h = rng.uniform(0.0, 1.0, (2, 24))
        labels = segmentation_map(h, width=6, height=4)
        flat = labels.reshape(-1)
        for j in range(24):
            assert flat[j] == int(np.argmax(h[:, j])) + 1

    def test_row_major_pixel_order(self):
        h = np.array([[1.0, 0.0, 1.0, 0.0], [0.0, 1.0, 0.0, 1.0]])
        labels = segmentation_map(h, width=2, height=2)
        np.testing.assert_array_equal(labels, [[1, 2], [1, 2]])

    def test_size_mismatch_rejected(self):
        with pytest.raises(DimensionError):
            segmentation_map(np.ones((2, 5)), width=2, height=2)
