import numpy as np
import pytest

from attack_transfer.fixtures import gaussian_clusters
from attack_transfer.ingest import split
from attack_transfer.preprocess import (
    TransformSpec,
    dct_batch,
    dct_by_batches,
    differential,
    standardize_apply,
    standardize_fit,
    temporal_average,
    transform_split,
    undo_differential,
)


def naive_cosine_transform(batch):
    """Direct double-loop evaluation of the type-I transform definition."""
    x = np.asarray(batch, dtype=np.float64)
    n = x.shape[0]
    out = np.zeros_like(x)
    for t in range(n):
        acc = x[0] + ((-1.0) ** t) * x[n - 1]
        for k in range(1, n - 1):
            acc = acc + 2.0 * x[k] * np.cos(np.pi * t * k / (n - 1))
        out[t] = acc
    return out


def sliding_mean_oracle(stream, n):
    """Brute-force trailing mean with the partial-prefix rule."""
    x = np.asarray(stream, dtype=np.float64)
    out = np.empty_like(x)
    for t in range(x.shape[0]):
        lo = max(0, t - n + 1)
        out[t] = x[lo : t + 1].mean(axis=0)
    return out


class TestStandardize:
    def test_fit_set_has_zero_mean_unit_std(self):
        rng = np.random.default_rng(0)
        x = rng.normal(3.0, 2.5, size=(400, 6))
        std = standardize_fit(x)
        z = standardize_apply(std, x)
        assert np.abs(z.mean(axis=0)).max() < 1e-9
        assert np.abs(z.std(axis=0) - 1.0).max() < 1e-9

    def test_constant_column_flagged_and_zeroed(self):
        x = np.column_stack([np.full(50, 7.0), np.arange(50.0)])
        std = standardize_fit(x)
        assert std.constant_mask.tolist() == [True, False]
        z = standardize_apply(std, x)
        assert np.all(z[:, 0] == 0.0)

    def test_heldout_uses_train_statistics(self):
        train = np.array([[0.0], [2.0]])  # mean 1, std 1
        std = standardize_fit(train)
        held = standardize_apply(std, np.array([[5.0]]))
        assert held[0, 0] == 4.0

    def test_empty_fit_rejected(self):
        with pytest.raises(ValueError):
            standardize_fit(np.empty((0, 3)))


class TestDifferential:
    def test_hand_example(self):
        y = differential(np.array([1.0, 4.0, 9.0]))
        assert y.tolist() == [0.0, 3.0, 5.0]

    def test_constant_stream_all_zero(self):
        y = differential(np.full((20, 4), 3.7))
        assert np.all(y == 0.0)

    def test_empty_stream(self):
        assert differential(np.empty((0, 5))).shape == (0, 5)

    def test_length_and_width_preserved(self):
        x = np.random.default_rng(1).normal(size=(37, 78))
        assert differential(x).shape == x.shape

    def test_reconstruction_exact_on_integer_streams(self):
        # Differences and sums of moderate integers are exact in float64,
        # so reconstruction must be bit-exact here.
        rng = np.random.default_rng(2)
        for _ in range(20):
            x = rng.integers(-(2**40), 2**40, size=(200, 3)).astype(np.float64)
            y = differential(x)
            r = undo_differential(y, x[0])
            assert np.array_equal(r, x)

    def test_reconstruction_close_on_float_streams(self):
        rng = np.random.default_rng(3)
        for scale in (1e-6, 1.0, 1e6):
            x = rng.normal(scale=scale, size=(500, 4))
            r = undo_differential(differential(x), x[0])
            np.testing.assert_allclose(r, x, rtol=1e-9, atol=0)


class TestTemporalAverage:
    def test_window_one_is_identity(self):
        x = np.random.default_rng(4).normal(size=(30, 5))
        np.testing.assert_array_equal(temporal_average(x, 1), x)

    def test_constant_stream_fixed_point(self):
        x = np.full((25, 3), -2.5)
        for n in (1, 2, 7):
            np.testing.assert_array_equal(temporal_average(x, n), x)

    def test_hand_example(self):
        y = temporal_average(np.array([0.0, 3.0, 6.0]), 2)
        assert y.tolist() == [0.0, 1.5, 4.5]

    def test_zero_window_rejected(self):
        with pytest.raises(ValueError):
            temporal_average(np.zeros((4, 2)), 0)

    @pytest.mark.parametrize("n", [1, 2, 3, 5, 11])
    def test_matches_bruteforce_oracle(self, n):
        rng = np.random.default_rng(5 + n)
        x = rng.normal(size=(64, 7))
        np.testing.assert_allclose(
            temporal_average(x, n), sliding_mean_oracle(x, n), rtol=0, atol=1e-12
        )

    def test_output_within_window_bounds(self):
        rng = np.random.default_rng(6)
        x = rng.normal(size=(100, 4))
        n = 6
        y = temporal_average(x, n)
        for t in range(100):
            lo = max(0, t - n + 1)
            window = x[lo : t + 1]
            assert np.all(y[t] >= window.min(axis=0) - 1e-12)
            assert np.all(y[t] <= window.max(axis=0) + 1e-12)

    def test_window_larger_than_stream(self):
        x = np.arange(6.0).reshape(3, 2)
        y = temporal_average(x, 10)
        np.testing.assert_allclose(y, sliding_mean_oracle(x, 10))


class TestCosineTransform:
    def test_constant_column(self):
        c = 2.5
        y = dct_batch(np.full((4, 3), c))
        expected = np.zeros((4, 3))
        expected[0] = 2 * 3 * c  # 2(N-1)c with N=4
        np.testing.assert_allclose(y, expected, atol=1e-12)

    @pytest.mark.parametrize("n", list(range(2, 65)))
    def test_matches_naive_formula(self, n):
        rng = np.random.default_rng(100 + n)
        x = rng.normal(size=(n, 5))
        np.testing.assert_allclose(dct_batch(x), naive_cosine_transform(x), atol=1e-9)

    def test_linearity(self):
        rng = np.random.default_rng(7)
        x = rng.normal(size=(16, 6))
        z = rng.normal(size=(16, 6))
        a, b = 2.3, -0.7
        lhs = dct_batch(a * x + b * z)
        rhs = a * dct_batch(x) + b * dct_batch(z)
        np.testing.assert_allclose(lhs, rhs, atol=1e-9)

    def test_batch_too_small(self):
        with pytest.raises(ValueError, match="too small"):
            dct_batch(np.zeros((1, 3)))

    def test_columns_transform_independently(self):
        rng = np.random.default_rng(8)
        x = rng.normal(size=(12, 4))
        full = dct_batch(x)
        for j in range(4):
            np.testing.assert_allclose(full[:, j], dct_batch(x[:, j]))

    def test_by_batches_pads_final_short_batch(self):
        rng = np.random.default_rng(9)
        x = rng.normal(size=(10, 3))
        out = dct_by_batches(x, 4)
        assert out.shape == x.shape
        np.testing.assert_allclose(out[:4], dct_batch(x[:4]))
        np.testing.assert_allclose(out[4:8], dct_batch(x[4:8]))
        tail = np.concatenate([x[8:], np.repeat(x[9:10], 2, axis=0)], axis=0)
        np.testing.assert_allclose(out[8:], dct_batch(tail)[:2])

    def test_by_batches_single_row_padded(self):
        x = np.array([[1.0, 2.0]])
        out = dct_by_batches(x, 4)
        assert out.shape == (1, 2)
        # all four padded rows identical -> constant column result at t=0
        np.testing.assert_allclose(out[0], 2 * 3 * x[0])


class TestTransformSpec:
    def test_scopes(self):
        assert TransformSpec("none").scope == "stream"
        assert TransformSpec("differential").scope == "stream"
        assert TransformSpec("temporal_average", 4).scope == "stream"
        assert TransformSpec("dct").scope == "batch"

    def test_validation(self):
        with pytest.raises(ValueError):
            TransformSpec("fourier")
        with pytest.raises(ValueError):
            TransformSpec("temporal_average", 0)


class TestTransformSplit:
    def test_membership_unchanged_and_stream_order_used(self):
        dataset, _ = gaussian_clusters({0: 120, 1: 60}, seed=10, n_features=5)
        parts = split(dataset, seed=2)
        spec = TransformSpec("differential")
        out = transform_split(parts, spec)
        assert np.array_equal(out.train_idx, parts.train_idx)

        std = standardize_fit(parts.train.features)
        z = standardize_apply(std, dataset.features)
        expected_full = differential(z)
        np.testing.assert_allclose(out.train.features, expected_full[parts.train_idx])
        np.testing.assert_allclose(out.test.features, expected_full[parts.test_idx])

    def test_none_applies_standardization_only(self):
        dataset, _ = gaussian_clusters({0: 100, 1: 40}, seed=11, n_features=4)
        parts = split(dataset, seed=3)
        out = transform_split(parts, TransformSpec("none"))
        std = standardize_fit(parts.train.features)
        np.testing.assert_allclose(
            out.validation.features,
            standardize_apply(std, dataset.features)[parts.val_idx],
        )

    def test_labels_aligned(self):
        dataset, _ = gaussian_clusters({0: 80, 2: 40}, seed=12, n_features=4)
        parts = split(dataset, seed=4)
        out = transform_split(parts, TransformSpec("temporal_average", 3))
        assert np.array_equal(out.train.labels, parts.train.labels)
        assert np.array_equal(out.test.labels, parts.test.labels)
