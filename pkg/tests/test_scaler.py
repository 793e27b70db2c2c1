import numpy as np
import pytest

from totokit import scaler as sc


def brute_force_prefix_stats(data, weights, minimum_scale):
    """Definitional two-pass prefix statistics; O(L^2), independent of the
    online path it checks."""
    data = np.asarray(data, dtype=np.float64)
    weights = np.asarray(weights, dtype=np.float64)
    length = data.shape[-1]
    cum_w = np.cumsum(weights, axis=-1)
    denom = np.maximum(cum_w, 1.0)
    means = np.cumsum(weights * data, axis=-1) / denom
    # (..., t, i) lower-triangular weighted squared deviations from mean_t
    diff = data[..., None, :] - means[..., :, None]
    sq = (diff * diff) * weights[..., None, :]
    tri = np.tril(np.ones((length, length)))
    var = (sq * tri).sum(axis=-1) / np.maximum(denom - 1.0, 1.0)
    return means, np.sqrt(var + minimum_scale)


class TestCausalStatistics:
    def test_simple_series_hand_values(self):
        means, scales = sc.compute_causal_statistics(
            np.array([[1.0, 2.0, 3.0]]), np.ones((1, 3)), 0.1)
        assert np.allclose(means, [[1.0, 1.5, 2.0]], atol=1e-12)
        assert np.allclose(scales, [[0.31623, 0.77460, 1.04881]], atol=1e-5)

    def test_constant_series_hits_floor(self):
        means, scales = sc.compute_causal_statistics(
            np.array([[5.0, 5.0, 5.0]]), np.ones((1, 3)), 0.1)
        assert np.allclose(means, 5.0)
        assert np.allclose(scales, np.sqrt(0.1), atol=1e-12)

    def test_masked_prefix(self):
        means, scales = sc.compute_causal_statistics(
            np.array([[9.0, 1.0, 2.0]]), np.array([[0.0, 1.0, 1.0]]), 0.1)
        # masked first position reports the clamped 0/1 mean; the padded 9 never enters
        assert np.allclose(means, [[0.0, 1.0, 1.5]], atol=1e-12)
        expect_var = ((1.0 - 1.5) ** 2 + (2.0 - 1.5) ** 2) / 1.0
        assert np.isclose(scales[0, 2], np.sqrt(expect_var + 0.1), atol=1e-12)

    def test_nonbinary_weights_rejected(self):
        with pytest.raises(ValueError, match="binary"):
            sc.compute_causal_statistics(np.ones((1, 3)), np.full((1, 3), 0.5), 0.1)

    def test_empty_series_rejected(self):
        with pytest.raises(ValueError):
            sc.compute_causal_statistics(np.empty((1, 0)), np.empty((1, 0)), 0.1)

    def test_oracle_equivalence_random(self):
        rng = np.random.default_rng(42)
        for _ in range(60):
            length = int(rng.integers(1, 120))
            data = rng.normal(size=(2, length)) * rng.uniform(0.1, 30.0)
            weights = (rng.uniform(size=(2, length)) > 0.25).astype(float)
            means, scales = sc.compute_causal_statistics(data, weights, 0.1)
            bf_means, bf_scales = brute_force_prefix_stats(data, weights, 0.1)
            assert np.allclose(means, bf_means, atol=1e-9)
            assert np.allclose(scales, bf_scales, atol=1e-9)

    def test_causality_exact(self):
        rng = np.random.default_rng(3)
        data = rng.normal(size=(1, 64))
        weights = np.ones_like(data)
        means, scales = sc.compute_causal_statistics(data, weights, 0.1)
        bumped = data.copy()
        bumped[0, 40] += 100.0
        means2, scales2 = sc.compute_causal_statistics(bumped, weights, 0.1)
        assert np.array_equal(means[0, :40], means2[0, :40])
        assert np.array_equal(scales[0, :40], scales2[0, :40])

    def test_shift_equivariance_of_means(self):
        rng = np.random.default_rng(4)
        data = rng.normal(size=(2, 50))
        weights = (rng.uniform(size=(2, 50)) > 0.2).astype(float)
        means, _ = sc.compute_causal_statistics(data, weights, 0.1)
        shifted, _ = sc.compute_causal_statistics(data + 7.5, weights, 0.1)
        observed = np.cumsum(weights, axis=-1) > 0
        assert np.allclose(shifted[observed], means[observed] + 7.5, atol=1e-9)


class TestClipScales:
    def test_inside_bounds_untouched(self):
        out = sc.clip_scales(np.array([[0.31623]]), np.array([2.0]), 10.0)
        assert np.allclose(out, 0.31623)

    def test_kappa_zero_degenerate(self):
        out = sc.clip_scales(np.array([[0.5, 3.0]]), np.array([2.0]), 0.0)
        assert np.allclose(out, 2.0)

    def test_upper_clamp(self):
        out = sc.clip_scales(np.array([[1e30]]), np.array([1.0]), 10.0)
        assert np.allclose(out, 1e10)

    def test_negative_kappa_rejected(self):
        with pytest.raises(ValueError):
            sc.clip_scales(np.ones((1, 1)), np.ones(1), -1.0)


class TestNormalizePatches:
    def test_hand_example(self):
        cfg = sc.ScalerConfig(minimum_scale=0.1, kappa=10.0, patch_size=2)
        normalized, stats = sc.normalize_patches(
            np.array([[1.0, 2.0, 3.0, 4.0]]), np.ones((1, 4)), cfg)
        assert np.allclose(normalized, [[-0.6455, 0.6455, 0.3762, 1.1285]], atol=1e-4)
        assert np.allclose(stats.scales[0, [1, 3]], [0.7746, 1.3292], atol=1e-4)

    def test_constant_series_zero_residual(self):
        cfg = sc.ScalerConfig(patch_size=4)
        normalized, stats = sc.normalize_patches(np.full((1, 8), 3.0), np.ones((1, 8)), cfg)
        assert np.allclose(normalized, 0.0)
        assert np.allclose(stats.scales, np.sqrt(0.1), atol=1e-12)

    def test_indivisible_length_rejected(self):
        cfg = sc.ScalerConfig(patch_size=8)
        with pytest.raises(ValueError, match="divisible"):
            sc.normalize_patches(np.ones((1, 12)), np.ones((1, 12)), cfg)

    def test_scale_equivariance_without_floor(self):
        # with the variance floor disabled and clipping inert, scaling the
        # data leaves normalized output unchanged
        rng = np.random.default_rng(5)
        data = rng.normal(size=(2, 32)) + 3.0
        weights = np.ones_like(data)
        cfg = sc.ScalerConfig(minimum_scale=1e-300, kappa=float("inf"), patch_size=4)
        base, _ = sc.normalize_patches(data, weights, cfg)
        scaled, stats = sc.normalize_patches(data * 1e6, weights, cfg)
        assert np.max(np.abs(base - scaled)) < 1e-9

    def test_scaling_scales_the_stats(self):
        rng = np.random.default_rng(6)
        data = rng.normal(size=(1, 16))
        cfg = sc.ScalerConfig(minimum_scale=1e-300, kappa=float("inf"), patch_size=4)
        _, stats1 = sc.normalize_patches(data, np.ones_like(data), cfg)
        _, stats2 = sc.normalize_patches(data * 10.0, np.ones_like(data), cfg)
        assert np.allclose(stats2.scales, stats1.scales * 10.0, rtol=1e-9)


class TestDenormalize:
    def test_roundtrip_final_patch(self):
        rng = np.random.default_rng(7)
        data = rng.normal(size=(2, 16)) * 4.0 + 10.0
        cfg = sc.ScalerConfig(patch_size=4)
        normalized, stats = sc.normalize_patches(data, np.ones_like(data), cfg)
        end = sc.context_end_stats(stats)
        back = sc.denormalize(normalized[:, -4:], end)
        assert np.allclose(back, data[:, -4:], atol=1e-12)

    def test_zero_values_return_mean(self):
        out = sc.denormalize(np.zeros((2, 3)), (np.array([1.0, -2.0]), np.array([5.0, 5.0])))
        assert np.allclose(out, [[1.0] * 3, [-2.0] * 3])

    def test_affine_arithmetic(self):
        out = sc.denormalize(np.array([[1.5]]), (np.array([2.0]), np.array([3.0])))
        assert np.allclose(out, 6.5)

    def test_shape_mismatch_rejected(self):
        with pytest.raises(ValueError):
            sc.denormalize(np.zeros((3, 4)), (np.zeros(2), np.ones(2)))
