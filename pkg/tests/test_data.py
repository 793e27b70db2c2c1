import numpy as np
import pytest

from totokit import data as dt
from totokit.numkit import Rng


class TestSynthetic:
    def test_same_seed_bit_identical(self):
        cfg = dt.SynthConfig(num_series=3, num_variates=2, length=128, seed=5)
        a = dt.generate_synthetic(cfg)
        b = dt.generate_synthetic(cfg)
        for x, y in zip(a, b):
            assert x.id == y.id and np.array_equal(x.values, y.values)

    def test_rescale_contract(self):
        cfg = dt.SynthConfig(num_series=4, num_variates=3, length=200,
                             rescale_range=(0.0, 1.0), seed=1)
        for series in dt.generate_synthetic(cfg):
            assert series.values.min() >= 0.0
            assert series.values.max() <= 1.0

    def test_sinusoid_acf_at_period(self):
        cfg = dt.SynthConfig(num_series=1, num_variates=1, length=960,
                             piecewise_linear_trend=False, arma=False,
                             sinusoidal_seasonality=True,
                             season_period_range=(24, 24), clip_quantile=0.0, seed=3)
        x = dt.generate_synthetic(cfg)[0].values[0]
        acf = np.corrcoef(x[:-24], x[24:])[0, 1]
        assert acf > 0.99

    def test_no_components_rejected(self):
        cfg = dt.SynthConfig(piecewise_linear_trend=False, arma=False,
                             sinusoidal_seasonality=False)
        with pytest.raises(ValueError, match="components"):
            dt.generate_synthetic(cfg)

    def test_values_always_finite(self):
        for dist in ("gaussian", "student_t", "lognormal"):
            cfg = dt.SynthConfig(num_series=2, num_variates=2, length=256,
                                 residual_dist=dist, seed=11)
            for series in dt.generate_synthetic(cfg):
                assert np.all(np.isfinite(series.values))

    def test_config_validation(self):
        with pytest.raises(ValueError):
            dt.SynthConfig(length=4)
        with pytest.raises(ValueError):
            dt.SynthConfig(rescale_range=(1.0, 1.0))
        with pytest.raises(ValueError):
            dt.SynthConfig(residual_dist="cauchy")


class TestIO:
    def test_roundtrip(self, tmp_path):
        cfg = dt.SynthConfig(num_series=10, num_variates=2, length=64, seed=9)
        series = dt.generate_synthetic(cfg)
        series[0].weights[0, :5] = 0.0
        series[1].metric_type = "gauge"
        path = tmp_path / "ds.jsonl"
        dt.save_dataset(series, path)
        back = dt.load_dataset(path)
        assert len(back) == len(series)
        for x, y in zip(series, back):
            assert x.id == y.id and x.freq == y.freq
            assert np.array_equal(x.values, y.values)
            assert np.array_equal(x.weights, y.weights)
            assert x.metric_type == y.metric_type

    def test_missing_values_field_names_it(self, tmp_path):
        path = tmp_path / "bad.jsonl"
        path.write_text('{"id": "x", "freq": "H"}\n')
        with pytest.raises(dt.DatasetFormatError, match="values"):
            dt.load_dataset(path)

    def test_malformed_json_reports_line(self, tmp_path):
        path = tmp_path / "bad.jsonl"
        path.write_text('{"id": "a", "freq": "H", "values": [[1.0]]}\n{oops\n')
        with pytest.raises(dt.DatasetFormatError, match=":2"):
            dt.load_dataset(path)

    def test_ragged_rows_rejected(self, tmp_path):
        path = tmp_path / "bad.jsonl"
        path.write_text('{"id": "a", "freq": "H", "values": [[1.0, 2.0], [3.0]]}\n')
        with pytest.raises(dt.DatasetFormatError, match="ragged"):
            dt.load_dataset(path)

    def test_freq_table(self):
        series = dt.MultivariateSeries(id="x", freq="H", values=np.ones((1, 4)))
        assert series.step_seconds == 3600
        assert dt.FREQ_STEP_SECONDS["T"] == 60

    def test_unknown_freq_rejected(self):
        with pytest.raises(ValueError, match="frequency"):
            dt.MultivariateSeries(id="x", freq="Q", values=np.ones((1, 4)))

    def test_imputation_modes(self, tmp_path):
        path = tmp_path / "gaps.jsonl"
        path.write_text(
            '{"id": "c", "freq": "H", "metric_type": "count", "values": [[1.0, null, 3.0]]}\n'
            '{"id": "g", "freq": "H", "metric_type": "gauge", "values": [[1.0, null, 3.0]]}\n')
        counts, gauges = dt.load_dataset(path, impute_missing=True)
        assert np.array_equal(counts.values, [[1.0, 0.0, 3.0]])
        assert np.array_equal(gauges.values, [[1.0, 2.0, 3.0]])


class TestPreprocess:
    def test_identity_path_left_pad_only(self):
        series = dt.MultivariateSeries(id="x", freq="H",
                                       values=np.arange(10.0)[None, :])
        batch = dt.preprocess_batch([series], patch_size=4)[0]
        assert batch.values.shape == (1, 12)
        assert np.array_equal(batch.weights[0, :2], [0.0, 0.0])
        assert np.array_equal(batch.values[0, 2:], np.arange(10.0))

    def test_weight_conservation_with_offsets(self):
        rng = Rng(3)
        series = [dt.MultivariateSeries(id=f"s{i}", freq="H",
                                        values=np.random.default_rng(i).normal(size=(2, 37)))
                  for i in range(5)]
        total_before = sum(s.weights.sum() for s in series)
        batches = dt.preprocess_batch(series, patch_size=8, offset_rng=rng,
                                      shuffle=dt.ShuffleConfig(probability=1.0))
        total_after = sum(b.weights.sum() for b in batches)
        assert total_before == total_after
        for b in batches:
            assert b.values.shape[1] % 8 == 0

    def test_block_diagonal_id_mask(self):
        a = dt.MultivariateSeries(id="a", freq="H", values=np.ones((2, 8)))
        b = dt.MultivariateSeries(id="b", freq="H", values=np.ones((2, 8)))
        batch = dt.preprocess_batch([a, b], patch_size=4)[0]
        expected = np.zeros((4, 4), dtype=bool)
        expected[:2, :2] = True
        expected[2:, 2:] = True
        assert np.array_equal(batch.id_mask, expected)

    def test_id_mask_is_equivalence_relation_after_shuffle(self):
        series = [dt.MultivariateSeries(id=f"s{i}", freq="H", values=np.ones((3, 16)))
                  for i in range(4)]
        batches = dt.preprocess_batch(series, patch_size=4, offset_rng=Rng(0),
                                      shuffle=dt.ShuffleConfig(mode="random",
                                                               probability=1.0))
        for batch in batches:
            mask = batch.id_mask
            assert np.array_equal(mask, mask.T)
            assert np.all(np.diag(mask))
            # transitivity within blocks: mask equals group-relation matrix
            rebuilt = batch.group_ids[:, None] == batch.group_ids[None, :]
            assert np.array_equal(mask, rebuilt)

    def test_max_variates_splits_packs(self):
        series = [dt.MultivariateSeries(id=f"s{i}", freq="H", values=np.ones((3, 8)))
                  for i in range(4)]
        batches = dt.preprocess_batch(series, patch_size=4, max_variates=6)
        assert [b.values.shape[0] for b in batches] == [6, 6]

    def test_adjacent_interleave(self):
        a = dt.MultivariateSeries(id="a", freq="H", values=np.ones((2, 8)))
        b = dt.MultivariateSeries(id="b", freq="H", values=np.zeros((2, 8)))
        batch = dt.preprocess_batch([a, b], patch_size=4, offset_rng=Rng(1),
                                    shuffle=dt.ShuffleConfig(mode="adjacent",
                                                             probability=1.0))[0]
        assert list(batch.group_ids) == [0, 1, 0, 1]

    def test_padding_never_alters_values(self):
        rng = Rng(4)
        raw = np.random.default_rng(2).normal(size=(2, 21))
        series = dt.MultivariateSeries(id="x", freq="H", values=raw)
        batch = dt.preprocess_batch([series], patch_size=8, offset_rng=rng)[0]
        observed = batch.weights[0].astype(bool)
        assert np.array_equal(batch.values[0, observed], raw[0])

    def test_empty_input_rejected(self):
        with pytest.raises(ValueError, match="empty"):
            dt.preprocess_batch([], patch_size=4)
