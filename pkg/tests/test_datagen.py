import numpy as np
import pytest

from qdrop.datagen import (DataError, DEFAULT_TRAIN_FRACTION, PreparedDataset,
                           fit_scale_split, gen_module, gen_moons, gen_sin,
                           generate, load_csv, prepare)


class TestGenerators:
    def test_sin_shape_and_signal(self):
        raw = gen_sin(n=20, seed=0)
        assert raw.features.shape == (20, 1)
        assert raw.targets.shape == (20,)
        assert np.allclose(raw.features[:, 0], np.linspace(-1, 1, 20))
        noiseless = gen_sin(n=20, noise_amplitude=0.0)
        assert np.allclose(noiseless.targets,
                           np.sin(np.pi * noiseless.features[:, 0]))

    def test_module_signal(self):
        noiseless = gen_module(n=10, noise_amplitude=0.0)
        x = noiseless.features[:, 0]
        assert np.allclose(noiseless.targets, np.abs(x) - 0.5)

    def test_moons_geometry(self):
        raw = gen_moons(n=50, noise_amplitude=0.0)
        assert raw.features.shape == (50, 2)
        assert np.array_equal(raw.targets[:25], np.zeros(25))
        assert np.array_equal(raw.targets[25:], np.ones(25))
        # upper moon on the unit circle, lower moon shifted by (1, 0.5)
        upper = raw.features[:25]
        assert np.allclose(np.linalg.norm(upper, axis=1), 1.0)
        lower = raw.features[25:]
        assert np.allclose(np.linalg.norm(lower - [1.0, 0.5], axis=1), 1.0)

    def test_noise_is_seeded(self):
        a = gen_sin(seed=3)
        b = gen_sin(seed=3)
        c = gen_sin(seed=4)
        assert np.array_equal(a.targets, b.targets)
        assert not np.array_equal(a.targets, c.targets)

    def test_generate_dispatch(self):
        assert generate("sin").task == "sin"
        assert generate("moons").task == "moons"
        with pytest.raises(DataError):
            generate("spiral")

    def test_invalid_sizes(self):
        with pytest.raises(DataError):
            gen_sin(n=1)
        with pytest.raises(DataError):
            gen_moons(n=7)


class TestFitScaleSplit:
    def test_split_sizes(self):
        sin = prepare("sin")
        assert len(sin.train_idx) == 15 and len(sin.test_idx) == 5
        moons = prepare("moons")
        assert len(moons.train_idx) == 20 and len(moons.test_idx) == 30

    def test_default_fractions(self):
        assert DEFAULT_TRAIN_FRACTION == {"sin": 0.75, "module": 0.75,
                                          "moons": 0.4}

    def test_scaler_fitted_on_train_only(self):
        ds = prepare("sin", data_seed=0, split_seed=1)
        train_x = ds.features[ds.train_idx]
        # train features exactly span [-1, 1]
        assert train_x.min() == pytest.approx(-1.0)
        assert train_x.max() == pytest.approx(1.0)
        train_y = ds.targets[ds.train_idx]
        assert train_y.min() == pytest.approx(-1.0)
        assert train_y.max() == pytest.approx(1.0)

    def test_regression_features_clamped(self):
        ds = prepare("sin", data_seed=0, split_seed=1)
        assert np.all(np.abs(ds.features) <= 1.0)
        # the clamp count matches the unclamped transform
        raw = ds.features_raw
        lo, hi = ds.feature_min, ds.feature_max
        unclamped = 2 * (raw - lo) / (hi - lo) - 1
        assert ds.clamp_count == int(np.count_nonzero(np.abs(unclamped) > 1.0))

    def test_moons_labels_unchanged(self):
        ds = prepare("moons")
        assert set(np.unique(ds.targets)) == {0.0, 1.0}
        assert np.all(np.abs(ds.features) <= 2.0)

    def test_split_is_seeded(self):
        a = prepare("sin", split_seed=5)
        b = prepare("sin", split_seed=5)
        c = prepare("sin", split_seed=6)
        assert np.array_equal(a.train_idx, b.train_idx)
        assert not np.array_equal(a.train_idx, c.train_idx)

    def test_degenerate_split_rejected(self):
        raw = gen_sin(n=4)
        with pytest.raises(DataError):
            fit_scale_split(raw, 1.0)

    def test_train_test_partition(self):
        ds = prepare("moons")
        merged = np.sort(np.concatenate([ds.train_idx, ds.test_idx]))
        assert np.array_equal(merged, np.arange(50))


class TestCsvRoundTrip:
    @pytest.mark.parametrize("task", ["sin", "moons"])
    def test_round_trip(self, task):
        ds = prepare(task)
        text = ds.to_csv()
        header = text.splitlines()[0]
        d = ds.features.shape[1]
        assert header == ",".join([f"x{i + 1}" for i in range(d)]
                                  + ["y", "split"])
        back = load_csv(text, task)
        assert np.allclose(back.features, ds.features, atol=1e-10)
        assert np.allclose(back.targets, ds.targets, atol=1e-10)
        assert np.array_equal(back.train_idx, ds.train_idx)
        assert np.array_equal(back.test_idx, ds.test_idx)

    def test_train_arrays(self):
        ds = prepare("sin")
        x, y = ds.train_arrays()
        assert x.shape == (15, 1) and y.shape == (15,)
        assert not ds.is_classification
        assert prepare("moons").is_classification
