import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from uwenhance.data import (
    DatasetError,
    DegradeParams,
    PairedSample,
    build_toy_dataset,
    degrade,
    degrade_params_from_file,
    degrade_preset,
    list_pair_ids,
    load_pairs,
    synthesize_clean_image,
    train_transform,
)
from uwenhance.imgio import save_image


def write_pairs(root, names, seed=0):
    rng = np.random.default_rng(seed)
    (root / "raw").mkdir(parents=True, exist_ok=True)
    (root / "reference").mkdir(parents=True, exist_ok=True)
    for name in names:
        img = rng.uniform(0.0, 1.0, size=(24, 24, 3))
        save_image(root / "raw" / f"{name}.png", img)
        save_image(root / "reference" / f"{name}.png", 1.0 - img)


class TestLoader:
    def test_three_matched_pairs(self, tmp_path):
        write_pairs(tmp_path, ["a", "b", "c"])
        samples = list(load_pairs(tmp_path, split="test"))
        assert [s.id for s in samples] == ["a", "b", "c"]

    def test_unmatched_files_skipped_with_warning(self, tmp_path):
        write_pairs(tmp_path, ["a", "b", "c"])
        (tmp_path / "reference" / "c.png").unlink()
        with pytest.warns(RuntimeWarning, match="no reference counterpart"):
            ids = list_pair_ids(tmp_path)
        assert ids == ["a", "b"]

    def test_empty_split_is_hard_error(self, tmp_path):
        (tmp_path / "raw").mkdir(parents=True)
        (tmp_path / "reference").mkdir(parents=True)
        with pytest.raises(DatasetError, match="no matched"):
            list(load_pairs(tmp_path))

    def test_missing_layout_rejected(self, tmp_path):
        with pytest.raises(DatasetError, match="raw/ and reference/"):
            list_pair_ids(tmp_path)

    def test_train_shuffle_is_seed_deterministic(self, tmp_path):
        write_pairs(tmp_path, [f"img{i}" for i in range(8)])
        order1 = [s.id for s in load_pairs(tmp_path, split="train", seed=5)]
        order2 = [s.id for s in load_pairs(tmp_path, split="train", seed=5)]
        order3 = [s.id for s in load_pairs(tmp_path, split="train", seed=6)]
        assert order1 == order2
        assert order1 != order3
        assert sorted(order1) == sorted([f"img{i}" for i in range(8)])

    def test_images_decoded_to_unit_interval(self, tmp_path):
        write_pairs(tmp_path, ["a"])
        sample = next(load_pairs(tmp_path, split="test"))
        for img in (sample.raw, sample.reference):
            assert img.dtype == np.float64
            assert img.min() >= 0.0 and img.max() <= 1.0


class TestTrainTransform:
    def sample(self, h=100, w=80, seed=0):
        rng = np.random.default_rng(seed)
        raw = rng.uniform(0.0, 1.0, size=(h, w, 3))
        return PairedSample(raw=raw, reference=np.clip(raw * 0.5, 0.0, 1.0), id="s")

    def test_output_dims_default_pipeline(self):
        out = train_transform(self.sample(), seed=0)
        assert out.raw.shape == (320, 320, 3)
        assert out.reference.shape == (320, 320, 3)

    def test_equal_inputs_stay_equal(self):
        raw = np.random.default_rng(1).uniform(0.0, 1.0, size=(60, 60, 3))
        out = train_transform(PairedSample(raw=raw, reference=raw.copy(), id="s"), seed=3)
        np.testing.assert_array_equal(out.raw, out.reference)

    def test_seed_determinism(self):
        a = train_transform(self.sample(), seed=42)
        b = train_transform(self.sample(), seed=42)
        np.testing.assert_array_equal(a.raw, b.raw)
        np.testing.assert_array_equal(a.reference, b.reference)

    def test_pixelwise_relation_preserved_through_shared_crop(self):
        out = train_transform(self.sample(), seed=7)
        np.testing.assert_allclose(out.reference, np.clip(out.raw * 0.5, 0.0, 1.0), atol=1e-6)

    def test_custom_sizes(self):
        out = train_transform(self.sample(), seed=0, resize_to=40, crop_to=32)
        assert out.raw.shape == (32, 32, 3)

    def test_crop_larger_than_resize_rejected(self):
        with pytest.raises(ValueError, match="exceeds"):
            train_transform(self.sample(), seed=0, resize_to=32, crop_to=64)


class TestDegrade:
    def test_zero_attenuation_zero_haze_is_identity(self):
        clean = np.random.default_rng(0).uniform(0.0, 1.0, size=(16, 16, 3))
        params = DegradeParams(attenuation=(0.0, 0.0, 0.0), haze_strength=0.0, ambient=(0.3, 0.3, 0.3))
        np.testing.assert_array_equal(degrade(clean, params), clean)

    def test_infinite_attenuation_limit_is_ambient(self):
        clean = np.random.default_rng(1).uniform(0.0, 1.0, size=(16, 16, 3))
        ambient = (0.1, 0.4, 0.7)
        params = DegradeParams(attenuation=(500.0, 500.0, 500.0), haze_strength=1.0, ambient=ambient)
        out = degrade(clean, params)
        np.testing.assert_allclose(out, np.broadcast_to(ambient, out.shape), atol=1e-8)

    def test_bluish_preset_on_white_keeps_blue_above_red(self):
        white = np.ones((32, 32, 3))
        out = degrade(white, degrade_preset("bluish", seed=0))
        assert (out[..., 2] >= out[..., 0]).all()

    def test_monotone_in_attenuation_when_ambient_below_clean(self):
        clean = np.full((16, 16, 3), 0.8)
        params_lo = DegradeParams(attenuation=(0.5, 0.5, 0.5), haze_strength=0.5, ambient=(0.2, 0.2, 0.2))
        params_hi = DegradeParams(attenuation=(1.5, 1.5, 1.5), haze_strength=0.5, ambient=(0.2, 0.2, 0.2))
        assert (degrade(clean, params_hi) <= degrade(clean, params_lo) + 1e-12).all()

    def test_seed_determinism_and_jitter_variation(self):
        clean = np.random.default_rng(2).uniform(0.0, 1.0, size=(16, 16, 3))
        preset = degrade_preset("greenish", seed=3)
        np.testing.assert_array_equal(degrade(clean, preset), degrade(clean, preset))
        assert not np.array_equal(degrade(clean, preset), degrade(clean, preset.with_seed(4)))

    def test_unknown_preset_rejected(self):
        with pytest.raises(ValueError, match="unknown degradation preset"):
            degrade_preset("muddy")

    def test_params_from_plain_text_file(self, tmp_path):
        path = tmp_path / "water.cfg"
        path.write_text(
            "# custom water\nattenuation_r = 1.2\nattenuation_g = 0.5\nattenuation_b = 0.3\n"
            "haze_strength = 0.6\nambient_r = 0.1\nambient_g = 0.3\nambient_b = 0.5\nseed = 4\n"
        )
        params = degrade_params_from_file(path)
        assert params.attenuation == (1.2, 0.5, 0.3)
        assert params.haze_strength == 0.6
        assert params.seed == 4
        assert params.jitter == 0.0

    def test_params_file_rejects_unknown_and_missing_keys(self, tmp_path):
        bad = tmp_path / "bad.cfg"
        bad.write_text("attenuation_r = 1\nmurkiness = 2\n")
        with pytest.raises(ValueError, match="unknown degradation key"):
            degrade_params_from_file(bad)
        partial = tmp_path / "partial.cfg"
        partial.write_text("attenuation_r = 1\n")
        with pytest.raises(ValueError, match="missing degradation keys"):
            degrade_params_from_file(partial)

    @settings(max_examples=50, deadline=None)
    @given(st.integers(min_value=0, max_value=10_000))
    def test_output_always_in_unit_interval(self, seed):
        rng = np.random.default_rng(seed)
        clean = rng.uniform(0.0, 1.0, size=(12, 12, 3))
        params = DegradeParams(
            attenuation=tuple(rng.uniform(0.0, 3.0, size=3)),
            haze_strength=float(rng.uniform(0.0, 1.0)),
            ambient=tuple(rng.uniform(0.0, 1.0, size=3)),
            seed=seed,
            jitter=0.2,
        )
        out = degrade(clean, params)
        assert out.min() >= 0.0 and out.max() <= 1.0


class TestToyDataset:
    def test_builds_matched_pairs(self, tmp_path):
        ids = build_toy_dataset(tmp_path / "toy", n_pairs=4, size=48, seed=0)
        assert len(ids) == 4
        assert list_pair_ids(tmp_path / "toy") == ids
        sample = next(load_pairs(tmp_path / "toy", split="test"))
        assert sample.raw.shape == (48, 48, 3)
        assert not np.array_equal(sample.raw, sample.reference)

    def test_clean_images_are_structured_and_deterministic(self):
        a = synthesize_clean_image(size=48, seed=1)
        b = synthesize_clean_image(size=48, seed=1)
        np.testing.assert_array_equal(a, b)
        assert a.std() > 0.05
