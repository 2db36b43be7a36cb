import numpy as np
import pytest
import torch
from hypothesis import given, settings
from hypothesis import strategies as st

from uwenhance.colorspace import hsv_to_rgb, rgb_to_hsv
from uwenhance.imgio import save_image
from uwenhance.losses import ssim_loss
from uwenhance.metrics import (
    UCIQE_COEFFS,
    MetricReport,
    MetricRow,
    UiqmWeights,
    combine_uciqe,
    evaluate_dir,
    mse_psnr,
    ssim_index,
    uciqe,
    uciqe_components,
    uicm,
    uiconm,
    uiqm,
    uism,
)


def rand_image(seed, h=32, w=32):
    return np.random.default_rng(seed).uniform(0.0, 1.0, size=(h, w, 3))


class TestMsePsnr:
    def test_identical_hits_cap(self):
        x = rand_image(0)
        assert mse_psnr(x, x) == (0.0, 100.0)

    def test_uniform_16_level_error(self):
        gt = np.full((8, 8, 3), 100 / 255.0)
        pred = gt + 16 / 255.0
        mse, psnr = mse_psnr(pred, gt)
        assert mse == pytest.approx(256.0, abs=1e-9)
        assert psnr == pytest.approx(24.0485, abs=1e-3)

    def test_matches_loop_oracle(self):
        pred, gt = rand_image(1, 8, 8), rand_image(2, 8, 8)
        total = 0.0
        for a, b in zip(pred.reshape(-1), gt.reshape(-1)):
            total += ((a - b) * 255.0) ** 2
        assert mse_psnr(pred, gt)[0] == pytest.approx(total / pred.size, abs=1e-9)

    def test_psnr_strictly_decreases_with_mse(self):
        gt = np.full((8, 8, 3), 0.5)
        psnrs = [mse_psnr(gt + off, gt)[1] for off in (0.01, 0.05, 0.1, 0.2)]
        assert all(a > b for a, b in zip(psnrs, psnrs[1:]))

    def test_shape_mismatch(self):
        with pytest.raises(ValueError, match="shape mismatch"):
            mse_psnr(rand_image(0), rand_image(0, h=16))


class TestSsimIndex:
    def test_identical_is_one(self):
        x = rand_image(3)
        assert ssim_index(x, x) == pytest.approx(1.0, abs=1e-12)

    def test_inverted_checkerboard_goes_negative(self):
        tile = np.indices((16, 16)).sum(axis=0) % 2
        img = np.repeat(tile[:, :, None], 3, axis=2).astype(np.float64)
        assert ssim_index(img, 1.0 - img) < 0.0

    def test_symmetry(self):
        a, b = rand_image(4), rand_image(5)
        assert ssim_index(a, b) == pytest.approx(ssim_index(b, a), abs=1e-12)

    def test_shares_definition_with_loss(self):
        a, b = rand_image(6), rand_image(7)
        to_t = lambda x: torch.from_numpy(x.transpose(2, 0, 1))
        assert ssim_index(a, b) == pytest.approx(1.0 - float(ssim_loss(to_t(a), to_t(b))), abs=1e-12)


class TestUciqe:
    def test_constant_gray_is_zero(self):
        assert uciqe(np.full((16, 16, 3), 0.5)) == pytest.approx(0.0, abs=1e-6)

    def test_coefficient_sum(self):
        assert combine_uciqe(1.0, 1.0, 1.0) == pytest.approx(1.0001, abs=1e-12)
        assert UCIQE_COEFFS == (0.4680, 0.2745, 0.2576)

    def test_luminance_contrast_strictly_increases_score(self):
        flat = np.full((32, 32, 3), 0.5)
        contrasted = flat.copy()
        contrasted[:16] = 0.05
        contrasted[16:] = 0.95
        assert uciqe(contrasted) > uciqe(flat)

    def test_components_respond_to_the_right_planes(self):
        sigma_c, con_l, mu_s = uciqe_components(np.full((16, 16, 3), 0.5))
        assert sigma_c == pytest.approx(0.0, abs=1e-9)
        assert con_l == pytest.approx(0.0, abs=1e-9)
        assert mu_s == pytest.approx(0.0, abs=1e-6)


class TestUiqm:
    def test_composition_is_exactly_linear(self):
        img = rand_image(8, 64, 64)
        scores = uiqm(img)
        w = UiqmWeights()
        assert scores.uiqm == w.c1 * scores.uicm + w.c2 * scores.uism + w.c3 * scores.uiconm
        assert (w.c1, w.c2, w.c3) == (0.0282, 0.2953, 3.5753)

    def test_custom_weights_applied(self):
        img = rand_image(9, 32, 32)
        scores = uiqm(img, UiqmWeights(c1=1.0, c2=0.0, c3=0.0))
        assert scores.uiqm == scores.uicm

    def test_constant_image_degenerates(self):
        img = np.full((32, 32, 3), 0.4)
        assert uism(img) == 0.0
        assert uiconm(img) == 0.0

    def test_saturation_boost_raises_uicm(self):
        base_rgb = rand_image(10, 32, 32) * 0.3 + 0.35  # mildly saturated
        hsv = rgb_to_hsv(torch.from_numpy(base_rgb))
        boosted = hsv.clone()
        boosted[..., 1] = torch.clamp(boosted[..., 1] * 1.5, 0.0, 1.0)
        boosted_rgb = hsv_to_rgb(boosted).numpy()
        assert uicm(boosted_rgb) > uicm(base_rgb)

    @settings(max_examples=25, deadline=None)
    @given(st.integers(min_value=0, max_value=10_000))
    def test_flip_invariance_on_block_divisible_dims(self, seed):
        img = rand_image(seed, 40, 64)
        flipped = img[:, ::-1].copy()
        assert uicm(flipped) == pytest.approx(uicm(img), rel=1e-9)
        assert uism(flipped) == pytest.approx(uism(img), rel=1e-9)
        assert uiconm(flipped) == pytest.approx(uiconm(img), rel=1e-9)
        assert uciqe(flipped) == pytest.approx(uciqe(img), rel=1e-9)


class TestEvaluateDir:
    def write_images(self, directory, images):
        directory.mkdir(parents=True, exist_ok=True)
        for name, img in images.items():
            save_image(directory / f"{name}.png", img)

    def test_pred_equals_gt(self, tmp_path):
        images = {f"img_{i}": rand_image(i, 24, 24) for i in range(3)}
        self.write_images(tmp_path / "pred", images)
        report = evaluate_dir(tmp_path / "pred", tmp_path / "pred")
        assert len(report.rows) == 3
        assert report.aggregate.mse == pytest.approx(0.0, abs=1e-12)
        assert report.aggregate.ssim == pytest.approx(1.0, abs=1e-12)
        assert report.aggregate.psnr_db == pytest.approx(100.0)

    def test_empty_directory_flagged(self, tmp_path):
        (tmp_path / "pred").mkdir()
        report = evaluate_dir(tmp_path / "pred")
        assert report.rows == []
        assert report.aggregate is None

    def test_aggregate_is_mean_of_hand_computed_mses(self, tmp_path):
        gt = np.full((16, 16, 3), 0.5)
        offsets = (8 / 255.0, 16 / 255.0, 32 / 255.0)
        self.write_images(tmp_path / "gt", {f"i{k}": gt for k in range(3)})
        self.write_images(tmp_path / "pred", {f"i{k}": gt + off for k, off in enumerate(offsets)})
        report = evaluate_dir(tmp_path / "pred", tmp_path / "gt")
        expected = np.mean([(off * 255.0) ** 2 for off in offsets])
        assert report.aggregate.mse == pytest.approx(expected, abs=1e-6)

    def test_missing_counterpart_recorded_and_run_continues(self, tmp_path):
        self.write_images(tmp_path / "pred", {"a": rand_image(1, 24, 24), "b": rand_image(2, 24, 24)})
        self.write_images(tmp_path / "gt", {"a": rand_image(1, 24, 24)})
        report = evaluate_dir(tmp_path / "pred", tmp_path / "gt")
        by_id = {r.image_id: r for r in report.rows}
        assert by_id["a"].error is None
        assert "missing counterpart" in by_id["b"].error
        assert report.aggregate is not None

    def test_unreadable_image_recorded(self, tmp_path):
        self.write_images(tmp_path / "pred", {"ok": rand_image(3, 24, 24)})
        (tmp_path / "pred" / "broken.png").write_bytes(b"not a png")
        report = evaluate_dir(tmp_path / "pred")
        by_id = {r.image_id: r for r in report.rows}
        assert by_id["broken"].error is not None
        assert by_id["ok"].error is None

    def test_no_reference_mode_leaves_fr_columns_empty(self, tmp_path):
        self.write_images(tmp_path / "pred", {"x": rand_image(4, 24, 24)})
        report = evaluate_dir(tmp_path / "pred")
        row = report.rows[0]
        assert row.mse is None and row.ssim is None
        assert row.uciqe is not None and row.uiqm is not None

    def test_csv_and_json_round_trip(self, tmp_path):
        self.write_images(tmp_path / "pred", {"x": rand_image(5, 24, 24)})
        report = evaluate_dir(tmp_path / "pred", tmp_path / "pred")
        report.to_csv(tmp_path / "r.csv")
        report.to_json(tmp_path / "r.json")
        lines = (tmp_path / "r.csv").read_text().splitlines()
        assert lines[0].startswith("image_id,mse,psnr_db,ssim,uciqe,uicm,uism,uiconm,uiqm")
        assert lines[-1].startswith("AGGREGATE")
        assert (tmp_path / "r.json").stat().st_size > 0

    def test_deterministic_filename_order(self, tmp_path):
        self.write_images(tmp_path / "pred", {n: rand_image(6, 16, 16) for n in ("c", "a", "b")})
        report = evaluate_dir(tmp_path / "pred")
        assert [r.image_id for r in report.rows] == ["a", "b", "c"]


def test_metric_row_columns_fixed():
    row = MetricRow(image_id="x")
    assert list(row.values().keys()) == ["mse", "psnr_db", "ssim", "uciqe", "uicm", "uism", "uiconm", "uiqm"]


def test_report_finalize_with_only_error_rows():
    report = MetricReport(rows=[MetricRow(image_id="bad", error="boom")])
    assert report.finalize().aggregate is None
