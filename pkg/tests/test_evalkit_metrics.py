"""Task metrics against closed forms and brute-force oracles."""

import math

import numpy as np
import pytest
import scipy.stats

from latentcast import evalkit as ek
from oracles import abs_rel_loop, average_jaccard_enumerated, iou_boxes, psnr_twopass, stats_loop


def rng(seed=0):
    return np.random.default_rng(seed)


# -- psnr ------------------------------------------------------------------


def test_psnr_identical_is_inf():
    x = rng(1).random((2, 8, 8, 3))
    assert ek.psnr(x, x) == math.inf


def test_psnr_uniform_offset_closed_form():
    gt = np.full((4, 4), 0.5)
    pred = gt + 0.1
    assert abs(ek.psnr(pred, gt) - 20.0) < 1e-9


def test_psnr_matches_two_pass_oracle():
    r = rng(2)
    for _ in range(100):
        gt = r.random((3, 5, 5))
        pred = np.clip(gt + r.normal(scale=0.1, size=gt.shape), 0, 1)
        a, b = ek.psnr(pred, gt), psnr_twopass(pred, gt)
        assert abs(a - b) / abs(b) < 1e-6


# -- abs_rel ---------------------------------------------------------------


def test_abs_rel_exact_cases():
    gt = rng(3).uniform(1.0, 5.0, size=(2, 6, 6))
    assert ek.abs_rel(gt, gt) == 0.0
    assert abs(ek.abs_rel(1.1 * gt, gt) - 0.1) < 1e-12


def test_abs_rel_rejects_nonpositive_gt():
    with pytest.raises(ValueError, match="positive"):
        ek.abs_rel(np.ones(3), np.array([1.0, 0.0, 2.0]))


def test_abs_rel_matches_oracle():
    r = rng(4)
    for _ in range(100):
        gt = r.uniform(0.5, 9.0, size=(4, 7))
        pred = gt + r.normal(scale=0.3, size=gt.shape)
        a, b = ek.abs_rel(pred, gt), abs_rel_loop(pred, gt)
        assert abs(a - b) < 1e-7 * max(1.0, abs(b))


# -- iou ---------------------------------------------------------------------


def test_iou_closed_forms():
    assert ek.iou((1, 1, 4, 5), (1, 1, 4, 5)) == 1.0
    assert ek.iou((0, 0, 1, 1), (5, 5, 6, 6)) == 0.0
    assert abs(ek.iou((0, 0, 2, 2), (1, 1, 3, 3)) - 1 / 7) < 1e-12


def test_iou_matches_oracle():
    r = rng(5)
    for _ in range(100):
        a = np.sort(r.uniform(0, 10, size=4).reshape(2, 2), axis=0).T.reshape(-1)[[0, 2, 1, 3]]
        b = np.sort(r.uniform(0, 10, size=4).reshape(2, 2), axis=0).T.reshape(-1)[[0, 2, 1, 3]]
        a = (min(a[0], a[2]), min(a[1], a[3]), max(a[0], a[2]), max(a[1], a[3]))
        b = (min(b[0], b[2]), min(b[1], b[3]), max(b[0], b[2]), max(b[1], b[3]))
        assert abs(ek.iou(a, b) - iou_boxes(a, b)) < 1e-12


def test_track_iou_skips_absent_frames():
    pred = np.tile([0.0, 0.0, 2.0, 2.0], (12, 1))
    gt = np.tile([0.0, 0.0, 2.0, 2.0], (12, 1))
    gt[5] = (50, 50, 52, 52)
    present = np.ones(12)
    present[5] = 0.0
    assert ek.track_iou(pred, gt, present) == 1.0
    assert ek.track_iou(pred, gt, np.zeros(12)) is None


# -- average jaccard ---------------------------------------------------------


def test_average_jaccard_perfect():
    xy = rng(6).uniform(0, 32, size=(4, 12, 2))
    vis = np.ones((4, 12))
    assert ek.average_jaccard(xy, vis, xy, vis, 32, 32) == 1.0


def test_average_jaccard_all_predicted_invisible():
    xy = rng(7).uniform(0, 32, size=(3, 12, 2))
    assert ek.average_jaccard(xy, np.zeros((3, 12)), xy, np.ones((3, 12)), 32, 32) == 0.0


def test_average_jaccard_no_visible_gt_is_missing():
    xy = rng(8).uniform(0, 32, size=(2, 12, 2))
    assert ek.average_jaccard(xy, np.ones((2, 12)), xy, np.zeros((2, 12)), 32, 32) is None


def test_average_jaccard_handcrafted_vs_enumeration():
    # 3 points x 2 frames with mixed visibility and distances
    gt_xy = np.array([[[4.0, 4.0], [6.0, 4.0]], [[10.0, 10.0], [12.0, 10.0]], [[20.0, 20.0], [20.0, 22.0]]])
    gt_vis = np.array([[1, 1], [1, 0], [0, 1]], dtype=float)
    pred_xy = gt_xy + np.array([[[0.1, 0.0], [3.0, 0.0]], [[0.4, 0.1], [0.0, 0.0]], [[5.0, 5.0], [0.2, -0.1]]])
    pred_vis = np.array([[1, 1], [0, 1], [1, 1]], dtype=float)
    ours = ek.average_jaccard(pred_xy, pred_vis, gt_xy, gt_vis, 32, 32)
    oracle = average_jaccard_enumerated(pred_xy, pred_vis, gt_xy, gt_vis, 32, 32)
    assert abs(ours - oracle) < 1e-12


def test_average_jaccard_random_vs_enumeration():
    r = rng(9)
    for _ in range(100):
        q, t = int(r.integers(1, 5)), 12
        gt_xy = r.uniform(0, 64, size=(q, t, 2))
        pred_xy = gt_xy + r.normal(scale=3.0, size=(q, t, 2))
        gt_vis = (r.random((q, t)) > 0.3).astype(float)
        pred_vis = (r.random((q, t)) > 0.3).astype(float)
        ours = ek.average_jaccard(pred_xy, pred_vis, gt_xy, gt_vis, 64, 64)
        oracle = average_jaccard_enumerated(pred_xy, pred_vis, gt_xy, gt_vis, 64, 64)
        if oracle is None:
            assert ours is None
        else:
            assert abs(ours - oracle) < 1e-9


# -- per-example stats ---------------------------------------------------------


def test_stats_identical_samples():
    s = ek.per_example_stats([2.5] * 10)
    assert s.std == 0.0 and s.min == s.mean == s.max == 2.5


def test_stats_zero_one():
    s = ek.per_example_stats([0.0, 1.0])
    assert s.mean == 0.5 and s.min == 0.0 and s.max == 1.0 and abs(s.std - 0.5) < 1e-15


def test_stats_match_oracle():
    r = rng(10)
    for _ in range(100):
        vals = r.normal(size=10)
        got = ek.per_example_stats(vals)
        want = stats_loop(vals)
        for key in ("mean", "std", "min", "max"):
            assert abs(getattr(got, key) - want[key]) < 1e-12
        assert got.min <= got.mean <= got.max


# -- correlation ----------------------------------------------------------------


def test_correlation_monotone_cases():
    x = [1.0, 2.0, 3.0, 4.0]
    up = ek.correlation(x, [2.0, 4.0, 5.0, 9.0])
    assert up.spearman_rho == 1.0
    down = ek.correlation(x, [9.0, 5.0, 4.0, 2.0])
    assert down.spearman_rho == -1.0 and down.pearson_r < -0.9
    exact = ek.correlation(x, [2.0, 4.0, 6.0, 8.0])
    assert abs(exact.pearson_r - 1.0) < 1e-12


def test_correlation_undefined_cases():
    few = ek.correlation([1.0, 2.0], [1.0, 2.0])
    assert few.pearson_r is None and few.spearman_rho is None
    flat = ek.correlation([1.0, 1.0, 1.0], [1.0, 2.0, 3.0])
    assert flat.pearson_r is None and flat.spearman_rho is None


def test_correlation_matches_scipy():
    r = rng(11)
    for _ in range(100):
        n = int(r.integers(3, 12))
        x = r.normal(size=n)
        y = r.normal(size=n)
        got = ek.correlation(x, y)
        assert abs(got.pearson_r - scipy.stats.pearsonr(x, y).statistic) < 1e-12
        assert abs(got.spearman_rho - scipy.stats.spearmanr(x, y).statistic) < 1e-12
