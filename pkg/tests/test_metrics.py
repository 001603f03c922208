import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.spatial.distance import cdist
from skimage.metrics import structural_similarity

from sarsplat import chamfer, dbscan_filter, precision_recall_f1, psnr, ssim
from sarsplat.metrics import (
    dbscan_inlier_mask,
    evaluate_images,
    evaluate_point_clouds,
    ssim_with_grad,
)
from sarsplat.validation import InvalidParameterError


class TestPsnr:
    def test_identical_is_inf(self, rng):
        x = rng.random((8, 8))
        assert psnr(x, x) == float("inf")

    def test_mse_hundredth(self):
        x = np.zeros((10, 10))
        y = np.full((10, 10), 0.1)
        assert psnr(x, y, 1.0) == pytest.approx(20.0, abs=1e-12)

    def test_mse_one(self):
        x = np.zeros((10, 10))
        y = np.ones((10, 10))
        assert psnr(x, y, 1.0) == pytest.approx(0.0, abs=1e-12)

    def test_identical_beats_any_other(self, rng):
        x = rng.random((8, 8))
        y = x + rng.normal(scale=0.01, size=x.shape)
        assert psnr(x, x) > psnr(x, y)

    def test_shape_mismatch(self):
        with pytest.raises(InvalidParameterError):
            psnr(np.zeros((4, 4)), np.zeros((5, 4)))


class TestSsim:
    def test_identical_is_one(self, rng):
        x = rng.random((16, 16))
        assert ssim(x, x) == pytest.approx(1.0, abs=1e-12)

    def test_constant_images_closed_form(self):
        a, b = 0.3, 0.7
        c1 = (0.01 * 1.0) ** 2
        x = np.full((20, 20), a)
        y = np.full((20, 20), b)
        assert ssim(x, y) == pytest.approx((2 * a * b + c1) / (a * a + b * b + c1), rel=1e-10)

    def test_inverted_binary_below_half(self, rng):
        x = (rng.random((32, 32)) > 0.5).astype(float)
        assert ssim(x, 1.0 - x) < 0.5

    def test_matches_skimage_reference(self, rng):
        for shape in [(16, 16), (24, 40)]:
            x = rng.random(shape)
            y = rng.random(shape)
            ref = structural_similarity(
                x, y, win_size=11, gaussian_weights=True, sigma=1.5,
                use_sample_covariance=False, data_range=1.0,
            )
            assert ssim(x, y) == pytest.approx(ref, abs=1e-12)

    def test_small_image_single_window(self, rng):
        x = rng.random((6, 6))
        y = rng.random((6, 6))
        val = ssim(x, y)
        assert -1.0 <= val <= 1.0
        assert ssim(x, x) == pytest.approx(1.0, abs=1e-12)

    @pytest.mark.parametrize("shape", [(16, 16), (8, 8)])
    def test_gradient_matches_fd(self, rng, shape):
        x = rng.random(shape)
        y = rng.random(shape)
        _, grad = ssim_with_grad(x, y)
        h = 1e-5
        num = np.zeros_like(x)
        for i in range(shape[0]):
            for j in range(shape[1]):
                xp = x.copy()
                xp[i, j] += h
                xm = x.copy()
                xm[i, j] -= h
                num[i, j] = (ssim(xp, y) - ssim(xm, y)) / (2 * h)
        np.testing.assert_allclose(grad, num, atol=5e-10)


class TestChamfer:
    def test_identical_zero(self, rng):
        pts = rng.random((30, 3))
        d_ab, d_ba, cd = chamfer(pts, pts)
        assert d_ab == 0 and d_ba == 0 and cd == 0

    def test_single_pair(self):
        _, _, cd = chamfer(np.array([[0.0, 0, 0]]), np.array([[1.0, 0, 0]]))
        assert cd == pytest.approx(1.0)

    def test_hand_enumeration(self):
        d_ab, d_ba, cd = chamfer(np.array([[0.0, 0, 0], [2.0, 0, 0]]), np.array([[0.0, 0, 0]]))
        assert d_ab == pytest.approx(2.0)   # avg(0, 4)
        assert d_ba == pytest.approx(0.0)
        assert cd == pytest.approx(1.0)

    def test_symmetry(self, rng):
        a = rng.random((25, 3))
        b = rng.random((40, 3))
        assert chamfer(a, b)[2] == pytest.approx(chamfer(b, a)[2], rel=1e-12)

    def test_against_brute_force(self, rng):
        a = rng.normal(size=(30, 3))
        b = rng.normal(size=(50, 3))
        d = cdist(a, b) ** 2
        expected = 0.5 * (d.min(axis=1).mean() + d.min(axis=0).mean())
        assert chamfer(a, b)[2] == pytest.approx(expected, rel=1e-12)

    def test_empty_raises(self):
        with pytest.raises(InvalidParameterError):
            chamfer(np.zeros((0, 3)), np.zeros((3, 3)))


class TestPrecisionRecallF1:
    def test_identical_perfect(self, rng):
        pts = rng.random((20, 3))
        assert precision_recall_f1(pts, pts, 0.1) == (1.0, 1.0, 1.0)

    def test_hand_case(self):
        g = np.array([[0.0, 0, 0], [10.0, 0, 0]])
        r = np.array([[0.0, 0, 0]])
        p, rec, f1 = precision_recall_f1(g, r, 0.5)
        assert (p, rec) == (0.5, 1.0)
        assert f1 == pytest.approx(2.0 / 3.0)

    def test_disjoint_zero(self):
        g = np.array([[0.0, 0, 0]])
        r = np.array([[5.0, 0, 0]])
        assert precision_recall_f1(g, r, 1e-9) == (0.0, 0.0, 0.0)

    def test_monotone_in_tau(self, rng):
        g = rng.normal(size=(40, 3))
        r = rng.normal(size=(35, 3))
        taus = [0.05, 0.2, 0.5, 1.0, 3.0]
        vals = [precision_recall_f1(g, r, t) for t in taus]
        ps = [v[0] for v in vals]
        rs = [v[1] for v in vals]
        assert all(a <= b + 1e-12 for a, b in zip(ps, ps[1:]))
        assert all(a <= b + 1e-12 for a, b in zip(rs, rs[1:]))

    @given(st.integers(0, 2**31 - 1))
    @settings(max_examples=20, deadline=None)
    def test_f1_harmonic_identity(self, seed):
        rng = np.random.default_rng(seed)
        g = rng.normal(size=(15, 3))
        r = rng.normal(size=(12, 3))
        p, rec, f1 = precision_recall_f1(g, r, 0.8)
        expected = 0.0 if p + rec == 0 else 2 * p * rec / (p + rec)
        assert f1 == pytest.approx(expected, abs=1e-12)


def reference_dbscan(points, eps, min_pts):
    """Textbook DBSCAN used as the oracle; returns the inlier mask."""
    n = len(points)
    d = cdist(points, points)
    neighbors = [np.flatnonzero(d[i] <= eps) for i in range(n)]
    core = np.array([len(nb) >= min_pts for nb in neighbors])
    labels = np.full(n, -1)
    cluster = 0
    for i in range(n):
        if labels[i] != -1 or not core[i]:
            continue
        stack = [i]
        labels[i] = cluster
        while stack:
            j = stack.pop()
            if not core[j]:
                continue
            for k in neighbors[j]:
                if labels[k] == -1:
                    labels[k] = cluster
                    stack.append(k)
        cluster += 1
    return labels >= 0


class TestDbscanFilter:
    def _grid_with_outliers(self):
        g = np.mgrid[0:10, 0:10].reshape(2, -1).T * 0.1
        grid = np.column_stack([g, np.zeros(len(g))])
        rng = np.random.default_rng(0)
        outliers = rng.uniform(10, 20, size=(10, 3))
        return np.vstack([grid, outliers]), len(grid)

    def test_grid_plus_outliers(self):
        pts, n_grid = self._grid_with_outliers()
        kept = dbscan_filter(pts, eps=0.3, min_pts=5)
        assert len(kept) == n_grid
        np.testing.assert_allclose(np.sort(kept[:, 0]), np.sort(pts[:n_grid, 0]))

    def test_matches_reference_implementation(self, rng):
        pts = np.vstack([
            rng.normal(0, 0.2, size=(40, 3)),
            rng.normal(5, 0.2, size=(30, 3)),
            rng.uniform(-20, 20, size=(15, 3)),
        ])
        mask = dbscan_inlier_mask(pts, eps=0.5, min_pts=4)
        np.testing.assert_array_equal(mask, reference_dbscan(pts, 0.5, 4))

    def test_all_identical_retained(self):
        pts = np.zeros((12, 3))
        assert len(dbscan_filter(pts, eps=0.1, min_pts=5)) == 12

    def test_min_pts_above_n_empty(self, rng):
        pts = rng.random((6, 3))
        assert len(dbscan_filter(pts, eps=10.0, min_pts=7)) == 0

    def test_subset_and_permutation_invariant(self, rng):
        pts, _ = self._grid_with_outliers()
        kept = dbscan_filter(pts, 0.3, 5)
        as_set = {tuple(p) for p in kept}
        assert as_set <= {tuple(p) for p in pts}
        perm = rng.permutation(len(pts))
        kept2 = dbscan_filter(pts[perm], 0.3, 5)
        assert {tuple(p) for p in kept2} == as_set

    def test_keep_largest(self, rng):
        pts = np.vstack([
            rng.normal(0, 0.1, size=(50, 3)),
            rng.normal(8, 0.1, size=(10, 3)),
        ])
        kept = dbscan_filter(pts, eps=0.5, min_pts=4, keep_largest=True)
        assert len(kept) == 50


class TestReports:
    def test_image_report(self, rng):
        imgs = [rng.random((16, 16)) for _ in range(3)]
        noisy = [i + rng.normal(scale=0.01, size=i.shape) for i in imgs]
        rep = evaluate_images(noisy, imgs)
        assert len(rep.psnr_per_view) == 3
        assert rep.ssim_mean <= 1.0
        rec = rep.to_record()
        assert set(rec) >= {"psnr_mean", "ssim_mean", "lpips_mean"}
        assert rec["lpips_mean"] is None

    def test_cloud_report_identity(self, rng):
        pts = rng.random((30, 3))
        rep = evaluate_point_clouds(pts, pts, tau=0.5)
        assert rep.chamfer == 0.0
        assert rep.f1 == 1.0
        assert rep.to_record()["tau"] == 0.5
