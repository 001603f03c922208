"""Image-quality and point-cloud reconstruction metrics, plus DBSCAN filtering.

SSIM is implemented in-package (11x11 Gaussian window, sigma 1.5) because the
training loss needs its analytic image gradient; values match scikit-image's
``gaussian_weights=True, use_sample_covariance=False`` configuration on the
cropped interior.  Nearest-neighbor queries use a KD-tree; the test suite
keeps an independent brute-force oracle.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any

import numpy as np
from scipy.ndimage import correlate1d
from scipy.spatial import cKDTree
from sklearn.cluster import DBSCAN

from .validation import (
    InvalidParameterError,
    check_points,
    check_positive,
    check_same_shape,
)

SSIM_WIN_SIZE = 11
SSIM_SIGMA = 1.5
SSIM_K1 = 0.01
SSIM_K2 = 0.03


def psnr(x, y, max_val: float = 1.0) -> float:
    """Peak signal-to-noise ratio in dB; +inf for identical images."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    check_same_shape(x, y)
    check_positive(max_val, "max_val")
    mse = float(np.mean((x - y) ** 2))
    if mse == 0.0:
        return float("inf")
    return float(10.0 * np.log10(max_val * max_val / mse))


def _ssim_kernel() -> np.ndarray:
    r = (SSIM_WIN_SIZE - 1) // 2
    t = np.arange(-r, r + 1, dtype=np.float64)
    k = np.exp(-(t * t) / (2.0 * SSIM_SIGMA * SSIM_SIGMA))
    return k / k.sum()


def _ssim_filter(img: np.ndarray, kernel: np.ndarray) -> np.ndarray:
    # Zero-padded separable correlation; self-adjoint for a symmetric kernel.
    out = correlate1d(img, kernel, axis=0, mode="constant", cval=0.0)
    return correlate1d(out, kernel, axis=1, mode="constant", cval=0.0)


def _ssim_terms(x, y, max_val, kernel):
    c1 = (SSIM_K1 * max_val) ** 2
    c2 = (SSIM_K2 * max_val) ** 2
    if kernel is None:
        def filt(z):
            return np.full_like(z, z.mean())
    else:
        def filt(z):
            return _ssim_filter(z, kernel)
    ux, uy = filt(x), filt(y)
    ex2, ey2, exy = filt(x * x), filt(y * y), filt(x * y)
    vx, vy = ex2 - ux * ux, ey2 - uy * uy
    cxy = exy - ux * uy
    a1 = 2.0 * ux * uy + c1
    a2 = 2.0 * cxy + c2
    b1 = ux * ux + uy * uy + c1
    b2 = vx + vy + c2
    return filt, ux, uy, a1, a2, b1, b2


def ssim(x, y, max_val: float = 1.0) -> float:
    """Mean structural similarity.

    Uses an 11x11 Gaussian window (sigma 1.5) averaged over the interior
    where the window fully fits; images smaller than the window fall back to
    a single global window.
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    check_same_shape(x, y)
    windowed = min(x.shape) >= SSIM_WIN_SIZE
    kernel = _ssim_kernel() if windowed else None
    _, _, _, a1, a2, b1, b2 = _ssim_terms(x, y, max_val, kernel)
    smap = (a1 * a2) / (b1 * b2)
    if windowed:
        pad = (SSIM_WIN_SIZE - 1) // 2
        return float(smap[pad:-pad, pad:-pad].mean())
    return float(smap.flat[0])


def ssim_with_grad(x, y, max_val: float = 1.0):
    """SSIM value and its exact gradient with respect to ``x``."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    check_same_shape(x, y)
    windowed = min(x.shape) >= SSIM_WIN_SIZE
    kernel = _ssim_kernel() if windowed else None
    filt, ux, uy, a1, a2, b1, b2 = _ssim_terms(x, y, max_val, kernel)
    denom = b1 * b2
    smap = (a1 * a2) / denom

    weight = np.zeros_like(x)
    if windowed:
        pad = (SSIM_WIN_SIZE - 1) // 2
        n_win = (x.shape[0] - 2 * pad) * (x.shape[1] - 2 * pad)
        weight[pad:-pad, pad:-pad] = 1.0 / n_win
        value = float(smap[pad:-pad, pad:-pad].mean())
    else:
        weight[:] = 1.0 / x.size  # every pixel feeds the single global window
        n_total = x.size
        value = float(smap.flat[0])

    ds_da1 = a2 / denom
    ds_da2 = a1 / denom
    ds_db1 = -smap / b1
    ds_db2 = -smap / b2
    # Partials w.r.t. the filtered moments (ex2 enters only b2, exy only a2).
    ds_dux = ds_da1 * 2.0 * uy + ds_da2 * (-2.0 * uy) + ds_db1 * 2.0 * ux + ds_db2 * (-2.0 * ux)
    ds_dex2 = ds_db2
    ds_dexy = ds_da2 * 2.0

    if windowed:
        def back(z):
            # The zero-padded symmetric filter is its own adjoint.
            return _ssim_filter(z, kernel)
    else:
        def back(z):
            return np.full_like(z, z.sum() / n_total)
    grad = back(weight * ds_dux) + 2.0 * x * back(weight * ds_dex2) + y * back(weight * ds_dexy)
    return value, grad


def chamfer(a, b):
    """Directed and symmetric Chamfer distances with squared-distance averaging.

    Returns:
        (d_ab, d_ba, cd): mean squared nearest-neighbor distance from a to b,
        from b to a, and their arithmetic mean.
    """
    a = check_points(a, "a")
    b = check_points(b, "b")
    d_ab = float(np.mean(cKDTree(b).query(a)[0] ** 2))
    d_ba = float(np.mean(cKDTree(a).query(b)[0] ** 2))
    return d_ab, d_ba, 0.5 * (d_ab + d_ba)


def precision_recall_f1(pred, ref, tau: float):
    """Point-matching precision/recall/F1 at distance tolerance ``tau``."""
    pred = check_points(pred, "pred")
    ref = check_points(ref, "ref")
    check_positive(tau, "tau")
    p = float(np.mean(cKDTree(ref).query(pred)[0] <= tau))
    r = float(np.mean(cKDTree(pred).query(ref)[0] <= tau))
    f1 = 0.0 if p + r == 0 else 2.0 * p * r / (p + r)
    return p, r, f1


def dbscan_inlier_mask(points, eps: float, min_pts: int, keep_largest: bool = False) -> np.ndarray:
    """Boolean mask of points belonging to DBSCAN clusters (noise removed)."""
    points = check_points(points, "points", allow_empty=True)
    check_positive(eps, "eps")
    if min_pts < 1:
        raise InvalidParameterError(f"min_pts must be >= 1, got {min_pts}")
    if points.shape[0] == 0:
        return np.zeros(0, dtype=bool)
    labels = DBSCAN(eps=eps, min_samples=int(min_pts)).fit(points).labels_
    if keep_largest and np.any(labels >= 0):
        counts = np.bincount(labels[labels >= 0])
        return labels == int(np.argmax(counts))
    return labels >= 0


def dbscan_filter(points, eps: float, min_pts: int, keep_largest: bool = False) -> np.ndarray:
    """Points with DBSCAN noise removed (optionally only the largest cluster)."""
    points = check_points(points, "points", allow_empty=True)
    return points[dbscan_inlier_mask(points, eps, min_pts, keep_largest=keep_largest)]


@dataclass
class ImageMetricsReport:
    """Per-view and aggregate image-quality numbers."""

    psnr_per_view: list[float]
    ssim_per_view: list[float]
    psnr_mean: float
    ssim_mean: float
    lpips_mean: float | None = None  # reserved for an external perceptual plug-in

    def to_record(self) -> dict[str, Any]:
        return {
            "psnr_per_view": self.psnr_per_view,
            "ssim_per_view": self.ssim_per_view,
            "psnr_mean": self.psnr_mean,
            "ssim_mean": self.ssim_mean,
            "lpips_mean": self.lpips_mean,
        }


@dataclass
class CloudMetricsReport:
    """Point-cloud reconstruction numbers at a given tolerance."""

    dist_ref_to_rec: float
    dist_rec_to_ref: float
    chamfer: float
    precision: float
    recall: float
    f1: float
    tau: float
    extras: dict[str, Any] = field(default_factory=dict)

    def to_record(self) -> dict[str, Any]:
        rec = {
            "dist_ref_to_rec": self.dist_ref_to_rec,
            "dist_rec_to_ref": self.dist_rec_to_ref,
            "chamfer": self.chamfer,
            "precision": self.precision,
            "recall": self.recall,
            "f1": self.f1,
            "tau": self.tau,
        }
        rec.update(self.extras)
        return rec


def evaluate_images(rendered, targets, max_val: float = 1.0) -> ImageMetricsReport:
    """PSNR/SSIM over paired image lists."""
    rendered = list(rendered)
    targets = list(targets)
    if len(rendered) != len(targets) or not rendered:
        raise InvalidParameterError("rendered and target lists must be equal and non-empty")
    psnrs = [psnr(r, t, max_val) for r, t in zip(rendered, targets)]
    ssims = [ssim(r, t, max_val) for r, t in zip(rendered, targets)]
    finite = [p for p in psnrs if np.isfinite(p)]
    psnr_mean = float(np.mean(finite)) if finite else float("inf")
    return ImageMetricsReport(
        psnr_per_view=psnrs,
        ssim_per_view=ssims,
        psnr_mean=psnr_mean,
        ssim_mean=float(np.mean(ssims)),
    )


def evaluate_point_clouds(rec, ref, tau: float = 0.6) -> CloudMetricsReport:
    """Chamfer (squared convention) and precision/recall/F1 of rec vs. ref."""
    d_ref_rec, d_rec_ref, cd = chamfer(ref, rec)
    p, r, f1 = precision_recall_f1(rec, ref, tau)
    return CloudMetricsReport(
        dist_ref_to_rec=d_ref_rec,
        dist_rec_to_ref=d_rec_ref,
        chamfer=cd,
        precision=p,
        recall=r,
        f1=f1,
        tau=tau,
    )
