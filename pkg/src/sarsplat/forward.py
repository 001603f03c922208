"""Forward rendering: ray binning, transmittance accumulation, image splatting.

The computation plane is an N x M grid of parallel rays along the beam axis.
Each ray walks its depth-sorted scatterer list accumulating an
emission-absorption recurrence: with w the scatterer's footprint weight at
the ray center (its effective optical depth) and k the summed extinction
rates, a scatterer extracts T * (1 - exp(-k w)) * P and multiplies the
running transmittance T by exp(-k w).  Per-scatterer intensities summed over
rays are then splatted onto the imaging plane with their own footprint
weights.

Everything is vectorized over (cell, scatterer) pairs with a global
(cell, depth, index) sort, which keeps summation order fixed and renders
bit-reproducible.  Retained pair buffers are O(total overlaps).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .geometry import DEFAULT_COV_REG, DEFAULT_CUTOFF, Projection, project_all
from .radar import RadarConfig
from .scene import Scene
from .validation import (
    DegenerateProjectionError,
    NumericalError,
    as_float_array,
)


def invert_cov2d(cov: np.ndarray) -> np.ndarray:
    """Closed-form inverse of a batch of symmetric 2x2 matrices."""
    a, b, c = cov[..., 0, 0], cov[..., 0, 1], cov[..., 1, 1]
    det = a * c - b * b
    inv = np.empty_like(cov)
    inv[..., 0, 0] = c / det
    inv[..., 0, 1] = -b / det
    inv[..., 1, 0] = -b / det
    inv[..., 1, 1] = a / det
    return inv


def gaussian_weight(delta_uv, cov2d) -> float:
    """Footprint weight exp(-d^T cov^-1 d) in (0, 1]."""
    d = as_float_array(delta_uv, "delta_uv", (2,))
    cov = as_float_array(cov2d, "cov2d", (2, 2))
    det = cov[0, 0] * cov[1, 1] - cov[0, 1] * cov[1, 0]
    if det <= 0 or not np.isfinite(det):
        raise DegenerateProjectionError(f"cov2d is singular (det={det})")
    q = (
        cov[1, 1] * d[0] * d[0]
        - 2.0 * cov[0, 1] * d[0] * d[1]
        + cov[0, 0] * d[1] * d[1]
    ) / det
    return float(np.exp(-q))


def _footprint_pairs(uv, cov, inv_cov, n_u, n_v, cutoff):
    """All (cell, scatterer) pairs whose cell center lies inside the footprint.

    Cells centers sit at integer coordinates (iu, iv) with 0 <= iu < n_u,
    0 <= iv < n_v.  Membership: delta^T cov^-1 delta <= cutoff^2.

    Returns:
        (prim, iu, iv, delta, q) flat pair arrays, unsorted.
    """
    k = uv.shape[0]
    if k == 0:
        z = np.zeros(0, dtype=np.int64)
        return z, z, z, np.zeros((0, 2)), np.zeros(0)
    if np.isfinite(cutoff):
        r_u = cutoff * np.sqrt(np.maximum(cov[:, 0, 0], 0.0))
        r_v = cutoff * np.sqrt(np.maximum(cov[:, 1, 1], 0.0))
        x0 = np.maximum(np.ceil(uv[:, 0] - r_u), 0.0).astype(np.int64)
        x1 = np.minimum(np.floor(uv[:, 0] + r_u), n_u - 1.0).astype(np.int64)
        y0 = np.maximum(np.ceil(uv[:, 1] - r_v), 0.0).astype(np.int64)
        y1 = np.minimum(np.floor(uv[:, 1] + r_v), n_v - 1.0).astype(np.int64)
    else:
        x0 = np.zeros(k, dtype=np.int64)
        x1 = np.full(k, n_u - 1, dtype=np.int64)
        y0 = np.zeros(k, dtype=np.int64)
        y1 = np.full(k, n_v - 1, dtype=np.int64)
    cx = np.maximum(x1 - x0 + 1, 0)
    cy = np.maximum(y1 - y0 + 1, 0)
    counts = cx * cy
    total = int(counts.sum())
    if total == 0:
        z = np.zeros(0, dtype=np.int64)
        return z, z, z, np.zeros((0, 2)), np.zeros(0)

    prim = np.repeat(np.arange(k, dtype=np.int64), counts)
    offsets = np.concatenate([[0], np.cumsum(counts)[:-1]])
    local = np.arange(total, dtype=np.int64) - offsets[prim]
    iu = x0[prim] + local % cx[prim]
    iv = y0[prim] + local // cx[prim]

    delta = np.stack([iu - uv[prim, 0], iv - uv[prim, 1]], axis=1)
    a = inv_cov[prim]
    q = (
        a[:, 0, 0] * delta[:, 0] ** 2
        + 2.0 * a[:, 0, 1] * delta[:, 0] * delta[:, 1]
        + a[:, 1, 1] * delta[:, 1] ** 2
    )
    if np.isfinite(cutoff):
        keep = q <= cutoff * cutoff
        prim, iu, iv, delta, q = prim[keep], iu[keep], iv[keep], delta[keep], q[keep]
    return prim, iu, iv, delta, q


@dataclass
class RayLists:
    """Depth-sorted per-cell scatterer lists over the computation grid.

    Pair arrays are sorted by (cell, depth, scatterer index); ``offsets`` is
    the CSR index of each cell's slice.
    """

    n_u: int
    n_v: int
    pair_cell: np.ndarray   # (T,) cell id = iv * n_u + iu
    pair_prim: np.ndarray   # (T,) projection row
    delta: np.ndarray       # (T, 2) cell center - scatterer center, pixels
    q: np.ndarray           # (T,) Mahalanobis quadratic form
    weight: np.ndarray      # (T,) exp(-q)
    offsets: np.ndarray     # (n_u * n_v + 1,)

    def __len__(self) -> int:
        return self.pair_cell.shape[0]

    def cell_list(self, iu: int, iv: int) -> np.ndarray:
        """Projection rows covering cell (iu, iv), shallow-to-deep."""
        c = iv * self.n_u + iu
        return self.pair_prim[self.offsets[c] : self.offsets[c + 1]]


def build_ray_lists(projection: Projection, config: RadarConfig | None = None) -> RayLists:
    """Bin projected scatterers into depth-sorted per-ray lists."""
    cfg = config if config is not None else projection.config
    n_u, n_v = cfg.n_rays
    inv_cov = invert_cov2d(projection.cov_comp) if len(projection) else np.zeros((0, 2, 2))
    prim, iu, iv, delta, q = _footprint_pairs(
        projection.uv_comp, projection.cov_comp, inv_cov, n_u, n_v, projection.cutoff
    )
    cell = iv * n_u + iu
    order = np.lexsort((prim, projection.depth[prim], cell))
    cell, prim, delta, q = cell[order], prim[order], delta[order], q[order]
    counts = np.bincount(cell, minlength=n_u * n_v)
    offsets = np.concatenate([[0], np.cumsum(counts)])
    return RayLists(
        n_u=n_u, n_v=n_v,
        pair_cell=cell, pair_prim=prim, delta=delta, q=q,
        weight=np.exp(-q), offsets=offsets,
    )


def _segment_bounds(rays: RayLists):
    """Per-pair indices of the first and one-past-last pair in its cell run."""
    t = len(rays)
    counts = np.diff(rays.offsets)
    starts = np.repeat(rays.offsets[:-1], counts)
    ends = np.repeat(rays.offsets[1:], counts)
    return t, starts, ends


@dataclass
class IntensityBuffer:
    """Per-scatterer intensities plus per-pair transmittance partials."""

    intensity: np.ndarray   # (K,) accumulated backscattered intensity
    tau: np.ndarray         # (T,) optical depth k * w per pair
    trans: np.ndarray       # (T,) prefix transmittance seen by the pair
    absorb: np.ndarray      # (T,) exp(-tau)
    contrib: np.ndarray     # (T,) per-pair contribution


def compute_intensities(rays: RayLists, projection: Projection) -> IntensityBuffer:
    """Walk every ray list accumulating the emission-absorption recurrence."""
    k_sum = projection.ke_sum
    prim = rays.pair_prim
    tau = k_sum[prim] * rays.weight

    t, starts, _ = _segment_bounds(rays)
    inc = np.cumsum(tau)
    base = np.where(starts > 0, inc[np.maximum(starts - 1, 0)], 0.0)
    log_trans = inc - tau - base        # exclusive prefix sum within the cell run
    trans = np.exp(-log_trans)
    absorb = np.exp(-tau)
    contrib = trans * (1.0 - absorb) * projection.phase[prim]

    intensity = np.bincount(prim, weights=contrib, minlength=len(projection))
    if not np.all(np.isfinite(intensity)):
        bad_local = prim[~np.isfinite(contrib)]
        bad = int(projection.indices[bad_local[0]]) if bad_local.size else -1
        raise NumericalError(f"non-finite intensity at primitive {bad}")
    return IntensityBuffer(
        intensity=intensity, tau=tau, trans=trans, absorb=absorb, contrib=contrib
    )


@dataclass
class SplatPairs:
    """(pixel, scatterer) overlap pairs on the imaging plane."""

    pair_pixel: np.ndarray  # (T,) pixel id = row * width + col
    pair_prim: np.ndarray   # (T,)
    delta: np.ndarray       # (T, 2)
    q: np.ndarray           # (T,)
    weight: np.ndarray      # (T,) exp(-q)


def _build_splat_pairs(projection: Projection, config: RadarConfig) -> SplatPairs:
    inv_cov = invert_cov2d(projection.cov_img) if len(projection) else np.zeros((0, 2, 2))
    prim, iu, iv, delta, q = _footprint_pairs(
        projection.uv_img, projection.cov_img, inv_cov,
        config.n_azimuth, config.n_range, projection.cutoff,
    )
    pixel = iv * config.n_azimuth + iu
    order = np.lexsort((prim, pixel))
    return SplatPairs(
        pair_pixel=pixel[order], pair_prim=prim[order],
        delta=delta[order], q=q[order], weight=np.exp(-q[order]),
    )


def splat_image(
    intensities: IntensityBuffer,
    projection: Projection,
    config: RadarConfig,
    pairs: SplatPairs | None = None,
) -> np.ndarray:
    """Deposit scatterer intensities onto the (n_range, n_azimuth) image."""
    if pairs is None:
        pairs = _build_splat_pairs(projection, config)
    values = pairs.weight * intensities.intensity[pairs.pair_prim]
    flat = np.bincount(
        pairs.pair_pixel, weights=values, minlength=config.n_range * config.n_azimuth
    )
    return flat.reshape(config.n_range, config.n_azimuth)


@dataclass
class ForwardResult:
    """A rendered image plus every buffer the backward pass needs."""

    scene: Scene
    config: RadarConfig
    projection: Projection
    rays: RayLists
    intensities: IntensityBuffer
    splat: SplatPairs
    image: np.ndarray


def render_forward(
    scene: Scene,
    config: RadarConfig,
    cov_reg: float = DEFAULT_COV_REG,
    cutoff: float = DEFAULT_CUTOFF,
) -> ForwardResult:
    """Render and retain intermediate buffers for a following backward pass."""
    if len(scene) == 0:
        raise NumericalError("cannot retain buffers for an empty scene")
    projection = project_all(scene, config, cov_reg=cov_reg, cutoff=cutoff)
    rays = build_ray_lists(projection)
    intensities = compute_intensities(rays, projection)
    splat = _build_splat_pairs(projection, config)
    image = splat_image(intensities, projection, config, pairs=splat)
    return ForwardResult(
        scene=scene, config=config, projection=projection,
        rays=rays, intensities=intensities, splat=splat, image=image,
    )


def render(
    scene: Scene,
    config: RadarConfig,
    cov_reg: float = DEFAULT_COV_REG,
    cutoff: float = DEFAULT_CUTOFF,
) -> np.ndarray:
    """Forward-render a scene into an (n_range, n_azimuth) intensity image."""
    if len(scene) == 0:
        return np.zeros((config.n_range, config.n_azimuth))
    return render_forward(scene, config, cov_reg=cov_reg, cutoff=cutoff).image


def render_reference(
    scene: Scene,
    config: RadarConfig,
    cov_reg: float = DEFAULT_COV_REG,
) -> np.ndarray:
    """Unoptimized oracle renderer: plain loops, no culling, no binning.

    Mathematically identical to :func:`render` with culling disabled; kept
    deliberately independent of the vectorized pair machinery.
    """
    if len(scene) == 0:
        return np.zeros((config.n_range, config.n_azimuth))
    proj = project_all(scene, config, cov_reg=cov_reg, cutoff=np.inf)
    k = len(proj)
    order = sorted(range(k), key=lambda i: (proj.depth[i], i))
    inv_comp = [np.linalg.inv(proj.cov_comp[i]) for i in range(k)]
    inv_img = [np.linalg.inv(proj.cov_img[i]) for i in range(k)]
    ke = proj.ke_sum

    n_u, n_v = config.n_rays
    intensity = np.zeros(k)
    for iv in range(n_v):
        for iu in range(n_u):
            trans = 1.0
            for i in order:
                d = np.array([iu, iv], dtype=np.float64) - proj.uv_comp[i]
                w = np.exp(-(d @ inv_comp[i] @ d))
                absorb = np.exp(-ke[i] * w)
                intensity[i] += trans * (1.0 - absorb) * proj.phase[i]
                trans *= absorb

    image = np.zeros((config.n_range, config.n_azimuth))
    for row in range(config.n_range):
        for col in range(config.n_azimuth):
            s = 0.0
            for i in range(k):
                d = np.array([col, row], dtype=np.float64) - proj.uv_img[i]
                s += np.exp(-(d @ inv_img[i] @ d)) * intensity[i]
            image[row, col] = s
    return image
