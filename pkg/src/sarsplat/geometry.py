"""Coordinate transforms and projections onto the computation and imaging planes.

Conventions
-----------
* World frame: x/y ground plane, z up, scene centered at the origin.
* Radar frame: x = azimuth (flight) axis, y = cross-beam axis in the
  incidence plane, z = beam (range) axis.  The platform sits at slant range
  ``altitude / sin(elevation)`` from the scene origin on boresight, so the
  origin lands at radar coordinates (0, 0, slant_range).
* Plane coordinates are produced in NDC ([-1, 1] across the image window)
  and mapped to pixels with ``pixel = (ndc + 1) / 2 * n - 0.5``; pixel
  centers sit at integer coordinates.  Both planes use orthographic
  projections, so the point Jacobians are constant per view.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .radar import RadarConfig
from .scene import Scene, covariances_from_arrays, softplus
from .sh import eval_sh_basis
from .validation import (
    DegenerateProjectionError,
    InvalidParameterError,
    as_float_array,
)

DEFAULT_COV_REG = 0.3     # added to 2D covariance diagonals, pixel^2
DEFAULT_CUTOFF = 3.0      # footprint radius in Mahalanobis units of the splat exponent


def radar_rotation(azimuth_deg: float, elevation_deg: float) -> np.ndarray:
    """Rotation matrix from the world frame to the radar frame."""
    phi = np.deg2rad(azimuth_deg)
    theta = np.deg2rad(elevation_deg)
    sp, cp = np.sin(phi), np.cos(phi)
    st, ct = np.sin(theta), np.cos(theta)
    return np.array(
        [
            [-sp, -cp, 0.0],
            [-st * cp, st * sp, ct],
            [-ct * cp, ct * sp, -st],
        ]
    )


def radar_position(config: RadarConfig) -> np.ndarray:
    """Platform position in world coordinates (boresight through the origin)."""
    phi, theta = config.azimuth_rad, config.elevation_rad
    s = config.slant_range_m
    return s * np.array(
        [np.cos(theta) * np.cos(phi), -np.cos(theta) * np.sin(phi), np.sin(theta)]
    )


def radar_translation(config: RadarConfig) -> np.ndarray:
    """Offset T_r such that x_r = R_r x_w + T_r; equals (0, 0, slant_range)."""
    R = radar_rotation(config.azimuth_deg, config.elevation_deg)
    return -R @ radar_position(config)


def world_to_radar(x_w, config: RadarConfig) -> np.ndarray:
    """Transform world points to the radar frame.  Accepts (3,) or (N, 3)."""
    x = np.asarray(x_w, dtype=np.float64)
    R = radar_rotation(config.azimuth_deg, config.elevation_deg)
    T = radar_translation(config)
    return x @ R.T + T


def ndc_to_pixel(ndc, n: int):
    """Half-pixel-center NDC to pixel mapping shared by forward and backward."""
    return (np.asarray(ndc) + 1.0) * 0.5 * n - 0.5


def project_point_computation(x_r, config: RadarConfig):
    """Computation-plane projection of radar-frame points.

    Returns:
        (uv_ndc, depth): azimuth/elevation NDC coordinates and the range-axis
        depth used as the sorting key.
    """
    x = np.asarray(x_r, dtype=np.float64)
    tan_t = np.tan(config.elevation_rad)
    u = 2.0 * x[..., 0] / (config.azimuth_res_m * config.n_azimuth)
    v = 2.0 * x[..., 1] / (config.range_res_m * config.n_range * tan_t)
    return np.stack([u, v], axis=-1), x[..., 2]


def project_point_imaging(x_r, config: RadarConfig):
    """Imaging-plane projection of radar-frame points.

    Returns:
        (uv_ndc, aux): azimuth/range NDC coordinates and the unused fourth-row
        component (the cross-beam coordinate).
    """
    x = np.asarray(x_r, dtype=np.float64)
    theta = config.elevation_rad
    tan_t, sin_t = np.tan(theta), np.sin(theta)
    dr_nr = config.range_res_m * config.n_range
    u = 2.0 * x[..., 0] / (config.azimuth_res_m * config.n_azimuth)
    v = 2.0 * x[..., 2] / (dr_nr * tan_t) - 2.0 * config.altitude_m / (dr_nr * sin_t)
    return np.stack([u, v], axis=-1), x[..., 1]


def computation_jacobian(config: RadarConfig) -> np.ndarray:
    """Constant radar-frame -> computation-plane pixel Jacobian (2x3)."""
    n_u, n_v = config.n_rays
    tan_t = np.tan(config.elevation_rad)
    return np.array(
        [
            [n_u / (config.azimuth_res_m * config.n_azimuth), 0.0, 0.0],
            [0.0, n_v / (config.range_res_m * config.n_range * tan_t), 0.0],
        ]
    )


def imaging_jacobian(config: RadarConfig) -> np.ndarray:
    """Constant radar-frame -> imaging-plane pixel Jacobian (2x3)."""
    tan_t = np.tan(config.elevation_rad)
    return np.array(
        [
            [1.0 / config.azimuth_res_m, 0.0, 0.0],
            [0.0, 0.0, 1.0 / (config.range_res_m * tan_t)],
        ]
    )


def project_covariance(
    cov3d, rotation, jacobian, reg: float = DEFAULT_COV_REG
) -> np.ndarray:
    """Project a world covariance to a regularized 2D plane covariance.

    Computes J R cov R^T J^T, symmetrizes, and adds ``reg`` to the diagonal.

    Raises:
        DegenerateProjectionError: if the result is singular even after
            regularization (non-finite input or reg <= 0 with a flat Gaussian).
    """
    cov3d = as_float_array(cov3d, "cov3d", (3, 3))
    R = as_float_array(rotation, "rotation", (3, 3))
    J = as_float_array(jacobian, "jacobian", (2, 3))
    M = J @ R
    out = M @ cov3d @ M.T
    out = 0.5 * (out + out.T)
    out[0, 0] += reg
    out[1, 1] += reg
    det = out[0, 0] * out[1, 1] - out[0, 1] * out[1, 0]
    if not np.isfinite(det) or det <= 0:
        raise DegenerateProjectionError(f"projected covariance degenerate (det={det})")
    return out


def eval_phase_function(sh_coeffs, look_dir) -> float:
    """Direction-dependent backscatter strength: clamped SH expansion.

    Args:
        sh_coeffs: 16 real-SH coefficients.
        look_dir: unit vector from the platform to the scatterer, world frame.
    """
    c = as_float_array(sh_coeffs, "sh_coeffs", (16,))
    d = as_float_array(look_dir, "look_dir", (3,))
    n = np.linalg.norm(d)
    if n == 0:
        raise InvalidParameterError("look_dir must be nonzero")
    basis = eval_sh_basis(d / n)
    return float(max(0.0, basis @ c))


@dataclass(frozen=True)
class ProjectedGaussian:
    """Per-primitive projection record (pixel coordinates on both planes)."""

    uv_comp: np.ndarray
    depth: float
    uv_img: np.ndarray
    cov2d_comp: np.ndarray
    cov2d_img: np.ndarray
    phase_value: float
    ke_sum: float


@dataclass
class Projection:
    """Vectorized projection of a scene into one radar view.

    Culled/skipped primitives are dropped; ``indices`` maps rows back to the
    scene.  Behaves as a sequence of :class:`ProjectedGaussian`.
    """

    config: RadarConfig
    indices: np.ndarray          # (K,) original primitive indices
    uv_comp: np.ndarray          # (K, 2) computation-plane pixel coords
    depth: np.ndarray            # (K,)
    uv_img: np.ndarray           # (K, 2) imaging-plane pixel coords
    cov_comp: np.ndarray         # (K, 2, 2)
    cov_img: np.ndarray          # (K, 2, 2)
    phase: np.ndarray            # (K,) clamped phase values
    phase_unclamped: np.ndarray  # (K,) pre-clamp values (backward mask)
    ke_fwd: np.ndarray           # (K,) activated extinction rates
    ke_bwd: np.ndarray           # (K,)
    look_dirs: np.ndarray        # (K, 3) unit platform->primitive directions
    look_dists: np.ndarray       # (K,)
    rotation: np.ndarray         # 3x3 world->radar
    jac_comp: np.ndarray         # 2x3 pixel Jacobian, computation plane
    jac_img: np.ndarray          # 2x3 pixel Jacobian, imaging plane
    n_scene: int
    n_culled: int
    n_skipped: int
    cutoff: float

    @property
    def ke_sum(self) -> np.ndarray:
        return self.ke_fwd + self.ke_bwd

    def __len__(self) -> int:
        return self.indices.shape[0]

    def __getitem__(self, i: int) -> ProjectedGaussian:
        return ProjectedGaussian(
            uv_comp=self.uv_comp[i].copy(),
            depth=float(self.depth[i]),
            uv_img=self.uv_img[i].copy(),
            cov2d_comp=self.cov_comp[i].copy(),
            cov2d_img=self.cov_img[i].copy(),
            phase_value=float(self.phase[i]),
            ke_sum=float(self.ke_sum[i]),
        )


def project_all(
    scene: Scene,
    config: RadarConfig,
    cov_reg: float = DEFAULT_COV_REG,
    cutoff: float = DEFAULT_CUTOFF,
) -> Projection:
    """Project every primitive; cull footprints fully outside the ray grid.

    Degenerate projections are skipped (counted), never raised.
    """
    if len(scene) == 0:
        raise InvalidParameterError("scene is empty")
    n = len(scene)

    R = radar_rotation(config.azimuth_deg, config.elevation_deg)
    T = radar_translation(config)
    x_r = scene.positions @ R.T + T

    uv_comp_ndc, depth = project_point_computation(x_r, config)
    uv_img_ndc, _ = project_point_imaging(x_r, config)
    n_u, n_v = config.n_rays
    uv_comp = np.stack(
        [ndc_to_pixel(uv_comp_ndc[:, 0], n_u), ndc_to_pixel(uv_comp_ndc[:, 1], n_v)],
        axis=1,
    )
    uv_img = np.stack(
        [
            ndc_to_pixel(uv_img_ndc[:, 0], config.n_azimuth),
            ndc_to_pixel(uv_img_ndc[:, 1], config.n_range),
        ],
        axis=1,
    )

    jac_comp = computation_jacobian(config)
    jac_img = imaging_jacobian(config)
    cov3d = covariances_from_arrays(scene.rotations, scene.log_scales)
    mc = jac_comp @ R
    mi = jac_img @ R
    cov_comp = np.einsum("ab,nbc,dc->nad", mc, cov3d, mc)
    cov_img = np.einsum("ab,nbc,dc->nad", mi, cov3d, mi)
    cov_comp = 0.5 * (cov_comp + np.swapaxes(cov_comp, 1, 2))
    cov_img = 0.5 * (cov_img + np.swapaxes(cov_img, 1, 2))
    cov_comp[:, 0, 0] += cov_reg
    cov_comp[:, 1, 1] += cov_reg
    cov_img[:, 0, 0] += cov_reg
    cov_img[:, 1, 1] += cov_reg

    det_comp = cov_comp[:, 0, 0] * cov_comp[:, 1, 1] - cov_comp[:, 0, 1] ** 2
    det_img = cov_img[:, 0, 0] * cov_img[:, 1, 1] - cov_img[:, 0, 1] ** 2
    finite = (
        np.isfinite(uv_comp).all(axis=1)
        & np.isfinite(uv_img).all(axis=1)
        & np.isfinite(depth)
        & np.isfinite(det_comp)
        & np.isfinite(det_img)
    )
    ok = finite & (det_comp > 0) & (det_img > 0)
    n_skipped = int(n - ok.sum())

    # Frustum cull: 3-sigma bounding box vs. the ray-grid cell centers.
    if np.isfinite(cutoff):
        r_u = cutoff * np.sqrt(np.maximum(cov_comp[:, 0, 0], 0.0))
        r_v = cutoff * np.sqrt(np.maximum(cov_comp[:, 1, 1], 0.0))
        inside = (
            (uv_comp[:, 0] + r_u >= 0.0)
            & (uv_comp[:, 0] - r_u <= n_u - 1.0)
            & (uv_comp[:, 1] + r_v >= 0.0)
            & (uv_comp[:, 1] - r_v <= n_v - 1.0)
        )
    else:
        inside = np.ones(n, dtype=bool)
    keep = ok & inside
    n_culled = int((ok & ~inside).sum())
    idx = np.flatnonzero(keep)

    pos = scene.positions[idx]
    cam = radar_position(config)
    rel = pos - cam[None, :]
    dist = np.linalg.norm(rel, axis=1)
    dist = np.where(dist == 0, 1.0, dist)
    dirs = rel / dist[:, None]
    basis = eval_sh_basis(dirs)
    phase_unclamped = np.einsum("nk,nk->n", basis, scene.sh_coeffs[idx])
    phase = np.maximum(0.0, phase_unclamped)
    ke = softplus(scene.ke_raw[idx])

    return Projection(
        config=config,
        indices=idx,
        uv_comp=uv_comp[idx],
        depth=depth[idx],
        uv_img=uv_img[idx],
        cov_comp=cov_comp[idx],
        cov_img=cov_img[idx],
        phase=phase,
        phase_unclamped=phase_unclamped,
        ke_fwd=ke[:, 0],
        ke_bwd=ke[:, 1],
        look_dirs=dirs,
        look_dists=dist,
        rotation=R,
        jac_comp=jac_comp,
        jac_img=jac_img,
        n_scene=n,
        n_culled=n_culled,
        n_skipped=n_skipped,
        cutoff=cutoff,
    )
