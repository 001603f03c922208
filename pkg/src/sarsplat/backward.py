"""Analytic reverse-mode gradients of the rendered image.

Mirrors the forward stages in reverse: splat -> intensity recurrence ->
plane projections -> covariance factorization / position / SH coefficients.
The forward uses inverse 2D covariances in its exponents, so plane-covariance
gradients chain through d(S^-1) = -S^-1 dS S^-1 before entering the
projection sandwich.  Sorting is piecewise constant and carries no gradient.

All reductions run over the same globally sorted pair arrays as the forward
pass, so gradients are bit-reproducible.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .forward import ForwardResult, invert_cov2d
from .scene import Scene, softplus_grad
from .sh import eval_sh_basis, eval_sh_basis_grad
from .validation import InvalidParameterError, StateError


@dataclass
class SceneGradients:
    """Per-primitive parameter gradients plus the densification statistic."""

    positions: np.ndarray       # (N, 3)
    rotations: np.ndarray       # (N, 4)
    log_scales: np.ndarray      # (N, 3)
    sh_coeffs: np.ndarray       # (N, 16)
    ke_raw: np.ndarray          # (N, 2)
    uv_grad_norm: np.ndarray    # (N,) 2D positional-gradient norm, NDC units
    visible: np.ndarray         # (N,) bool: primitive was rasterized this view

    @classmethod
    def zeros(cls, n: int) -> "SceneGradients":
        return cls(
            positions=np.zeros((n, 3)),
            rotations=np.zeros((n, 4)),
            log_scales=np.zeros((n, 3)),
            sh_coeffs=np.zeros((n, 16)),
            ke_raw=np.zeros((n, 2)),
            uv_grad_norm=np.zeros(n),
            visible=np.zeros(n, dtype=bool),
        )

    def param_arrays(self):
        return (self.positions, self.rotations, self.log_scales, self.sh_coeffs, self.ke_raw)


def _accumulate_quadform_grads(prim, delta, dq, inv_cov, k):
    """Per-primitive gradients of sum(dq * quadform) w.r.t. A entries and uv.

    Returns:
        g_a: (K, 2, 2) gradient w.r.t. the inverse covariance.
        g_uv: (K, 2) gradient w.r.t. the plane center (delta = cell - uv).
    """
    dx, dy = delta[:, 0], delta[:, 1]
    g_a = np.zeros((k, 2, 2))
    g_a[:, 0, 0] = np.bincount(prim, weights=dq * dx * dx, minlength=k)
    off = np.bincount(prim, weights=dq * dx * dy, minlength=k)
    g_a[:, 0, 1] = off
    g_a[:, 1, 0] = off
    g_a[:, 1, 1] = np.bincount(prim, weights=dq * dy * dy, minlength=k)

    a = inv_cov[prim]
    ad_x = a[:, 0, 0] * dx + a[:, 0, 1] * dy
    ad_y = a[:, 1, 0] * dx + a[:, 1, 1] * dy
    g_uv = np.stack(
        [
            np.bincount(prim, weights=-2.0 * dq * ad_x, minlength=k),
            np.bincount(prim, weights=-2.0 * dq * ad_y, minlength=k),
        ],
        axis=1,
    )
    return g_a, g_uv


def _inverse_chain(g_a: np.ndarray, inv_cov: np.ndarray) -> np.ndarray:
    """Map d L / d (S^-1) to d L / d S via -S^-1 G S^-1."""
    return -np.einsum("kab,kbc,kcd->kad", inv_cov, g_a, inv_cov)


def grad_image_stage(fwd: ForwardResult, dL_dS: np.ndarray):
    """Backward through the imaging-plane splat.

    Returns:
        dL_dI: (K,) gradient w.r.t. scatterer intensities.
        dL_dbeta: (T,) gradient w.r.t. per-pair splat weights.
        dL_dcov_img: (K, 2, 2) gradient w.r.t. imaging-plane covariances.
        dL_duv_img: (K, 2) gradient w.r.t. imaging-plane centers, pixels.
    """
    sp = fwd.splat
    k = len(fwd.projection)
    g_pix = dL_dS.reshape(-1)[sp.pair_pixel]
    dL_dI = np.bincount(sp.pair_prim, weights=g_pix * sp.weight, minlength=k)
    dL_dbeta = g_pix * fwd.intensities.intensity[sp.pair_prim]
    dq = dL_dbeta * (-sp.weight)
    inv_img = invert_cov2d(fwd.projection.cov_img) if k else np.zeros((0, 2, 2))
    g_a, dL_duv_img = _accumulate_quadform_grads(sp.pair_prim, sp.delta, dq, inv_img, k)
    dL_dcov_img = _inverse_chain(g_a, inv_img)
    return dL_dI, dL_dbeta, dL_dcov_img, dL_duv_img


def grad_intensity_stage(fwd: ForwardResult, dL_dI: np.ndarray):
    """Backward through the per-ray emission-absorption recurrence.

    A scatterer's optical depth feeds its own extraction term and attenuates
    every deeper scatterer on the ray, so each pair combines a local term
    with an exclusive suffix sum of downstream contributions.

    Returns:
        dL_dP: (K,) phase-function gradients.
        dL_dke_sum: (K,) gradient w.r.t. the summed extinction rates.
        dL_dcov_comp: (K, 2, 2) computation-plane covariance gradients.
        dL_duv_comp: (K, 2) computation-plane center gradients, pixels.
    """
    rays = fwd.rays
    buf = fwd.intensities
    proj = fwd.projection
    k = len(proj)
    prim = rays.pair_prim
    g = dL_dI[prim]

    dL_dP = np.bincount(prim, weights=g * buf.trans * (1.0 - buf.absorb), minlength=k)

    # Exclusive suffix sum of g * contrib within each cell run.
    gc = g * buf.contrib
    t = len(rays)
    if t:
        rev = np.cumsum(gc[::-1])[::-1]
        counts = np.diff(rays.offsets)
        ends = np.repeat(rays.offsets[1:], counts)
        tail = np.where(ends < t, rev[np.minimum(ends, t - 1)], 0.0)
        downstream = rev - gc - tail
    else:
        downstream = np.zeros(0)

    dL_dtau = g * buf.trans * buf.absorb * proj.phase[prim] - downstream
    dL_dke_sum = np.bincount(prim, weights=dL_dtau * rays.weight, minlength=k)
    dL_dw = dL_dtau * proj.ke_sum[prim]
    dq = -dL_dw * rays.weight
    inv_comp = invert_cov2d(proj.cov_comp) if k else np.zeros((0, 2, 2))
    g_a, dL_duv_comp = _accumulate_quadform_grads(prim, rays.delta, dq, inv_comp, k)
    dL_dcov_comp = _inverse_chain(g_a, inv_comp)
    return dL_dP, dL_dke_sum, dL_dcov_comp, dL_duv_comp


def _quat_rotation_partials(q: np.ndarray) -> np.ndarray:
    """d R / d q for unit quaternions; (K, 4, 3, 3)."""
    w, x, y, z = q[:, 0], q[:, 1], q[:, 2], q[:, 3]
    zero = np.zeros_like(w)
    out = np.empty((q.shape[0], 4, 3, 3))
    out[:, 0] = 2.0 * np.stack(
        [zero, -z, y, z, zero, -x, -y, x, zero], axis=-1
    ).reshape(-1, 3, 3)
    out[:, 1] = 2.0 * np.stack(
        [zero, y, z, y, -2 * x, -w, z, w, -2 * x], axis=-1
    ).reshape(-1, 3, 3)
    out[:, 2] = 2.0 * np.stack(
        [-2 * y, x, w, x, zero, z, -w, z, -2 * y], axis=-1
    ).reshape(-1, 3, 3)
    out[:, 3] = 2.0 * np.stack(
        [-2 * z, -w, x, w, -2 * z, y, x, y, zero], axis=-1
    ).reshape(-1, 3, 3)
    return out


def grad_geometry_stage(
    fwd: ForwardResult,
    dL_dcov_comp: np.ndarray,
    dL_dcov_img: np.ndarray,
    dL_duv_comp: np.ndarray,
    dL_duv_img: np.ndarray,
    dL_dP: np.ndarray,
):
    """Chain plane-space gradients back to position, rotation, log-scales.

    Position receives three terms: the two affine plane projections and the
    look-direction dependence of the phase function (zero where the phase
    clamp is active).

    Returns:
        (dL_dpos, dL_drot, dL_dlogs): (K, 3), (K, 4), (K, 3) arrays.
    """
    proj = fwd.projection
    scene = fwd.scene
    idx = proj.indices
    mc = proj.jac_comp @ proj.rotation   # 2x3, pixels per meter
    mi = proj.jac_img @ proj.rotation

    # d L / d Sigma_3d via both plane sandwiches.
    g3 = np.einsum("ba,kbc,cd->kad", mc, dL_dcov_comp, mc)
    g3 += np.einsum("ba,kbc,cd->kad", mi, dL_dcov_img, mi)

    q = scene.rotations[idx]
    norm = np.linalg.norm(q, axis=1, keepdims=True)
    q_hat = q / norm
    rot = np.empty((len(idx), 3, 3))
    w, x, y, z = q_hat[:, 0], q_hat[:, 1], q_hat[:, 2], q_hat[:, 3]
    rot[:, 0, 0] = 1 - 2 * (y * y + z * z)
    rot[:, 0, 1] = 2 * (x * y - w * z)
    rot[:, 0, 2] = 2 * (x * z + w * y)
    rot[:, 1, 0] = 2 * (x * y + w * z)
    rot[:, 1, 1] = 1 - 2 * (x * x + z * z)
    rot[:, 1, 2] = 2 * (y * z - w * x)
    rot[:, 2, 0] = 2 * (x * z - w * y)
    rot[:, 2, 1] = 2 * (y * z + w * x)
    rot[:, 2, 2] = 1 - 2 * (x * x + y * y)

    scales = np.exp(scene.log_scales[idx])
    m_fac = rot * scales[:, None, :]              # R S
    dL_dm = 2.0 * np.einsum("kab,kbc->kac", g3, m_fac)
    dL_dlogs = np.sum(dL_dm * m_fac, axis=1)
    dL_drot_mat = dL_dm * scales[:, None, :]
    partials = _quat_rotation_partials(q_hat)
    dL_dq_hat = np.einsum("kij,kaij->ka", dL_drot_mat, partials)
    dL_drot = (dL_dq_hat - np.sum(dL_dq_hat * q_hat, axis=1, keepdims=True) * q_hat) / norm

    dL_dpos = dL_duv_comp @ mc + dL_duv_img @ mi

    # Phase-function dependence on the platform->scatterer direction.
    active = proj.phase_unclamped > 0.0
    if np.any(active):
        basis_grad = eval_sh_basis_grad(proj.look_dirs)              # (K, 16, 3)
        dP_dd = np.einsum("nk,nkd->nd", scene.sh_coeffs[idx], basis_grad)
        dP_dd -= np.sum(dP_dd * proj.look_dirs, axis=1, keepdims=True) * proj.look_dirs
        dP_dpos = dP_dd / proj.look_dists[:, None]
        dL_dpos += np.where(active, dL_dP, 0.0)[:, None] * dP_dpos
    return dL_dpos, dL_drot, dL_dlogs


def grad_sh_stage(fwd: ForwardResult, dL_dP: np.ndarray) -> np.ndarray:
    """Phase gradients onto SH coefficients; zero where the clamp is active."""
    proj = fwd.projection
    basis = eval_sh_basis(proj.look_dirs)
    gate = np.where(proj.phase_unclamped > 0.0, dL_dP, 0.0)
    return gate[:, None] * basis


def backward(fwd: ForwardResult, dL_dS: np.ndarray) -> SceneGradients:
    """Full backward pass from an image gradient to scene-parameter gradients.

    Args:
        fwd: result of :func:`sarsplat.forward.render_forward` on the same scene.
        dL_dS: (n_range, n_azimuth) loss gradient w.r.t. the rendered image.

    Raises:
        StateError: if the retained buffers do not match the scene or image.
    """
    dL_dS = np.asarray(dL_dS, dtype=np.float64)
    if dL_dS.shape != fwd.image.shape:
        raise StateError(
            f"image gradient shape {dL_dS.shape} does not match forward {fwd.image.shape}"
        )
    if fwd.projection.n_scene != len(fwd.scene):
        raise StateError("scene changed since the forward pass; buffers are stale")
    if not np.all(np.isfinite(dL_dS)):
        raise InvalidParameterError("dL_dS contains non-finite values")

    scene: Scene = fwd.scene
    grads = SceneGradients.zeros(len(scene))
    k = len(fwd.projection)
    if k == 0:
        return grads
    idx = fwd.projection.indices

    dL_dI, _, dL_dcov_img, dL_duv_img = grad_image_stage(fwd, dL_dS)
    dL_dP, dL_dke_sum, dL_dcov_comp, dL_duv_comp = grad_intensity_stage(fwd, dL_dI)
    dL_dpos, dL_drot, dL_dlogs = grad_geometry_stage(
        fwd, dL_dcov_comp, dL_dcov_img, dL_duv_comp, dL_duv_img, dL_dP
    )
    dL_dsh = grad_sh_stage(fwd, dL_dP)

    grads.positions[idx] = dL_dpos
    grads.rotations[idx] = dL_drot
    grads.log_scales[idx] = dL_dlogs
    grads.sh_coeffs[idx] = dL_dsh
    grads.ke_raw[idx, 0] = dL_dke_sum * softplus_grad(scene.ke_raw[idx, 0])
    grads.ke_raw[idx, 1] = dL_dke_sum * softplus_grad(scene.ke_raw[idx, 1])
    grads.visible[idx] = True

    # Densification statistic: 2D positional gradient in NDC units, both planes.
    n_u, n_v = fwd.config.n_rays
    g_ndc = dL_duv_comp * np.array([n_u / 2.0, n_v / 2.0])
    g_ndc += dL_duv_img * np.array([fwd.config.n_azimuth / 2.0, fwd.config.n_range / 2.0])
    grads.uv_grad_norm[idx] = np.linalg.norm(g_ndc, axis=1)
    return grads
