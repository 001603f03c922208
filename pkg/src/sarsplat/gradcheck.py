"""Finite-difference verification of the analytic backward pass.

Runs small random scenes through the quadratic image loss L = sum(S^2)/2 and
compares every analytic parameter gradient against central differences.
Culling is disabled so the objective is smooth; parameters of scatterers
sitting within 1e-3 of the phase-clamp boundary are excluded.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .backward import SceneGradients, backward
from .forward import render, render_forward
from .radar import RadarConfig
from .scene import Scene

GROUP_SIZES = (("positions", 3), ("rotations", 4), ("log_scales", 3),
               ("sh_coeffs", 16), ("ke_raw", 2))
FD_TOLERANCE = 1e-4
FD_FLOOR = 1e-8
CLAMP_MARGIN = 1e-3


def pack_scene(scene: Scene) -> np.ndarray:
    return np.concatenate([getattr(scene, g).ravel() for g, _ in GROUP_SIZES])


def unpack_scene(vec: np.ndarray, n: int, metadata=None) -> Scene:
    parts = {}
    o = 0
    for group, width in GROUP_SIZES:
        parts[group] = vec[o : o + n * width].reshape(n, width).copy()
        o += n * width
    return Scene(metadata=dict(metadata or {}), **parts)


def pack_gradients(grads: SceneGradients) -> np.ndarray:
    return np.concatenate([a.ravel() for a in grads.param_arrays()])


def random_scene(rng: np.random.Generator, n: int, spread: float = 2.5) -> Scene:
    """Random scene kept clear of the phase-clamp boundary."""
    q = rng.normal(size=(n, 4))
    q /= np.linalg.norm(q, axis=1, keepdims=True)
    sh = rng.normal(scale=0.1, size=(n, 16))
    sh[:, 0] = rng.uniform(1.0, 3.0, size=n)
    return Scene(
        positions=rng.uniform(-spread, spread, size=(n, 3)),
        rotations=q,
        log_scales=rng.uniform(np.log(0.3), np.log(1.0), size=(n, 3)),
        sh_coeffs=sh,
        ke_raw=rng.uniform(-0.5, 1.0, size=(n, 2)),
    )


def gradcheck_config(rng: np.random.Generator, size: int = 16) -> RadarConfig:
    """A view that keeps the scene in-frame (elevation near 45 degrees)."""
    return RadarConfig(
        azimuth_deg=float(rng.uniform(0.0, 360.0)),
        elevation_deg=float(rng.uniform(38.0, 52.0)),
        altitude_m=float(rng.uniform(1.0, 4.0)),
        range_res_m=0.5,
        azimuth_res_m=0.5,
        n_range=size,
        n_azimuth=size,
    )


def _quadratic_loss(scene: Scene, config: RadarConfig) -> float:
    img = render(scene, config, cutoff=np.inf)
    return 0.5 * float(np.sum(img * img))


def analytic_gradient(scene: Scene, config: RadarConfig) -> np.ndarray:
    fwd = render_forward(scene, config, cutoff=np.inf)
    return pack_gradients(backward(fwd, fwd.image.copy()))


def fd_gradient(scene: Scene, config: RadarConfig, step: float = 1e-4) -> np.ndarray:
    theta = pack_scene(scene)
    n = len(scene)
    out = np.empty_like(theta)
    for i in range(theta.size):
        tp = theta.copy()
        tp[i] += step
        tm = theta.copy()
        tm[i] -= step
        out[i] = (_quadratic_loss(unpack_scene(tp, n), config)
                  - _quadratic_loss(unpack_scene(tm, n), config)) / (2.0 * step)
    return out


def _exclusion_mask(scene: Scene, config: RadarConfig) -> np.ndarray:
    """True where a parameter is compared; clamp-adjacent scatterers excluded."""
    from .geometry import project_all

    n = len(scene)
    proj = project_all(scene, config, cutoff=np.inf)
    near_clamp = np.zeros(n, dtype=bool)
    near_clamp[proj.indices] = np.abs(proj.phase_unclamped) < CLAMP_MARGIN
    mask = []
    for group, width in GROUP_SIZES:
        m = np.ones((n, width), dtype=bool)
        if group in ("positions", "sh_coeffs"):
            m[near_clamp] = False  # phase clamp gates these chains
        mask.append(m.ravel())
    return np.concatenate(mask)


def compare_gradients(scene: Scene, config: RadarConfig, step: float = 1e-4):
    """Per-group max relative error between analytic and FD gradients."""
    ana = analytic_gradient(scene, config)
    num = fd_gradient(scene, config, step=step)
    include = _exclusion_mask(scene, config)
    denom = np.maximum(np.maximum(np.abs(ana), np.abs(num)), FD_FLOOR)
    rel = np.where(include, np.abs(ana - num) / denom, 0.0)
    n = len(scene)
    out = {}
    o = 0
    for group, width in GROUP_SIZES:
        out[group] = float(rel[o : o + n * width].max())
        o += n * width
    return out


@dataclass
class GradcheckReport:
    max_rel_err: dict[str, float]
    worst: float
    tolerance: float
    passed: bool


def run_gradcheck(
    seed: int = 0,
    size: int = 16,
    n_scenes: int = 3,
    n_primitives: int = 5,
    tolerance: float = FD_TOLERANCE,
) -> GradcheckReport:
    """FD-verify ``n_scenes`` random scenes; aggregates per-group worst errors."""
    rng = np.random.default_rng(seed)
    agg = {group: 0.0 for group, _ in GROUP_SIZES}
    for _ in range(n_scenes):
        scene = random_scene(rng, n_primitives)
        config = gradcheck_config(rng, size=size)
        errs = compare_gradients(scene, config)
        for group, err in errs.items():
            agg[group] = max(agg[group], err)
    worst = max(agg.values())
    return GradcheckReport(
        max_rel_err=agg, worst=worst, tolerance=tolerance, passed=worst < tolerance
    )
