"""Reconstruction loop: loss, parameter updates, densification, scheduling.

The loop is a single-threaded orchestrator around the internally vectorized
render/backward kernels; the scene is mutated only between passes.  With a
fixed seed the final scene is bit-reproducible.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .backward import SceneGradients, backward
from .forward import render_forward
from .geometry import DEFAULT_COV_REG, DEFAULT_CUTOFF
from .metrics import psnr, ssim_with_grad
from .radar import RadarConfig
from .scene import Scene, concatenate_scenes, softplus_inverse
from .sh import SH_C0, n_coeffs_for_degree
from .validation import (
    DivergenceError,
    InvalidParameterError,
    check_positive,
    check_same_shape,
)


@dataclass
class TrainConfig:
    """Hyperparameters of the reconstruction loop.

    Learning rates follow splatting-lineage defaults scaled to metric units;
    the position rate is multiplied by the init-scene extent and decays
    exponentially to ``lr_position_final`` over the run.  Real-data mode
    multiplies all rates by 0.3 and bounds per-step displacements.
    """

    iterations: int = 30000
    lambda_ssim: float = 0.2
    lr_position: float = 1.6e-4
    lr_position_final: float = 1.6e-6
    lr_rotation: float = 1e-3
    lr_log_scales: float = 5e-3
    lr_sh: float = 2.5e-3
    lr_extinction: float = 5e-2
    densify_enabled: bool = True
    densify_start: int = 10000
    densify_end: int = 25000
    densify_interval: int = 100
    densify_grad_threshold: float = 3e-3
    max_radius_factor: float = 0.3       # x radar ground-range extent
    clone_size_factor: float = 0.01      # "small footprint" vs scene extent
    prune_phase_floor: float = 5e-3
    split_scale_shrink: float = 1.6
    sh_degree_interval: int = 2500
    real_data_mode: bool = False
    real_data_lr_factor: float = 0.3
    displacement_bound: float | None = None
    seed: int = 0
    cov_reg: float = DEFAULT_COV_REG
    cutoff: float = DEFAULT_CUTOFF
    max_val: float = 1.0
    checkpoint_interval: int = 0
    assert_interval: int = 100

    def __post_init__(self):
        if self.iterations < 0:
            raise InvalidParameterError("iterations must be >= 0")
        if not (0 <= self.densify_start <= self.densify_end):
            raise InvalidParameterError("densify window must satisfy 0 <= start <= end")
        for name in ("densify_grad_threshold", "max_radius_factor", "prune_phase_floor",
                     "densify_interval", "sh_degree_interval"):
            check_positive(getattr(self, name), name)
        if not (0.0 <= self.lambda_ssim <= 1.0):
            raise InvalidParameterError("lambda_ssim must lie in [0, 1]")
        if self.real_data_mode and self.displacement_bound is None:
            self.displacement_bound = 0.05

    def lr_scale(self) -> float:
        return self.real_data_lr_factor if self.real_data_mode else 1.0


def loss(rendered, target, lambda_ssim: float = 0.2, max_val: float = 1.0):
    """Training loss (1-l) L1 + l (1 - SSIM) and its image gradient.

    Returns:
        (value, dL_dS) with dL_dS shaped like ``rendered``.
    """
    rendered = np.asarray(rendered, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    check_same_shape(rendered, target)
    diff = rendered - target
    l1 = float(np.mean(np.abs(diff)))
    grad = np.sign(diff) / diff.size * (1.0 - lambda_ssim)
    value = (1.0 - lambda_ssim) * l1
    if lambda_ssim > 0.0:
        s, ds = ssim_with_grad(rendered, target, max_val=max_val)
        value += lambda_ssim * (1.0 - s)
        grad -= lambda_ssim * ds
    return value, grad


def init_hemisphere(
    n_points: int,
    radius: float,
    seed: int = 0,
    init_phase: float = 0.1,
    init_extinction: float = 0.1,
) -> Scene:
    """Uniform samples on the upper hemisphere shell of the given radius.

    Initial scatterers are isotropic with scale radius / cbrt(n), carry a
    DC-only phase function, and a small positive extinction rate.
    """
    if n_points < 1:
        raise InvalidParameterError("n_points must be >= 1")
    check_positive(radius, "radius")
    rng = np.random.default_rng(seed)
    z = radius * rng.uniform(0.0, 1.0, size=n_points)
    phi = rng.uniform(0.0, 2.0 * np.pi, size=n_points)
    rho = np.sqrt(np.maximum(radius * radius - z * z, 0.0))
    positions = np.column_stack([rho * np.cos(phi), rho * np.sin(phi), z])

    rot = np.zeros((n_points, 4))
    rot[:, 0] = 1.0
    sh = np.zeros((n_points, 16))
    sh[:, 0] = init_phase / SH_C0
    scale = radius / np.cbrt(n_points)
    return Scene(
        positions=positions,
        rotations=rot,
        log_scales=np.full((n_points, 3), np.log(scale)),
        sh_coeffs=sh,
        ke_raw=np.full((n_points, 2), softplus_inverse(init_extinction)),
        metadata={"init": "hemisphere", "radius": radius, "seed": seed},
    )


PARAM_GROUPS = ("positions", "rotations", "log_scales", "sh_coeffs", "ke_raw")


@dataclass
class AdamState:
    """First/second moment buffers per parameter group."""

    m: dict[str, np.ndarray]
    v: dict[str, np.ndarray]
    step: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    n_skipped: int = 0

    @classmethod
    def for_scene(cls, scene: Scene) -> "AdamState":
        m = {g: np.zeros_like(getattr(scene, g)) for g in PARAM_GROUPS}
        v = {g: np.zeros_like(getattr(scene, g)) for g in PARAM_GROUPS}
        return cls(m=m, v=v)

    def reindex(self, keep: np.ndarray, n_new: int) -> None:
        """Keep rows of surviving primitives and append zeros for new ones."""
        for d in (self.m, self.v):
            for g in PARAM_GROUPS:
                kept = d[g][keep]
                pad = np.zeros((n_new,) + kept.shape[1:])
                d[g] = np.concatenate([kept, pad])


def adam_step(
    scene: Scene,
    grads: SceneGradients,
    state: AdamState,
    lrs: dict[str, float],
    displacement_bound: float | None = None,
) -> None:
    """One adaptive-moment update, in place.

    Non-finite gradient entries are zeroed and counted rather than applied,
    so parameters never go non-finite.  Quaternions are renormalized after
    the step; position deltas are norm-clamped to ``displacement_bound``
    when one is configured.
    """
    state.step += 1
    b1, b2 = state.beta1, state.beta2
    bc1 = 1.0 - b1 ** state.step
    bc2 = 1.0 - b2 ** state.step
    for group, grad in zip(PARAM_GROUPS, grads.param_arrays()):
        bad = ~np.isfinite(grad)
        if bad.any():
            state.n_skipped += int(bad.sum())
            grad = np.where(bad, 0.0, grad)
        m = state.m[group]
        v = state.v[group]
        m *= b1
        m += (1.0 - b1) * grad
        v *= b2
        v += (1.0 - b2) * grad * grad
        step = lrs[group] * (m / bc1) / (np.sqrt(v / bc2) + state.eps)
        if group == "positions" and displacement_bound is not None:
            norms = np.linalg.norm(step, axis=1, keepdims=True)
            factor = np.minimum(1.0, displacement_bound / np.maximum(norms, 1e-300))
            step = step * factor
        param = getattr(scene, group)
        param -= step
    scene.rotations /= np.linalg.norm(scene.rotations, axis=1, keepdims=True)


def sh_schedule(iteration: int, config: TrainConfig) -> int:
    """Active SH degree: one more every ``sh_degree_interval`` iterations, max 3."""
    if iteration < 0:
        raise InvalidParameterError("iteration must be >= 0")
    return min(3, iteration // config.sh_degree_interval)


@dataclass
class GradAccumulator:
    """Densification statistics accumulated between densify events."""

    norm_sum: np.ndarray
    pos_sum: np.ndarray
    count: np.ndarray

    @classmethod
    def zeros(cls, n: int) -> "GradAccumulator":
        return cls(norm_sum=np.zeros(n), pos_sum=np.zeros((n, 3)), count=np.zeros(n))

    def update(self, grads: SceneGradients) -> None:
        vis = grads.visible
        self.norm_sum[vis] += grads.uv_grad_norm[vis]
        self.pos_sum[vis] += grads.positions[vis]
        self.count[vis] += 1.0

    def mean_norm(self) -> np.ndarray:
        return self.norm_sum / np.maximum(self.count, 1.0)

    def mean_pos_grad(self) -> np.ndarray:
        return self.pos_sum / np.maximum(self.count, 1.0)[:, None]


@dataclass
class DensifyEvent:
    iteration: int
    n_cloned: int
    n_split: int
    n_pruned: int
    n_after: int


def densify_and_prune(
    scene: Scene,
    accum: GradAccumulator,
    config: TrainConfig,
    view: RadarConfig,
    scene_extent: float,
    position_lr: float,
    rng: np.random.Generator,
    state: AdamState | None = None,
) -> tuple[Scene, GradAccumulator, DensifyEvent]:
    """Clone under-reconstructed, split oversized, prune weak/oversized.

    Clones displace along the descent direction by one position-lr step;
    split children sample inside the parent footprint with scales shrunk by
    ``split_scale_shrink``.  The radius cap is ``max_radius_factor`` times
    the view's ground-range extent.
    """
    n = len(scene)
    cap = config.max_radius_factor * view.ground_extent_m
    max_scale = np.exp(scene.log_scales).max(axis=1)

    split = max_scale > cap
    small = max_scale <= config.clone_size_factor * scene_extent
    clone = (accum.mean_norm() > config.densify_grad_threshold) & small & ~split & (accum.count > 0)

    kept = ~split
    parts = [scene.select(kept)]
    n_clone = int(clone.sum())
    if n_clone:
        clones = scene.select(clone)
        disp = -position_lr * accum.mean_pos_grad()[clone]
        clones.positions = clones.positions + disp
        parts.append(clones)
    n_split = int(split.sum())
    if n_split:
        parents = scene.select(np.repeat(np.flatnonzero(split), 2))
        cov = parents.covariances()
        chol = np.linalg.cholesky(cov)
        xi = rng.normal(size=(len(parents), 3))
        parents.positions = parents.positions + np.einsum("kab,kb->ka", chol, xi)
        parents.log_scales = parents.log_scales - np.log(config.split_scale_shrink)
        parts.append(parents)
    merged = concatenate_scenes(parts) if len(parts) > 1 else parts[0]

    dc_phase = merged.sh_coeffs[:, 0] * SH_C0
    oversized = np.exp(merged.log_scales).max(axis=1) > cap
    survive = (dc_phase >= config.prune_phase_floor) & ~oversized
    n_pruned = int((~survive).sum())
    result = merged.select(survive)

    if state is not None:
        # Moments: originals keep theirs, clones/children start fresh.
        keep_rows = np.flatnonzero(kept)
        state.reindex(keep_rows, n_clone + 2 * n_split)
        final_keep = np.flatnonzero(survive)
        state.reindex(final_keep, 0)

    event = DensifyEvent(
        iteration=-1, n_cloned=n_clone, n_split=n_split,
        n_pruned=n_pruned, n_after=len(result),
    )
    return result, GradAccumulator.zeros(len(result)), event


@dataclass
class TrainLog:
    """Line-oriented training log: iteration, loss, PSNR, primitive count."""

    records: list[tuple[int, float, float, int]] = field(default_factory=list)
    densify_events: list[DensifyEvent] = field(default_factory=list)
    n_skipped_steps: int = 0

    def append(self, iteration: int, loss_value: float, psnr_value: float, count: int):
        self.records.append((iteration, float(loss_value), float(psnr_value), count))

    def write(self, path) -> None:
        lines = ["# iteration loss psnr n_primitives"]
        lines += [f"{i} {l:.8g} {p:.6g} {c}" for i, l, p, c in self.records]
        Path(path).write_text("\n".join(lines) + "\n")

    def losses(self) -> np.ndarray:
        return np.array([r[1] for r in self.records])

    def psnrs(self) -> np.ndarray:
        return np.array([r[2] for r in self.records])

    def counts(self) -> np.ndarray:
        return np.array([r[3] for r in self.records])


def _scene_extent(scene: Scene) -> float:
    if len(scene) == 0:
        return 1.0
    center = scene.positions.mean(axis=0)
    return max(float(np.linalg.norm(scene.positions - center, axis=1).max()), 1e-6)


def _assert_scene_health(scene: Scene) -> None:
    np.linalg.cholesky(scene.covariances())  # raises if any covariance left the PSD cone
    assert np.all(np.isfinite(scene.ke_raw))


def train(
    dataset,
    init: Scene,
    config: TrainConfig,
    checkpoint_dir=None,
) -> tuple[Scene, TrainLog]:
    """Optimize a scene against the dataset's training views.

    Args:
        dataset: a ViewDataset or a sequence of (RadarConfig, image) pairs.
        init: starting scene (not mutated).
        config: loop hyperparameters.
        checkpoint_dir: when set with ``config.checkpoint_interval`` > 0,
            periodic scene snapshots are written there.

    Returns:
        (scene, log).  Raises DivergenceError after two consecutive
        non-finite losses.
    """
    views = list(dataset.train_views()) if hasattr(dataset, "train_views") else list(dataset)
    if not views:
        raise InvalidParameterError("training split is empty")
    scene = init.copy()
    scene.validate()
    if len(scene) == 0:
        raise InvalidParameterError("initial scene is empty")

    extent = _scene_extent(scene)
    state = AdamState.for_scene(scene)
    accum = GradAccumulator.zeros(len(scene))
    rng = np.random.default_rng(config.seed)
    log = TrainLog()
    lr_scale = config.lr_scale()
    decay = (
        config.lr_position_final / config.lr_position if config.lr_position > 0 else 1.0
    )
    bad_streak = 0

    if checkpoint_dir is not None:
        checkpoint_dir = Path(checkpoint_dir)
        checkpoint_dir.mkdir(parents=True, exist_ok=True)

    for it in range(config.iterations):
        view_cfg, target = views[it % len(views)]
        fwd = render_forward(scene, view_cfg, cov_reg=config.cov_reg, cutoff=config.cutoff)
        value, dl_ds = loss(fwd.image, target, config.lambda_ssim, max_val=config.max_val)

        if not np.isfinite(value):
            bad_streak += 1
            if bad_streak >= 2:
                raise DivergenceError(
                    f"loss non-finite at iterations {it - 1}, {it}; aborting"
                )
            log.append(it, value, 0.0, len(scene))
            log.n_skipped_steps += 1
            continue
        bad_streak = 0

        grads = backward(fwd, dl_ds)
        active = n_coeffs_for_degree(sh_schedule(it, config))
        grads.sh_coeffs[:, active:] = 0.0

        t_frac = it / max(config.iterations - 1, 1)
        pos_lr = config.lr_position * extent * decay ** t_frac * lr_scale
        lrs = {
            "positions": pos_lr,
            "rotations": config.lr_rotation * lr_scale,
            "log_scales": config.lr_log_scales * lr_scale,
            "sh_coeffs": config.lr_sh * lr_scale,
            "ke_raw": config.lr_extinction * lr_scale,
        }
        adam_step(scene, grads, state, lrs, displacement_bound=config.displacement_bound)
        accum.update(grads)

        log.append(it, value, psnr(fwd.image, target, config.max_val), len(scene))

        due = (
            config.densify_enabled
            and config.densify_start <= it < min(config.densify_end, config.iterations)
            and (it - config.densify_start) % config.densify_interval == 0
            and it > 0
        )
        if due:
            scene, accum, event = densify_and_prune(
                scene, accum, config, view_cfg, extent, pos_lr, rng, state=state
            )
            event.iteration = it
            log.densify_events.append(event)

        if config.assert_interval and (it + 1) % config.assert_interval == 0:
            _assert_scene_health(scene)

        if (
            checkpoint_dir is not None
            and config.checkpoint_interval
            and (it + 1) % config.checkpoint_interval == 0
        ):
            from .ply import save_scene

            save_scene(scene, checkpoint_dir / f"scene_{it + 1:06d}.ply")

    return scene, log
