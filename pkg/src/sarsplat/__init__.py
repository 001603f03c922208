"""Differentiable Gaussian-splatting SAR renderer and multi-view reconstruction.

Forward path: explicit Gaussian-scatterer scenes render into SAR intensity
images through computation-plane ray attenuation and imaging-plane splatting.
Inverse path: analytic gradients drive adaptive-moment descent from
multi-view imagery back to scatterer positions, shapes, phase functions, and
extinction rates.
"""

from .radar import RadarConfig, parse_view_string
from .scene import (
    GaussianPrimitive,
    Scene,
    activate_extinction,
    covariance_from_params,
)
from .geometry import (
    ProjectedGaussian,
    Projection,
    eval_phase_function,
    project_all,
    project_covariance,
    project_point_computation,
    project_point_imaging,
    radar_position,
    radar_rotation,
    world_to_radar,
)
from .forward import (
    ForwardResult,
    IntensityBuffer,
    RayLists,
    build_ray_lists,
    compute_intensities,
    gaussian_weight,
    render,
    render_forward,
    render_reference,
    splat_image,
)
from .backward import SceneGradients, backward
from .optimize import (
    TrainConfig,
    TrainLog,
    adam_step,
    densify_and_prune,
    init_hemisphere,
    loss,
    sh_schedule,
    train,
)
from .metrics import (
    CloudMetricsReport,
    ImageMetricsReport,
    chamfer,
    dbscan_filter,
    evaluate_images,
    evaluate_point_clouds,
    precision_recall_f1,
    psnr,
    ssim,
)
from .targets import (
    CuboidSpec,
    building_scene,
    composite_target,
    sample_target_points,
    tank_preset,
)
from .dataset import (
    DatasetManifest,
    ViewDataset,
    ViewRecord,
    load_dataset,
    load_manifest,
    save_manifest,
)
from .ply import load_point_cloud, load_scene, save_point_cloud, save_scene
from .imageio import load_image, save_image
from .estimator import GaussianSplatSAR
from .gradcheck import run_gradcheck
from .validation import (
    DegenerateProjectionError,
    DivergenceError,
    InvalidParameterError,
    NumericalError,
    SarsplatError,
    StateError,
)

__all__ = [
    "RadarConfig", "parse_view_string",
    "GaussianPrimitive", "Scene", "activate_extinction", "covariance_from_params",
    "ProjectedGaussian", "Projection", "eval_phase_function", "project_all",
    "project_covariance", "project_point_computation", "project_point_imaging",
    "radar_position", "radar_rotation", "world_to_radar",
    "ForwardResult", "IntensityBuffer", "RayLists", "build_ray_lists",
    "compute_intensities", "gaussian_weight", "render", "render_forward",
    "render_reference", "splat_image",
    "SceneGradients", "backward",
    "TrainConfig", "TrainLog", "adam_step", "densify_and_prune",
    "init_hemisphere", "loss", "sh_schedule", "train",
    "CloudMetricsReport", "ImageMetricsReport", "chamfer", "dbscan_filter",
    "evaluate_images", "evaluate_point_clouds", "precision_recall_f1",
    "psnr", "ssim",
    "CuboidSpec", "building_scene", "composite_target", "sample_target_points",
    "tank_preset",
    "DatasetManifest", "ViewDataset", "ViewRecord", "load_dataset", "load_manifest",
    "save_manifest",
    "load_point_cloud", "load_scene", "save_point_cloud", "save_scene",
    "load_image", "save_image",
    "GaussianSplatSAR",
    "run_gradcheck",
    "SarsplatError", "InvalidParameterError", "DegenerateProjectionError",
    "NumericalError", "StateError", "DivergenceError",
]

__version__ = "0.1.0"
