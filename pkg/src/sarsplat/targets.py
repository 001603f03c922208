"""Synthetic scene construction: cuboid buildings, composite targets, ground.

Sampled surfaces become isotropic Gaussian scatterers whose scale equals the
sampling spacing, with direction-independent (DC-only) phase functions and a
shared extinction rate per part.  All sampling is deterministic per seed.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .scene import Scene, concatenate_scenes, softplus_inverse
from .sh import SH_C0
from .validation import InvalidParameterError, check_positive

# Face ids: ordered (axis, side) pairs of a cuboid.
FACES = ("x-", "x+", "y-", "y+", "z-", "z+")


@dataclass(frozen=True)
class CuboidSpec:
    """Axis-aligned cuboid: ``center`` is the base-center (z at the bottom).

    Attributes:
        height: extent along +z from the base, meters.
        width: roof width along x (the ground-range axis at azimuth 0).
        length: extent along y.
        center: (x, y, z_base) of the footprint center.
        phase_roof / phase_wall: DC phase-function values for the top and the
            vertical faces.
        extinction: activated extinction rate (1/m) for sampled scatterers.
    """

    height: float
    width: float
    length: float
    center: tuple[float, float, float] = (0.0, 0.0, 0.0)
    phase_roof: float = 0.8
    phase_wall: float = 1.0
    extinction: float = 4.0

    def __post_init__(self):
        for name in ("height", "width", "length"):
            check_positive(getattr(self, name), name)

    @property
    def bounds(self) -> tuple[np.ndarray, np.ndarray]:
        c = np.asarray(self.center, dtype=np.float64)
        lo = c + np.array([-self.width / 2.0, -self.length / 2.0, 0.0])
        hi = c + np.array([self.width / 2.0, self.length / 2.0, self.height])
        return lo, hi

    def face_area(self, face: str) -> float:
        w, l, h = self.width, self.length, self.height
        return {"x-": l * h, "x+": l * h, "y-": w * h, "y+": w * h, "z-": w * l, "z+": w * l}[face]


def _sample_face(spec: CuboidSpec, face: str, n: int, rng: np.random.Generator) -> np.ndarray:
    lo, hi = spec.bounds
    u = rng.uniform(size=(n, 2))
    pts = np.empty((n, 3))
    axis = "xyz".index(face[0])
    others = [a for a in range(3) if a != axis]
    pts[:, others[0]] = lo[others[0]] + u[:, 0] * (hi[others[0]] - lo[others[0]])
    pts[:, others[1]] = lo[others[1]] + u[:, 1] * (hi[others[1]] - lo[others[1]])
    pts[:, axis] = lo[axis] if face[1] == "-" else hi[axis]
    return pts


def sample_cuboid_surface(
    spec: CuboidSpec,
    n: int,
    rng: np.random.Generator,
    faces: tuple[str, ...] = FACES,
):
    """Area-weighted uniform samples on the chosen faces.

    Returns:
        (points, face_ids): (n, 3) coordinates and the per-point face index
        into ``faces``.
    """
    if n == 0:
        return np.zeros((0, 3)), np.zeros(0, dtype=np.int64)
    areas = np.array([spec.face_area(f) for f in faces])
    if areas.sum() <= 0:
        raise InvalidParameterError("cuboid spec has zero surface area")
    counts = rng.multinomial(n, areas / areas.sum())
    pts = [_sample_face(spec, f, c, rng) for f, c in zip(faces, counts)]
    ids = np.repeat(np.arange(len(faces)), counts)
    return np.concatenate(pts), ids


def sample_target_points(
    specs, n: int, seed: int = 0, include_bottom: bool = True
) -> np.ndarray:
    """Ground-truth surface cloud: area-weighted samples over one or more cuboids.

    ``include_bottom=False`` restricts sampling to the faces a side-looking
    platform can ever illuminate (matching the renderer-input clouds).
    """
    if isinstance(specs, CuboidSpec):
        specs = [specs]
    specs = list(specs)
    if not specs:
        raise InvalidParameterError("need at least one cuboid")
    if n == 0:
        return np.zeros((0, 3))
    faces = FACES if include_bottom else tuple(f for f in FACES if f != "z-")
    rng = np.random.default_rng(seed)
    areas = np.array([sum(s.face_area(f) for f in faces) for s in specs])
    counts = rng.multinomial(n, areas / areas.sum())
    return np.concatenate(
        [sample_cuboid_surface(s, c, rng, faces=faces)[0] for s, c in zip(specs, counts)]
    )


def _points_to_scene(
    points: np.ndarray,
    spacing: float,
    phase_dc: np.ndarray | float,
    extinction: float,
    metadata: dict | None = None,
) -> Scene:
    n = points.shape[0]
    sh = np.zeros((n, 16))
    sh[:, 0] = np.asarray(phase_dc, dtype=np.float64) / SH_C0
    rot = np.zeros((n, 4))
    rot[:, 0] = 1.0
    return Scene(
        positions=points,
        rotations=rot,
        log_scales=np.full((n, 3), np.log(spacing)),
        sh_coeffs=sh,
        ke_raw=np.full((n, 2), softplus_inverse(extinction)),
        metadata=dict(metadata or {}),
    )


def building_scene(
    spec: CuboidSpec,
    ground_extent: float,
    density: float,
    seed: int = 0,
    ground_phase: float = 0.05,
    ground_extinction: float = 0.5,
) -> Scene:
    """Roof + radar-facing wall + surrounding ground patch.

    The wall faces +x, matching a platform at azimuth 0.  Ground points are
    sampled on the ``ground_extent``-sized square minus the footprint.
    """
    check_positive(density, "density")
    check_positive(ground_extent, "ground_extent")
    rng = np.random.default_rng(seed)
    spacing = 1.0 / np.sqrt(density)

    n_roof = max(1, round(density * spec.face_area("z+")))
    n_wall = max(1, round(density * spec.face_area("x+")))
    roof, _ = sample_cuboid_surface(spec, n_roof, rng, faces=("z+",))
    wall, _ = sample_cuboid_surface(spec, n_wall, rng, faces=("x+",))

    lo, hi = spec.bounds
    half = ground_extent / 2.0
    n_ground = round(density * ground_extent * ground_extent)
    g = rng.uniform(-half, half, size=(n_ground, 2))
    inside = (
        (g[:, 0] > lo[0]) & (g[:, 0] < hi[0]) & (g[:, 1] > lo[1]) & (g[:, 1] < hi[1])
    )
    g = g[~inside]
    ground = np.column_stack([g, np.zeros(len(g))])

    parts = [
        _points_to_scene(roof, spacing, spec.phase_roof, spec.extinction),
        _points_to_scene(wall, spacing, spec.phase_wall, spec.extinction),
        _points_to_scene(ground, spacing, ground_phase, ground_extinction),
    ]
    scene = concatenate_scenes(parts)
    scene.metadata.update({"kind": "building", "seed": seed})
    return scene


def composite_target(specs, n_points, seed: int = 0) -> Scene:
    """Union of sampled cuboids (all faces except the bottom).

    Args:
        specs: cuboid parts.
        n_points: per-part sample budgets (one int per spec).
        seed: sampling seed.
    """
    specs = list(specs)
    budgets = list(n_points)
    if not specs:
        raise InvalidParameterError("need at least one cuboid")
    if len(budgets) != len(specs):
        raise InvalidParameterError("one point budget per cuboid required")
    rng = np.random.default_rng(seed)
    faces = ("x-", "x+", "y-", "y+", "z+")
    parts = []
    for spec, n in zip(specs, budgets):
        pts, ids = sample_cuboid_surface(spec, int(n), rng, faces=faces)
        area = sum(spec.face_area(f) for f in faces)
        spacing = np.sqrt(area / max(int(n), 1))
        phase = np.where(ids == faces.index("z+"), spec.phase_roof, spec.phase_wall)
        parts.append(_points_to_scene(pts, spacing, phase, spec.extinction))
    scene = concatenate_scenes(parts)
    scene.metadata.update({"kind": "composite", "seed": seed})
    return scene


def tank_preset(scale: float = 1.0) -> list[CuboidSpec]:
    """Hull + turret + barrel stand-in for a tracked-vehicle target."""
    return [
        CuboidSpec(height=1.6 * scale, width=3.6 * scale, length=6.8 * scale,
                   center=(0.0, 0.0, 0.0), phase_roof=0.7, phase_wall=1.0),
        CuboidSpec(height=0.9 * scale, width=2.2 * scale, length=3.0 * scale,
                   center=(0.0, -0.4 * scale, 1.6 * scale), phase_roof=0.8, phase_wall=1.1),
        CuboidSpec(height=0.35 * scale, width=0.35 * scale, length=3.4 * scale,
                   center=(0.0, 2.6 * scale, 2.1 * scale), phase_roof=0.9, phase_wall=0.9),
    ]


@dataclass
class SceneSpec:
    """Parsed scene-spec document: cuboids with budgets plus optional ground."""

    cuboids: list[CuboidSpec]
    budgets: list[int]
    ground: dict | None = None
    seed: int = 0
    metadata: dict = field(default_factory=dict)


def load_scene_spec(path) -> SceneSpec:
    """Read a JSON scene-spec file.

    Schema::

        {
          "seed": 0,
          "cuboids": [
            {"height": 1.5, "width": 3.0, "length": 5.0, "center": [0, 0, 0],
             "phase_roof": 0.8, "phase_wall": 1.0, "extinction": 4.0,
             "points": 150}
          ],
          "ground": {"extent": 20.0, "density": 1.0,
                     "phase": 0.05, "extinction": 0.5}   // optional
        }
    """
    text = Path(path).read_text()
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise InvalidParameterError(f"scene spec {path}: invalid JSON ({exc})") from exc
    if "cuboids" not in doc or not doc["cuboids"]:
        raise InvalidParameterError(f"scene spec {path}: no cuboids listed")
    cuboids, budgets = [], []
    for i, rec in enumerate(doc["cuboids"]):
        try:
            budgets.append(int(rec.pop("points", 100)))
            center = tuple(rec.pop("center", (0.0, 0.0, 0.0)))
            cuboids.append(CuboidSpec(center=center, **rec))
        except (TypeError, KeyError, ValueError) as exc:
            raise InvalidParameterError(f"scene spec {path}: cuboid {i}: {exc}") from exc
    return SceneSpec(
        cuboids=cuboids,
        budgets=budgets,
        ground=doc.get("ground"),
        seed=int(doc.get("seed", 0)),
        metadata=doc.get("metadata", {}),
    )


def build_scene_from_spec(spec: SceneSpec) -> Scene:
    """Instantiate the scatterer scene described by a scene-spec document."""
    scene = composite_target(spec.cuboids, spec.budgets, seed=spec.seed)
    if spec.ground:
        g = spec.ground
        extent = check_positive(g.get("extent", 20.0), "ground.extent")
        density = check_positive(g.get("density", 1.0), "ground.density")
        rng = np.random.default_rng(spec.seed + 1)
        half = extent / 2.0
        n = round(density * extent * extent)
        pts = rng.uniform(-half, half, size=(n, 2))
        keep = np.ones(len(pts), dtype=bool)
        for cub in spec.cuboids:
            lo, hi = cub.bounds
            inside = (
                (pts[:, 0] > lo[0]) & (pts[:, 0] < hi[0])
                & (pts[:, 1] > lo[1]) & (pts[:, 1] < hi[1])
            )
            keep &= ~inside
        ground_pts = np.column_stack([pts[keep], np.zeros(int(keep.sum()))])
        ground_scene = _points_to_scene(
            ground_pts,
            1.0 / np.sqrt(density),
            g.get("phase", 0.05),
            g.get("extinction", 0.5),
        )
        scene = concatenate_scenes([scene, ground_scene])
    scene.metadata.update(spec.metadata)
    return scene
