import json

import numpy as np
import pytest

from sarsplat import CuboidSpec, building_scene, composite_target, sample_target_points, tank_preset
from sarsplat.scene import softplus
from sarsplat.sh import SH_C0
from sarsplat.targets import build_scene_from_spec, load_scene_spec, sample_cuboid_surface
from sarsplat.validation import InvalidParameterError


def dist_to_cuboid_surface(points, spec):
    """Exact distance from points to the surface of an axis-aligned cuboid."""
    lo, hi = spec.bounds
    inside_gap = np.minimum(points - lo, hi - points)
    outside = np.maximum(np.maximum(lo - points, points - hi), 0.0)
    d_out = np.linalg.norm(outside, axis=1)
    is_inside = np.all((points >= lo) & (points <= hi), axis=1)
    d_in = inside_gap.min(axis=1)
    return np.where(is_inside, d_in, d_out)


class TestSampling:
    def test_unit_cube_face_counts_multinomial(self):
        spec = CuboidSpec(height=1.0, width=1.0, length=1.0)
        pts = sample_target_points(spec, 6000, seed=0)
        assert len(pts) == 6000
        # Count per face: equal areas -> expect 1000 each within 3 sigma.
        lo, hi = spec.bounds
        sigma = np.sqrt(6000 * (1 / 6) * (5 / 6))
        counts = [
            np.sum(pts[:, 0] == lo[0]), np.sum(pts[:, 0] == hi[0]),
            np.sum(pts[:, 1] == lo[1]), np.sum(pts[:, 1] == hi[1]),
            np.sum(pts[:, 2] == lo[2]), np.sum(pts[:, 2] == hi[2]),
        ]
        assert sum(counts) == 6000
        for c in counts:
            assert abs(c - 1000) < 3 * sigma

    def test_zero_points(self):
        assert sample_target_points(CuboidSpec(1, 1, 1), 0).shape == (0, 3)

    def test_samples_on_surface(self):
        spec = CuboidSpec(height=2.0, width=3.0, length=4.0, center=(1.0, -2.0, 0.5))
        pts = sample_target_points(spec, 500, seed=1)
        assert dist_to_cuboid_surface(pts, spec).max() < 1e-9

    def test_deterministic_per_seed(self):
        spec = CuboidSpec(1, 1, 1)
        a = sample_target_points(spec, 100, seed=5)
        b = sample_target_points(spec, 100, seed=5)
        c = sample_target_points(spec, 100, seed=6)
        assert np.array_equal(a, b)
        assert not np.array_equal(a, c)


class TestBuildingScene:
    def test_surfaces_and_determinism(self):
        spec = CuboidSpec(height=8.0, width=8.0, length=10.0)
        scene = building_scene(spec, ground_extent=30.0, density=2.0, seed=0)
        scene2 = building_scene(spec, ground_extent=30.0, density=2.0, seed=0)
        assert np.array_equal(scene.positions, scene2.positions)
        z = scene.positions[:, 2]
        on_roof = np.isclose(z, 8.0)
        on_ground = np.isclose(z, 0.0)
        on_wall = np.isclose(scene.positions[:, 0], 4.0) & ~on_roof
        assert np.all(on_roof | on_ground | on_wall)
        # Ground excludes the footprint.
        g = scene.positions[on_ground & ~on_wall]
        inside = (np.abs(g[:, 0]) < 4.0) & (np.abs(g[:, 1]) < 5.0)
        assert not inside.any()

    def test_scales_match_density(self):
        spec = CuboidSpec(height=4.0, width=4.0, length=4.0)
        scene = building_scene(spec, ground_extent=20.0, density=4.0, seed=0)
        np.testing.assert_allclose(np.exp(scene.log_scales), 0.5, rtol=1e-12)

    def test_extinction_activated(self):
        spec = CuboidSpec(height=4.0, width=4.0, length=4.0, extinction=4.0)
        scene = building_scene(spec, 20.0, 1.0, seed=0)
        ke = softplus(scene.ke_raw)
        assert ke.max() == pytest.approx(4.0, rel=1e-9)


class TestCompositeTarget:
    def test_single_cuboid_budget(self):
        spec = CuboidSpec(height=2.0, width=2.0, length=2.0)
        scene = composite_target([spec], [150], seed=0)
        assert len(scene) == 150
        # No bottom-face samples.
        assert not np.any(np.isclose(scene.positions[:, 2], 0.0) &
                          (np.abs(scene.positions[:, 0]) < 1.0 - 1e-9) &
                          (np.abs(scene.positions[:, 1]) < 1.0 - 1e-9))

    def test_budget_conservation(self):
        scene = composite_target(tank_preset(), [120, 60, 20], seed=0)
        assert len(scene) == 200

    def test_preset_symmetry_about_length_axis(self):
        # The preset is mirror-symmetric in x; a dense sampled cloud must be
        # close to its own reflection (in distribution, ~ squared spacing).
        scene = composite_target(tank_preset(), [1600, 800, 320], seed=2)
        pts = scene.positions
        mirrored = pts * np.array([-1.0, 1.0, 1.0])
        from sarsplat import chamfer

        _, _, cd = chamfer(pts, mirrored)
        assert cd < 0.02

    def test_phase_values_positive(self):
        scene = composite_target(tank_preset(), [50, 30, 10], seed=0)
        assert np.all(scene.sh_coeffs[:, 0] * SH_C0 > 0)

    def test_budget_mismatch_raises(self):
        with pytest.raises(InvalidParameterError):
            composite_target(tank_preset(), [10, 20], seed=0)


class TestSceneSpec:
    def test_roundtrip(self, tmp_path):
        doc = {
            "seed": 3,
            "cuboids": [
                {"height": 1.5, "width": 3.0, "length": 5.0, "center": [0, 0, 0],
                 "phase_roof": 0.7, "phase_wall": 1.1, "extinction": 3.0, "points": 120},
                {"height": 0.8, "width": 1.5, "length": 2.0, "center": [0, -0.5, 1.5],
                 "points": 60},
            ],
            "ground": {"extent": 12.0, "density": 0.5, "phase": 0.04},
        }
        path = tmp_path / "spec.json"
        path.write_text(json.dumps(doc))
        spec = load_scene_spec(path)
        assert spec.budgets == [120, 60]
        scene = build_scene_from_spec(spec)
        assert len(scene) > 180
        scene2 = build_scene_from_spec(load_scene_spec(path))
        assert np.array_equal(scene.positions, scene2.positions)

    def test_invalid_json(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text("{not json")
        with pytest.raises(InvalidParameterError, match="invalid JSON"):
            load_scene_spec(path)

    def test_no_cuboids(self, tmp_path):
        path = tmp_path / "empty.json"
        path.write_text(json.dumps({"cuboids": []}))
        with pytest.raises(InvalidParameterError, match="no cuboids"):
            load_scene_spec(path)

    def test_bad_cuboid_field(self, tmp_path):
        path = tmp_path / "bad2.json"
        path.write_text(json.dumps({"cuboids": [{"height": 1.0, "bogus": 2}]}))
        with pytest.raises(InvalidParameterError, match="cuboid 0"):
            load_scene_spec(path)

    def test_degenerate_cuboid(self):
        with pytest.raises(InvalidParameterError):
            CuboidSpec(height=0.0, width=1.0, length=1.0)


def test_face_sampler_respects_faces(rng):
    spec = CuboidSpec(height=2.0, width=2.0, length=2.0)
    pts, ids = sample_cuboid_surface(spec, 400, rng, faces=("z+",))
    assert np.allclose(pts[:, 2], 2.0)
    assert np.all(ids == 0)
