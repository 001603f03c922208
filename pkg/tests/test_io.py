import json

import numpy as np
import pytest

from sarsplat import (
    load_dataset,
    load_image,
    load_manifest,
    load_point_cloud,
    load_scene,
    save_image,
    save_manifest,
    save_point_cloud,
    save_scene,
)
from sarsplat.dataset import ViewRecord
from sarsplat.ply import export_scene_points
from sarsplat.sh import SH_C0
from sarsplat.validation import InvalidParameterError
from tests.conftest import make_random_scene


class TestScenePly:
    def test_roundtrip_bit_exact(self, tmp_path, rng):
        scene = make_random_scene(rng, 100)
        scene.metadata["note"] = "roundtrip"
        path = tmp_path / "scene.ply"
        save_scene(scene, path)
        back = load_scene(path)
        for a, b in zip(
            (scene.positions, scene.rotations, scene.log_scales, scene.sh_coeffs, scene.ke_raw),
            (back.positions, back.rotations, back.log_scales, back.sh_coeffs, back.ke_raw),
        ):
            assert np.array_equal(a, b)
        assert back.metadata["note"] == "roundtrip"

    def test_plain_export_counts(self, tmp_path, rng):
        scene = make_random_scene(rng, 17)
        path = tmp_path / "points.ply"
        export_scene_points(scene, path)
        pts, weights = load_point_cloud(path)
        assert pts.shape == (17, 3)
        np.testing.assert_allclose(pts, scene.positions)
        np.testing.assert_allclose(weights, np.maximum(scene.sh_coeffs[:, 0] * SH_C0, 0.0))

    def test_plain_ply_as_scene_reports_missing(self, tmp_path, rng):
        path = tmp_path / "points.ply"
        save_point_cloud(rng.random((5, 3)), path)
        with pytest.raises(InvalidParameterError, match="qw"):
            load_scene(path)

    def test_malformed_header(self, tmp_path):
        path = tmp_path / "bad.ply"
        path.write_bytes(b"not a ply at all")
        with pytest.raises(InvalidParameterError, match="malformed"):
            load_scene(path)

    def test_point_cloud_roundtrip(self, tmp_path, rng):
        pts = rng.normal(size=(40, 3))
        w = rng.random(40)
        path = tmp_path / "c.ply"
        save_point_cloud(pts, path, weights=w)
        back, wback = load_point_cloud(path)
        assert np.array_equal(back, pts)
        assert np.array_equal(wback, w)

    def test_ascii_ply_reader(self, tmp_path):
        path = tmp_path / "ascii.ply"
        path.write_text(
            "ply\nformat ascii 1.0\nelement vertex 2\n"
            "property double x\nproperty double y\nproperty double z\n"
            "end_header\n0 0 0\n1.5 2.5 -3.0\n"
        )
        pts, w = load_point_cloud(path)
        np.testing.assert_allclose(pts, [[0, 0, 0], [1.5, 2.5, -3.0]])
        assert w is None


class TestImageIO:
    @pytest.mark.parametrize("ext", ["png", "pgm"])
    def test_roundtrip_quantization_bound(self, tmp_path, rng, ext):
        img = rng.random((24, 20))
        path = tmp_path / f"img.{ext}"
        save_image(img, path, normalization="fixed-max", max_val=1.0)
        back, scale = load_image(path)
        assert scale == 1.0
        assert np.abs(back - img).max() <= 0.5 / 65535 + 1e-12

    def test_all_zero(self, tmp_path):
        path = tmp_path / "zero.png"
        save_image(np.zeros((8, 8)), path)
        back, _ = load_image(path)
        assert np.all(back == 0)

    def test_fixed_max_half_value(self, tmp_path):
        img = np.full((4, 4), 0.5)
        path = tmp_path / "half.png"
        save_image(img, path, normalization="fixed-max", max_val=1.0)
        from PIL import Image

        raw = np.asarray(Image.open(path)).astype(np.int64)
        assert np.all(np.abs(raw - 32768) <= 1)

    def test_per_image_max_sidecar(self, tmp_path, rng):
        img = rng.random((10, 10)) * 7.3
        path = tmp_path / "img.png"
        scale = save_image(img, path, normalization="per-image-max")
        assert scale == pytest.approx(img.max())
        meta = json.loads((tmp_path / "img.png.json").read_text())
        assert meta["normalization"] == "per-image-max"
        back, _ = load_image(path)
        assert np.abs(back - img).max() <= 0.5 * scale / 65535 + 1e-9

    def test_rejects_negative(self, tmp_path):
        with pytest.raises(InvalidParameterError):
            save_image(np.full((4, 4), -1.0), tmp_path / "neg.png")

    def test_pgm_ascii_reader(self, tmp_path):
        path = tmp_path / "a.pgm"
        path.write_text("P2\n# comment\n3 2\n65535\n0 32768 65535\n100 200 300\n")
        img = _ = load_image(path)[0]
        assert img.shape == (2, 3)
        assert img[0, 1] == pytest.approx(32768 / 65535)


class TestManifest:
    def _write_views(self, tmp_path, rng, n=3, size=16, split="train"):
        records = []
        for i in range(n):
            img = rng.random((size, size))
            name = f"v{i}.png"
            save_image(img, tmp_path / name, normalization="fixed-max", max_val=1.0)
            records.append(ViewRecord(
                image=name, azimuth_deg=15.0 * i, elevation_deg=45.0, altitude_m=2.0,
                range_res_m=0.5, azimuth_res_m=0.5, split=split,
                n_range=size, n_azimuth=size,
            ))
        save_manifest(records, tmp_path / "manifest.jsonl")
        return tmp_path / "manifest.jsonl"

    def test_load_dataset(self, tmp_path, rng):
        path = self._write_views(tmp_path, rng, n=4)
        ds = load_dataset(path)
        assert len(ds) == 4
        assert len(ds.train_views()) == 4
        cfg, img = ds.views[0]
        assert img.shape == (cfg.n_range, cfg.n_azimuth)

    def test_empty_manifest(self, tmp_path):
        path = tmp_path / "empty.jsonl"
        path.write_text("")
        with pytest.raises(InvalidParameterError, match="empty"):
            load_manifest(path)

    def test_missing_image_names_view(self, tmp_path, rng):
        path = self._write_views(tmp_path, rng, n=2)
        (tmp_path / "v1.png").unlink()
        with pytest.raises(InvalidParameterError, match="view 1"):
            load_dataset(path)

    def test_dimension_mismatch_names_view(self, tmp_path, rng):
        path = self._write_views(tmp_path, rng, n=2)
        lines = path.read_text().splitlines()
        doc = json.loads(lines[0])
        doc["n_range"] = 64
        lines[0] = json.dumps(doc)
        path.write_text("\n".join(lines) + "\n")
        with pytest.raises(InvalidParameterError, match="view 0"):
            load_dataset(path)

    def test_malformed_record_index(self, tmp_path):
        path = tmp_path / "m.jsonl"
        path.write_text('{"image": "x.png"}\n')
        with pytest.raises(InvalidParameterError, match="record 0"):
            load_manifest(path)

    def test_bad_split_rejected(self, tmp_path):
        path = tmp_path / "m.jsonl"
        rec = {"image": "x.png", "azimuth_deg": 0, "elevation_deg": 45, "altitude_m": 1,
               "range_res_m": 0.3, "azimuth_res_m": 0.3, "split": "validation"}
        path.write_text(json.dumps(rec) + "\n")
        with pytest.raises(InvalidParameterError, match="split"):
            load_manifest(path)

    def test_24_view_manifest(self, tmp_path, rng):
        records = []
        for az in np.arange(0.0, 360.0, 15.0):
            img = rng.random((8, 8))
            name = f"az{az:.0f}.png"
            save_image(img, tmp_path / name, normalization="fixed-max", max_val=1.0)
            records.append(ViewRecord(
                image=name, azimuth_deg=float(az), elevation_deg=45.0, altitude_m=2.0,
                range_res_m=0.5, azimuth_res_m=0.5, split="test",
            ))
        save_manifest(records, tmp_path / "manifest.jsonl")
        ds = load_dataset(tmp_path / "manifest.jsonl")
        assert len(ds) == 24
        assert len(ds.test_views()) == 24
