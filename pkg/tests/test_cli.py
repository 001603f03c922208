import json
from pathlib import Path

import numpy as np
import pytest

from sarsplat import load_point_cloud, load_scene, save_point_cloud, save_scene
from sarsplat.cli import main
from tests.conftest import make_random_scene


@pytest.fixture
def scene_spec_file(tmp_path):
    doc = {
        "seed": 0,
        "cuboids": [
            {"height": 1.2, "width": 2.0, "length": 3.0, "center": [0, 0, 0],
             "phase_wall": 1.0, "phase_roof": 0.8, "extinction": 3.0, "points": 80},
        ],
    }
    path = tmp_path / "spec.json"
    path.write_text(json.dumps(doc))
    return path


def run_simulate(tmp_path, scene_spec_file, azimuths="0:360:45", elevations="45",
                 extra=()):
    out_dir = tmp_path / "data"
    rc = main([
        "simulate", "--scene-spec", str(scene_spec_file),
        "--azimuths", azimuths, "--elevations", elevations,
        "--train-azimuths", "0:360:90",
        "--alt", "0.5", "--dr", "0.5", "--da", "0.5", "--nr", "32", "--na", "32",
        "--out-dir", str(out_dir), *extra,
    ])
    return rc, out_dir


class TestSimulate:
    def test_table_sweep_72_images(self, tmp_path, scene_spec_file, capsys):
        rc, out_dir = run_simulate(tmp_path, scene_spec_file,
                                   azimuths="0:360:15", elevations="15,45,75")
        assert rc == 0
        images = list((out_dir / "images").glob("*.png"))
        assert len(images) == 72
        assert (out_dir / "manifest.jsonl").exists()
        assert (out_dir / "ground_truth.ply").exists()

    def test_split_tagging(self, tmp_path, scene_spec_file):
        rc, out_dir = run_simulate(tmp_path, scene_spec_file, azimuths="0:360:45")
        assert rc == 0
        lines = (out_dir / "manifest.jsonl").read_text().splitlines()
        splits = [json.loads(l)["split"] for l in lines]
        assert splits.count("train") == 4
        assert splits.count("test") == 4

    def test_bad_sweep_spec(self, tmp_path, scene_spec_file, capsys):
        rc = main(["simulate", "--scene-spec", str(scene_spec_file),
                   "--azimuths", "0:10", "--out-dir", str(tmp_path / "x")])
        assert rc == 1
        assert "error" in capsys.readouterr().err


class TestRender:
    def test_render_roundtrip(self, tmp_path, rng):
        scene = make_random_scene(rng, 10)
        scene_path = tmp_path / "s.ply"
        save_scene(scene, scene_path)
        out = tmp_path / "img.png"
        rc = main(["render", "--scene", str(scene_path),
                   "--view", "az=20,el=40,alt=2,dr=0.5,da=0.5,nr=16,na=16",
                   "--out", str(out)])
        assert rc == 0
        assert out.exists() and Path(str(out) + ".json").exists()

    def test_missing_scene_exit_1(self, tmp_path, capsys):
        rc = main(["render", "--scene", str(tmp_path / "nope.ply"),
                   "--view", "az=0,el=45", "--out", str(tmp_path / "o.png")])
        assert rc == 1
        assert "error" in capsys.readouterr().err

    def test_bad_view_string_exit_1(self, tmp_path, rng):
        scene_path = tmp_path / "s.ply"
        save_scene(make_random_scene(rng, 3), scene_path)
        rc = main(["render", "--scene", str(scene_path),
                   "--view", "az=0,bogus=3", "--out", str(tmp_path / "o.png")])
        assert rc == 1

    def test_usage_error_exit_1(self):
        assert main(["render", "--scene"]) == 1
        assert main(["no-such-command"]) == 1


class TestTrainEval:
    def test_train_eval_filter_pipeline(self, tmp_path, scene_spec_file):
        rc, out_dir = run_simulate(tmp_path, scene_spec_file)
        assert rc == 0
        scene_out = tmp_path / "recon.ply"
        cfg_path = tmp_path / "train.json"
        cfg_path.write_text(json.dumps({
            "iterations": 40, "densify_enabled": False, "lambda_ssim": 0.0,
        }))
        rc = main(["train", "--manifest", str(out_dir / "manifest.jsonl"),
                   "--init", "hemisphere:n=50,r=2.5,seed=1",
                   "--config", str(cfg_path), "--seed", "0",
                   "--out", str(scene_out),
                   "--log", str(tmp_path / "train.log"),
                   "--points-out", str(tmp_path / "pts.ply")])
        assert rc == 0
        assert scene_out.exists()
        recon = load_scene(scene_out)
        assert len(recon) == 50
        log_lines = (tmp_path / "train.log").read_text().splitlines()
        assert log_lines[0].startswith("#")
        assert len(log_lines) == 41

        report = tmp_path / "imgs.jsonl"
        rc = main(["eval-images", "--manifest", str(out_dir / "manifest.jsonl"),
                   "--scene", str(scene_out), "--report", str(report),
                   "--split", "test"])
        assert rc == 0
        rec = json.loads(report.read_text())
        assert "psnr_mean" in rec and "ssim_mean" in rec

        cloud_report = tmp_path / "cloud.jsonl"
        rc = main(["eval-pointcloud", "--rec", str(tmp_path / "pts.ply"),
                   "--ref", str(out_dir / "ground_truth.ply"),
                   "--tau", "0.6", "--report", str(cloud_report)])
        assert rc == 0
        rec = json.loads(cloud_report.read_text())
        assert set(rec) >= {"chamfer", "precision", "recall", "f1", "tau"}

    def test_filter_command(self, tmp_path, rng):
        grid = np.mgrid[0:10, 0:10].reshape(2, -1).T * 0.1
        pts = np.vstack([np.column_stack([grid, np.zeros(len(grid))]),
                         rng.uniform(20, 30, size=(8, 3))])
        inp = tmp_path / "in.ply"
        save_point_cloud(pts, inp, weights=np.arange(len(pts), dtype=float))
        out = tmp_path / "out.ply"
        rc = main(["filter", "--in", str(inp), "--eps", "0.3", "--min-pts", "5",
                   "--out", str(out)])
        assert rc == 0
        kept, weights = load_point_cloud(out)
        assert len(kept) == 100
        assert weights is not None and len(weights) == 100

    def test_train_bad_config_exit_1(self, tmp_path, scene_spec_file):
        rc, out_dir = run_simulate(tmp_path, scene_spec_file)
        cfg_path = tmp_path / "bad.json"
        cfg_path.write_text(json.dumps({"no_such_field": 1}))
        rc = main(["train", "--manifest", str(out_dir / "manifest.jsonl"),
                   "--config", str(cfg_path), "--out", str(tmp_path / "o.ply")])
        assert rc == 1


class TestGradcheckCommand:
    def test_default_seed_passes(self, capsys):
        rc = main(["gradcheck", "--seed", "0", "--scenes", "1", "--primitives", "3"])
        assert rc == 0
        out = capsys.readouterr().out
        for group in ("positions", "rotations", "log_scales", "sh_coeffs", "ke_raw"):
            assert group in out
