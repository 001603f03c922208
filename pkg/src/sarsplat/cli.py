"""Command-line surface tying the pipeline together.

Subcommands: render, simulate, train, eval-images, eval-pointcloud, filter,
gradcheck.  Exit codes: 0 success, 1 validation error, 2 numerical failure.
Diagnostics go to standard error.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from .dataset import ViewRecord, load_dataset, save_manifest
from .forward import render
from .gradcheck import run_gradcheck
from .imageio import save_image
from .metrics import dbscan_inlier_mask, evaluate_images, evaluate_point_clouds
from .optimize import TrainConfig, init_hemisphere, train
from .ply import (
    export_scene_points,
    load_point_cloud,
    load_scene,
    save_point_cloud,
    save_scene,
)
from .radar import RadarConfig, parse_view_string
from .targets import build_scene_from_spec, load_scene_spec, sample_target_points
from .validation import (
    DegenerateProjectionError,
    DivergenceError,
    InvalidParameterError,
    NumericalError,
)


class _Parser(argparse.ArgumentParser):
    """Argument parser that reports usage problems as validation errors."""

    def error(self, message):
        raise InvalidParameterError(message)


def _parse_angle_list(text: str) -> list[float]:
    """``"a,b,c"`` or ``"start:stop:step"`` (stop exclusive) to a float list."""
    text = text.strip()
    if ":" in text:
        parts = text.split(":")
        if len(parts) != 3:
            raise InvalidParameterError(f"bad sweep spec {text!r}; use start:stop:step")
        start, stop, step = (float(p) for p in parts)
        if step <= 0:
            raise InvalidParameterError("sweep step must be positive")
        return [float(v) for v in np.arange(start, stop, step)]
    return [float(p) for p in text.split(",") if p.strip()]


def _cmd_render(args) -> int:
    scene = load_scene(args.scene)
    cfg = parse_view_string(args.view)
    img = render(scene, cfg)
    save_image(img, args.out, normalization=args.normalization, max_val=args.max_val)
    return 0


def _cmd_simulate(args) -> int:
    spec = load_scene_spec(args.scene_spec)
    scene = build_scene_from_spec(spec)
    azimuths = _parse_angle_list(args.azimuths)
    elevations = _parse_angle_list(args.elevations)
    train_az = set(_parse_angle_list(args.train_azimuths)) if args.train_azimuths else set()
    out_dir = Path(args.out_dir)
    (out_dir / "images").mkdir(parents=True, exist_ok=True)

    views = []
    for el in elevations:
        for az in azimuths:
            cfg = RadarConfig(
                azimuth_deg=az, elevation_deg=el, altitude_m=args.alt,
                range_res_m=args.dr, azimuth_res_m=args.da,
                n_range=args.nr, n_azimuth=args.na,
            )
            views.append((cfg, render(scene, cfg)))

    peak = max(img.max() for _, img in views)
    scale = float(peak) if peak > 0 else 1.0
    records = []
    for cfg, img in views:
        name = f"images/az{cfg.azimuth_deg:07.2f}_el{cfg.elevation_deg:05.2f}.png"
        save_image(img, out_dir / name, normalization="fixed-max", max_val=scale)
        split = "train" if (not train_az or cfg.azimuth_deg in train_az) else "test"
        records.append(ViewRecord(
            image=name, azimuth_deg=cfg.azimuth_deg, elevation_deg=cfg.elevation_deg,
            altitude_m=args.alt, range_res_m=args.dr, azimuth_res_m=args.da,
            split=split, n_range=args.nr, n_azimuth=args.na,
        ))
    save_manifest(records, out_dir / "manifest.jsonl")
    save_scene(scene, out_dir / "scene.ply")
    if args.gt_points > 0:
        pts = sample_target_points(spec.cuboids, args.gt_points, seed=spec.seed)
        save_point_cloud(pts, out_dir / "ground_truth.ply")
    print(f"wrote {len(records)} views to {out_dir}")
    return 0


def _parse_init(text: str, views) -> "object":
    if not text.startswith("hemisphere:"):
        raise InvalidParameterError(f"unknown init spec {text!r}; use hemisphere:n=...,r=...")
    n, r, seed = 2000, None, 0
    for item in text[len("hemisphere:"):].split(","):
        if not item:
            continue
        k, _, v = item.partition("=")
        if k == "n":
            n = int(v)
        elif k == "r":
            r = float(v)
        elif k == "seed":
            seed = int(v)
        else:
            raise InvalidParameterError(f"unknown init key {k!r}")
    if r is None:
        r = 0.2 * views[0][0].ground_extent_m
    return init_hemisphere(n, r, seed=seed)


def _cmd_train(args) -> int:
    dataset = load_dataset(args.manifest)
    views = dataset.train_views()
    if not views:
        raise InvalidParameterError("manifest has no train-split views")
    overrides = {}
    if args.config:
        cfg_path = Path(args.config)
        if not cfg_path.exists():
            raise InvalidParameterError(f"config file not found: {cfg_path}")
        overrides = json.loads(cfg_path.read_text())
    if args.iterations is not None:
        overrides["iterations"] = args.iterations
    if args.seed is not None:
        overrides["seed"] = args.seed
    try:
        config = TrainConfig(**overrides)
    except TypeError as exc:
        raise InvalidParameterError(f"bad train config: {exc}") from exc
    init = _parse_init(args.init, views)
    scene, log = train(dataset, init, config, checkpoint_dir=args.checkpoint_dir)
    save_scene(scene, args.out)
    if args.log:
        log.write(args.log)
    if args.points_out:
        export_scene_points(scene, args.points_out)
    last = log.records[-1] if log.records else (0, float("nan"), float("nan"), len(scene))
    print(f"trained {config.iterations} iterations; final loss {last[1]:.6g}, "
          f"psnr {last[2]:.4g} dB, {last[3]} primitives")
    return 0


def _cmd_eval_images(args) -> int:
    dataset = load_dataset(args.manifest)
    scene = load_scene(args.scene)
    pairs = dataset.test_views() if args.split == "test" else (
        dataset.train_views() if args.split == "train" else list(dataset.views)
    )
    if not pairs:
        raise InvalidParameterError(f"no views with split {args.split!r}")
    rendered = [render(scene, cfg) for cfg, _ in pairs]
    targets = [img for _, img in pairs]
    report = evaluate_images(rendered, targets, max_val=args.max_val)
    with open(args.report, "w") as fh:
        fh.write(json.dumps(report.to_record()) + "\n")
    print(f"psnr {report.psnr_mean:.4g} dB, ssim {report.ssim_mean:.5g} "
          f"over {len(pairs)} views")
    return 0


def _cmd_eval_pointcloud(args) -> int:
    rec, _ = load_point_cloud(args.rec)
    ref, _ = load_point_cloud(args.ref)
    report = evaluate_point_clouds(rec, ref, tau=args.tau)
    with open(args.report, "w") as fh:
        fh.write(json.dumps(report.to_record()) + "\n")
    print(f"chamfer {report.chamfer:.6g} (ref->rec {report.dist_ref_to_rec:.6g}, "
          f"rec->ref {report.dist_rec_to_ref:.6g}), "
          f"P {report.precision:.4g} R {report.recall:.4g} F1 {report.f1:.4g} "
          f"at tau={report.tau}")
    return 0


def _cmd_filter(args) -> int:
    pts, weights = load_point_cloud(args.infile)
    mask = dbscan_inlier_mask(pts, args.eps, args.min_pts, keep_largest=args.keep_largest)
    save_point_cloud(pts[mask], args.out, weights=None if weights is None else weights[mask])
    print(f"kept {int(mask.sum())} of {len(pts)} points")
    return 0


def _cmd_gradcheck(args) -> int:
    report = run_gradcheck(seed=args.seed, size=args.size,
                           n_scenes=args.scenes, n_primitives=args.primitives)
    for group, err in report.max_rel_err.items():
        print(f"{group}: max rel err {err:.3e}")
    if not report.passed:
        raise NumericalError(
            f"gradient check failed: worst {report.worst:.3e} > {report.tolerance:g}"
        )
    print(f"gradcheck passed: worst {report.worst:.3e} <= {report.tolerance:g}")
    return 0


def build_parser() -> _Parser:
    p = _Parser(prog="sarsplat", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("render", help="render one view of a scene PLY")
    r.add_argument("--scene", required=True)
    r.add_argument("--view", required=True,
                   help='e.g. "az=0,el=45,alt=1,dr=0.3,da=0.3,nr=64,na=64"')
    r.add_argument("--out", required=True)
    r.add_argument("--normalization", default="per-image-max",
                   choices=["fixed-max", "per-image-max"])
    r.add_argument("--max-val", type=float, default=None)
    r.set_defaults(func=_cmd_render)

    s = sub.add_parser("simulate", help="render a view sweep from a scene spec")
    s.add_argument("--scene-spec", required=True)
    s.add_argument("--azimuths", default="0:360:15", help="list or start:stop:step")
    s.add_argument("--elevations", default="15,45,75")
    s.add_argument("--train-azimuths", default="0:360:45",
                   help="azimuths tagged train; others become test ('' = all train)")
    s.add_argument("--alt", type=float, default=1.0)
    s.add_argument("--dr", type=float, default=0.3)
    s.add_argument("--da", type=float, default=0.3)
    s.add_argument("--nr", type=int, default=64)
    s.add_argument("--na", type=int, default=64)
    s.add_argument("--gt-points", type=int, default=2000)
    s.add_argument("--out-dir", required=True)
    s.set_defaults(func=_cmd_simulate)

    t = sub.add_parser("train", help="reconstruct a scene from a manifest")
    t.add_argument("--manifest", required=True)
    t.add_argument("--init", default="hemisphere:n=2000",
                   help="hemisphere:n=...,r=...,seed=...")
    t.add_argument("--config", default=None, help="JSON file of TrainConfig fields")
    t.add_argument("--iterations", type=int, default=None)
    t.add_argument("--seed", type=int, default=None)
    t.add_argument("--out", required=True)
    t.add_argument("--log", default=None)
    t.add_argument("--points-out", default=None)
    t.add_argument("--checkpoint-dir", default=None)
    t.set_defaults(func=_cmd_train)

    ei = sub.add_parser("eval-images", help="PSNR/SSIM of a scene against a manifest")
    ei.add_argument("--manifest", required=True)
    ei.add_argument("--scene", required=True)
    ei.add_argument("--report", required=True)
    ei.add_argument("--split", default="test", choices=["train", "test", "all"])
    ei.add_argument("--max-val", type=float, default=1.0)
    ei.set_defaults(func=_cmd_eval_images)

    ep = sub.add_parser("eval-pointcloud", help="chamfer/F1 of reconstruction vs reference")
    ep.add_argument("--rec", required=True)
    ep.add_argument("--ref", required=True)
    ep.add_argument("--tau", type=float, default=0.6)
    ep.add_argument("--report", required=True)
    ep.set_defaults(func=_cmd_eval_pointcloud)

    f = sub.add_parser("filter", help="DBSCAN outlier removal on a point cloud")
    f.add_argument("--in", dest="infile", required=True)
    f.add_argument("--eps", type=float, default=0.3)
    f.add_argument("--min-pts", type=int, default=5)
    f.add_argument("--keep-largest", action="store_true")
    f.add_argument("--out", required=True)
    f.set_defaults(func=_cmd_filter)

    g = sub.add_parser("gradcheck", help="finite-difference gradient verification")
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--size", type=int, default=16)
    g.add_argument("--scenes", type=int, default=3)
    g.add_argument("--primitives", type=int, default=5)
    g.set_defaults(func=_cmd_gradcheck)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except (InvalidParameterError, FileNotFoundError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (NumericalError, DegenerateProjectionError, DivergenceError,
            np.linalg.LinAlgError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
