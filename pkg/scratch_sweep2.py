import time
import numpy as np
from sarsplat import RadarConfig, TrainConfig, init_hemisphere, train, render, psnr, ssim
from sarsplat.metrics import dbscan_filter, evaluate_point_clouds
from sarsplat.targets import tank_preset, composite_target, sample_target_points

specs = tank_preset()
target_scene = composite_target(specs, [120, 60, 20], seed=3)
views = []
for el in (15.0, 45.0, 75.0):
    for az in range(0, 360, 45):
        cfg = RadarConfig(azimuth_deg=az, elevation_deg=el, altitude_m=0.5,
                          range_res_m=0.3, azimuth_res_m=0.3, n_range=128, n_azimuth=64)
        views.append((cfg, render(target_scene, cfg)))
peak = max(im.max() for _, im in views)
views = [(c, im / peak) for c, im in views]
gt = sample_target_points(specs, 4000, seed=7)

cases = [
    ("x30 d0.1 6k", dict(iterations=6000, lr_position=4.8e-3, lr_position_final=4.8e-4)),
    ("x60 d0.1 6k", dict(iterations=6000, lr_position=9.6e-3, lr_position_final=9.6e-4)),
    ("x30 d0.1 6k dens", dict(iterations=6000, lr_position=4.8e-3, lr_position_final=4.8e-4,
                              densify_enabled=True, densify_start=1500, densify_end=5000,
                              densify_interval=250, prune_phase_floor=0.02)),
]
for name, kw in cases:
    base = dict(densify_enabled=False, seed=0)
    base.update(kw)
    init = init_hemisphere(1000, 4.5, seed=1)
    t0 = time.time()
    scene, log = train(views, init, TrainConfig(**base))
    rec = dbscan_filter(scene.positions, 0.3, 5)
    rep = evaluate_point_clouds(rec, gt, tau=0.6) if len(rec) > 3 else None
    print(f"{name:20s} {time.time()-t0:5.0f}s n={len(scene):5d} kept={len(rec):5d} "
          f"psnr={log.records[-1][2]:6.2f} "
          + (f"CD={rep.chamfer:7.3f} F1={rep.f1:.3f}" if rep else "CD=n/a"), flush=True)
