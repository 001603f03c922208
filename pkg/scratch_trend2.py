import time
import numpy as np
from scipy.spatial import cKDTree
from sarsplat import RadarConfig, TrainConfig, init_hemisphere, train, render
from sarsplat.metrics import dbscan_filter, evaluate_point_clouds
from sarsplat.targets import tank_preset, composite_target, sample_target_points
from sarsplat.sh import SH_C0

specs = tank_preset()
target = composite_target(specs, [120, 60, 20], seed=3)
views = []
for az in range(0, 360, 45):
    cfg = RadarConfig(azimuth_deg=az, elevation_deg=45.0, altitude_m=0.5,
                      range_res_m=0.3, azimuth_res_m=0.3, n_range=48, n_azimuth=48)
    views.append((cfg, render(target, cfg)))
peak = max(im.max() for _, im in views)
views = [(c, im / peak) for c, im in views]
gt = sample_target_points(specs, 4000, seed=7, include_bottom=False)
OV = dict(lr_position=4.8e-3, lr_position_final=4.8e-4)

# diagnostic on 8000 first: dc-vs-distance separation without prune
for n_init, iters, prune in [(8000, 4500, False), (8000, 4500, True),
                             (500, 4500, True), (2000, 4500, True)]:
    t0 = time.time()
    kw = dict(iterations=iters, seed=0, **OV)
    if prune:
        kw.update(densify_enabled=True, densify_start=1500, densify_end=iters - 500,
                  densify_interval=300, densify_grad_threshold=1e9,  # prune only
                  prune_phase_floor=0.02)
    else:
        kw["densify_enabled"] = False
    s, log = train(views, init_hemisphere(n_init, 4.5, seed=1), TrainConfig(**kw))
    d_surf = cKDTree(gt).query(s.positions)[0]
    dc = s.sh_coeffs[:, 0] * SH_C0
    rec = dbscan_filter(s.positions, 0.3, 5)
    rep = evaluate_point_clouds(rec, gt, tau=0.6)
    near = d_surf < 0.3
    print(f"n={n_init} prune={prune}: {time.time()-t0:4.0f}s n_final={len(s)} kept={len(rec)} "
          f"CD={rep.chamfer:.3f} F1={rep.f1:.3f} | near-frac={near.mean():.2f} "
          f"dc_near={np.median(dc[near]) if near.any() else -1:.3f} "
          f"dc_far={np.median(dc[~near]) if (~near).any() else -1:.3f}", flush=True)
