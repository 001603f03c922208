import time
import numpy as np
from sarsplat import RadarConfig, TrainConfig, init_hemisphere, train, render
from sarsplat.metrics import dbscan_filter, evaluate_point_clouds
from sarsplat.targets import tank_preset, composite_target, sample_target_points

specs = tank_preset()
target = composite_target(specs, [120, 60, 20], seed=3)
views = []
for az in range(0, 360, 30):
    cfg = RadarConfig(azimuth_deg=az, elevation_deg=45.0, altitude_m=0.5,
                      range_res_m=0.3, azimuth_res_m=0.3, n_range=64, n_azimuth=64)
    views.append((cfg, render(target, cfg)))
peak = max(im.max() for _, im in views)
views = [(c, im / peak) for c, im in views]
gt = sample_target_points(specs, 4000, seed=7, include_bottom=False)
OV = dict(lr_position=4.8e-3, lr_position_final=4.8e-4)

print("== trend ==", flush=True)
for n_init in (500, 2000, 8000):
    t0 = time.time()
    cfg_t = TrainConfig(iterations=3000, densify_enabled=False, seed=0, **OV)
    s, log = train(views, init_hemisphere(n_init, 4.5, seed=1), cfg_t)
    rec = dbscan_filter(s.positions, 0.3, 5)
    rep = evaluate_point_clouds(rec, gt, tau=0.6)
    print(f"n={n_init:5d}: {time.time()-t0:4.0f}s CD={rep.chamfer:.3f} F1={rep.f1:.3f} kept={len(rec)}", flush=True)

print("== densify on/off ==", flush=True)
for densify in (True, False):
    t0 = time.time()
    kw = dict(iterations=3000, seed=0, **OV)
    if densify:
        kw.update(densify_enabled=True, densify_start=800, densify_end=2600, densify_interval=200)
    else:
        kw["densify_enabled"] = False
    s, log = train(views, init_hemisphere(1000, 4.5, seed=1), TrainConfig(**kw))
    rec = dbscan_filter(s.positions, 0.3, 5)
    rep = evaluate_point_clouds(rec, gt, tau=0.6)
    counts = log.counts()
    ev = log.densify_events
    print(f"densify={densify}: {time.time()-t0:4.0f}s n_final={len(s)} "
          f"count 800={counts[800] if len(counts)>800 else '-'} max={counts.max()} "
          f"events={len(ev)} cloned={sum(e.n_cloned for e in ev)} split={sum(e.n_split for e in ev)} "
          f"pruned={sum(e.n_pruned for e in ev)} CD={rep.chamfer:.3f} F1={rep.f1:.3f}", flush=True)
