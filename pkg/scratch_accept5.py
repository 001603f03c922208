"""Scratch: full-length acceptance-5 style run with CD trajectory."""
import sys
import time
import numpy as np

from sarsplat import RadarConfig, TrainConfig, init_hemisphere, train, psnr, ssim, render
from sarsplat.metrics import dbscan_filter, evaluate_point_clouds
from sarsplat.targets import tank_preset, composite_target, sample_target_points

iters = int(sys.argv[1]) if len(sys.argv) > 1 else 10000
n_init = int(sys.argv[2]) if len(sys.argv) > 2 else 2000
densify = len(sys.argv) > 3 and sys.argv[3] == "densify"

specs = tank_preset()
target_scene = composite_target(specs, [120, 60, 20], seed=3)

def make_views(azimuths, elevations):
    out = []
    for el in elevations:
        for az in azimuths:
            cfg = RadarConfig(azimuth_deg=az, elevation_deg=el, altitude_m=0.5,
                              range_res_m=0.3, azimuth_res_m=0.3, n_range=128, n_azimuth=64)
            out.append((cfg, render(target_scene, cfg)))
    return out

tv = make_views(range(0, 360, 45), (15.0, 45.0, 75.0))
hv = make_views((30.0, 90.0, 210.0, 330.0), (45.0, 75.0))
peak = max(im.max() for _, im in tv)
tv = [(c, im / peak) for c, im in tv]
hv = [(c, im / peak) for c, im in hv]

gt = sample_target_points(specs, 4000, seed=7)
init = init_hemisphere(n_init, 4.5, seed=1)

kw = dict(iterations=iters, seed=0)
if densify:
    kw.update(densify_enabled=True, densify_start=1000, densify_end=max(2000, iters - 2000),
              densify_interval=300)
else:
    kw["densify_enabled"] = False
config = TrainConfig(**kw)

t0 = time.time()
stage = max(iters // 4, 1)
scene = init
log_all = []
cur = init.copy()
# train in stages to report CD trajectory
done = 0
while done < iters:
    n = min(stage, iters - done)
    cfg2 = TrainConfig(**{**kw, "iterations": n})
    cur, log = train(tv, cur, cfg2)
    done += n
    rec = dbscan_filter(cur.positions, 0.3, 5)
    rep = evaluate_point_clouds(rec, gt, tau=0.6) if len(rec) > 3 else None
    disp = np.linalg.norm(cur.positions[:min(len(cur),n_init)] - init.positions[:min(len(cur),n_init)], axis=1) if len(cur)==n_init else None
    print(f"[{done}] loss={log.records[-1][1]:.5f} train_psnr={log.records[-1][2]:.2f} "
          f"n={len(cur)} kept={len(rec)} "
          + (f"CD={rep.chamfer:.3f} F1={rep.f1:.3f}" if rep else "CD=n/a")
          + (f" med_disp={np.median(disp):.2f}" if disp is not None else ""), flush=True)

ps = [psnr(render(cur, c), im, 1.0) for c, im in hv]
ssims = [ssim(render(cur, c), im, 1.0) for c, im in hv]
print("held-out psnr:", np.round(ps, 2), "mean", np.mean(ps))
print("held-out ssim:", np.round(ssims, 4), "mean", np.mean(ssims))
print(f"total {time.time()-t0:.0f}s")
