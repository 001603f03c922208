"""Scratch: forward-vs-reference and backward-vs-finite-differences checks."""
import numpy as np

from sarsplat import RadarConfig, Scene, render, render_forward, render_reference, backward


def random_scene(rng, n, spread=3.0):
    q = rng.normal(size=(n, 4))
    q /= np.linalg.norm(q, axis=1, keepdims=True)
    sh = rng.normal(scale=0.1, size=(n, 16))
    sh[:, 0] = rng.uniform(1.0, 3.0, size=n)  # strongly positive DC -> no clamping
    return Scene(
        positions=rng.uniform(-spread, spread, size=(n, 3)),
        rotations=q,
        log_scales=rng.uniform(np.log(0.3), np.log(1.0), size=(n, 3)),
        sh_coeffs=sh,
        ke_raw=rng.uniform(-0.5, 1.0, size=(n, 2)),
    )


def pack(scene):
    return np.concatenate([
        scene.positions.ravel(), scene.rotations.ravel(), scene.log_scales.ravel(),
        scene.sh_coeffs.ravel(), scene.ke_raw.ravel(),
    ])


def unpack(vec, n):
    o = 0
    pos = vec[o:o + 3 * n].reshape(n, 3); o += 3 * n
    rot = vec[o:o + 4 * n].reshape(n, 4); o += 4 * n
    ls = vec[o:o + 3 * n].reshape(n, 3); o += 3 * n
    sh = vec[o:o + 16 * n].reshape(n, 16); o += 16 * n
    ke = vec[o:o + 2 * n].reshape(n, 2); o += 2 * n
    return Scene(positions=pos, rotations=rot, log_scales=ls, sh_coeffs=sh, ke_raw=ke)


def grads_vec(g):
    return np.concatenate([
        g.positions.ravel(), g.rotations.ravel(), g.log_scales.ravel(),
        g.sh_coeffs.ravel(), g.ke_raw.ravel(),
    ])


rng = np.random.default_rng(0)
cfg = RadarConfig(azimuth_deg=20.0, elevation_deg=40.0, altitude_m=2.0,
                  range_res_m=0.5, azimuth_res_m=0.5, n_range=16, n_azimuth=16)

# 1) oracle equivalence
worst = 0.0
for trial in range(5):
    sc = random_scene(rng, 8)
    img1 = render(sc, cfg, cutoff=np.inf)
    img2 = render_reference(sc, cfg)
    err = np.max(np.abs(img1 - img2)) / max(1.0, img1.max())
    worst = max(worst, err)
print("oracle max rel err:", worst)

# 2) finite differences
sc = random_scene(rng, 5)
n = len(sc)


def loss_of(vec):
    s = unpack(vec, n)
    img = render(s, cfg, cutoff=np.inf)
    return 0.5 * float(np.sum(img ** 2))


fwd = render_forward(sc, cfg, cutoff=np.inf)
g = backward(fwd, fwd.image.copy())
ana = grads_vec(g)

theta = pack(sc)
num = np.zeros_like(theta)
h = 1e-4
for i in range(theta.size):
    tp = theta.copy(); tp[i] += h
    tm = theta.copy(); tm[i] -= h
    num[i] = (loss_of(tp) - loss_of(tm)) / (2 * h)

denom = np.maximum(np.maximum(np.abs(ana), np.abs(num)), 1e-8)
rel = np.abs(ana - num) / denom
print("FD max rel err:", rel.max())
sizes = {"pos": 3 * n, "rot": 4 * n, "logs": 3 * n, "sh": 16 * n, "ke": 2 * n}
o = 0
for name, s in sizes.items():
    print(f"  {name}: {rel[o:o+s].max():.3e}")
    o += s
