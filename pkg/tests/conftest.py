import numpy as np
import pytest

from sarsplat import RadarConfig, Scene


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def small_config():
    """16x16 view that keeps scenes near the origin in-frame."""
    return RadarConfig(
        azimuth_deg=20.0, elevation_deg=40.0, altitude_m=2.0,
        range_res_m=0.5, azimuth_res_m=0.5, n_range=16, n_azimuth=16,
    )


def make_random_scene(rng, n, spread=2.5, dc_low=1.0, dc_high=3.0):
    """Scene with strongly positive DC phase so the clamp never engages."""
    q = rng.normal(size=(n, 4))
    q /= np.linalg.norm(q, axis=1, keepdims=True)
    sh = rng.normal(scale=0.1, size=(n, 16))
    sh[:, 0] = rng.uniform(dc_low, dc_high, size=n)
    return Scene(
        positions=rng.uniform(-spread, spread, size=(n, 3)),
        rotations=q,
        log_scales=rng.uniform(np.log(0.3), np.log(1.0), size=(n, 3)),
        sh_coeffs=sh,
        ke_raw=rng.uniform(-0.5, 1.0, size=(n, 2)),
    )


@pytest.fixture
def random_scene_factory():
    return make_random_scene
