import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from sarsplat import GaussianSplatSAR, RadarConfig, render
from sarsplat.dataset import ViewDataset
from sarsplat.validation import InvalidParameterError
from tests.test_forward import scene_at


def toy_views(n_az=6, size=24):
    target = scene_at([[0.5, 0.0, 0.5], [-0.5, 0.5, 1.0]], phase=1.0, ke=1.0, scale=0.4)
    views = []
    for az in np.linspace(0, 360, n_az, endpoint=False):
        cfg = RadarConfig(azimuth_deg=az, elevation_deg=45.0, altitude_m=2.0,
                          range_res_m=0.5, azimuth_res_m=0.5, n_range=size, n_azimuth=size)
        views.append((cfg, render(target, cfg)))
    return views


class TestEstimatorContract:
    def test_get_set_params_roundtrip(self):
        est = GaussianSplatSAR(n_init_points=100, iterations=10, seed=3)
        params = est.get_params()
        assert params["n_init_points"] == 100
        est2 = GaussianSplatSAR().set_params(**params)
        assert est2.get_params() == params

    def test_clone(self):
        est = GaussianSplatSAR(n_init_points=50, train_overrides={"lr_sh": 1e-3})
        cloned = clone(est)
        assert cloned.get_params() == est.get_params()

    def test_unfitted_predict_raises(self):
        est = GaussianSplatSAR()
        with pytest.raises(NotFittedError):
            est.predict(RadarConfig(azimuth_deg=0, elevation_deg=45))

    def test_fit_predict_score(self):
        views = toy_views()
        est = GaussianSplatSAR(n_init_points=40, iterations=60, seed=0,
                               train_overrides={"lambda_ssim": 0.0})
        out = est.fit(views)
        assert out is est
        assert len(est.scene_) == 40
        img = est.predict(views[0][0])
        assert img.shape == (24, 24)
        imgs = est.predict([cfg for cfg, _ in views[:2]])
        assert len(imgs) == 2
        assert np.isfinite(est.score(views))

    def test_fit_with_dataset_splits(self):
        views = toy_views()
        ds = ViewDataset(views=views, splits=["train"] * 4 + ["test"] * 2)
        est = GaussianSplatSAR(n_init_points=30, iterations=40, seed=0)
        est.fit(ds)
        assert est.n_views_ == 4
        score = est.score(ds)
        assert np.isfinite(score)

    def test_bad_views_rejected(self):
        est = GaussianSplatSAR(n_init_points=10, iterations=5)
        with pytest.raises(InvalidParameterError):
            est.fit([("not a config", np.zeros((4, 4)))])

    def test_extract_point_cloud(self):
        views = toy_views()
        est = GaussianSplatSAR(n_init_points=60, iterations=30, seed=0)
        est.fit(views)
        pts, weights = est.extract_point_cloud(eps=5.0, min_pts=2)
        assert pts.shape[1] == 3
        assert len(pts) == len(weights)

    def test_seed_reproducibility(self):
        views = toy_views()
        a = GaussianSplatSAR(n_init_points=25, iterations=25, seed=9).fit(views)
        b = GaussianSplatSAR(n_init_points=25, iterations=25, seed=9).fit(views)
        assert np.array_equal(a.scene_.positions, b.scene_.positions)
