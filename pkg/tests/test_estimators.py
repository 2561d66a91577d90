import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError
from sklearn.model_selection import GridSearchCV
from sklearn.pipeline import Pipeline

from fisheyekit.estimators import CameraGeometryTransformer, HeightMapFuser, RobustLossEstimator
from fisheyekit.geom_tensor import assemble_tensor
from fisheyekit.heightmap import distance_to_points
from fisheyekit.synthetic import example_cameras, ground_distance, surround_rig
from fisheyekit.validation import check_distance_map, check_image, check_points, check_same_shape


class TestCameraGeometryTransformer:
    def test_params_and_clone(self):
        t = CameraGeometryTransformer(out_width=32, out_height=24)
        assert t.get_params() == {"out_width": 32, "out_height": 24, "lut_step": 0.25}
        c = clone(t).set_params(out_width=16)
        assert c.out_width == 16 and t.out_width == 32

    def test_transform_matches_functional(self):
        cams = list(example_cameras(160, 120).values())
        out = CameraGeometryTransformer(40, 30).fit_transform(cams)
        assert out.shape == (len(cams), 6, 30, 40)
        for i, m in enumerate(cams):
            np.testing.assert_array_equal(out[i], assemble_tensor(m, 40, 30).data)

    def test_in_pipeline(self):
        pipe = Pipeline([("cgt", CameraGeometryTransformer(8, 6))])
        assert pipe.fit_transform([example_cameras(32, 24)["ucm"]]).shape == (1, 6, 6, 8)

    def test_not_fitted(self):
        with pytest.raises(NotFittedError):
            CameraGeometryTransformer().transform([])

    def test_rejects_non_intrinsics(self):
        with pytest.raises(TypeError):
            CameraGeometryTransformer(8, 6).fit().transform([1, 2])


class TestRobustLossEstimator:
    def test_fit_gaussian(self):
        r = np.random.default_rng(0).normal(0, 0.1, 20000)
        est = RobustLossEstimator().fit(r)
        assert (est.alpha_, est.scale_) == (2.0, 0.1)
        assert est.score(r) == pytest.approx(-est.nll_)

    def test_grid_search_cv(self):
        # score() makes the estimator usable in model selection over candidate grids
        r = np.random.default_rng(1).laplace(0, 0.1, (3000, 1))
        gs = GridSearchCV(RobustLossEstimator(), {"alphas": [(0.0,), (1.0,), (2.0,)]}, cv=3)
        gs.fit(r)
        assert gs.best_params_["alphas"] != (2.0,)

    def test_loss_uses_fit(self):
        est = RobustLossEstimator(alphas=(1.0,), scales=(1.0,)).fit([0.0, 1.0])
        assert est.loss(1.0) == pytest.approx(np.sqrt(2) - 1)

    def test_validation(self):
        with pytest.raises(ValueError):
            RobustLossEstimator().fit([])
        with pytest.raises(ValueError):
            RobustLossEstimator(alphas=(-1.0,)).fit([1.0])
        with pytest.raises(ValueError):
            RobustLossEstimator().fit([np.nan])


class TestHeightMapFuser:
    def test_frames(self):
        cam = example_cameras(160, 120)["ucm"]
        frame = [distance_to_points(ground_distance(c, m), c, m) for _, c, m in surround_rig(cam)]
        grids = HeightMapFuser().fit_transform([frame, frame])
        assert len(grids) == 2
        k = grids[1].known
        assert k.any() and np.all(np.abs(grids[1].height[k]) < 0.05)

    def test_params(self):
        f = clone(HeightMapFuser(cell_size=0.1, blend=0.3))
        assert f.get_params()["cell_size"] == 0.1 and f.get_params()["blend"] == 0.3
        with pytest.raises(ValueError):
            HeightMapFuser(blend=0).fit()


class TestValidation:
    def test_check_image(self):
        assert check_image([[0.5]]).shape == (1, 1)
        with pytest.raises(ValueError):
            check_image(np.zeros(3))
        with pytest.raises(ValueError):
            check_image([[np.nan]])

    def test_check_distance_map(self):
        m = example_cameras(4, 3)["ucm"]
        check_distance_map(np.full((3, 4), np.nan), m)
        with pytest.raises(ValueError):
            check_distance_map(np.zeros((3, 4)))
        with pytest.raises(ValueError):
            check_distance_map(np.ones((4, 3)), m)
        with pytest.raises(ValueError):
            check_distance_map(np.full((3, 4), np.inf))

    def test_shapes_and_points(self):
        with pytest.raises(ValueError):
            check_same_shape(np.zeros((2, 2)), np.zeros((2, 3)))
        assert check_points(np.zeros((2, 5, 3))).shape == (10, 3)
        with pytest.raises(ValueError):
            check_points(np.zeros((4, 2)))
