import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fisheyekit.camera_models import Intrinsics
from fisheyekit.heightmap import (
    FusionState,
    GridGeometryError,
    HeightGrid,
    build_heightmap,
    distance_to_points,
    fuse_cameras,
    project_to_grid,
    spatial_smooth,
    temporal_smooth,
)
from fisheyekit.synthetic import camera_to_vehicle, example_cameras, ground_distance, surround_rig


def small(h, count=None):
    h = np.asarray(h, dtype=float)
    c = np.where(np.isnan(h), 0, 1) if count is None else np.asarray(count)
    return HeightGrid(h, c.astype(np.int64), 0.05, h.shape[0] * 0.025)


class TestProjectToGrid:
    def test_default_geometry(self):
        g = HeightGrid.empty()
        assert g.n_cells == 400 and not g.known.any()

    def test_cell_assignment(self):
        g = project_to_grid([[0.51, -0.26, 1.2]])
        assert g.known.sum() == 1
        assert g.known[210, 194] and g.height[210, 194] == 1.2

    def test_max_rule(self):
        g = project_to_grid([[1.0, 1.0, 0.2], [1.01, 1.01, 0.7]])
        assert g.known.sum() == 1 and np.nanmax(g.height) == 0.7 and g.count.sum() == 2

    def test_empty(self):
        assert not project_to_grid(np.zeros((0, 3))).known.any()

    def test_out_of_range_and_nan_skipped(self):
        g = project_to_grid([[10.0, 0.0, 1.0], [-10.01, 0.0, 1.0], [np.nan, 0, 0], [0, 0, np.nan]])
        assert not g.known.any()

    @settings(max_examples=50, deadline=None)
    @given(st.integers(0, 2**32 - 1))
    def test_translation_consistent(self, seed):
        rng = np.random.default_rng(seed)
        # cell centres keep floor() away from its discontinuities
        cells = rng.integers(0, 399, size=(30, 2))
        pts = np.column_stack([(cells + 0.5) * 0.05 - 10, rng.uniform(-1, 1, 30)])
        a = project_to_grid(pts)
        b = project_to_grid(pts + [0.05, 0.0, 0.0])
        np.testing.assert_array_equal(b.known[1:], a.known[:-1])


class TestFusion:
    def test_union(self):
        a = small([[1.0, np.nan], [np.nan, np.nan]])
        b = small([[np.nan, np.nan], [np.nan, 2.0]])
        f = fuse_cameras([a, b])
        assert f.known.sum() == 2 and f.height[0, 0] == 1.0 and f.height[1, 1] == 2.0

    def test_count_weighted(self):
        a = small([[1.0, np.nan], [np.nan, np.nan]], [[1, 0], [0, 0]])
        b = small([[2.0, np.nan], [np.nan, np.nan]], [[3, 0], [0, 0]])
        assert fuse_cameras([a, b]).height[0, 0] == 1.75

    def test_idempotent(self):
        a = small(np.random.default_rng(0).uniform(size=(4, 4)))
        np.testing.assert_allclose(fuse_cameras([a, a]).height, a.height, rtol=1e-15)

    def test_geometry_mismatch(self):
        with pytest.raises(GridGeometryError):
            fuse_cameras([HeightGrid.empty(0.05, 1.0), HeightGrid.empty(0.1, 1.0)])
        with pytest.raises(GridGeometryError):
            fuse_cameras([])


class TestFilters:
    def test_constant_unchanged(self):
        g = small(np.full((6, 6), 0.3))
        np.testing.assert_array_equal(spatial_smooth(g).height, g.height)
        out = temporal_smooth(g, FusionState(g, 0.5))
        np.testing.assert_array_equal(out.height, g.height)

    def test_spike_removed(self):
        h = np.zeros((20, 20))
        h[10, 10] = 3.0
        assert spatial_smooth(small(h)).height[10, 10] == 0.0

    def test_temporal_blend(self):
        now, prev = small(np.full((4, 4), 2.0)), small(np.zeros((4, 4)))
        assert np.all(temporal_smooth(now, FusionState(prev, 0.5)).height == 1.0)

    def test_never_invents_known_cells(self):
        h = np.full((6, 6), np.nan)
        h[2:4, 2:4] = 1.0
        g = small(h)
        prev = small(np.ones((6, 6)))
        assert np.array_equal(spatial_smooth(g).known, g.known)
        out = temporal_smooth(g, FusionState(prev))
        assert np.array_equal(np.isfinite(out.height), g.known)

    def test_bad_blend(self):
        with pytest.raises(ValueError):
            FusionState(None, 0.0)


class TestFlatGround:
    @pytest.mark.parametrize("kind", ["rectilinear", "ucm"])
    def test_heights_near_zero(self, kind):
        if kind == "rectilinear":
            cam = Intrinsics("rectilinear", 320, 240, 159.5, 119.5, f=160.0)
        else:
            cam = example_cameras(320, 240)["ucm"]
        pts = [distance_to_points(ground_distance(c, mount), c, mount)
               for _, c, mount in surround_rig(cam)]
        g = build_heightmap(pts)
        k = g.known
        assert k.sum() > 1000
        assert (np.abs(g.height[k]) <= 0.05).mean() >= 0.99

    def test_ground_oracle(self):
        # camera 1 m up looking straight down: the centre ray hits ground at distance 1
        cam = Intrinsics("rectilinear", 11, 11, 5.0, 5.0, f=10.0)
        mount = camera_to_vehicle(0.0, math.pi / 2, (0.0, 0.0, 1.0))
        d = ground_distance(cam, mount)
        assert d[5, 5] == pytest.approx(1.0, abs=1e-12)
        assert d[5, 10] == pytest.approx(math.hypot(1.0, 0.5), abs=1e-12)

    def test_deterministic(self):
        cam = example_cameras(160, 120)["ucm"]
        pts = [distance_to_points(ground_distance(c, m), c, m) for _, c, m in surround_rig(cam)]
        assert build_heightmap(pts) == build_heightmap(pts)

    def test_no_cameras(self):
        with pytest.raises(GridGeometryError):
            build_heightmap([])
