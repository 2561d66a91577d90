import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.spatial.transform import Rotation

from fisheyekit.camera_models import Intrinsics
from fisheyekit.synthetic import example_cameras, plane_camera, plane_pair, render_plane
from fisheyekit.warp import (
    Pose,
    SampleGrid,
    bilinear_sample,
    ego_mask,
    lift,
    nearest_sample,
    pixel_grid,
    pose_from_matrix,
    reproject,
    warp_image,
)

quats = st.lists(st.floats(-1, 1), min_size=4, max_size=4).filter(
    lambda q: np.linalg.norm(q) > 0.1).map(lambda q: tuple(np.asarray(q) / np.linalg.norm(q)))
vecs = st.lists(st.floats(-5, 5), min_size=3, max_size=3).map(tuple)


class TestPose:
    def test_rejects_non_unit_quaternion(self):
        with pytest.raises(ValueError):
            Pose((1.0, 1e-4, 0.0, 0.0))  # norm off by 5e-9

    def test_accepts_within_tolerance(self):
        Pose((1.0 + 5e-10, 0.0, 0.0, 0.0))

    @settings(max_examples=100, deadline=None)
    @given(quats, vecs)
    def test_matches_scipy_rotation(self, q, t):
        p = Pose(q, t)
        w, x, y, z = p.q
        ref = Rotation.from_quat([x, y, z, w]).as_matrix()
        np.testing.assert_allclose(p.rotation_matrix(), ref, atol=1e-12)

    @settings(max_examples=100, deadline=None)
    @given(quats, vecs, quats, vecs)
    def test_compose_and_inverse(self, q1, t1, q2, t2):
        a, b = Pose(q1, t1), Pose(q2, t2)
        pts = np.random.default_rng(0).normal(size=(5, 3))
        np.testing.assert_allclose((b @ a).apply(pts), b.apply(a.apply(pts)), atol=1e-10)
        np.testing.assert_allclose(a.inverse().apply(a.apply(pts)), pts, atol=1e-10)

    def test_from_matrix(self):
        rm = Rotation.from_euler("zyx", [0.3, -0.2, 0.1]).as_matrix()
        p = pose_from_matrix(rm, (1, 2, 3))
        np.testing.assert_allclose(p.rotation_matrix(), rm, atol=1e-14)
        assert p.t == (1.0, 2.0, 3.0)


class TestLift:
    def test_principal_point(self):
        m = Intrinsics("rectilinear", 5, 5, 2.0, 2.0, f=3.0)
        pts, ok = lift(np.full((5, 5), 5.0), m)
        np.testing.assert_allclose(pts[2, 2], [0.0, 0.0, 5.0])
        assert ok.all()

    def test_rectilinear_unit_pixel(self):
        m = Intrinsics("rectilinear", 3, 3, 1.0, 1.0, f=1.0)
        pts, _ = lift(np.full((3, 3), math.sqrt(2)), m)
        np.testing.assert_allclose(pts[1, 2], [1.0, 0.0, 1.0], atol=1e-15)

    def test_norm_equals_distance(self):
        m = example_cameras(80, 60)["double_sphere"]
        d = np.random.default_rng(2).uniform(0.5, 40, size=(60, 80))
        pts, ok = lift(d, m)
        rel = np.abs(np.linalg.norm(pts[ok], axis=-1) - d[ok]) / d[ok]
        assert rel.max() < 1e-9

    def test_invalid_distances_masked(self):
        m = plane_camera(8, 6)
        d = np.ones((6, 8))
        d[0, 0], d[1, 1] = np.nan, -1.0
        _, ok = lift(d, m)
        assert not ok[0, 0] and not ok[1, 1] and ok.sum() == 46

    def test_shape_mismatch(self):
        with pytest.raises(ValueError):
            lift(np.ones((3, 3)), plane_camera(8, 6))


class TestReproject:
    def test_identity(self):
        m = example_cameras(64, 48)["eucm"]
        pts, ok = lift(np.full((48, 64), 3.0), m)
        g = reproject(pts, Pose(), m, ok)
        assert np.abs(g.coords[g.valid] - pixel_grid(48, 64)[g.valid]).max() < 1e-6

    def test_z_translation_halves_offsets(self):
        m = plane_camera(41, 31, f=30.0)
        _, dist = render_plane(m, 4.0)
        pts, ok = lift(dist, m)
        g = reproject(pts, Pose(t=(0.0, 0.0, 4.0)), m, ok)
        c = np.array([m.cx, m.cy])
        np.testing.assert_allclose(g.coords - c, (pixel_grid(31, 41) - c) / 2, atol=1e-9)

    def test_half_turn_invalidates(self):
        m = plane_camera(20, 16)
        pts, ok = lift(np.full((16, 20), 2.0), m)
        g = reproject(pts, Pose.from_axis_angle((0, 1, 0), math.pi), m, ok)
        assert not g.valid.any()


class TestSampling:
    def test_integer_identity_exact(self):
        img = np.random.default_rng(3).uniform(size=(9, 7, 3))
        np.testing.assert_array_equal(bilinear_sample(img, SampleGrid.identity(9, 7)), img)

    def test_half_pixel_ramp(self):
        img = np.tile(np.arange(6.0) ** 2, (4, 1))
        g = SampleGrid.identity(4, 6)
        coords = g.coords.copy()
        coords[..., 0] += 0.5
        out = bilinear_sample(img, SampleGrid(coords, g.valid))
        np.testing.assert_allclose(out[:, :5], (img[:, :5] + img[:, 1:]) / 2, atol=1e-15)
        assert np.all(out[:, 5] == 0)

    def test_all_invalid(self):
        g = SampleGrid.identity(4, 5)
        bad = SampleGrid(g.coords, np.zeros((4, 5), dtype=bool))
        assert not bilinear_sample(np.ones((4, 5)), bad).any()
        assert not ego_mask(bad, 5, 4).any()

    def test_identity_mask_all_ones(self):
        assert ego_mask(SampleGrid.identity(4, 5), 5, 4).all()

    def test_no_clamping(self):
        g = SampleGrid.identity(3, 3)
        c = g.coords.copy()
        c[0, 0] = (-0.25, 0.0)
        out = bilinear_sample(np.ones((3, 3)), SampleGrid(c, g.valid))
        assert out[0, 0] == 0.0 and ego_mask(SampleGrid(c, g.valid), 3, 3)[0, 0] == 0

    def test_nearest_labels(self):
        lab = np.arange(12, dtype=np.uint8).reshape(3, 4)
        g = SampleGrid.identity(3, 4)
        c = g.coords + 0.4
        out = nearest_sample(lab, SampleGrid(c, g.valid), fill_value=255)
        np.testing.assert_array_equal(out[:2, :3], lab[:2, :3])
        assert out[2, 0] == 255 and out[0, 3] == 255


class TestWarpImage:
    def test_identity_exact(self):
        model, tgt, _, dist, _ = plane_pair()
        rec, mask, _ = warp_image(tgt, dist, Pose(), model)
        assert mask.all()
        np.testing.assert_array_equal(rec, tgt)

    def test_large_translation_empties_mask(self):
        model, tgt, _, dist, _ = plane_pair()
        _, mask, _ = warp_image(tgt, dist, Pose(t=(100.0, 0.0, 0.0)), model)
        assert not mask.any()

    def test_mask_monotone_in_translation(self):
        model, tgt, _, dist, _ = plane_pair()
        counts = [warp_image(tgt, dist, Pose(t=(x, 0.0, 0.0)), model)[1].sum()
                  for x in np.linspace(0, 6, 13)]
        assert all(a >= b for a, b in zip(counts, counts[1:]))
        assert counts[0] == tgt.size and counts[-1] < counts[0]

    def test_reconstruction_matches_render(self):
        model, tgt, src, dist, pose = plane_pair()
        rec, mask, _ = warp_image(src, dist, pose, model)
        m = mask.astype(bool)
        assert m.mean() > 0.5
        assert np.abs(rec[m] - tgt[m]).mean() < 0.02

    def test_composition_consistency(self):
        model, _, _, dist, _ = plane_pair()
        p1 = Pose.from_axis_angle((0, 1, 0), 0.03, (0.2, 0.0, 0.1))
        p2 = Pose.from_axis_angle((1, 0, 0), -0.02, (-0.1, 0.05, 0.0))
        src, _ = render_plane(model, 5.0, (p2 @ p1).inverse())
        direct, m_direct, _ = warp_image(src, dist, p2 @ p1, model)
        pts, ok = lift(dist, model)
        staged = reproject(p1.apply(pts), p2, model, ok)
        two_step = bilinear_sample(src, staged)
        m = m_direct.astype(bool) & ego_mask(staged, model.width, model.height).astype(bool)
        assert np.abs(direct[m] - two_step[m]).max() < 1e-3

    def test_grid_reused_for_distance(self):
        model, _, src, dist, pose = plane_pair()
        _, mask, grid = warp_image(src, dist, pose, model)
        warped = bilinear_sample(dist, grid)
        assert np.all(warped[mask.astype(bool)] > 0)
