"""Distance-driven view synthesis.

A target pixel is lifted to 3-D along its unit ray scaled by the predicted
Euclidean distance, moved into the source camera with a rigid :class:`Pose`,
and projected back to continuous source coordinates. Images are then sampled
bilinearly and label maps by nearest neighbour. Out-of-bounds samples are
zero-filled and excluded by the ego-mask; nothing is clamped.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Tuple

import numpy as np

from .camera_models import Intrinsics, RootLut, _project_unchecked, unproject_masked

QUAT_TOL = 1e-9
# continuous coordinates this close to an integer are treated as that integer
SNAP_TOL = 1e-9


@dataclass(frozen=True)
class Pose:
    """Rigid transform ``p_src = R(q) p_tgt + t``.

    ``q`` is a unit quaternion ``(w, x, y, z)``; ``t`` is in meters.
    """

    q: Tuple[float, float, float, float] = (1.0, 0.0, 0.0, 0.0)
    t: Tuple[float, float, float] = (0.0, 0.0, 0.0)

    def __post_init__(self):
        q = np.asarray(self.q, dtype=float)
        t = np.asarray(self.t, dtype=float)
        if q.shape != (4,) or t.shape != (3,):
            raise ValueError("pose needs a 4-vector quaternion and a 3-vector translation")
        n = np.linalg.norm(q)
        if abs(n - 1.0) > QUAT_TOL:
            raise ValueError(f"quaternion norm {n!r} deviates from 1 by more than {QUAT_TOL}")
        object.__setattr__(self, "q", tuple(float(v) for v in q / n))
        object.__setattr__(self, "t", tuple(float(v) for v in t))

    @classmethod
    def identity(cls) -> "Pose":
        return cls()

    @classmethod
    def from_axis_angle(cls, axis, angle: float, t=(0.0, 0.0, 0.0)) -> "Pose":
        axis = np.asarray(axis, dtype=float)
        axis = axis / np.linalg.norm(axis)
        s = np.sin(angle / 2)
        return cls((np.cos(angle / 2), *(axis * s)), t)

    def rotate(self, points) -> np.ndarray:
        """Rotate (..., 3) vectors by quaternion conjugation ``q v q*``."""
        p = np.asarray(points, dtype=float)
        w = self.q[0]
        u = np.asarray(self.q[1:])
        uv = np.cross(u, p)
        return p + 2.0 * (w * uv + np.cross(u, uv))

    def apply(self, points) -> np.ndarray:
        return self.rotate(points) + np.asarray(self.t)

    def rotation_matrix(self) -> np.ndarray:
        return self.rotate(np.eye(3)).T

    def inverse(self) -> "Pose":
        w, x, y, z = self.q
        conj = Pose((w, -x, -y, -z))
        return Pose(conj.q, tuple(-conj.rotate(np.asarray(self.t))))

    def compose(self, first: "Pose") -> "Pose":
        """``self o first``: apply ``first``, then ``self``."""
        w1, x1, y1, z1 = self.q
        w2, x2, y2, z2 = first.q
        q = np.array([
            w1 * w2 - x1 * x2 - y1 * y2 - z1 * z2,
            w1 * x2 + x1 * w2 + y1 * z2 - z1 * y2,
            w1 * y2 - x1 * z2 + y1 * w2 + z1 * x2,
            w1 * z2 + x1 * y2 - y1 * x2 + z1 * w2,
        ])
        return Pose(tuple(q / np.linalg.norm(q)), tuple(self.apply(np.asarray(first.t))))

    __matmul__ = compose


@dataclass(frozen=True)
class SampleGrid:
    """Continuous source coordinates per target pixel plus validity.

    ``coords[..., 0]`` is ``u`` (column), ``coords[..., 1]`` is ``v`` (row).
    """

    coords: np.ndarray = field(repr=False)
    valid: np.ndarray = field(repr=False)

    @property
    def shape(self):
        return self.valid.shape

    @classmethod
    def identity(cls, height: int, width: int) -> "SampleGrid":
        v, u = np.mgrid[0:height, 0:width].astype(float)
        return cls(np.stack([u, v], axis=-1), np.ones((height, width), dtype=bool))


def pixel_grid(height: int, width: int) -> np.ndarray:
    v, u = np.mgrid[0:height, 0:width].astype(float)
    return np.stack([u, v], axis=-1)


def lift(dist, model: Intrinsics, lut: Optional[RootLut] = None):
    """Back-project a distance map to a per-pixel point cloud.

    Returns
    -------
    points : ndarray (H, W, 3)
        ``unit_ray * distance``; NaN where the pixel cannot be unprojected.
    valid : ndarray of bool (H, W)
    """
    d = np.asarray(dist, dtype=float)
    if d.shape != (model.height, model.width):
        raise ValueError(
            f"distance map shape {d.shape} does not match camera {(model.height, model.width)}"
        )
    rays, ok = unproject_masked(model, pixel_grid(*d.shape), lut=lut)
    ok &= np.isfinite(d) & (d > 0)
    return rays * d[..., None], ok


def reproject(points, pose: Pose, model: Intrinsics, valid=None) -> SampleGrid:
    """Transform points into the source camera and project them."""
    p = np.asarray(points, dtype=float)
    ok = np.isfinite(p).all(axis=-1)
    if valid is not None:
        ok &= np.asarray(valid, dtype=bool)
    q = pose.apply(np.where(ok[..., None], p, 0.0))
    coords, vis = _project_unchecked(model, q[..., 0], q[..., 1], q[..., 2])
    return SampleGrid(coords, vis & ok)


def _snap(c: np.ndarray) -> np.ndarray:
    r = np.round(c)
    return np.where(np.abs(c - r) <= SNAP_TOL, r, c)


def ego_mask(grid: SampleGrid, src_w: int, src_h: int) -> np.ndarray:
    """1 where the grid is valid and inside ``[0, w-1] x [0, h-1]``, else 0."""
    with np.errstate(invalid="ignore"):
        c = _snap(grid.coords)
        u, v = c[..., 0], c[..., 1]
        inside = (u >= 0) & (u <= src_w - 1) & (v >= 0) & (v <= src_h - 1)
    return (grid.valid & inside).astype(np.uint8)


def bilinear_sample(src, grid: SampleGrid) -> np.ndarray:
    """Bilinear resampling of ``src`` (H, W) or (H, W, C) at ``grid``.

    Invalid or out-of-bounds entries are 0.
    """
    img = np.asarray(src, dtype=float)
    h, w = img.shape[:2]
    m = ego_mask(grid, w, h).astype(bool)
    c = np.where(m[..., None], _snap(grid.coords), 0.0)
    u, v = c[..., 0], c[..., 1]
    u0 = np.floor(u).astype(int)
    v0 = np.floor(v).astype(int)
    fu = u - u0
    fv = v - v0
    u1 = np.minimum(u0 + 1, w - 1)
    v1 = np.minimum(v0 + 1, h - 1)
    if img.ndim == 3:
        fu, fv, mm = fu[..., None], fv[..., None], m[..., None]
    else:
        mm = m
    out = ((1 - fu) * (1 - fv) * img[v0, u0] + fu * (1 - fv) * img[v0, u1]
           + (1 - fu) * fv * img[v1, u0] + fu * fv * img[v1, u1])
    return np.where(mm, out, 0.0)


def nearest_sample(labels, grid: SampleGrid, fill_value: int = 0) -> np.ndarray:
    """Nearest-neighbour resampling of an integer label map.

    Entries outside the ego-mask receive ``fill_value``.
    """
    lab = np.asarray(labels)
    h, w = lab.shape[:2]
    m = ego_mask(grid, w, h).astype(bool)
    c = np.where(m[..., None], grid.coords, 0.0)
    u = np.clip(np.floor(c[..., 0] + 0.5).astype(int), 0, w - 1)
    v = np.clip(np.floor(c[..., 1] + 0.5).astype(int), 0, h - 1)
    return np.where(m, lab[v, u], np.asarray(fill_value, dtype=lab.dtype))


def warp_image(src, dist, pose: Pose, target_model: Intrinsics,
               source_model: Optional[Intrinsics] = None, lut: Optional[RootLut] = None):
    """Reconstruct the target view from ``src``.

    Returns ``(reconstruction, ego_mask, grid)``; the grid is returned so the
    same coordinates can warp distance and label maps.
    """
    source_model = source_model or target_model
    pts, ok = lift(dist, target_model, lut=lut)
    grid = reproject(pts, pose, source_model, valid=ok)
    img = np.asarray(src)
    mask = ego_mask(grid, img.shape[1], img.shape[0])
    return bilinear_sample(img, grid), mask, grid


def pose_from_matrix(rotation, t=(0.0, 0.0, 0.0)) -> Pose:
    """Pose from a 3x3 rotation matrix and translation."""
    from scipy.spatial.transform import Rotation

    x, y, z, w = Rotation.from_matrix(np.asarray(rotation, dtype=float)).as_quat()
    q = np.array([w, x, y, z])
    return Pose(tuple(q / np.linalg.norm(q)), tuple(t))
