"""Analytic scenes with known geometry, used by the self-check and the tests."""

from __future__ import annotations

import math
from typing import Dict, List, Tuple

import numpy as np

from .camera_models import Intrinsics, unproject_masked
from .warp import Pose, pixel_grid, pose_from_matrix

# coefficients of a typical 190 degree automotive fisheye, pixels per radian^k
FISHEYE_POLY = (339.749, -31.988, 48.275, -7.201)


def example_cameras(width: int = 1280, height: int = 966) -> Dict[str, Intrinsics]:
    """One camera per supported model, all sized ``width x height``."""
    cx, cy = width / 2 - 0.5, height / 2 + 0.25
    return {
        "polynomial": Intrinsics("polynomial", width, height, cx, cy, a=FISHEYE_POLY),
        "ucm": Intrinsics("ucm", width, height, cx, cy, f=320.0, xi=0.9),
        "eucm": Intrinsics("eucm", width, height, cx, cy, f=330.0, alpha_m=0.6, beta_m=1.1),
        "rectilinear": Intrinsics("rectilinear", width, height, cx, cy, f=500.0),
        "stereographic": Intrinsics("stereographic", width, height, cx, cy, f=300.0),
        "double_sphere": Intrinsics("double_sphere", width, height, cx, cy,
                                    f=300.0, xi=-0.2, alpha_m=0.6),
    }


def random_valid_pixels(model: Intrinsics, n: int, rng: np.random.Generator) -> np.ndarray:
    """``n`` uniformly drawn pixels that unproject and reproject inside the image."""
    out = []
    have = 0
    while have < n:
        q = rng.uniform([0, 0], [model.width, model.height], size=(2 * n, 2))
        _, ok = unproject_masked(model, q)
        q = q[ok]
        out.append(q)
        have += len(q)
    return np.concatenate(out)[:n]


# -- textured plane -------------------------------------------------------------------

def plane_texture(x, y):
    return (0.5 + 0.22 * np.sin(2 * np.pi * x / 0.7) * np.cos(2 * np.pi * y / 0.9)
            + 0.18 * np.sin(2 * np.pi * (x + 0.6 * y) / 0.45))


def plane_camera(width: int = 96, height: int = 72, f: float = 70.0) -> Intrinsics:
    return Intrinsics("rectilinear", width, height, (width - 1) / 2, (height - 1) / 2, f=f)


def render_plane(model: Intrinsics, depth: float, cam_in_target: Pose = Pose()):
    """Image and distance map of the plane ``Z = depth`` (target frame).

    ``cam_in_target`` maps this camera's frame into the target frame.
    Returns ``(image, distance)``; pixels whose rays miss the plane are NaN in
    the distance map and 0 in the image.
    """
    rays, ok = unproject_masked(model, pixel_grid(model.height, model.width))
    d = cam_in_target.rotate(rays)
    o = np.asarray(cam_in_target.t)
    with np.errstate(divide="ignore", invalid="ignore"):
        s = (depth - o[2]) / d[..., 2]
    ok &= np.isfinite(s) & (s > 0)
    p = o + d * np.where(ok, s, 0.0)[..., None]
    img = np.where(ok, plane_texture(p[..., 0], p[..., 1]), 0.0)
    return img, np.where(ok, s, np.nan)


def plane_pair(translation=(0.45, 0.05, -0.2), depth: float = 5.0, model: Intrinsics = None):
    """Target and source views of a fronto-parallel plane.

    Returns ``(model, target_img, source_img, target_dist, pose)`` where
    ``pose`` maps target-frame points into the source frame.
    """
    model = model or plane_camera()
    pose = Pose(t=tuple(-np.asarray(translation, dtype=float)))
    tgt, dist = render_plane(model, depth)
    src, _ = render_plane(model, depth, pose.inverse())
    return model, tgt, src, dist, pose


# -- ground plane rig -----------------------------------------------------------------

def camera_to_vehicle(yaw: float, pitch: float, position) -> Pose:
    """Mount pose for a camera looking along ``yaw`` and tilted ``pitch`` down.

    Camera frame: x right, y down, z forward. Vehicle frame: x forward,
    y left, z up.
    """
    fwd = np.array([math.cos(pitch), 0.0, -math.sin(pitch)])
    right = np.array([0.0, -1.0, 0.0])
    down = np.cross(fwd, right)
    base = np.stack([right, down, fwd], axis=1)
    cz, sz = math.cos(yaw), math.sin(yaw)
    yaw_m = np.array([[cz, -sz, 0.0], [sz, cz, 0.0], [0.0, 0.0, 1.0]])
    return pose_from_matrix(yaw_m @ base, tuple(position))


def surround_rig(model: Intrinsics, mount_height: float = 1.0,
                 pitch: float = math.radians(30)) -> List[Tuple[str, Intrinsics, Pose]]:
    """Four cameras (front, left, rear, right) on a 4 m x 2 m vehicle."""
    mounts = [("front", 0.0, (2.0, 0.0)), ("left", math.pi / 2, (0.0, 1.0)),
              ("rear", math.pi, (-2.0, 0.0)), ("right", -math.pi / 2, (0.0, -1.0))]
    return [(name, model, camera_to_vehicle(yaw, pitch, (x, y, mount_height)))
            for name, yaw, (x, y) in mounts]


def ground_distance(model: Intrinsics, cam_to_vehicle: Pose, ground_z: float = 0.0) -> np.ndarray:
    """Distance map of the plane ``z = ground_z``; rays that miss it are NaN."""
    rays, ok = unproject_masked(model, pixel_grid(model.height, model.width))
    d = cam_to_vehicle.rotate(rays)
    h = cam_to_vehicle.t[2] - ground_z
    with np.errstate(divide="ignore", invalid="ignore"):
        s = -h / d[..., 2]
    ok &= (d[..., 2] < 0) & np.isfinite(s)
    return np.where(ok, s, np.nan)
