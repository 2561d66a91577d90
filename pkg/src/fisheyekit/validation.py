"""Input checks shared by the estimator wrappers and the CLI."""

import numpy as np

from .camera_models import Intrinsics


def check_image(img, name="image"):
    """Return ``img`` as a float array of shape (H, W) or (H, W, C)."""
    a = np.asarray(img, dtype=float)
    if a.ndim not in (2, 3) or a.shape[0] < 1 or a.shape[1] < 1:
        raise ValueError(f"{name} must be (H, W) or (H, W, C), got shape {a.shape}")
    if not np.isfinite(a).all():
        raise ValueError(f"{name} contains non-finite values")
    return a


def check_distance_map(dist, model: Intrinsics = None, name="distance map"):
    """Float (H, W) distances; NaN marks invalid pixels, everything else must be > 0."""
    d = np.asarray(dist, dtype=float)
    if d.ndim != 2:
        raise ValueError(f"{name} must be 2-D, got shape {d.shape}")
    finite = d[np.isfinite(d)]
    if np.any(finite <= 0):
        raise ValueError(f"{name} must be positive where defined")
    if np.any(np.isinf(d)):
        raise ValueError(f"{name} contains infinite distances")
    if model is not None and d.shape != (model.height, model.width):
        raise ValueError(f"{name} is {d.shape[::-1]} but the camera is {model.size}")
    return d


def check_same_shape(*arrays, names=None):
    shapes = [np.shape(a)[:2] for a in arrays]
    if len(set(shapes)) > 1:
        label = ", ".join(names) if names else "inputs"
        raise ValueError(f"{label} differ in spatial size: {shapes}")


def check_points(points, name="points"):
    p = np.asarray(points, dtype=float)
    if p.ndim < 1 or p.shape[-1] != 3:
        raise ValueError(f"{name} must have a trailing dimension of 3, got {p.shape}")
    return p.reshape(-1, 3)
