"""Camera geometry tensor: six per-pixel channels that encode intrinsics.

Channel order is fixed: ``cc_x, cc_y, a_x, a_y, nc_x, nc_y``. Arrays are
row-major ``(height, width)``; rows index ``v`` and columns index ``u``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .camera_models import (
    Intrinsics,
    NoRootError,
    RootLut,
    _inverse_masked,
    build_root_lut,
)

CHANNELS = ("cc_x", "cc_y", "a_x", "a_y", "nc_x", "nc_y")


def _resize_axis(arr: np.ndarray, n_out: int, axis: int) -> np.ndarray:
    n_in = arr.shape[axis]
    if n_out == n_in:
        return arr.copy()
    if n_out == 1:
        pos = np.zeros(1)
    else:
        pos = np.arange(n_out) * ((n_in - 1) / (n_out - 1))
    i0 = np.clip(np.floor(pos).astype(int), 0, n_in - 1)
    i1 = np.minimum(i0 + 1, n_in - 1)
    w = pos - i0
    shape = [1] * arr.ndim
    shape[axis] = n_out
    w = w.reshape(shape)
    return np.take(arr, i0, axis=axis) * (1 - w) + np.take(arr, i1, axis=axis) * w


def resize_bilinear(img: np.ndarray, out_h: int, out_w: int) -> np.ndarray:
    """Corner-aligned bilinear resize of a 2-D array."""
    if out_h < 1 or out_w < 1:
        raise ValueError("output size must be at least 1x1")
    return _resize_axis(_resize_axis(np.asarray(img, dtype=float), out_h, 0), out_w, 1)


def centered_coords(model: Intrinsics, out_w: int, out_h: int):
    """Principal-point-centred coordinate channels at ``out_h x out_w``.

    Built on the native ``(h + 1) x (w + 1)`` lattice ``0..w`` by ``0..h`` and
    bilinearly resized (corner aligned).
    """
    if out_w < 1 or out_h < 1:
        raise ValueError("output size must be at least 1x1")
    xs = np.arange(model.width + 1, dtype=float) - model.cx
    ys = np.arange(model.height + 1, dtype=float) - model.cy
    cc_x = np.broadcast_to(xs[None, :], (model.height + 1, model.width + 1))
    cc_y = np.broadcast_to(ys[:, None], (model.height + 1, model.width + 1))
    return resize_bilinear(cc_x, out_h, out_w), resize_bilinear(cc_y, out_h, out_w)


def incidence_maps(model: Intrinsics, cc_x, cc_y, lut: Optional[RootLut] = None,
                   lut_step: float = 0.25):
    """Signed horizontal and vertical incidence-angle maps.

    Each channel is the inverse radial map of ``|cc|`` with the sign of ``cc``
    carried over. The polynomial model goes through a root lookup table,
    built on demand with ``lut_step`` when ``lut`` is not supplied.
    """
    if model.model_kind == "polynomial" and lut is None:
        lut = build_root_lut(model, lut_step)

    def one(cc):
        cc = np.asarray(cc, dtype=float)
        r = np.abs(cc)
        if lut is not None:
            theta, ok = lut.lookup_masked(r)
        else:
            theta, ok = _inverse_masked(model, r)
        if not ok.all():
            raise NoRootError(
                f"|cc| up to {r.max():.6g} px exceeds the invertible radius of {model.model_kind}"
            )
        return np.copysign(theta, cc)

    return one(cc_x), one(cc_y)


def normalized_coords(out_w: int, out_h: int):
    """Coordinates spanning ``[-1, 1]`` linearly across columns and rows."""
    if out_w < 2 or out_h < 2:
        raise ValueError("normalized coordinates need at least 2x2 outputs")
    nx = np.linspace(-1.0, 1.0, out_w)
    ny = np.linspace(-1.0, 1.0, out_h)
    return (np.broadcast_to(nx[None, :], (out_h, out_w)).copy(),
            np.broadcast_to(ny[:, None], (out_h, out_w)).copy())


@dataclass(frozen=True)
class CameraGeometryTensor:
    """Six stacked channels, shape ``(6, height, width)``.

    Values are kept in float64; the binary export stores float32.
    """

    data: np.ndarray = field(repr=False)

    def __post_init__(self):
        if self.data.ndim != 3 or self.data.shape[0] != len(CHANNELS):
            raise ValueError("camera geometry tensor must have shape (6, H, W)")
        self.data.setflags(write=False)

    @property
    def height(self) -> int:
        return self.data.shape[1]

    @property
    def width(self) -> int:
        return self.data.shape[2]

    def channel(self, name: str) -> np.ndarray:
        return self.data[CHANNELS.index(name)]

    cc_x = property(lambda self: self.channel("cc_x"))
    cc_y = property(lambda self: self.channel("cc_y"))
    a_x = property(lambda self: self.channel("a_x"))
    a_y = property(lambda self: self.channel("a_y"))
    nc_x = property(lambda self: self.channel("nc_x"))
    nc_y = property(lambda self: self.channel("nc_y"))

    def __eq__(self, other):
        return isinstance(other, CameraGeometryTensor) and np.array_equal(self.data, other.data)

    __hash__ = None


def assemble_tensor(model: Intrinsics, out_w: int, out_h: int,
                    lut: Optional[RootLut] = None, lut_step: float = 0.25) -> CameraGeometryTensor:
    cc_x, cc_y = centered_coords(model, out_w, out_h)
    a_x, a_y = incidence_maps(model, cc_x, cc_y, lut=lut, lut_step=lut_step)
    nc_x, nc_y = normalized_coords(out_w, out_h)
    return CameraGeometryTensor(np.stack([cc_x, cc_y, a_x, a_y, nc_x, nc_y]))
