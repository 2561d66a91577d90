"""Radial distortion camera models.

Six models are supported. Each one maps the incidence angle ``theta`` of a
ray (angle to the optical axis, radians) to a radial distance ``rho`` in
pixels from the principal point:

==============  ==============================================================
polynomial      a1*t + a2*t^2 + a3*t^3 + a4*t^4
ucm             f*sin(t) / (cos(t) + xi)
eucm            f*sin(t) / (cos(t) + alpha*(sqrt(beta*sin(t)^2 + cos(t)^2) - cos(t)))
rectilinear     f*tan(t)
stereographic   2*f*tan(t/2)
double_sphere   f*sin(t) / (alpha*sqrt(sin(t)^2 + (xi + cos(t))^2) + (1 - alpha)*(xi + cos(t)))
==============  ==============================================================

The polynomial model is inverted numerically (safeguarded Newton) or through a
precomputed :class:`RootLut`; every other model has a closed-form inverse.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Optional, Tuple

import numpy as np

MODEL_KINDS = ("polynomial", "ucm", "eucm", "rectilinear", "stereographic", "double_sphere")

DEFAULT_POLY_HALF_FOV_DEG = 97.5
NEWTON_MAX_ITER = 30
NEWTON_TOL = 1e-10
# slack on the image-bounds test so round-off at the border does not flip validity
BOUNDS_TOL = 1e-9


class CameraModelError(ValueError):
    """Base class for camera model failures."""


class DomainError(CameraModelError):
    """An incidence angle lies outside the model's valid domain."""


class NoRootError(CameraModelError):
    """A radius has no preimage on the model's domain."""


class NonMonotoneError(CameraModelError):
    """The polynomial is not strictly increasing on its declared domain."""


class DegeneratePointError(CameraModelError):
    """Projection of the zero vector."""


@dataclass(frozen=True)
class Intrinsics:
    """Intrinsic parameters of a single camera.

    Parameters
    ----------
    model_kind : str
        One of ``MODEL_KINDS``.
    width, height : int
        Sensor size in pixels.
    cx, cy : float
        Principal point in pixels. ``(0, 0)`` is the centre of the top-left
        pixel.
    f : float
        Focal length in pixels. Unused by the polynomial model.
    a : tuple of 4 floats
        Polynomial coefficients in pixels per radian^k.
    xi, alpha_m, beta_m : float
        UCM / eUCM / double-sphere shape parameters.
    fov_deg : float, optional
        Full field of view. Caps the incidence domain at ``fov_deg / 2``. For
        the polynomial model it defaults to twice ``DEFAULT_POLY_HALF_FOV_DEG``.
    """

    model_kind: str
    width: int
    height: int
    cx: float
    cy: float
    f: float = 0.0
    a: Tuple[float, float, float, float] = (0.0, 0.0, 0.0, 0.0)
    xi: float = 0.0
    alpha_m: float = 0.0
    beta_m: float = 1.0
    fov_deg: Optional[float] = None

    def __post_init__(self):
        if self.model_kind not in MODEL_KINDS:
            raise CameraModelError(f"unknown model kind {self.model_kind!r}")
        if self.width < 1 or self.height < 1:
            raise CameraModelError("width and height must be >= 1")
        if not (0 <= self.cx <= self.width and 0 <= self.cy <= self.height):
            raise CameraModelError("principal point outside the sensor")
        object.__setattr__(self, "a", tuple(float(v) for v in self.a))
        if len(self.a) != 4:
            raise CameraModelError("polynomial model needs exactly four coefficients")
        if self.model_kind != "polynomial" and not self.f > 0:
            raise CameraModelError("focal length must be positive")
        if self.fov_deg is not None and not 0 < self.fov_deg <= 360:
            raise CameraModelError("fov_deg must lie in (0, 360]")
        if self.model_kind == "polynomial":
            _check_polynomial_monotone(self.a, self.theta_max)

    @property
    def size(self) -> Tuple[int, int]:
        return self.width, self.height

    @cached_property
    def _domain(self) -> Tuple[float, bool]:
        theta_max, open_end = _natural_domain(self)
        if self.fov_deg is not None:
            half = math.radians(self.fov_deg) / 2
            if half < theta_max or (half == theta_max and not open_end):
                theta_max, open_end = half, False
        elif self.model_kind == "polynomial":
            theta_max, open_end = math.radians(DEFAULT_POLY_HALF_FOV_DEG), False
        return theta_max, open_end

    @property
    def theta_max(self) -> float:
        """Upper end of the incidence domain (radians)."""
        return self._domain[0]

    @property
    def theta_max_open(self) -> bool:
        """True when ``theta_max`` itself is excluded from the domain."""
        return self._domain[1]

    @cached_property
    def rho_max(self) -> float:
        """Largest radius (pixels) reachable on the domain; ``inf`` if unbounded."""
        if self.theta_max_open:
            with np.errstate(all="ignore"):
                r = float(_rho(self, np.float64(self.theta_max)))
            return r if np.isfinite(r) and r > 0 else math.inf
        return float(_rho(self, np.float64(self.theta_max)))

    def in_domain(self, theta) -> np.ndarray:
        theta = np.asarray(theta, dtype=float)
        upper = theta < self.theta_max if self.theta_max_open else theta <= self.theta_max
        return (theta >= 0) & upper


def _natural_domain(m: Intrinsics) -> Tuple[float, bool]:
    kind = m.model_kind
    if kind == "polynomial":
        return math.pi, False
    if kind == "rectilinear":
        return math.pi / 2, True
    if kind == "stereographic":
        return math.pi, True
    if kind == "ucm":
        # denominator cos+xi > 0 and derivative sign 1 + xi*cos > 0
        bounds = [math.pi]
        if m.xi < 1:
            bounds.append(math.acos(-m.xi) if m.xi > -1 else 0.0)
        if m.xi > 1:
            bounds.append(math.acos(-1 / m.xi))
        return min(bounds), True
    return _numeric_domain(m), True


def _numeric_domain(m: Intrinsics) -> float:
    """Largest theta such that rho stays finite and strictly increasing on [0, theta)."""

    def ok(t):
        den = _denominator(m, t)
        h = 1e-7
        with np.errstate(all="ignore"):
            d = _rho(m, t + h) - _rho(m, np.maximum(t - h, 0.0))
        return (den > 0) & (d > 0)

    grid = np.linspace(0.0, math.pi, 20001)[1:]
    good = ok(grid)
    if good.all():
        return math.pi
    k = int(np.argmin(good))
    if k == 0:
        raise CameraModelError("model parameters give an empty incidence domain")
    lo, hi = grid[k - 1], grid[k]
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        if ok(np.float64(mid)):
            lo = mid
        else:
            hi = mid
    return float(hi)


def _denominator(m: Intrinsics, t):
    s, c = np.sin(t), np.cos(t)
    if m.model_kind == "ucm":
        return c + m.xi
    if m.model_kind == "eucm":
        return c + m.alpha_m * (np.sqrt(m.beta_m * s * s + c * c) - c)
    if m.model_kind == "double_sphere":
        d = m.xi + c
        return m.alpha_m * np.sqrt(s * s + d * d) + (1 - m.alpha_m) * d
    return np.ones_like(t)


def _rho(m: Intrinsics, t):
    """Radial function without domain checks."""
    kind = m.model_kind
    if kind == "polynomial":
        a1, a2, a3, a4 = m.a
        return t * (a1 + t * (a2 + t * (a3 + t * a4)))
    if kind == "rectilinear":
        return m.f * np.tan(t)
    if kind == "stereographic":
        return 2 * m.f * np.tan(t / 2)
    return m.f * np.sin(t) / _denominator(m, t)


def _poly_derivative(a, t):
    a1, a2, a3, a4 = a
    return a1 + t * (2 * a2 + t * (3 * a3 + t * 4 * a4))


def _check_polynomial_monotone(a, theta_max):
    # rho' attains its minimum on [0, theta_max] at an endpoint or where rho'' = 0
    a1, a2, a3, a4 = a
    candidates = [0.0, theta_max]
    for r in np.roots([12 * a4, 6 * a3, 2 * a2]) if (a4 or a3 or a2) else []:
        if abs(r.imag) < 1e-12 and 0 < r.real < theta_max:
            candidates.append(r.real)
    if min(_poly_derivative(a, t) for t in candidates) <= 0:
        raise NonMonotoneError(
            f"polynomial {a} is not strictly increasing on [0, {theta_max:.6g}]"
        )


def radial_forward(model: Intrinsics, theta):
    """Radius in pixels for incidence angle(s) ``theta``.

    Raises
    ------
    DomainError
        If any angle falls outside the model's domain.
    """
    t = np.asarray(theta, dtype=float)
    if not model.in_domain(t).all():
        raise DomainError(
            f"theta outside [0, {model.theta_max:.6g}{')' if model.theta_max_open else ']'}"
            f" for {model.model_kind}"
        )
    out = _rho(model, t)
    return float(out) if out.ndim == 0 else out


def radial_inverse(model: Intrinsics, rho):
    """Incidence angle(s) for radius ``rho`` (pixels).

    Closed form for every model except the polynomial, which uses a safeguarded
    Newton iteration bracketed on ``[0, theta_max]``.

    Raises
    ------
    NoRootError
        If ``rho`` is negative or exceeds ``model.rho_max``.
    """
    r = np.asarray(rho, dtype=float)
    theta, ok = _inverse_masked(model, r)
    if not ok.all():
        raise NoRootError(
            f"radius outside [0, {model.rho_max:.9g}] for {model.model_kind}"
        )
    return float(theta) if theta.ndim == 0 else theta


def _inverse_masked(model: Intrinsics, r: np.ndarray):
    """Inverse radial map plus a validity mask; invalid entries hold NaN."""
    r = np.asarray(r, dtype=float)
    ok = np.isfinite(r) & (r >= 0)
    if np.isfinite(model.rho_max):
        ok &= r <= model.rho_max
    if model.theta_max_open and np.isfinite(model.rho_max):
        ok &= r < model.rho_max
    rr = np.where(ok, r, 0.0)
    kind = model.model_kind
    with np.errstate(all="ignore"):
        if kind == "polynomial":
            theta = _newton_poly(model.a, rr, model.theta_max)
        elif kind == "rectilinear":
            theta = np.arctan(rr / model.f)
        elif kind == "stereographic":
            theta = 2 * np.arctan(rr / (2 * model.f))
        elif kind == "ucm":
            m = rr / model.f
            xi = model.xi
            fac = (xi + np.sqrt(1 + (1 - xi * xi) * m * m)) / (1 + m * m)
            theta = np.arctan2(fac * m, fac - xi)
        elif kind == "eucm":
            m2 = (rr / model.f) ** 2
            al, be = model.alpha_m, model.beta_m
            mz = (1 - be * al * al * m2) / (al * np.sqrt(1 - (2 * al - 1) * be * m2) + (1 - al))
            theta = np.arctan2(rr / model.f, mz)
        else:
            m = rr / model.f
            m2 = m * m
            al, xi = model.alpha_m, model.xi
            mz = (1 - al * al * m2) / (al * np.sqrt(1 - (2 * al - 1) * m2) + 1 - al)
            fac = (mz * xi + np.sqrt(mz * mz + (1 - xi * xi) * m2)) / (mz * mz + m2)
            theta = np.arctan2(fac * m, fac * mz - xi)
    ok &= np.isfinite(theta) & model.in_domain(np.where(np.isfinite(theta), theta, -1.0))
    return np.where(ok, theta, np.nan), ok


def _newton_poly(a, rho: np.ndarray, theta_max: float) -> np.ndarray:
    """Vectorised Newton on rho(t) = target with bisection fallback."""
    rho = np.asarray(rho, dtype=float)
    lo = np.zeros_like(rho)
    hi = np.full_like(rho, theta_max)
    t = np.clip(rho / a[0], 0.0, theta_max)
    active = np.ones(rho.shape, dtype=bool)
    for _ in range(NEWTON_MAX_ITER):
        g = _rho_poly(a, t) - rho
        lo = np.where(g <= 0, t, lo)
        hi = np.where(g >= 0, t, hi)
        step = g / _poly_derivative(a, t)
        t_new = t - step
        outside = ~((t_new > lo) & (t_new < hi))
        t_new = np.where(outside, 0.5 * (lo + hi), t_new)
        done = np.abs(t_new - t) < NEWTON_TOL
        t = np.where(active, t_new, t)
        active &= ~done
        if not active.any():
            return t
    # fallback: plain bisection on whatever is still unconverged
    while active.any():
        mid = 0.5 * (lo + hi)
        g = _rho_poly(a, mid) - rho
        lo = np.where(active & (g <= 0), mid, lo)
        hi = np.where(active & (g > 0), mid, hi)
        t = np.where(active, 0.5 * (lo + hi), t)
        active &= (hi - lo) > NEWTON_TOL
    return t


def _rho_poly(a, t):
    a1, a2, a3, a4 = a
    return t * (a1 + t * (a2 + t * (a3 + t * a4)))


def project(model: Intrinsics, points):
    """Project camera-frame points (..., 3) to pixels.

    Returns
    -------
    pixels : ndarray (..., 2)
        ``(u, v)``; NaN where the incidence angle is outside the domain.
    valid : ndarray of bool (...)
        False outside the domain or outside ``[0, w] x [0, h]``.

    Raises
    ------
    DegeneratePointError
        If any point is the zero vector.
    """
    p = np.asarray(points, dtype=float)
    x, y, z = p[..., 0], p[..., 1], p[..., 2]
    r_xy = np.hypot(x, y)
    if np.any((r_xy == 0) & (z == 0)):
        raise DegeneratePointError("cannot project the zero vector")
    return _project_unchecked(model, x, y, z, r_xy)


def _project_unchecked(model, x, y, z, r_xy=None):
    if r_xy is None:
        r_xy = np.hypot(x, y)
    theta = np.arctan2(r_xy, z)
    in_dom = model.in_domain(theta) & ~((r_xy == 0) & (z == 0))
    with np.errstate(all="ignore"):
        rho = np.where(in_dom, _rho(model, np.where(in_dom, theta, 0.0)), np.nan)
        safe = np.where(r_xy > 0, r_xy, 1.0)
        cos_phi = np.where(r_xy > 0, x / safe, 0.0)
        sin_phi = np.where(r_xy > 0, y / safe, 0.0)
    u = model.cx + rho * cos_phi
    v = model.cy + rho * sin_phi
    tol = BOUNDS_TOL
    valid = (in_dom & (u >= -tol) & (u <= model.width + tol)
             & (v >= -tol) & (v <= model.height + tol))
    return np.stack([u, v], axis=-1), valid


def unproject(model: Intrinsics, pixels, lut: Optional["RootLut"] = None):
    """Unit rays (..., 3) for pixel coordinates (..., 2).

    ``lut`` switches the polynomial inversion to table lookup.

    Raises
    ------
    NoRootError
        If a pixel lies beyond the largest invertible radius.
    """
    rays, ok = unproject_masked(model, pixels, lut=lut)
    if not ok.all():
        raise NoRootError("pixel beyond the invertible radius")
    return rays


def unproject_masked(model: Intrinsics, pixels, lut: Optional["RootLut"] = None):
    """Like :func:`unproject` but marks failures in a mask instead of raising."""
    q = np.asarray(pixels, dtype=float)
    dx = q[..., 0] - model.cx
    dy = q[..., 1] - model.cy
    rho = np.hypot(dx, dy)
    if lut is not None:
        theta, ok = lut.lookup_masked(rho)
    else:
        theta, ok = _inverse_masked(model, rho)
    s = np.sin(theta)
    safe = np.where(rho > 0, rho, 1.0)
    rays = np.stack(
        [
            np.where(rho > 0, s * dx / safe, 0.0),
            np.where(rho > 0, s * dy / safe, 0.0),
            np.cos(theta),
        ],
        axis=-1,
    )
    return rays, ok


@dataclass(frozen=True)
class RootLut:
    """Precomputed polynomial roots sampled every ``step`` pixels of radius.

    Lookups interpolate linearly between entries.
    """

    model: Intrinsics
    step: float
    rho: np.ndarray = field(repr=False)
    theta: np.ndarray = field(repr=False)

    @property
    def rho_max(self) -> float:
        return float(self.rho[-1])

    def lookup(self, rho):
        theta, ok = self.lookup_masked(rho)
        if not ok.all():
            raise NoRootError(f"radius outside [0, {self.rho_max:.9g}]")
        return float(theta) if np.ndim(theta) == 0 else theta

    def lookup_masked(self, rho):
        r = np.asarray(rho, dtype=float)
        ok = np.isfinite(r) & (r >= 0) & (r <= self.rho_max)
        theta = np.interp(np.where(ok, r, 0.0), self.rho, self.theta)
        return np.where(ok, theta, np.nan), ok


def build_root_lut(model: Intrinsics, step: float = 0.25) -> RootLut:
    """Tabulate ``radial_inverse`` on ``[0, rho_max]`` for a polynomial model."""
    if model.model_kind != "polynomial":
        raise CameraModelError("root lookup tables are only built for the polynomial model")
    if not step > 0:
        raise CameraModelError("step must be positive")
    rho_max = model.rho_max
    n = int(math.floor(rho_max / step))
    rho = np.arange(n + 1, dtype=float) * step
    if rho[-1] < rho_max:
        rho = np.append(rho, rho_max)
    theta = radial_inverse(model, rho)
    theta[0] = 0.0
    return RootLut(model=model, step=float(step), rho=rho, theta=np.asarray(theta))
