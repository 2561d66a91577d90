"""Photometric, regularisation, semantic and multi-task losses.

All image arguments are float arrays with intensities in ``[0, 1]``, shaped
``(H, W)`` or ``(H, W, C)``. Masks are ``(H, W)`` arrays of 0/1.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Iterable, List, Optional, Sequence

import numpy as np
from scipy import integrate

SSIM_C1 = 0.01 ** 2
SSIM_C2 = 0.03 ** 2
LOG_CLAMP = 1e-12

DIRECT_RANGE = (0.1, 100.0)


class LossError(ValueError):
    pass


class InvalidScaleError(LossError):
    pass


class NormalizationError(LossError):
    pass


@dataclass(frozen=True)
class RobustParams:
    alpha: float = 1.0
    c: float = 0.1

    def __post_init__(self):
        if not self.c > 0:
            raise InvalidScaleError(f"robust loss scale must be positive, got {self.c!r}")


@dataclass(frozen=True)
class LossWeights:
    beta: float = 1e-3
    gamma: float = 1e-2
    tau: float = 0.85
    epsilon_frac: float = 1.0

    def __post_init__(self):
        if not 0 <= self.tau <= 1:
            raise LossError("tau must lie in [0, 1]")
        if self.beta < 0 or self.gamma < 0:
            raise LossError("beta and gamma must be non-negative")
        if not 0 <= self.epsilon_frac <= 1:
            raise LossError("epsilon_frac must lie in [0, 1]")


@dataclass(frozen=True)
class UncertaintyParams:
    sigma1: float = 1.0
    sigma2: float = 1.0

    def __post_init__(self):
        if not (self.sigma1 > 0 and self.sigma2 > 0):
            raise LossError("uncertainty parameters must be strictly positive")


# -- robust loss -------------------------------------------------------------

def robust_loss(x, alpha: float, c: float):
    """General robust loss of residual ``x`` with shape ``alpha`` and scale ``c``.

    ``alpha`` in ``{2, 0, -inf, +inf}`` uses the limit forms; other values use
    the generic expression, evaluated through ``expm1``/``log1p`` so it stays
    accurate next to the singular points.
    """
    if not c > 0:
        raise InvalidScaleError(f"robust loss scale must be positive, got {c!r}")
    z = (np.asarray(x, dtype=float) / c) ** 2
    if alpha == 2:
        out = 0.5 * z
    elif alpha == 0:
        out = np.log1p(0.5 * z)
    elif alpha == -math.inf:
        out = -np.expm1(-0.5 * z)
    elif alpha == math.inf:
        out = np.expm1(0.5 * z)
    else:
        # (b/alpha) * expm1(alpha*l/2), rewritten so tiny alpha cannot overflow b/alpha
        b = abs(alpha - 2)
        half_l = 0.5 * np.log1p(z / b)
        u = alpha * half_l
        with np.errstate(invalid="ignore", divide="ignore"):
            ratio = np.where(u == 0, 1.0, np.expm1(u) / u)
        out = b * half_l * ratio
    return float(out) if np.ndim(out) == 0 else out


def robust_loss_grad(x, alpha: float, c: float):
    """Derivative of :func:`robust_loss` with respect to the residual."""
    if not c > 0:
        raise InvalidScaleError(f"robust loss scale must be positive, got {c!r}")
    x = np.asarray(x, dtype=float)
    z = (x / c) ** 2
    lin = x / (c * c)
    if alpha == 2:
        out = lin
    elif alpha == 0:
        out = 2 * x / (x * x + 2 * c * c)
    elif alpha == -math.inf:
        out = lin * np.exp(-0.5 * z)
    elif alpha == math.inf:
        out = lin * np.exp(0.5 * z)
    else:
        b = abs(alpha - 2)
        out = lin * np.exp((0.5 * alpha - 1) * np.log1p(z / b))
    return float(out) if np.ndim(out) == 0 else out


@lru_cache(maxsize=256)
def log_partition(alpha: float) -> float:
    """``log Z(alpha)`` with ``Z = integral exp(-robust_loss(x, alpha, 1)) dx``.

    Finite only for ``alpha >= 0``.
    """
    if alpha < 0:
        raise LossError("the robust loss only normalises to a density for alpha >= 0")
    val, _ = integrate.quad(lambda t: math.exp(-robust_loss(t, alpha, 1.0)), 0, math.inf,
                            epsabs=1e-13, epsrel=1e-12, limit=500)
    return math.log(2 * val)


def robust_nll(x, alpha: float, c: float):
    """Negative log-likelihood of residuals under the robust-loss density."""
    return robust_loss(x, alpha, c) + math.log(c) + log_partition(alpha)


def fit_robust_params(residuals, alphas: Iterable[float], scales: Iterable[float]):
    """Grid search for the ``(alpha, c)`` minimising the mean NLL of ``residuals``.

    Returns ``(alpha, c, mean_nll)``. Ties keep the first grid point in
    ``alphas`` x ``scales`` order.
    """
    r = np.ravel(np.asarray(residuals, dtype=float))
    if r.size == 0:
        raise LossError("no residuals to fit")
    best = None
    for a in alphas:
        for c in scales:
            nll = float(np.mean(robust_nll(r, float(a), float(c))))
            if best is None or nll < best[2]:
                best = (float(a), float(c), nll)
    if best is None:
        raise LossError("empty search grid")
    return best


# -- reconstruction ------------------------------------------------------------

def _as_hwc(img) -> np.ndarray:
    a = np.asarray(img, dtype=float)
    if a.ndim == 2:
        return a[..., None]
    if a.ndim == 3:
        return a
    raise LossError(f"expected an (H, W) or (H, W, C) image, got shape {a.shape}")


def _box3(a: np.ndarray) -> np.ndarray:
    """3x3 window sums with zero padding; ``a`` is (H, W, ...)."""
    p = np.pad(a, [(1, 1), (1, 1)] + [(0, 0)] * (a.ndim - 2))
    h, w = a.shape[:2]
    out = np.zeros_like(a)
    for dy in range(3):
        for dx in range(3):
            out = out + p[dy:dy + h, dx:dx + w]
    return out


def ssim(a, b, mask=None) -> np.ndarray:
    """Per-pixel SSIM over 3x3 uniform windows, averaged over channels.

    Pixels with ``mask == 0`` (and pixels outside the image) are left out of
    the window statistics. Pixels whose window holds no valid pixel get 1.
    """
    x, y = _as_hwc(a), _as_hwc(b)
    if x.shape != y.shape:
        raise LossError(f"size mismatch: {x.shape} vs {y.shape}")
    m = np.ones(x.shape[:2]) if mask is None else np.asarray(mask, dtype=float)
    if m.shape != x.shape[:2]:
        raise LossError("mask size mismatch")
    m = m[..., None]
    n = _box3(m)
    with np.errstate(invalid="ignore", divide="ignore"):
        mu_x = _box3(m * x) / n
        mu_y = _box3(m * y) / n
        var_x = np.maximum(_box3(m * x * x) / n - mu_x ** 2, 0.0)
        var_y = np.maximum(_box3(m * y * y) / n - mu_y ** 2, 0.0)
        cov = _box3(m * x * y) / n - mu_x * mu_y
        num = (2 * mu_x * mu_y + SSIM_C1) * (2 * cov + SSIM_C2)
        den = (mu_x ** 2 + mu_y ** 2 + SSIM_C1) * (var_x + var_y + SSIM_C2)
        s = np.where(n > 0, num / den, 1.0)
    return np.clip(s, -1.0, 1.0).mean(axis=-1)


def reconstruction_loss(target, recon, mask=None, robust: RobustParams = RobustParams(),
                        tau: float = 0.85) -> np.ndarray:
    """Per-pixel mix of SSIM dissimilarity and robust residual.

    ``tau * (1 - SSIM) / 2 + (1 - tau) * rho(residual * mask)``. The robust
    term is averaged over colour channels. Masked-out pixels are set to 0.
    """
    x, y = _as_hwc(target), _as_hwc(recon)
    if x.shape != y.shape:
        raise LossError(f"size mismatch: {x.shape} vs {y.shape}")
    m = np.ones(x.shape[:2]) if mask is None else np.asarray(mask, dtype=float)
    resid = (x - y) * m[..., None]
    rob = robust_loss(resid, robust.alpha, robust.c).mean(axis=-1)
    s = ssim(x, y, m)
    out = tau * (1 - s) / 2 + (1 - tau) * rob
    return np.where(m > 0, out, 0.0)


def min_reconstruction(maps: Sequence[np.ndarray], masks: Optional[Sequence] = None):
    """Per-pixel minimum over source frames.

    With ``masks``, a source only competes where its mask is 1. Returns
    ``(min_map, valid)`` where ``valid`` marks pixels covered by any source;
    uncovered pixels hold 0.
    """
    if len(maps) == 0:
        raise LossError("need at least one source reconstruction map")
    stack = np.stack([np.asarray(m, dtype=float) for m in maps])
    if masks is None:
        return stack.min(axis=0), np.ones(stack.shape[1:], dtype=bool)
    mk = np.stack([np.asarray(m, dtype=bool) for m in masks])
    if mk.shape != stack.shape:
        raise LossError("one mask per map, same size")
    covered = mk.any(axis=0)
    best = np.where(mk, stack, np.inf).min(axis=0)
    return np.where(covered, best, 0.0), covered


def masked_mean(values, mask=None) -> float:
    v = np.asarray(values, dtype=float)
    if mask is None:
        return float(v.mean())
    m = np.asarray(mask, dtype=bool)
    if not m.any():
        return 0.0
    return float(v[m].mean())


# -- regularisers ------------------------------------------------------------------

def smoothness(dist, image, inverse: bool = True) -> float:
    """Edge-aware smoothness of a distance map.

    Gradients of the mean-normalised inverse distance (or of the distance
    itself with ``inverse=False``) weighted by ``exp(-|dI|)``; x and y terms
    are each averaged, then summed.
    """
    d = np.asarray(dist, dtype=float)
    img = _as_hwc(image)
    if img.shape[:2] != d.shape:
        raise LossError("distance map and image differ in size")
    if inverse:
        with np.errstate(divide="ignore"):
            d = 1.0 / d
    mean = d.mean()
    if mean == 0 or not np.isfinite(mean):
        raise LossError("degenerate distance map (mean is zero or not finite)")
    d = d / mean
    gx = np.abs(d[:, 1:] - d[:, :-1])
    gy = np.abs(d[1:, :] - d[:-1, :])
    wx = np.exp(-np.abs(img[:, 1:] - img[:, :-1]).mean(axis=-1))
    wy = np.exp(-np.abs(img[1:, :] - img[:-1, :]).mean(axis=-1))
    total = 0.0
    if gx.size:
        total += float((gx * wx).mean())
    if gy.size:
        total += float((gy * wy).mean())
    return total


def distance_consistency(d_t, d_warped, mask=None) -> float:
    """Mean ``|a - b| / (a + b)`` over masked pixels; pixels with ``a + b == 0`` are skipped."""
    a = np.asarray(d_t, dtype=float)
    b = np.asarray(d_warped, dtype=float)
    if a.shape != b.shape:
        raise LossError("distance maps differ in size")
    s = a + b
    keep = s != 0
    if mask is not None:
        keep &= np.asarray(mask, dtype=bool)
    if not keep.any():
        return 0.0
    return float((np.abs(a - b)[keep] / s[keep]).mean())


def total_distance_loss(l_r: float, l_s: float, l_dc: float,
                        w: LossWeights = LossWeights()) -> float:
    return l_r + w.beta * l_s + w.gamma * l_dc


# -- semantics -----------------------------------------------------------------

def one_hot(labels, n_classes: int) -> np.ndarray:
    lab = np.asarray(labels, dtype=int)
    if lab.size and (lab.min() < 0 or lab.max() >= n_classes):
        raise LossError("label index out of range")
    return np.eye(n_classes)[lab]


def cross_entropy(posteriors, targets) -> float:
    """Pixel-averaged cross-entropy; class axis last.

    ``targets`` is one-hot with the same shape as ``posteriors``.
    """
    y = np.asarray(posteriors, dtype=float)
    t = np.asarray(targets, dtype=float)
    if y.shape != t.shape:
        raise LossError(f"posterior shape {y.shape} vs target shape {t.shape}")
    if np.any(np.abs(y.sum(axis=-1) - 1) > 1e-6):
        raise NormalizationError("posteriors must sum to 1 along the class axis")
    ce = -(t * np.log(np.maximum(y, LOG_CLAMP))).sum(axis=-1)
    return float(ce.mean())


def dynamic_mask(m_t, m_warped, dyn_classes: Iterable[int]) -> np.ndarray:
    """1 where neither the target nor the warped source label is dynamic."""
    a = np.asarray(m_t)
    b = np.asarray(m_warped)
    if a.shape != b.shape:
        raise LossError("label maps differ in size")
    dyn = np.asarray(sorted(set(dyn_classes)), dtype=a.dtype if a.dtype.kind in "iu" else int)
    return (~np.isin(a, dyn) & ~np.isin(b, dyn)).astype(np.uint8)


def motion_flag(m_t, m_warped, dyn_classes: Iterable[int], iou_threshold: float = 0.5) -> bool:
    """True when dynamic objects look mostly moving.

    Compares where the two label maps show dynamic classes; low overlap means
    the objects did not stay where a static world would put them.
    """
    dyn = list(set(dyn_classes))
    a = np.isin(np.asarray(m_t), dyn)
    b = np.isin(np.asarray(m_warped), dyn)
    union = np.logical_or(a, b).sum()
    if union == 0:
        return False
    return bool(np.logical_and(a, b).sum() / union < iou_threshold)


def apply_fraction(masks: Sequence[np.ndarray], epsilon_frac: float,
                   motion_flags: Sequence[bool]) -> List[np.ndarray]:
    """Keep the dynamic mask on a fraction ``epsilon_frac`` of moving frames.

    Flagged frames are picked evenly and deterministically in sequence order;
    every other frame gets an all-ones mask.
    """
    if not 0 <= epsilon_frac <= 1:
        raise LossError("epsilon_frac must lie in [0, 1]")
    if len(masks) != len(motion_flags):
        raise LossError("one motion flag per frame")
    out = []
    k = 0
    for mu, moving in zip(masks, motion_flags):
        mu = np.asarray(mu)
        use = False
        if moving:
            use = math.floor((k + 1) * epsilon_frac) > math.floor(k * epsilon_frac)
            k += 1
        out.append(mu.copy() if use else np.ones_like(mu))
    return out


# -- multi-task ----------------------------------------------------------------

def mtl_loss(l_tot: float, l_ce: float, u: UncertaintyParams = UncertaintyParams()) -> float:
    s1, s2 = u.sigma1, u.sigma2
    return (l_tot / (2 * s1 * s1) + l_ce / (2 * s2 * s2)
            + math.log1p(s1) + math.log1p(s2))


def mtl_loss_grad(l_tot: float, l_ce: float, u: UncertaintyParams = UncertaintyParams()):
    """Partial derivatives with respect to ``(sigma1, sigma2)``."""
    s1, s2 = u.sigma1, u.sigma2
    return (-l_tot / s1 ** 3 + 1 / (1 + s1), -l_ce / s2 ** 3 + 1 / (1 + s2))


def sigmoid_to_distance(s, mode: str = "direct"):
    """Map a sigmoid output in ``[0, 1]`` to meters in ``[0.1, 100]``.

    ``direct`` (fisheye distance): ``99.9 s + 0.1``.
    ``inverse`` (pinhole depth): ``1 / (9.99 s + 0.01)``.
    """
    a = np.asarray(s, dtype=float)
    if np.any(~np.isfinite(a)) or np.any((a < 0) | (a > 1)):
        raise LossError("sigmoid values must lie in [0, 1]")
    lo, hi = DIRECT_RANGE
    if mode == "direct":
        out = (hi - lo) * a + lo
    elif mode == "inverse":
        out = 1.0 / ((1 / lo - 1 / hi) * a + 1 / hi)
    else:
        raise LossError(f"unknown mode {mode!r}")
    out = np.clip(out, lo, hi)
    return float(out) if out.ndim == 0 else out
