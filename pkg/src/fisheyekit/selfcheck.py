"""Built-in oracle suite run by ``fisheyekit selfcheck``.

Every check compares a library path against an independent oracle (closed
forms, brute force, quadrature, analytic scenes). Checks take a perturbation
``eps`` that is added to their fixture; a non-zero ``eps`` must make them fail,
which is how fault injection is exercised.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass
from typing import Callable, Dict, List, Optional

import numpy as np

from . import losses as L
from .camera_models import (
    Intrinsics,
    build_root_lut,
    project,
    radial_forward,
    unproject,
)
from .geom_tensor import assemble_tensor
from .heightmap import FusionState, HeightGrid, build_heightmap, distance_to_points, spatial_smooth, temporal_smooth
from .nn_kernels import (
    AttentionParams,
    PacFilter,
    brute_force_reference,
    pairwise_attention,
    patchwise_attention,
    pixel_adaptive_conv,
    plain_conv,
)
from .synthetic import example_cameras, ground_distance, plane_pair, random_valid_pixels, surround_rig
from .warp import Pose, warp_image


class CheckFailed(AssertionError):
    pass


def _expect(cond: bool, msg: str) -> None:
    if not cond:
        raise CheckFailed(msg)


@dataclass
class CheckResult:
    name: str
    passed: bool
    detail: str
    seconds: float


def check_projection_round_trip(eps: float = 0.0) -> str:
    rng = np.random.default_rng(1)
    worst = {}
    for name, model in example_cameras().items():
        px = random_valid_pixels(model, 10_000, rng)
        back, ok = project(model, unproject(model, px))
        err = np.abs(back - (px + eps)).max()
        tol = 1e-5 if name == "polynomial" else 1e-6
        _expect(ok.all() and err < tol, f"{name}: round-trip error {err:.3e} px (tol {tol:g})")
        worst[name] = err
        if name == "polynomial":
            lut = build_root_lut(model, 0.25)
            back, ok = project(model, unproject(model, px, lut=lut))
            err = np.abs(back - (px + eps)).max()
            _expect(ok.all() and err < 1e-5, f"polynomial LUT: round-trip error {err:.3e} px")
            worst["polynomial_lut"] = err
    return f"max {max(worst.values()):.3e} px over {len(worst)} paths"


def check_model_reductions(eps: float = 0.0) -> str:
    kw = dict(width=100, height=100, cx=50.0, cy=50.0, f=1.7)
    rect = Intrinsics("rectilinear", **kw)
    theta = np.linspace(1e-6, 1.3, 2001)
    ref = radial_forward(rect, theta)
    worst = 0.0
    for m in (Intrinsics("ucm", xi=0.0, **kw), Intrinsics("eucm", alpha_m=0.0, beta_m=1.3, **kw),
              Intrinsics("double_sphere", xi=0.0, alpha_m=0.0, **kw)):
        rel = np.abs(radial_forward(m, theta) - ref * (1 + eps)) / ref
        worst = max(worst, rel.max())
        _expect(rel.max() < 1e-12, f"{m.model_kind} differs from rectilinear by {rel.max():.3e}")
    return f"max relative deviation {worst:.3e}"


def check_robust_loss(eps: float = 0.0) -> str:
    x = np.linspace(-3, 3, 61)
    closed = {
        2.0: 0.5 * x ** 2,
        1.0: np.sqrt(x ** 2 + 1) - 1,
        0.0: np.log(0.5 * x ** 2 + 1),
        -2.0: 2 * x ** 2 / (x ** 2 + 4),
        -math.inf: 1 - np.exp(-0.5 * x ** 2),
    }
    for a, ref in closed.items():
        err = np.abs(L.robust_loss(x, a, 1.0) - ref - eps).max()
        _expect(err < 1e-10, f"alpha={a}: closed form mismatch {err:.3e}")
    spot = L.robust_loss(1.0, 1.0, 1.0)
    _expect(abs(spot - (math.sqrt(2) - 1) - eps) < 1e-12, f"rho(1; 1, 1) = {spot!r}")
    h = 1e-5
    worst = 0.0
    for a in (-2.0, 0.0, 1.0, 2.0):
        xs = x[x != 0]
        fd = (L.robust_loss(xs + h, a, 1.0) - L.robust_loss(xs - h, a, 1.0)) / (2 * h)
        g = L.robust_loss_grad(xs, a, 1.0) * (1 + eps)
        rel = np.abs(g - fd) / np.maximum(np.abs(fd), 1e-12)
        worst = max(worst, rel.max())
        _expect(rel.max() < 1e-5, f"alpha={a}: gradient relative error {rel.max():.3e}")
    return f"closed forms exact; gradient rel err {worst:.3e}"


def check_warp(eps: float = 0.0) -> str:
    model, tgt, src, dist, pose = plane_pair()
    rec, mask, _ = warp_image(tgt, dist, Pose(), model)
    m = mask.astype(bool)
    _expect(m.all() and np.array_equal(rec[m], tgt[m] + eps), "identity warp is not exact")

    def lr(scale):
        r, mk, _ = warp_image(src, dist * scale, pose, model)
        per_px, cov = L.min_reconstruction([L.reconstruction_loss(tgt, r, mk)], [mk])
        return L.masked_mean(per_px, cov)

    base, lo, hi = lr(1.0 + eps * 100), lr(0.9), lr(1.1)
    _expect(base < lo and base < hi, f"L_r at truth {base:.4g} vs 0.9x {lo:.4g}, 1.1x {hi:.4g}")
    return f"L_r truth {base:.4e} < 0.9x {lo:.4e}, 1.1x {hi:.4e}"


def _kernel_instances(kind: str, n: int = 10):
    rng = np.random.default_rng({"pac": 11, "pairwise": 12, "patchwise": 13}[kind])
    for _ in range(n):
        if kind == "pac":
            x = rng.normal(size=(5, 5, 2))
            g = rng.normal(size=(5, 5, 3))
            f = PacFilter(rng.normal(size=(2, 2, 3, 3)), rng.normal(size=2), sigma=rng.uniform(0.5, 2))
            yield x, g, f
        else:
            x = rng.normal(size=(4, 4, 3))
            yield x, None, AttentionParams.random(rng, 3, 2, 3, radius=1, kind=kind)


def check_kernels(eps: float = 0.0) -> str:
    fast = {"pac": lambda x, g, p: pixel_adaptive_conv(x, g, p),
            "pairwise": lambda x, g, p: pairwise_attention(x, p),
            "patchwise": lambda x, g, p: patchwise_attention(x, p)}
    worst = 0.0
    for kind, fn in fast.items():
        for x, g, p in _kernel_instances(kind):
            diff = np.abs(fn(x, g, p) + eps - brute_force_reference(kind, x, g, p)).max()
            worst = max(worst, diff)
            _expect(diff < 1e-12, f"{kind}: brute-force mismatch {diff:.3e}")
    rng = np.random.default_rng(14)
    x = rng.normal(size=(6, 7, 2))
    f = PacFilter(rng.normal(size=(3, 2, 5, 5)), rng.normal(size=3), sigma=0.8)
    const = np.full((6, 7, 4), 0.3)
    diff = np.abs(pixel_adaptive_conv(x, const, f) + eps - plain_conv(x, f)).max()
    _expect(diff < 1e-10, f"PAC with constant guidance differs from convolution by {diff:.3e}")
    return f"max brute-force deviation {worst:.3e}"


def check_geometry_tensor(eps: float = 0.0) -> str:
    cams = example_cameras(640, 480)
    rig = [cams["polynomial"], cams["ucm"], cams["double_sphere"], cams["rectilinear"]]
    t0 = time.perf_counter()
    tensors = [assemble_tensor(m, 640, 480) for m in rig]
    elapsed = time.perf_counter() - t0
    _expect(elapsed < 2.0, f"4-camera tensor generation took {elapsed:.2f} s")
    for t in tensors:
        for ch in (t.nc_x, t.nc_y):
            _expect(ch.min() == -1.0 - eps and ch.max() == 1.0, "nc does not span [-1, 1]")
    m = Intrinsics("rectilinear", 640, 480, 320.0, 240.0, f=400.0)
    t = assemble_tensor(m, 641, 481)
    _expect(t.cc_x[240, 320] == 0 + eps and t.cc_y[240, 320] == 0, "cc is not zero at the principal point")
    cc = t.cc_x
    nz = cc != 0
    rel = np.abs(m.f * np.tan(t.a_x[nz]) - cc[nz] * (1 + eps)) / np.abs(cc[nz])
    _expect(rel.max() < 1e-9, f"pinhole f*tan(a_x) vs cc_x relative error {rel.max():.3e}")
    return f"pinhole rel err {rel.max():.3e}"


def check_heightmap(eps: float = 0.0) -> str:
    model = example_cameras(320, 240)["ucm"]
    pts = []
    for _, cam, mount in surround_rig(model):
        d = ground_distance(cam, mount)
        d = np.round(d * 256) / 256  # 16-bit storage quantisation
        pts.append(distance_to_points(d, cam, mount) + [0, 0, eps * 100])
    grid = build_heightmap(pts)
    k = grid.known
    frac = float((np.abs(grid.height[k]) <= 0.05).mean())
    _expect(k.sum() > 1000 and frac >= 0.99, f"only {frac:.4f} of {k.sum()} cells within 5 cm")

    g = HeightGrid.empty(0.05, 0.5)
    h = np.zeros((20, 20))
    h[10, 10] = 3.0
    spike = HeightGrid(h, np.ones((20, 20), dtype=np.int64), 0.05, 0.5)
    _expect(spatial_smooth(spike).height[10, 10] == 0.0 + eps, "3x3 median kept the spike")

    now = HeightGrid(np.full((20, 20), 2.0), np.ones((20, 20), dtype=np.int64), 0.05, 0.5)
    prev = HeightGrid(np.zeros((20, 20)), np.ones((20, 20), dtype=np.int64), 0.05, 0.5)
    out = temporal_smooth(now, FusionState(prev, 0.5))
    _expect(np.all(out.height == 1.0 + eps), "temporal blend of 2 and 0 is not 1")
    del g
    return f"{frac * 100:.2f}% of {int(k.sum())} ground cells within 5 cm"


def check_spot_values(eps: float = 0.0) -> str:
    v = L.mtl_loss(2.0, 4.0, L.UncertaintyParams(1.0, 1.0))
    _expect(abs(v - (3 + 2 * math.log(2)) - eps) < 1e-5, f"mtl_loss = {v!r}")
    for s in (2, 5, 19):
        y = np.full((3, 4, s), 1.0 / s)
        lab = np.eye(s)[np.arange(12).reshape(3, 4) % s]
        ce = L.cross_entropy(y, lab)
        _expect(abs(ce - math.log(s) - eps) < 1e-9, f"uniform cross-entropy {ce!r} != log {s}")
    ends = [L.sigmoid_to_distance(0.0), L.sigmoid_to_distance(1.0),
            L.sigmoid_to_distance(0.0, "inverse"), L.sigmoid_to_distance(1.0, "inverse")]
    _expect(ends == [0.1 + eps, 100.0, 100.0, 0.1], f"sigmoid endpoints {ends}")
    return f"mtl {v:.6f}"


CHECKS: Dict[str, Callable[[float], str]] = {
    "projection_round_trip": check_projection_round_trip,
    "model_reductions": check_model_reductions,
    "robust_loss": check_robust_loss,
    "warp": check_warp,
    "kernels": check_kernels,
    "geometry_tensor": check_geometry_tensor,
    "heightmap": check_heightmap,
    "spot_values": check_spot_values,
}


def run_selfcheck(inject: Optional[str] = None, eps: float = 1e-3) -> List[CheckResult]:
    """Run every check; ``inject`` names a check whose fixture gets perturbed."""
    if inject is not None and inject not in CHECKS:
        raise KeyError(f"unknown check {inject!r}; choose from {sorted(CHECKS)}")
    results = []
    for name, fn in CHECKS.items():
        t0 = time.perf_counter()
        try:
            detail = fn(eps if name == inject else 0.0)
            ok = True
        except CheckFailed as exc:
            detail, ok = str(exc), False
        results.append(CheckResult(name, ok, detail, time.perf_counter() - t0))
    return results
