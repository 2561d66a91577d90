"""Forward kernels for pixel-adaptive convolution and vector self-attention.

Feature maps are ``(H, W, C)`` float arrays. Every kernel has a naive
nested-loop twin in :func:`brute_force_reference`, kept for testing.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np


class KernelShapeError(ValueError):
    pass


@dataclass(frozen=True)
class PacFilter:
    """Weights ``(C_out, C_in, k, k)`` indexed by spatial offset, bias ``(C_out,)``."""

    weight: np.ndarray = field(repr=False)
    bias: np.ndarray = field(repr=False)
    sigma: float = 1.0

    def __post_init__(self):
        w = np.asarray(self.weight, dtype=float)
        b = np.asarray(self.bias, dtype=float).reshape(-1)
        if w.ndim != 4 or w.shape[2] != w.shape[3] or w.shape[2] % 2 == 0:
            raise KernelShapeError("weight must be (C_out, C_in, k, k) with odd k")
        if b.shape != (w.shape[0],):
            raise KernelShapeError("one bias per output channel")
        if not self.sigma > 0:
            raise KernelShapeError("sigma must be positive")
        object.__setattr__(self, "weight", w)
        object.__setattr__(self, "bias", b)

    @property
    def k(self) -> int:
        return self.weight.shape[2]


def _check_fmap(x, name="x") -> np.ndarray:
    a = np.asarray(x, dtype=float)
    if a.ndim != 3 or a.shape[2] < 1:
        raise KernelShapeError(f"{name} must be an (H, W, C) feature map")
    return a


def _neighbours(x: np.ndarray, radius: int):
    """Stack the ``(2r+1)^2`` zero-padded shifts of ``x``: (H, W, P, C) plus in-bounds mask (H, W, P)."""
    h, w, c = x.shape
    k = 2 * radius + 1
    xp = np.pad(x, [(radius, radius), (radius, radius), (0, 0)])
    inside = np.pad(np.ones((h, w), dtype=bool), radius)
    nb = np.empty((h, w, k * k, c))
    ok = np.empty((h, w, k * k), dtype=bool)
    for dy in range(k):
        for dx in range(k):
            p = dy * k + dx
            nb[:, :, p] = xp[dy:dy + h, dx:dx + w]
            ok[:, :, p] = inside[dy:dy + h, dx:dx + w]
    return nb, ok


def pixel_adaptive_conv(x, guide, f: PacFilter) -> np.ndarray:
    """``x'_ij = sum_ab K(F_ij, F_ab) W[a-i, b-j] x_ab + B`` with a Gaussian ``K``.

    Zero padding at the borders.
    """
    x = _check_fmap(x)
    g = _check_fmap(guide, "guide")
    if x.shape[:2] != g.shape[:2]:
        raise KernelShapeError("input and guidance maps differ in spatial size")
    if f.weight.shape[1] != x.shape[2]:
        raise KernelShapeError("filter input channels do not match x")
    r = f.k // 2
    xn, _ = _neighbours(x, r)
    gn, _ = _neighbours(g, r)
    diff = g[:, :, None, :] - gn
    kern = np.exp(-0.5 * (diff * diff).sum(axis=-1) / f.sigma ** 2)
    wflat = f.weight.reshape(f.weight.shape[0], f.weight.shape[1], -1)
    # (H, W, P, Cin) x (Cout, Cin, P) -> (H, W, Cout)
    out = np.einsum("hwp,hwpc,ocp->hwo", kern, xn, wflat)
    return out + f.bias


def plain_conv(x, f: PacFilter) -> np.ndarray:
    """Zero-padded cross-correlation with ``f.weight`` plus bias (guidance ignored)."""
    x = _check_fmap(x)
    r = f.k // 2
    xn, _ = _neighbours(x, r)
    wflat = f.weight.reshape(f.weight.shape[0], f.weight.shape[1], -1)
    return np.einsum("hwpc,ocp->hwo", xn, wflat) + f.bias


@dataclass(frozen=True)
class AttentionParams:
    """Parameters shared by the pairwise and patchwise kernels.

    ``phi``, ``psi``: ``(C_rel, C_in)``; ``chi``: ``(C_out, C_in)``.
    The weight mapping is ``relu(zeta_weight @ delta + zeta_bias)`` followed by
    a softmax over the footprint (skipped when ``normalize`` is False).
    For pairwise ``zeta_weight`` is ``(C_out, C_rel)``; for patchwise it is
    ``(P * C_out, (1 + P) * C_rel)`` with ``P = (2r + 1)^2``.
    """

    radius: int
    phi: np.ndarray = field(repr=False)
    psi: np.ndarray = field(repr=False)
    chi: np.ndarray = field(repr=False)
    zeta_weight: np.ndarray = field(repr=False)
    zeta_bias: np.ndarray = field(repr=False)
    normalize: bool = True

    @property
    def footprint(self) -> int:
        return (2 * self.radius + 1) ** 2

    @property
    def c_out(self) -> int:
        return np.shape(self.chi)[0]

    @classmethod
    def random(cls, rng: np.random.Generator, c_in: int, c_rel: int, c_out: int,
               radius: int = 1, kind: str = "pairwise", scale: float = 0.5) -> "AttentionParams":
        p = (2 * radius + 1) ** 2
        if kind == "pairwise":
            zw = rng.normal(scale=scale, size=(c_out, c_rel))
            zb = rng.normal(scale=scale, size=c_out)
        elif kind == "patchwise":
            zw = rng.normal(scale=scale, size=(p * c_out, (1 + p) * c_rel))
            zb = rng.normal(scale=scale, size=p * c_out)
        else:
            raise ValueError(f"unknown attention kind {kind!r}")
        return cls(radius,
                   rng.normal(scale=scale, size=(c_rel, c_in)),
                   rng.normal(scale=scale, size=(c_rel, c_in)),
                   rng.normal(scale=scale, size=(c_out, c_in)),
                   zw, zb)


def _check_attention(x, p: AttentionParams, kind: str):
    c = x.shape[2]
    c_rel = np.shape(p.phi)[0]
    if np.shape(p.phi) != (c_rel, c) or np.shape(p.psi) != (c_rel, c) or np.shape(p.chi)[1] != c:
        raise KernelShapeError("phi/psi/chi do not match the input channels")
    if kind == "pairwise":
        want = (p.c_out, c_rel)
    else:
        want = (p.footprint * p.c_out, (1 + p.footprint) * c_rel)
    if np.shape(p.zeta_weight) != want or np.shape(p.zeta_bias) != (want[0],):
        raise KernelShapeError(f"zeta must map to shape {want} for {kind} attention")


def _footprint_softmax(logits: np.ndarray, ok: np.ndarray) -> np.ndarray:
    """Softmax over axis 2 of (H, W, P, C) restricted to in-bounds positions."""
    okc = ok[..., None]
    z = np.where(okc, logits, -np.inf)
    z = z - z.max(axis=2, keepdims=True)
    e = np.where(okc, np.exp(z), 0.0)
    return e / e.sum(axis=2, keepdims=True)


def pairwise_weights(x, p: AttentionParams) -> np.ndarray:
    """Per-position weight vectors ``eta(x_ij, x_ab)``, shape (H, W, P, C_out)."""
    x = _check_fmap(x)
    _check_attention(x, p, "pairwise")
    xn, ok = _neighbours(x, p.radius)
    q = x @ np.asarray(p.phi).T
    k = xn @ np.asarray(p.psi).T
    delta = q[:, :, None, :] * k
    logits = np.maximum(delta @ np.asarray(p.zeta_weight).T + p.zeta_bias, 0.0)
    if p.normalize:
        return _footprint_softmax(logits, ok)
    return np.where(ok[..., None], logits, 0.0)


def pairwise_attention(x, p: AttentionParams) -> np.ndarray:
    """``z_ij = sum_ab eta(x_ij, x_ab) * chi(x_ab)`` with Hadamard-product relation."""
    x = _check_fmap(x)
    eta = pairwise_weights(x, p)
    xn, _ = _neighbours(x, p.radius)
    v = xn @ np.asarray(p.chi).T
    return (eta * v).sum(axis=2)


def patchwise_weights(x, p: AttentionParams) -> np.ndarray:
    """Weights computed from the whole footprint patch, shape (H, W, P, C_out)."""
    x = _check_fmap(x)
    _check_attention(x, p, "patchwise")
    h, w, _ = x.shape
    xn, ok = _neighbours(x, p.radius)
    q = x @ np.asarray(p.phi).T
    k = xn @ np.asarray(p.psi).T
    delta = np.concatenate([q, k.reshape(h, w, -1)], axis=-1)
    logits = np.maximum(delta @ np.asarray(p.zeta_weight).T + p.zeta_bias, 0.0)
    logits = logits.reshape(h, w, p.footprint, p.c_out)
    if p.normalize:
        return _footprint_softmax(logits, ok)
    return np.where(ok[..., None], logits, 0.0)


def patchwise_attention(x, p: AttentionParams) -> np.ndarray:
    """``z_ij = sum_ab eta(x_patch)_ab * chi(x_ab)`` with concatenation relation."""
    x = _check_fmap(x)
    eta = patchwise_weights(x, p)
    xn, _ = _neighbours(x, p.radius)
    v = xn @ np.asarray(p.chi).T
    return (eta * v).sum(axis=2)


# -- naive references ----------------------------------------------------------

def _bf_pac(x, guide, f: PacFilter):
    h, w, cin = x.shape
    cout = f.weight.shape[0]
    r = f.k // 2
    out = np.zeros((h, w, cout))
    for i in range(h):
        for j in range(w):
            for o in range(cout):
                acc = 0.0
                for a in range(i - r, i + r + 1):
                    for b in range(j - r, j + r + 1):
                        if not (0 <= a < h and 0 <= b < w):
                            continue
                        d2 = 0.0
                        for e in range(guide.shape[2]):
                            d2 += (guide[i, j, e] - guide[a, b, e]) ** 2
                        kv = math.exp(-0.5 * d2 / f.sigma ** 2)
                        for c in range(cin):
                            acc += kv * f.weight[o, c, a - i + r, b - j + r] * x[a, b, c]
                out[i, j, o] = acc + f.bias[o]
    return out


def _matvec(m, v):
    return [sum(m[r][c] * v[c] for c in range(len(v))) for r in range(len(m))]


def _softmax_lists(columns):
    """Softmax down each column of a list of per-position vectors."""
    n = len(columns[0])
    out = [[0.0] * n for _ in columns]
    for ch in range(n):
        mx = max(col[ch] for col in columns)
        ex = [math.exp(col[ch] - mx) for col in columns]
        s = sum(ex)
        for idx in range(len(columns)):
            out[idx][ch] = ex[idx] / s
    return out


def _bf_attention(x, p: AttentionParams, kind: str):
    h, w, _ = x.shape
    r = p.radius
    k = 2 * r + 1
    phi, psi, chi = (np.asarray(m).tolist() for m in (p.phi, p.psi, p.chi))
    zw, zb = np.asarray(p.zeta_weight).tolist(), np.asarray(p.zeta_bias).tolist()
    cout = len(chi)
    out = np.zeros((h, w, cout))
    for i in range(h):
        for j in range(w):
            q = _matvec(phi, x[i, j].tolist())
            positions = []
            keys = []
            for a in range(i - r, i + r + 1):
                for b in range(j - r, j + r + 1):
                    inb = 0 <= a < h and 0 <= b < w
                    xv = x[a, b].tolist() if inb else [0.0] * x.shape[2]
                    positions.append((a, b, inb, xv))
                    keys.append(_matvec(psi, xv))
            if kind == "pairwise":
                logits = []
                for kv in keys:
                    delta = [q[c] * kv[c] for c in range(len(q))]
                    logits.append([max(v + zb[o], 0.0) for o, v in enumerate(_matvec(zw, delta))])
            else:
                delta = list(q)
                for kv in keys:
                    delta.extend(kv)
                flat = [max(v + zb[o], 0.0) for o, v in enumerate(_matvec(zw, delta))]
                logits = [flat[t * cout:(t + 1) * cout] for t in range(k * k)]
            keep = [t for t, pos in enumerate(positions) if pos[2]]
            if p.normalize:
                weights = _softmax_lists([logits[t] for t in keep])
            else:
                weights = [logits[t] for t in keep]
            for wt, t in zip(weights, keep):
                v = _matvec(chi, positions[t][3])
                for o in range(cout):
                    out[i, j, o] += wt[o] * v[o]
    return out


def brute_force_reference(op_kind: str, x, guide=None, params=None) -> np.ndarray:
    """Nested-loop evaluation of ``pac``, ``pairwise`` or ``patchwise``."""
    x = _check_fmap(x)
    if op_kind == "pac":
        return _bf_pac(x, _check_fmap(guide, "guide"), params)
    if op_kind in ("pairwise", "patchwise"):
        _check_attention(x, params, op_kind)
        return _bf_attention(x, params, op_kind)
    raise ValueError(f"unknown kernel {op_kind!r}")
