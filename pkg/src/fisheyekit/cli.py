"""Batch command-line front end.

Commands: ``cgt``, ``warp``, ``loss``, ``heightmap``, ``selfcheck`` and
``demo`` (writes a small synthetic dataset to try the others on). Results go
to stdout or files; diagnostics go to stderr. Exit status is 0 on success,
1 when a self-check fails and 2 on any input error.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from pathlib import Path
from typing import List, Optional

import numpy as np

from . import io_formats as io
from . import losses as L
from .camera_models import CameraModelError, build_root_lut
from .geom_tensor import CHANNELS, assemble_tensor
from .heightmap import FusionState, build_heightmap, distance_to_points
from .validation import check_distance_map, check_image, check_same_shape
from .warp import bilinear_sample, ego_mask, nearest_sample, warp_image


class CliError(Exception):
    pass


def _camera(rig: io.Rig, name: Optional[str]):
    if name is None:
        if len(rig.cameras) != 1:
            raise CliError(f"--camera is required for a rig with {len(rig.cameras)} cameras "
                           f"({', '.join(rig.names())})")
        name = rig.names()[0]
    return rig[name]


def _lut_for(model):
    return build_root_lut(model) if model.model_kind == "polynomial" else None


def cmd_cgt(args) -> int:
    rig = io.load_calibration(args.calib)
    model = _camera(rig, args.camera).intrinsics
    w = args.width or model.width
    h = args.height or model.height
    t = assemble_tensor(model, w, h)
    io.save_tensor(args.out, t)
    if args.png:
        out_dir = Path(args.png)
        out_dir.mkdir(parents=True, exist_ok=True)
        for name in CHANNELS:
            io.save_colormap_png(out_dir / f"{name}.png", t.channel(name))
    print(f"tensor {args.out} {w}x{h}")
    return 0


def _pick_pose(poses, pair: Optional[str]):
    if not poses:
        raise CliError("pose file is empty")
    if pair is None:
        return next(iter(poses.values()))
    if pair not in poses:
        raise CliError(f"no pair {pair!r} in pose file (have {', '.join(poses)})")
    return poses[pair]


def _mask_path(out: str) -> Path:
    p = Path(out)
    return p.with_name(p.stem + "_mask.png")


def cmd_warp(args) -> int:
    rig = io.load_calibration(args.calib)
    model = _camera(rig, args.camera).intrinsics
    dist = check_distance_map(io.load_distance(args.dist), model)
    pose = _pick_pose(io.load_poses(args.pose), args.pair)
    src = check_image(io.load_image(args.src), "source image")
    check_same_shape(src, dist, names=["source image", "distance map"])
    rec, mask, _ = warp_image(src, dist, pose, model, lut=_lut_for(model))
    io.save_image(args.out, rec)
    mpath = Path(args.mask) if args.mask else _mask_path(args.out)
    io.save_image(mpath, mask.astype(float))
    print(f"reconstruction {args.out}")
    print(f"mask {mpath} valid {int(mask.sum())}/{mask.size}")
    return 0


def _loss_config(args) -> dict:
    cfg = io.load_weights(args.weights) if args.weights else {}
    if args.alpha is not None:
        cfg["alpha"] = args.alpha
    if args.c is not None:
        cfg["c"] = args.c
    return cfg


def compute_loss_report(model, target, sources, dist, poses, source_dists=None,
                        target_labels=None, source_labels=None, posteriors=None,
                        cfg: Optional[dict] = None) -> dict:
    """Evaluate the full loss stack for one target frame and its sources."""
    cfg = dict(cfg or {})
    weights = L.LossWeights(**{k: cfg[k] for k in ("beta", "gamma", "tau", "epsilon_frac") if k in cfg})
    robust = L.RobustParams(cfg.get("alpha", 1.0), cfg.get("c", 0.1))
    unc = L.UncertaintyParams(cfg.get("sigma1", 1.0), cfg.get("sigma2", 1.0))
    target = check_image(target, "target")
    sources = [check_image(s, f"source {k}") for k, s in enumerate(sources)]
    dist = check_distance_map(dist, model)
    names = ["target", *(f"source {k}" for k in range(len(sources))), "distance"]
    check_same_shape(target, *sources, dist, names=names)
    lut = _lut_for(model)
    dyn = cfg.get("dynamic_classes")
    if dyn is None and target_labels is not None:
        dyn = list(target_labels.dynamic)

    maps, masks, grids, mus, flags = [], [], [], [], []
    for k, (src, pose) in enumerate(zip(sources, poses)):
        rec, mask, grid = warp_image(src, dist, pose, model, lut=lut)
        maps.append(L.reconstruction_loss(target, rec, mask, robust, weights.tau))
        masks.append(mask)
        grids.append(grid)
        if target_labels is not None and source_labels is not None:
            warped = nearest_sample(source_labels[k].labels, grid)
            mus.append(L.dynamic_mask(target_labels.labels, warped, dyn or []))
            flags.append(L.motion_flag(target_labels.labels, warped, dyn or []))
    if mus:
        for k, mu in enumerate(L.apply_fraction(mus, weights.epsilon_frac, flags)):
            maps[k] = maps[k] * mu
    per_px, covered = L.min_reconstruction(maps, masks)
    l_r = L.masked_mean(per_px, covered)
    l_s = L.smoothness(np.where(np.isfinite(dist), dist, np.nanmean(dist)), target)
    l_dc = 0.0
    if source_dists:
        vals = []
        for sd, grid, mask in zip(source_dists, grids, masks):
            ok = np.isfinite(sd)
            warped = bilinear_sample(np.where(ok, sd, 0.0), grid)
            # exclude samples that touched an invalid source distance
            support = bilinear_sample(ok.astype(float), grid) >= 1.0 - 1e-12
            m = mask.astype(bool) & support & np.isfinite(dist)
            vals.append(L.distance_consistency(np.where(m, dist, 0.0), warped, m))
        l_dc = float(np.mean(vals))
    l_tot = L.total_distance_loss(l_r, l_s, l_dc, weights)
    l_ce = 0.0
    if posteriors is not None:
        if target_labels is None:
            raise CliError("--posteriors needs --labels for the ground truth")
        y = np.asarray(posteriors, dtype=float)
        l_ce = L.cross_entropy(y, L.one_hot(target_labels.labels, y.shape[-1]))
    return {"l_r": l_r, "l_s": l_s, "l_dc": l_dc, "l_tot": l_tot, "l_ce": l_ce,
            "mtl": L.mtl_loss(l_tot, l_ce, unc)}


def cmd_loss(args) -> int:
    rig = io.load_calibration(args.calib)
    model = _camera(rig, args.camera).intrinsics
    target = io.load_image(args.target)
    sources = [io.load_image(p) for p in args.source]
    dist = io.load_distance(args.dist)
    all_poses = io.load_poses(args.pose)
    if args.pair:
        poses = [_pick_pose(all_poses, p) for p in args.pair]
    else:
        poses = list(all_poses.values())[:len(sources)]
    if len(poses) != len(sources):
        raise CliError(f"{len(sources)} source frames but {len(poses)} poses")
    source_dists = [io.load_distance(p) for p in args.source_dist] if args.source_dist else None
    if source_dists and len(source_dists) != len(sources):
        raise CliError("give one --source-dist per --source")
    tl = io.load_labels(args.labels) if args.labels else None
    sl = [io.load_labels(p) for p in args.source_labels] if args.source_labels else None
    if (tl is None) != (sl is None) and sl is not None:
        raise CliError("--source-labels needs --labels")
    if sl is not None and len(sl) != len(sources):
        raise CliError("give one --source-labels per --source")
    post = None
    if args.posteriors:
        bundle = io.load_arrays(args.posteriors)
        if "posteriors" not in bundle:
            raise CliError(f"{args.posteriors} has no 'posteriors' array")
        post = bundle["posteriors"]
    report = compute_loss_report(model, target, sources, dist, poses, source_dists,
                                 tl, sl, post, _loss_config(args))
    text = io.format_loss_report(report)
    if args.out:
        Path(args.out).write_text(text)
    sys.stdout.write(text)
    return 0


def cmd_heightmap(args) -> int:
    if not args.dist:
        raise CliError("no distance maps given (use --dist CAMERA=PATH)")
    rig = io.load_calibration(args.calib)
    point_sets = []
    for spec in args.dist:
        name, sep, path = spec.partition("=")
        if not sep:
            raise CliError(f"--dist expects CAMERA=PATH, got {spec!r}")
        cam = rig[name]
        d = io.load_distance(path)
        point_sets.append(distance_to_points(d, cam.intrinsics, cam.extrinsics,
                                             lut=_lut_for(cam.intrinsics)))
    prev = io.load_grid(args.prev) if args.prev else None
    grid = build_heightmap(point_sets, FusionState(prev, args.blend), args.cell_size, args.range)
    io.save_grid(args.out, grid)
    if args.png:
        io.save_colormap_png(args.png, grid.height, grid.known)
    print(f"grid {args.out} {grid.n_cells}x{grid.n_cells} known {int(grid.known.sum())}")
    return 0


def cmd_selfcheck(args) -> int:
    from .selfcheck import run_selfcheck

    t0 = time.perf_counter()
    results = run_selfcheck(inject=args.inject)
    for r in results:
        print(f"{'PASS' if r.passed else 'FAIL'} {r.name}: {r.detail}")
    failed = [r.name for r in results if not r.passed]
    print(f"{len(results) - len(failed)}/{len(results)} checks passed")
    print(f"selfcheck took {time.perf_counter() - t0:.2f} s", file=sys.stderr)
    return 1 if failed else 0


def cmd_demo(args) -> int:
    """Write a tiny synthetic dataset: plane scene, calibration, poses, labels."""
    from .io_formats import LabelMap, Rig, RigCamera
    from .synthetic import example_cameras, ground_distance, plane_pair, surround_rig
    from .warp import Pose

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    model, tgt, src, dist, pose = plane_pair()
    _, prev, _, _, pose_prev = plane_pair(translation=(-0.4, 0.0, 0.15))
    io.save_calibration(out / "plane_calib.json", Rig({"cam": RigCamera(model, Pose())}))
    io.save_image(out / "target.png", tgt)
    io.save_image(out / "source_next.png", src)
    io.save_image(out / "source_prev.png", prev)
    io.save_distance_png(out / "distance.png", dist)
    io.save_poses(out / "poses.txt", {"next": pose, "prev": pose_prev, "identity": Pose()})
    classes = ("road", "building", "car")
    lab = np.zeros(dist.shape, dtype=np.uint8)
    io.save_labels(out / "labels.png", LabelMap(lab, classes, (2,)))

    cam = example_cameras(320, 240)["ucm"]
    rig = {}
    for name, m, mount in surround_rig(cam):
        rig[name] = RigCamera(m, mount)
        io.save_distance_png(out / f"ground_{name}.png", ground_distance(m, mount))
    io.save_calibration(out / "rig_calib.json", Rig(rig))
    print(f"demo data in {out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="fisheyekit", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    def calib_args(sp):
        sp.add_argument("--calib", required=True, help="calibration JSON")
        sp.add_argument("--camera", help="camera name inside the rig")

    sp = sub.add_parser("cgt", help="write the six-channel camera geometry tensor")
    calib_args(sp)
    sp.add_argument("--width", type=int, help="output width (default: sensor width)")
    sp.add_argument("--height", type=int, help="output height (default: sensor height)")
    sp.add_argument("--out", required=True)
    sp.add_argument("--png", help="directory for per-channel colormap PNGs")
    sp.set_defaults(func=cmd_cgt)

    sp = sub.add_parser("warp", help="reconstruct the target frame from a source frame")
    calib_args(sp)
    sp.add_argument("--dist", required=True, help="target distance map (16-bit PNG or raw)")
    sp.add_argument("--pose", required=True, help="pose file")
    sp.add_argument("--pair", help="pose entry to use (default: first)")
    sp.add_argument("--src", required=True, help="source image")
    sp.add_argument("--out", required=True, help="reconstructed image PNG")
    sp.add_argument("--mask", help="ego-mask PNG (default: <out>_mask.png)")
    sp.set_defaults(func=cmd_warp)

    sp = sub.add_parser("loss", help="print the loss report for one target frame")
    calib_args(sp)
    sp.add_argument("--target", required=True)
    sp.add_argument("--source", required=True, action="append", help="source image (repeat)")
    sp.add_argument("--dist", required=True, help="target distance map")
    sp.add_argument("--pose", required=True, help="pose file")
    sp.add_argument("--pair", action="append", help="pose entry per source, in order")
    sp.add_argument("--source-dist", action="append", help="source distance map per source")
    sp.add_argument("--labels", help="target label PNG")
    sp.add_argument("--source-labels", action="append", help="source label PNG per source")
    sp.add_argument("--posteriors", help="array bundle holding 'posteriors' (H, W, S)")
    sp.add_argument("--weights", help="loss configuration JSON")
    sp.add_argument("--alpha", type=float, help="robust loss shape")
    sp.add_argument("--c", type=float, help="robust loss scale")
    sp.add_argument("--out", help="also write the report here")
    sp.set_defaults(func=cmd_loss)

    sp = sub.add_parser("heightmap", help="fuse distance maps into a top-view height grid")
    sp.add_argument("--calib", required=True)
    sp.add_argument("--dist", action="append", default=[], help="CAMERA=PATH (repeat)")
    sp.add_argument("--out", required=True)
    sp.add_argument("--png", help="colormap PNG of the grid")
    sp.add_argument("--prev", help="previous grid for temporal smoothing")
    sp.add_argument("--blend", type=float, default=0.5, help="temporal blend factor")
    sp.add_argument("--cell-size", type=float, default=0.05)
    sp.add_argument("--range", type=float, default=10.0)
    sp.set_defaults(func=cmd_heightmap)

    sp = sub.add_parser("selfcheck", help="run the built-in oracle suite")
    sp.add_argument("--inject", help=argparse.SUPPRESS)
    sp.set_defaults(func=cmd_selfcheck)

    sp = sub.add_parser("demo", help="write synthetic inputs for trying the other commands")
    sp.add_argument("--out", required=True)
    sp.set_defaults(func=cmd_demo)
    return p


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (CliError, io.FormatError, CameraModelError, L.LossError, ValueError,
            KeyError, OSError, json.JSONDecodeError) as exc:
        msg = exc.args[0] if isinstance(exc, KeyError) and exc.args else exc
        print(f"error: {msg}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
