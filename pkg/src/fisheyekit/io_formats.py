"""Readers and writers for every on-disk artifact.

Binary formats start with an 8-byte magic string and a little-endian uint32
version. Text formats open with a ``# <magic> <version>`` line (or carry
``format``/``version`` keys for JSON). PNG files carry the magic in a
``fisheyekit`` text chunk.

==================  ===========================================================
calibration (JSON)  ``{"format": "fisheyekit-calibration", "version": 1,
                    "cameras": {name: {"intrinsics": {...}, "extrinsics":
                    {"q": [w, x, y, z], "t": [x, y, z]}}}}``
poses (text)        ``# fisheyekit-poses 1`` then ``pair qw qx qy qz tx ty tz``
                    header and one whitespace-separated row per frame pair
distance PNG        16-bit grayscale, value = round(meters * 256), 0 = invalid
distance raw        ``FKDIST``; version, width, height (uint32); float32 plane
label PNG           8-bit class indices + ``<file>.classes.json`` sidecar
tensor              ``FKCGT``; version, width, height (uint32); 6 float32 planes
height grid         ``FKHGRID``; version, n (uint32); cell, range (float64);
                    float32 heights (NaN unknown), uint8 known, uint32 counts
array bundle        ``FKARRAYS``; version, count; per entry name, dtype, shape, data
loss report (text)  ``# fisheyekit-loss-report 1`` then ``name value`` lines, %.9g
==================  ===========================================================
"""

from __future__ import annotations

import json
import math
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Mapping, Optional, Sequence, Tuple, Union

import jsonschema
import numpy as np
from PIL import Image, PngImagePlugin

from .camera_models import CameraModelError, Intrinsics
from .geom_tensor import CameraGeometryTensor
from .heightmap import HeightGrid
from .warp import Pose

PathLike = Union[str, Path]

DISTANCE_SCALE = 256.0
MAX_CAMERAS = 12

TENSOR_MAGIC = b"FKCGT\0\0\0"
DIST_MAGIC = b"FKDIST\0\0"
GRID_MAGIC = b"FKHGRID\0"
ARRAYS_MAGIC = b"FKARRAYS"
FORMAT_VERSION = 1

PNG_KEY = "fisheyekit"
POSE_MAGIC = "fisheyekit-poses"
REPORT_MAGIC = "fisheyekit-loss-report"
CALIB_MAGIC = "fisheyekit-calibration"
CLASSES_MAGIC = "fisheyekit-classes"

REPORT_FIELDS = ("l_r", "l_s", "l_dc", "l_tot", "l_ce", "mtl")


class FormatError(ValueError):
    """Malformed or unrecognised file."""


class FormatVersionError(FormatError):
    """Recognised file with an unsupported version."""


class SchemaError(FormatError):
    """Document fails validation; ``path`` names the offending field."""

    def __init__(self, message: str, path: str = ""):
        super().__init__(f"{path}: {message}" if path else message)
        self.path = path


# -- calibration -----------------------------------------------------------------

_NUM = {"type": "number"}
CALIBRATION_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "required": ["format", "version", "cameras"],
    "properties": {
        "format": {"const": CALIB_MAGIC},
        "version": {"type": "integer"},
        "cameras": {
            "type": "object",
            "minProperties": 1,
            "maxProperties": MAX_CAMERAS,
            "additionalProperties": {
                "type": "object",
                "additionalProperties": False,
                "required": ["intrinsics", "extrinsics"],
                "properties": {
                    "intrinsics": {
                        "type": "object",
                        "additionalProperties": False,
                        "required": ["model", "cx", "cy", "width", "height"],
                        "properties": {
                            "model": {"enum": ["polynomial", "ucm", "eucm", "rectilinear",
                                               "stereographic", "double_sphere"]},
                            "f": {"type": "number", "exclusiveMinimum": 0},
                            "cx": _NUM,
                            "cy": _NUM,
                            "width": {"type": "integer", "minimum": 1},
                            "height": {"type": "integer", "minimum": 1},
                            "a": {"type": "array", "items": _NUM, "minItems": 4, "maxItems": 4},
                            "xi": _NUM,
                            "alpha": _NUM,
                            "beta": _NUM,
                            "fov_deg": {"type": "number", "exclusiveMinimum": 0, "maximum": 360},
                        },
                    },
                    "extrinsics": {
                        "type": "object",
                        "additionalProperties": False,
                        "required": ["q", "t"],
                        "properties": {
                            "q": {"type": "array", "items": _NUM, "minItems": 4, "maxItems": 4},
                            "t": {"type": "array", "items": _NUM, "minItems": 3, "maxItems": 3},
                        },
                    },
                },
            },
        },
    },
}

# parameters each model needs; anything else from the optional set is rejected
_MODEL_FIELDS = {
    "polynomial": {"a"},
    "ucm": {"f", "xi"},
    "eucm": {"f", "alpha", "beta"},
    "rectilinear": {"f"},
    "stereographic": {"f"},
    "double_sphere": {"f", "xi", "alpha"},
}
_OPTIONAL = {"f", "a", "xi", "alpha", "beta"}


@dataclass(frozen=True)
class RigCamera:
    intrinsics: Intrinsics
    extrinsics: Pose  # camera -> vehicle


@dataclass(frozen=True)
class Rig:
    cameras: Dict[str, RigCamera] = field(default_factory=dict)

    def __getitem__(self, name: str) -> RigCamera:
        try:
            return self.cameras[name]
        except KeyError:
            raise KeyError(f"no camera named {name!r} in rig (have {sorted(self.cameras)})") from None

    def names(self) -> List[str]:
        return list(self.cameras)


def _json_path(err: jsonschema.ValidationError) -> str:
    return "$" + "".join(f"[{p}]" if isinstance(p, int) else f".{p}" for p in err.absolute_path)


def parse_calibration(doc: Mapping) -> Rig:
    validator = jsonschema.Draft7Validator(CALIBRATION_SCHEMA)
    errors = sorted(validator.iter_errors(doc), key=lambda e: list(e.absolute_path))
    if errors:
        e = errors[0]
        raise SchemaError(e.message, _json_path(e))
    if doc["version"] != FORMAT_VERSION:
        raise FormatVersionError(f"calibration version {doc['version']} is not supported")
    cams = {}
    for name, cam in doc["cameras"].items():
        base = f"$.cameras.{name}"
        intr = cam["intrinsics"]
        model = intr["model"]
        need = _MODEL_FIELDS[model]
        for key in sorted(need - intr.keys()):
            raise SchemaError(f"{model} model requires {key!r}", f"{base}.intrinsics.{key}")
        for key in sorted((intr.keys() & _OPTIONAL) - need):
            raise SchemaError(f"{key!r} is not a parameter of the {model} model",
                              f"{base}.intrinsics.{key}")
        try:
            intrinsics = Intrinsics(
                model_kind=model,
                width=intr["width"],
                height=intr["height"],
                cx=float(intr["cx"]),
                cy=float(intr["cy"]),
                f=float(intr.get("f", 0.0)),
                a=tuple(intr.get("a", (0.0, 0.0, 0.0, 0.0))),
                xi=float(intr.get("xi", 0.0)),
                alpha_m=float(intr.get("alpha", 0.0)),
                beta_m=float(intr.get("beta", 1.0)),
                fov_deg=intr.get("fov_deg"),
            )
        except CameraModelError as exc:
            raise SchemaError(str(exc), f"{base}.intrinsics") from exc
        try:
            pose = Pose(tuple(cam["extrinsics"]["q"]), tuple(cam["extrinsics"]["t"]))
        except ValueError as exc:
            raise SchemaError(str(exc), f"{base}.extrinsics.q") from exc
        cams[name] = RigCamera(intrinsics, pose)
    return Rig(cams)


def load_calibration(path: PathLike) -> Rig:
    try:
        doc = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise FormatError(f"{path}: not valid JSON ({exc})") from exc
    return parse_calibration(doc)


def intrinsics_to_dict(m: Intrinsics) -> dict:
    d = {"model": m.model_kind, "cx": m.cx, "cy": m.cy, "width": m.width, "height": m.height}
    values = {"f": m.f, "a": list(m.a), "xi": m.xi, "alpha": m.alpha_m, "beta": m.beta_m}
    for key in sorted(_MODEL_FIELDS[m.model_kind]):
        d[key] = values[key]
    if m.fov_deg is not None:
        d["fov_deg"] = m.fov_deg
    return d


def calibration_to_dict(rig: Rig) -> dict:
    return {
        "format": CALIB_MAGIC,
        "version": FORMAT_VERSION,
        "cameras": {
            name: {
                "intrinsics": intrinsics_to_dict(cam.intrinsics),
                "extrinsics": {"q": list(cam.extrinsics.q), "t": list(cam.extrinsics.t)},
            }
            for name, cam in rig.cameras.items()
        },
    }


def save_calibration(path: PathLike, rig: Rig) -> None:
    Path(path).write_text(json.dumps(calibration_to_dict(rig), indent=2) + "\n")


# -- poses -------------------------------------------------------------------------

def save_poses(path: PathLike, poses: Mapping[str, Pose]) -> None:
    lines = [f"# {POSE_MAGIC} {FORMAT_VERSION}", "pair qw qx qy qz tx ty tz"]
    for name, p in poses.items():
        if not name or any(ch.isspace() for ch in name):
            raise FormatError(f"pair name {name!r} must be a non-empty token")
        lines.append(" ".join([name] + [repr(v) for v in (*p.q, *p.t)]))
    Path(path).write_text("\n".join(lines) + "\n")


def load_poses(path: PathLike) -> Dict[str, Pose]:
    lines = [ln.strip() for ln in Path(path).read_text().splitlines()]
    lines = [ln for ln in lines if ln]
    if not lines or not lines[0].startswith("#"):
        raise FormatError(f"{path}: missing '# {POSE_MAGIC}' header")
    parts = lines[0][1:].split()
    if len(parts) != 2 or parts[0] != POSE_MAGIC:
        raise FormatError(f"{path}: not a pose file")
    if parts[1] != str(FORMAT_VERSION):
        raise FormatVersionError(f"{path}: pose file version {parts[1]} is not supported")
    if len(lines) < 2 or lines[1].split() != ["pair", "qw", "qx", "qy", "qz", "tx", "ty", "tz"]:
        raise FormatError(f"{path}: bad column header")
    poses = {}
    for n, ln in enumerate(lines[2:], start=3):
        tok = ln.split()
        if len(tok) != 8:
            raise FormatError(f"{path}:{n}: expected 8 fields, got {len(tok)}")
        try:
            vals = [float(v) for v in tok[1:]]
            poses[tok[0]] = Pose(tuple(vals[:4]), tuple(vals[4:]))
        except ValueError as exc:
            raise FormatError(f"{path}:{n}: {exc}") from exc
    return poses


# -- PNG helpers -----------------------------------------------------------------

def _png_info(tag: str) -> PngImagePlugin.PngInfo:
    info = PngImagePlugin.PngInfo()
    info.add_text(PNG_KEY, f"{tag} {FORMAT_VERSION}")
    return info


def _check_png_tag(img: Image.Image, tag: str, path) -> None:
    text = img.info.get(PNG_KEY)
    if text is None:
        raise FormatError(f"{path}: PNG lacks the {PNG_KEY!r} tag for {tag}")
    parts = text.split()
    if len(parts) != 2 or parts[0] != tag:
        raise FormatError(f"{path}: PNG is tagged {text!r}, expected {tag}")
    if parts[1] != str(FORMAT_VERSION):
        raise FormatVersionError(f"{path}: {tag} version {parts[1]} is not supported")


def save_image(path: PathLike, img) -> None:
    """Save an image with intensities in [0, 1] as 8-bit PNG (gray or RGB)."""
    a = np.asarray(img, dtype=float)
    if a.ndim == 3 and a.shape[2] == 1:
        a = a[..., 0]
    if a.ndim not in (2, 3) or (a.ndim == 3 and a.shape[2] != 3):
        raise FormatError("images must be (H, W) or (H, W, 3)")
    q = np.round(np.clip(a, 0, 1) * 255).astype(np.uint8)
    Image.fromarray(q).save(path, pnginfo=_png_info("image"))


def load_image(path: PathLike) -> np.ndarray:
    """Load an 8-bit gray or RGB PNG as floats in [0, 1]."""
    with Image.open(path) as im:
        if im.mode not in ("L", "RGB"):
            im = im.convert("RGB")
        return np.asarray(im, dtype=float) / 255.0


def save_distance_png(path: PathLike, dist) -> None:
    d = np.asarray(dist, dtype=float)
    if d.ndim != 2:
        raise FormatError("distance maps are 2-D")
    q = np.where(np.isfinite(d) & (d > 0), np.round(d * DISTANCE_SCALE), 0)
    q = np.clip(q, 0, 65535).astype(np.uint16)
    Image.fromarray(q).save(path, pnginfo=_png_info("distance"))


def load_distance_png(path: PathLike) -> np.ndarray:
    """Distances in meters; invalid pixels are NaN."""
    with Image.open(path) as im:
        _check_png_tag(im, "distance", path)
        raw = np.asarray(im).astype(np.float64)
    return np.where(raw > 0, raw / DISTANCE_SCALE, np.nan)


def _write_header(f, magic: bytes, *fields: int) -> None:
    f.write(magic)
    f.write(struct.pack(f"<{1 + len(fields)}I", FORMAT_VERSION, *fields))


def _read_header(f, magic: bytes, n_fields: int, path) -> Tuple[int, ...]:
    got = f.read(len(magic))
    if got != magic:
        raise FormatError(f"{path}: bad magic {got!r}, expected {magic!r}")
    raw = f.read(4 * (1 + n_fields))
    if len(raw) != 4 * (1 + n_fields):
        raise FormatError(f"{path}: truncated header")
    version, *fields = struct.unpack(f"<{1 + n_fields}I", raw)
    if version != FORMAT_VERSION:
        raise FormatVersionError(f"{path}: version {version} is not supported")
    return tuple(fields)


def _read_exact(f, dtype, count: int, path) -> np.ndarray:
    dt = np.dtype(dtype)
    buf = f.read(dt.itemsize * count)
    if len(buf) != dt.itemsize * count:
        raise FormatError(f"{path}: truncated payload")
    return np.frombuffer(buf, dtype=dt, count=count).copy()


def save_distance_raw(path: PathLike, dist) -> None:
    d = np.asarray(dist, dtype="<f4")
    if d.ndim != 2:
        raise FormatError("distance maps are 2-D")
    with open(path, "wb") as f:
        _write_header(f, DIST_MAGIC, d.shape[1], d.shape[0])
        f.write(np.ascontiguousarray(d).tobytes())


def load_distance_raw(path: PathLike) -> np.ndarray:
    with open(path, "rb") as f:
        w, h = _read_header(f, DIST_MAGIC, 2, path)
        return _read_exact(f, "<f4", w * h, path).reshape(h, w).astype(np.float64)


def load_distance(path: PathLike) -> np.ndarray:
    """Dispatch on content: raw ``FKDIST`` or 16-bit PNG."""
    with open(path, "rb") as f:
        head = f.read(len(DIST_MAGIC))
    if head == DIST_MAGIC:
        return load_distance_raw(path)
    return load_distance_png(path)


# -- labels --------------------------------------------------------------------------

@dataclass(frozen=True)
class LabelMap:
    labels: np.ndarray = field(repr=False)
    class_names: Tuple[str, ...] = ()
    dynamic: Tuple[int, ...] = ()

    def __post_init__(self):
        lab = np.asarray(self.labels)
        if lab.ndim != 2:
            raise FormatError("label maps are 2-D")
        if lab.size and (lab.min() < 0 or lab.max() >= len(self.class_names)):
            raise FormatError("label index outside the class table")
        if any(not 0 <= d < len(self.class_names) for d in self.dynamic):
            raise FormatError("dynamic class outside the class table")


def _sidecar(path: PathLike) -> Path:
    return Path(str(path) + ".classes.json")


def save_labels(path: PathLike, lm: LabelMap) -> None:
    if len(lm.class_names) > 256:
        raise FormatError("8-bit label maps hold at most 256 classes")
    Image.fromarray(np.asarray(lm.labels, dtype=np.uint8)).save(path, pnginfo=_png_info("labels"))
    doc = {"format": CLASSES_MAGIC, "version": FORMAT_VERSION,
           "classes": list(lm.class_names), "dynamic": list(lm.dynamic)}
    _sidecar(path).write_text(json.dumps(doc, indent=2) + "\n")


def load_labels(path: PathLike) -> LabelMap:
    side = _sidecar(path)
    if not side.exists():
        raise FormatError(f"{path}: missing class table {side.name}")
    doc = json.loads(side.read_text())
    if doc.get("format") != CLASSES_MAGIC:
        raise FormatError(f"{side}: not a class table")
    if doc.get("version") != FORMAT_VERSION:
        raise FormatVersionError(f"{side}: version {doc.get('version')} is not supported")
    if set(doc) != {"format", "version", "classes", "dynamic"}:
        raise SchemaError("unexpected or missing keys", str(side))
    with Image.open(path) as im:
        _check_png_tag(im, "labels", path)
        if im.mode != "L":
            raise FormatError(f"{path}: label maps must be 8-bit single channel")
        lab = np.asarray(im).copy()
    return LabelMap(lab, tuple(doc["classes"]), tuple(int(d) for d in doc["dynamic"]))


# -- tensors, grids, arrays ---------------------------------------------------------

def save_tensor(path: PathLike, t: CameraGeometryTensor) -> None:
    with open(path, "wb") as f:
        _write_header(f, TENSOR_MAGIC, t.width, t.height)
        f.write(np.ascontiguousarray(t.data, dtype="<f4").tobytes())


def load_tensor(path: PathLike) -> CameraGeometryTensor:
    with open(path, "rb") as f:
        w, h = _read_header(f, TENSOR_MAGIC, 2, path)
        data = _read_exact(f, "<f4", 6 * w * h, path).reshape(6, h, w)
        if f.read(1):
            raise FormatError(f"{path}: trailing bytes after tensor payload")
    return CameraGeometryTensor(data.astype(np.float64))


def save_grid(path: PathLike, g: HeightGrid) -> None:
    n = g.n_cells
    with open(path, "wb") as f:
        _write_header(f, GRID_MAGIC, n)
        f.write(struct.pack("<2d", g.cell_size, g.grid_range))
        f.write(np.where(g.known, g.height, np.nan).astype("<f4").tobytes())
        f.write(g.known.astype(np.uint8).tobytes())
        f.write(g.count.astype("<u4").tobytes())


def load_grid(path: PathLike) -> HeightGrid:
    with open(path, "rb") as f:
        (n,) = _read_header(f, GRID_MAGIC, 1, path)
        raw = f.read(16)
        if len(raw) != 16:
            raise FormatError(f"{path}: truncated header")
        cell, rng = struct.unpack("<2d", raw)
        height = _read_exact(f, "<f4", n * n, path).reshape(n, n).astype(np.float64)
        known = _read_exact(f, np.uint8, n * n, path).reshape(n, n).astype(bool)
        count = _read_exact(f, "<u4", n * n, path).reshape(n, n).astype(np.int64)
    if not np.array_equal(known, count > 0):
        raise FormatError(f"{path}: known mask disagrees with counts")
    g = HeightGrid(np.where(known, height, np.nan), count, cell, rng)
    if g.n_cells != n:
        raise FormatError(f"{path}: cell count {n} inconsistent with geometry")
    return g


_DTYPES = {1: "<f4", 2: "<f8", 3: "|u1", 4: "<u2", 5: "<i8"}
_DTYPE_CODES = {np.dtype(v): k for k, v in _DTYPES.items()}


def save_arrays(path: PathLike, arrays: Mapping[str, np.ndarray]) -> None:
    """Write named arrays (e.g. kernel parameters) into one bundle."""
    with open(path, "wb") as f:
        _write_header(f, ARRAYS_MAGIC, len(arrays))
        for name, arr in arrays.items():
            a = np.asarray(arr)
            dt = a.dtype.newbyteorder("<") if a.dtype.byteorder == ">" else a.dtype
            code = _DTYPE_CODES.get(np.dtype(dt))
            if code is None:
                raise FormatError(f"unsupported dtype {a.dtype} for {name!r}")
            key = name.encode("utf-8")
            f.write(struct.pack("<H", len(key)) + key)
            f.write(struct.pack("<BB", code, a.ndim))
            f.write(struct.pack(f"<{a.ndim}I", *a.shape))
            f.write(np.ascontiguousarray(a, dtype=_DTYPES[code]).tobytes())


def _unpack(f, fmt: str, path):
    size = struct.calcsize(fmt)
    raw = f.read(size)
    if len(raw) != size:
        raise FormatError(f"{path}: truncated entry header")
    return struct.unpack(fmt, raw)


def load_arrays(path: PathLike) -> Dict[str, np.ndarray]:
    out = {}
    with open(path, "rb") as f:
        (count,) = _read_header(f, ARRAYS_MAGIC, 1, path)
        for _ in range(count):
            (klen,) = _unpack(f, "<H", path)
            try:
                name = f.read(klen).decode("utf-8")
            except UnicodeDecodeError as exc:
                raise FormatError(f"{path}: array name is not UTF-8") from exc
            code, ndim = _unpack(f, "<BB", path)
            if code not in _DTYPES:
                raise FormatError(f"{path}: unknown dtype code {code}")
            shape = _unpack(f, f"<{ndim}I", path)
            out[name] = _read_exact(f, _DTYPES[code], int(np.prod(shape)), path).reshape(shape)
    return out


# -- loss report ----------------------------------------------------------------------

def format_loss_report(values: Mapping[str, float]) -> str:
    missing = [k for k in REPORT_FIELDS if k not in values]
    if missing:
        raise FormatError(f"loss report lacks {missing}")
    lines = [f"# {REPORT_MAGIC} {FORMAT_VERSION}"]
    lines += [f"{k} {float(values[k]):.9g}" for k in REPORT_FIELDS]
    return "\n".join(lines) + "\n"


def parse_loss_report(text: str) -> Dict[str, float]:
    lines = [ln.strip() for ln in text.splitlines() if ln.strip()]
    if not lines or lines[0] != f"# {REPORT_MAGIC} {FORMAT_VERSION}":
        raise FormatError("not a loss report")
    out = {}
    for ln in lines[1:]:
        tok = ln.split()
        if len(tok) != 2 or tok[0] not in REPORT_FIELDS:
            raise FormatError(f"bad report line {ln!r}")
        out[tok[0]] = float(tok[1])
    if set(out) != set(REPORT_FIELDS):
        raise FormatError("loss report is incomplete")
    return out


# -- loss configuration ---------------------------------------------------------------

WEIGHTS_KEYS = {"beta", "gamma", "tau", "epsilon_frac", "alpha", "c", "sigma1", "sigma2",
                "dynamic_classes"}


def load_weights(path: PathLike) -> dict:
    """Loss configuration document (JSON object, subset of ``WEIGHTS_KEYS``)."""
    doc = json.loads(Path(path).read_text())
    if not isinstance(doc, dict):
        raise SchemaError("weights document must be a JSON object", str(path))
    unknown = set(doc) - WEIGHTS_KEYS
    if unknown:
        raise SchemaError(f"unknown keys {sorted(unknown)}", str(path))
    for k, v in doc.items():
        if k == "dynamic_classes":
            if not isinstance(v, list) or not all(isinstance(i, int) for i in v):
                raise SchemaError("must be a list of class indices", f"{path}:{k}")
        elif not isinstance(v, (int, float)) or isinstance(v, bool) or (
                k != "alpha" and not math.isfinite(v)):
            raise SchemaError("must be a number", f"{path}:{k}")
    return doc


# -- visualisation --------------------------------------------------------------------

COLORMAP = "viridis"


def save_colormap_png(path: PathLike, values, valid=None, vmin: Optional[float] = None,
                      vmax: Optional[float] = None) -> Tuple[float, float]:
    """Render a scalar field with a fixed perceptually uniform ramp.

    Invalid cells are black. The value range goes to ``<path>.txt``.
    """
    from matplotlib import colormaps

    v = np.asarray(values, dtype=float)
    ok = np.isfinite(v) if valid is None else (np.asarray(valid, dtype=bool) & np.isfinite(v))
    if vmin is None:
        vmin = float(v[ok].min()) if ok.any() else 0.0
    if vmax is None:
        vmax = float(v[ok].max()) if ok.any() else 1.0
    span = vmax - vmin if vmax > vmin else 1.0
    t = np.clip(np.where(ok, (v - vmin) / span, 0.0), 0, 1)
    lut = (np.asarray(colormaps[COLORMAP](np.linspace(0, 1, 256)))[:, :3] * 255).round().astype(np.uint8)
    rgb = lut[np.round(t * 255).astype(int)]
    rgb[~ok] = 0
    Image.fromarray(rgb).save(path, pnginfo=_png_info("colormap"))
    Path(str(path) + ".txt").write_text(
        f"colormap {COLORMAP}\nmin {vmin:.9g}\nmax {vmax:.9g}\n")
    return vmin, vmax
