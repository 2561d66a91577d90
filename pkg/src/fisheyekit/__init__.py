"""Camera geometry, view synthesis and loss toolkit for surround-view fisheye distance estimation."""

from .camera_models import (
    MODEL_KINDS,
    CameraModelError,
    DegeneratePointError,
    DomainError,
    Intrinsics,
    NoRootError,
    NonMonotoneError,
    RootLut,
    build_root_lut,
    project,
    radial_forward,
    radial_inverse,
    unproject,
)
from .estimators import CameraGeometryTransformer, HeightMapFuser, RobustLossEstimator
from .geom_tensor import CameraGeometryTensor, assemble_tensor
from .heightmap import FusionState, HeightGrid
from .warp import Pose, SampleGrid

__version__ = "0.1.0"

__all__ = [
    "MODEL_KINDS",
    "CameraGeometryTensor",
    "CameraGeometryTransformer",
    "CameraModelError",
    "DegeneratePointError",
    "DomainError",
    "FusionState",
    "HeightGrid",
    "HeightMapFuser",
    "Intrinsics",
    "NoRootError",
    "NonMonotoneError",
    "Pose",
    "RobustLossEstimator",
    "RootLut",
    "SampleGrid",
    "assemble_tensor",
    "build_root_lut",
    "project",
    "radial_forward",
    "radial_inverse",
    "unproject",
]
