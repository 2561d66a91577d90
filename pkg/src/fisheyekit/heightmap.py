"""Top-view height grid built from per-camera distance maps.

The grid covers ``[-range, range]^2`` meters around the vehicle origin in the
vehicle frame (x forward, y left, z up). Cell ``(ix, iy)`` holds points with
``floor((x + range) / cell_size) == ix`` and likewise for ``y``.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Iterable, Optional, Sequence

import numpy as np

from .camera_models import Intrinsics, RootLut
from .warp import Pose, lift

DEFAULT_CELL = 0.05
DEFAULT_RANGE = 10.0


class GridGeometryError(ValueError):
    pass


@dataclass(frozen=True)
class HeightGrid:
    """Per-cell height (m), hit count and known flag. Unknown cells hold NaN."""

    height: np.ndarray = field(repr=False)
    count: np.ndarray = field(repr=False)
    cell_size: float = DEFAULT_CELL
    grid_range: float = DEFAULT_RANGE

    def __post_init__(self):
        if not self.cell_size > 0 or not self.grid_range > 0:
            raise GridGeometryError("cell size and range must be positive")
        n = self.n_cells
        if self.height.shape != (n, n) or self.count.shape != (n, n):
            raise GridGeometryError(f"grid planes must be {n}x{n}")

    @classmethod
    def empty(cls, cell_size: float = DEFAULT_CELL, grid_range: float = DEFAULT_RANGE) -> "HeightGrid":
        n = int(round(2 * grid_range / cell_size))
        return cls(np.full((n, n), np.nan), np.zeros((n, n), dtype=np.int64), cell_size, grid_range)

    @property
    def n_cells(self) -> int:
        return int(round(2 * self.grid_range / self.cell_size))

    @property
    def known(self) -> np.ndarray:
        return self.count > 0

    def same_geometry(self, other: "HeightGrid") -> bool:
        return (self.cell_size == other.cell_size and self.grid_range == other.grid_range)

    def cell_index(self, xy) -> np.ndarray:
        xy = np.asarray(xy, dtype=float)
        return np.floor((xy + self.grid_range) / self.cell_size).astype(np.int64)

    def __eq__(self, other):
        return (isinstance(other, HeightGrid) and self.same_geometry(other)
                and np.array_equal(self.count, other.count)
                and np.array_equal(self.height, other.height, equal_nan=True))

    __hash__ = None


def project_to_grid(points, grid: Optional[HeightGrid] = None) -> HeightGrid:
    """Drop vehicle-frame points (N, 3) into cells, keeping the max height per cell.

    Points in cells that are already known raise the cell height only if they
    are higher. Points outside the grid and non-finite points are skipped.
    """
    grid = grid if grid is not None else HeightGrid.empty()
    p = np.asarray(points, dtype=float).reshape(-1, 3)
    p = p[np.isfinite(p).all(axis=1)]
    idx = grid.cell_index(p[:, :2])
    n = grid.n_cells
    inside = (idx >= 0).all(axis=1) & (idx < n).all(axis=1)
    idx, z = idx[inside], p[inside, 2]
    height = np.where(grid.known, grid.height, -np.inf)
    np.maximum.at(height, (idx[:, 0], idx[:, 1]), z)
    count = grid.count.copy()
    np.add.at(count, (idx[:, 0], idx[:, 1]), 1)
    height = np.where(count > 0, height, np.nan)
    return replace(grid, height=height, count=count)


def distance_to_points(dist, model: Intrinsics, cam_to_vehicle: Pose,
                       lut: Optional[RootLut] = None) -> np.ndarray:
    """Lift a distance map and move the valid points into the vehicle frame; (N, 3)."""
    pts, ok = lift(dist, model, lut=lut)
    return cam_to_vehicle.apply(pts[ok])


def fuse_cameras(grids: Sequence[HeightGrid]) -> HeightGrid:
    """Count-weighted mean of heights over cells known to several cameras."""
    grids = list(grids)
    if not grids:
        raise GridGeometryError("nothing to fuse")
    ref = grids[0]
    if any(not ref.same_geometry(g) for g in grids[1:]):
        raise GridGeometryError("grids differ in geometry")
    count = np.zeros_like(ref.count)
    acc = np.zeros(ref.height.shape)
    for g in grids:
        k = g.known
        acc[k] += g.height[k] * g.count[k]
        count += g.count
    with np.errstate(invalid="ignore", divide="ignore"):
        height = np.where(count > 0, acc / np.maximum(count, 1), np.nan)
    return replace(ref, height=height, count=count)


def spatial_smooth(grid: HeightGrid) -> HeightGrid:
    """3x3 median over known neighbours, applied to known cells only."""
    n = grid.n_cells
    padded = np.pad(np.where(grid.known, grid.height, np.nan), 1, constant_values=np.nan)
    stack = np.stack([padded[dy:dy + n, dx:dx + n] for dy in range(3) for dx in range(3)])
    known = grid.known
    out = np.full((n, n), np.nan)
    out[known] = np.nanmedian(stack[:, known], axis=0)
    return replace(grid, height=out)


@dataclass(frozen=True)
class FusionState:
    previous: Optional[HeightGrid] = None
    blend: float = 0.5

    def __post_init__(self):
        if not 0 < self.blend <= 1:
            raise ValueError("temporal blend factor must lie in (0, 1]")


def temporal_smooth(grid: HeightGrid, state: FusionState) -> HeightGrid:
    """Exponential blend with the previous grid on cells known in both.

    Other cells keep the current observation, so unknown stays unknown.
    """
    prev = state.previous
    if prev is None:
        return grid
    if not grid.same_geometry(prev):
        raise GridGeometryError("grids differ in geometry")
    both = grid.known & prev.known
    lam = state.blend
    height = grid.height.copy()
    height[both] = lam * grid.height[both] + (1 - lam) * prev.height[both]
    return replace(grid, height=height)


def build_heightmap(point_sets: Iterable, state: Optional[FusionState] = None,
                    cell_size: float = DEFAULT_CELL, grid_range: float = DEFAULT_RANGE,
                    spatial: bool = True) -> HeightGrid:
    """Project each camera's points, fuse, then smooth spatially and temporally."""
    grids = [project_to_grid(p, HeightGrid.empty(cell_size, grid_range)) for p in point_sets]
    if not grids:
        raise GridGeometryError("no camera point sets given")
    fused = fuse_cameras(grids)
    if spatial:
        fused = spatial_smooth(fused)
    return temporal_smooth(fused, state or FusionState())
