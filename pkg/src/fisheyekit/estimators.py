"""scikit-learn compatible wrappers around the functional core.

These let the geometry tensor, robust-loss fitting and height-map fusion sit
inside a ``Pipeline`` or be tuned with ``get_params``/``set_params``.
"""

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from .camera_models import Intrinsics
from .geom_tensor import assemble_tensor
from .heightmap import DEFAULT_CELL, DEFAULT_RANGE, FusionState, build_heightmap
from .losses import fit_robust_params, robust_loss, robust_nll
from .validation import check_points


class CameraGeometryTransformer(TransformerMixin, BaseEstimator):
    """Turn a sequence of :class:`Intrinsics` into stacked geometry tensors.

    Parameters
    ----------
    out_width, out_height : int
        Feature-map size of every output tensor.
    lut_step : float, default=0.25
        Radius step (pixels) of the root lookup table for polynomial cameras.

    Examples
    --------
    >>> from fisheyekit.synthetic import example_cameras
    >>> cams = list(example_cameras(320, 240).values())
    >>> CameraGeometryTransformer(out_width=64, out_height=48).fit_transform(cams).shape
    (6, 6, 48, 64)
    """

    def __init__(self, out_width=640, out_height=480, lut_step=0.25):
        self.out_width = out_width
        self.out_height = out_height
        self.lut_step = lut_step

    def fit(self, X=None, y=None):
        # Stateless: nothing is learned from the cameras.
        if self.out_width < 2 or self.out_height < 2:
            raise ValueError("output size must be at least 2x2")
        self.n_channels_ = 6
        return self

    def transform(self, X):
        check_is_fitted(self, "n_channels_")
        cams = list(X)
        if not all(isinstance(c, Intrinsics) for c in cams):
            raise TypeError("X must be a sequence of Intrinsics")
        return np.stack([
            assemble_tensor(c, self.out_width, self.out_height, lut_step=self.lut_step).data
            for c in cams
        ])


class RobustLossEstimator(BaseEstimator):
    """Pick the robust-loss shape and scale that best explain a set of residuals.

    Fitting minimises the mean negative log-likelihood of the residuals under
    the density ``exp(-rho(x; alpha, c)) / (c Z(alpha))`` over a grid.

    Parameters
    ----------
    alphas : sequence of float
        Candidate shapes; the density exists only for ``alpha >= 0``.
    scales : sequence of float
        Candidate positive scales.

    Attributes
    ----------
    alpha_, scale_ : float
        Selected parameters.
    nll_ : float
        Mean negative log-likelihood at the selection.
    """

    def __init__(self, alphas=(0.0, 0.5, 1.0, 1.5, 2.0), scales=(0.01, 0.03, 0.1, 0.3, 1.0)):
        self.alphas = alphas
        self.scales = scales

    def fit(self, X, y=None):
        r = np.asarray(X, dtype=float).ravel()
        if r.size == 0 or not np.isfinite(r).all():
            raise ValueError("residuals must be a non-empty finite array")
        if any(a < 0 for a in self.alphas):
            raise ValueError("alphas must be non-negative for the likelihood to exist")
        if any(not c > 0 for c in self.scales):
            raise ValueError("scales must be positive")
        self.alpha_, self.scale_, self.nll_ = fit_robust_params(r, self.alphas, self.scales)
        return self

    def loss(self, X):
        check_is_fitted(self, "alpha_")
        return robust_loss(np.asarray(X, dtype=float), self.alpha_, self.scale_)

    def score(self, X, y=None):
        """Negative mean NLL (higher is better)."""
        check_is_fitted(self, "alpha_")
        return -float(np.mean(robust_nll(np.asarray(X, dtype=float).ravel(), self.alpha_, self.scale_)))


class HeightMapFuser(TransformerMixin, BaseEstimator):
    """Fuse a sequence of frames into smoothed top-view height grids.

    Each element of ``X`` is one frame: a list of per-camera vehicle-frame
    point arrays. ``transform`` returns one grid per frame; the temporal
    filter runs across the frames of a single call.
    """

    def __init__(self, cell_size=DEFAULT_CELL, grid_range=DEFAULT_RANGE, blend=0.5, spatial=True):
        self.cell_size = cell_size
        self.grid_range = grid_range
        self.blend = blend
        self.spatial = spatial

    def fit(self, X=None, y=None):
        if not self.cell_size > 0 or not self.grid_range > 0:
            raise ValueError("cell_size and grid_range must be positive")
        if not 0 < self.blend <= 1:
            raise ValueError("blend must lie in (0, 1]")
        self.n_cells_ = int(round(2 * self.grid_range / self.cell_size))
        return self

    def transform(self, X):
        check_is_fitted(self, "n_cells_")
        state = FusionState(None, self.blend)
        out = []
        for frame in X:
            grid = build_heightmap([check_points(p) for p in frame], state,
                                   self.cell_size, self.grid_range, self.spatial)
            state = FusionState(grid, self.blend)
            out.append(grid)
        return out
