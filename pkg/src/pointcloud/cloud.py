"""
Point Clouds and Euclidean Distances

A PointCloud is an immutable N x m coordinate matrix with optional provenance
metadata for synthetic manifolds.
"""

from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Optional

import numpy as np
from scipy.spatial.distance import pdist, squareform

from src.core.errors import InputError

if TYPE_CHECKING:
    from src.pointcloud.synth import ManifoldMeta


@dataclass(frozen=True, eq=False)
class PointCloud:
    """N points in R^m (rows are points)."""

    points: np.ndarray
    meta: Optional["ManifoldMeta"] = field(default=None, compare=False)

    def __post_init__(self):
        pts = np.array(self.points, dtype=float, copy=True)
        if pts.ndim != 2:
            raise InputError(f"points must be a 2-D array, got shape {pts.shape}")
        if pts.shape[0] < 2:
            raise InputError(f"a point cloud needs at least 2 points, got {pts.shape[0]}")
        if pts.shape[1] < 1:
            raise InputError("points need at least one coordinate")
        bad = np.flatnonzero(~np.isfinite(pts).all(axis=1))
        if bad.size:
            raise InputError(f"non-finite coordinate in row {int(bad[0])}", row=int(bad[0]))
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)

    @property
    def n_points(self) -> int:
        return self.points.shape[0]

    @property
    def ambient_dim(self) -> int:
        return self.points.shape[1]

    def transformed(self, rotation: np.ndarray, translation: np.ndarray) -> "PointCloud":
        """Apply x -> R x + b to every point (meta is dropped)."""
        return PointCloud(self.points @ np.asarray(rotation).T + np.asarray(translation))

    def permuted(self, order: np.ndarray) -> "PointCloud":
        """Relabel points: new row k is old row order[k]."""
        return PointCloud(self.points[np.asarray(order)], meta=self.meta)


@dataclass(frozen=True, eq=False)
class DistanceMatrix:
    """Symmetric N x N Euclidean separations with zero diagonal."""

    d: np.ndarray

    @property
    def n_points(self) -> int:
        return self.d.shape[0]

    def squared(self) -> np.ndarray:
        return self.d * self.d


def pairwise_distances(cloud: PointCloud) -> DistanceMatrix:
    """
    Euclidean distance between every pair of points.

    pdist computes each unordered pair once, so the result is exactly symmetric
    with an exact zero diagonal.

    Raises:
        InputError: If any coordinate is non-finite (names the row).
    """
    pts = np.asarray(cloud.points, dtype=float)
    bad = np.flatnonzero(~np.isfinite(pts).all(axis=1))
    if bad.size:
        raise InputError(f"non-finite coordinate in row {int(bad[0])}", row=int(bad[0]))
    d = squareform(pdist(pts, metric="euclidean"))
    d.setflags(write=False)
    return DistanceMatrix(d=d)
