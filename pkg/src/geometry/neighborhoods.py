"""
Geodesic Neighbourhoods

A neighbourhood holds its center first (radius 0) followed by the nn - 1 nearest
other points in ascending geodesic distance, ties broken by ascending index.
A ball neighbourhood instead holds every point within a radius, and never fewer
than the nn nearest.
"""

import logging
from dataclasses import dataclass
from typing import List, Union

import numpy as np

from src.core.errors import ParameterError
from src.diffusion.geodesic import GeodesicField

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class Neighborhood:
    """Points closest to a center in ascending distance, the center first."""

    center_index: int
    member_indices: np.ndarray
    geodesic_radii: np.ndarray

    @property
    def size(self) -> int:
        return int(self.member_indices.shape[0])

    @property
    def outer_radius(self) -> float:
        return float(self.geodesic_radii[-1])

    def nonzero_radii(self) -> np.ndarray:
        return self.geodesic_radii[self.geodesic_radii > 0]


def _distance_rows(dg: Union[GeodesicField, np.ndarray]) -> np.ndarray:
    return dg.dg if isinstance(dg, GeodesicField) else np.asarray(dg, dtype=float)


def check_neighborhood_size(n_points: int, nn: int) -> None:
    """Raise ParameterError unless 2 <= nn < n_points."""
    if nn < 2:
        raise ParameterError(f"neighbourhood size nn must be >= 2, got {nn}")
    if nn >= n_points:
        raise ParameterError(
            f"neighbourhood size nn={nn} needs more points; the cloud has only {n_points}"
        )


def nearest_neighborhood(dg: Union[GeodesicField, np.ndarray], i: int, nn: int) -> Neighborhood:
    """
    Build the geodesic neighbourhood of point i.

    Raises:
        ParameterError: If nn is outside [2, N) or i is not a valid index
    """
    rows = _distance_rows(dg)
    n = rows.shape[0]
    check_neighborhood_size(n, nn)
    if not 0 <= i < n:
        raise ParameterError(f"point index {i} out of range for {n} points")

    others = np.delete(np.arange(n), i)
    dist = rows[i, others]
    order = np.lexsort((others, dist))[: nn - 1]
    members = np.concatenate([[i], others[order]]).astype(int)
    radii = np.concatenate([[0.0], dist[order]])
    members.setflags(write=False)
    radii.setflags(write=False)
    return Neighborhood(center_index=int(i), member_indices=members, geodesic_radii=radii)


def all_neighborhoods(dg: Union[GeodesicField, np.ndarray], nn: int) -> List[Neighborhood]:
    """Neighbourhood of every point, in index order."""
    rows = _distance_rows(dg)
    check_neighborhood_size(rows.shape[0], nn)
    return [nearest_neighborhood(rows, i, nn) for i in range(rows.shape[0])]


def ball_neighborhood(
    dg: Union[GeodesicField, np.ndarray], i: int, radius: float, min_size: int
) -> Neighborhood:
    """
    Every point within radius of i, at least the min_size nearest.

    Raises:
        ParameterError: If radius < 0 or min_size is outside [2, N)
    """
    if not radius >= 0:
        raise ParameterError(f"ball radius must be >= 0, got {radius}")
    rows = _distance_rows(dg)
    nearest = nearest_neighborhood(rows, i, min_size)
    if nearest.outer_radius > radius:
        return nearest

    others = np.delete(np.arange(rows.shape[0]), i)
    dist = rows[i, others]
    inside = dist <= radius
    others, dist = others[inside], dist[inside]
    order = np.lexsort((others, dist))
    members = np.concatenate([[i], others[order]]).astype(int)
    radii = np.concatenate([[0.0], dist[order]])
    members.setflags(write=False)
    radii.setflags(write=False)
    return Neighborhood(center_index=int(i), member_indices=members, geodesic_radii=radii)
