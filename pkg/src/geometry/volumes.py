"""
Geodesic Ball Volumes, Quadratic Fit and Scalar Curvature

Vol(B_r) is the inverse-density weighted count of neighbourhood members within
geodesic radius r. Normalized by the Euclidean unit-ball volume it behaves as
Vol_nor = 1 + A r^2 for small r, and S = -6 (d + 2) A.

A closed ball at the j-th neighbour radius r_j holds j + 1 points. For a Poisson
sample of intensity n, (j - 1) / (n omega_d r_j^d) averages exactly 1, so the open
count (center and boundary member left out) is the unbiased one. The scaled
fit solves Vol_nor = c (1 + A r^2), so an error in the overall density level moves
c and leaves A alone.
"""

import logging
import math
from dataclasses import dataclass
from enum import Enum
from typing import Optional, Sequence, Tuple

import numpy as np

from src.config.run_config import BallCount, FitVariant
from src.core.errors import DegenerateInputError, ParameterError
from src.diffusion.geodesic import GeodesicField
from src.geometry.density import DensityField
from src.geometry.neighborhoods import Neighborhood

logger = logging.getLogger(__name__)


def unit_ball_volume(d: int) -> float:
    """
    Volume of the unit d-ball, pi^{d/2} / Gamma(d/2 + 1).

    Uses omega_d = omega_{d-2} * 2 pi / d from omega_0 = 1, omega_1 = 2.
    """
    if int(d) != d or d < 1:
        raise ParameterError(f"dimension must be an integer >= 1, got {d}")
    d = int(d)
    omega = 1.0 if d % 2 == 0 else 2.0
    for k in range(2 + d % 2, d + 1, 2):
        omega *= 2.0 * math.pi / k
    return omega


@dataclass(frozen=True, eq=False)
class VolumeProfile:
    """Weighted ball volumes at every nonzero neighbour radius of one point."""

    center_index: int
    radii: np.ndarray
    raw_volumes: np.ndarray
    normalized_volumes: np.ndarray
    local_dim_used: int

    def clipped(self, r_min: Optional[float] = None, r_max: Optional[float] = None) -> "VolumeProfile":
        """Keep only radii inside [r_min, r_max]."""
        mask = np.ones(self.radii.shape, dtype=bool)
        if r_min is not None:
            mask &= self.radii >= r_min
        if r_max is not None:
            mask &= self.radii <= r_max
        return VolumeProfile(
            center_index=self.center_index,
            radii=self.radii[mask],
            raw_volumes=self.raw_volumes[mask],
            normalized_volumes=self.normalized_volumes[mask],
            local_dim_used=self.local_dim_used,
        )


@dataclass(frozen=True, eq=False)
class CurvatureReport:
    center_index: int
    radii: np.ndarray
    raw_volumes: np.ndarray
    normalized_volumes: np.ndarray
    fit_A: float
    local_dim_used: int
    curvature: float
    fit_variant: FitVariant
    A_ols: float
    A_paper: float
    A_scaled: Optional[float]

    def fit_points(self) -> np.ndarray:
        """(r^2, Vol_nor) pairs for plotting the quadratic fit."""
        return np.column_stack([self.radii**2, self.normalized_volumes])


def ball_volumes(
    dg: GeodesicField,
    density: DensityField,
    nb: Neighborhood,
    d: int,
    count: BallCount = BallCount.CLOSED,
) -> VolumeProfile:
    """
    Weighted ball volumes around nb's center.

    The radii are the nonzero member distances in ascending order. A closed ball
    B_r holds the center and every member within r; an open one holds the members
    with 0 < d < r.

    Raises:
        DegenerateInputError: If all members coincide with the center or a member
            has no finite weight
    """
    omega = unit_ball_volume(d)
    member_radii = dg.dg[nb.center_index, nb.member_indices]
    weights = density.inverse_weights()[nb.member_indices]
    if not np.all(np.isfinite(weights)):
        raise DegenerateInputError(
            f"neighbourhood of point {nb.center_index} has members with undefined density"
        )

    order = np.argsort(member_radii, kind="stable")
    sorted_radii = member_radii[order]
    cumulative = np.cumsum(weights[order])
    positive = sorted_radii > 0
    if not positive.any():
        raise DegenerateInputError(f"neighbourhood of point {nb.center_index} has no nonzero radius")

    radii = sorted_radii[positive]
    if BallCount(count) is BallCount.CLOSED:
        # ball at r_j includes every member with radius <= r_j, equal radii included
        raw = cumulative[np.searchsorted(sorted_radii, radii, side="right") - 1]
    else:
        before = np.concatenate([[0.0], cumulative])
        inside = np.searchsorted(sorted_radii, radii, side="left")
        raw = before[inside] - before[np.count_nonzero(~positive)]
    normalized = raw / (omega * radii**d)
    return VolumeProfile(
        center_index=nb.center_index,
        radii=radii,
        raw_volumes=raw,
        normalized_volumes=normalized,
        local_dim_used=int(d),
    )


def _fit_inputs(radii: Sequence[float], volumes: Sequence[float]) -> Tuple[np.ndarray, np.ndarray]:
    r = np.asarray(radii, dtype=float)
    v = np.asarray(volumes, dtype=float)
    if r.shape != v.shape:
        raise ParameterError("radii and volumes must have the same length")
    if not np.any(r > 0):
        raise DegenerateInputError("all radii are zero; the quadratic fit is undefined")
    if np.unique(r[r > 0]).size < 2:
        raise DegenerateInputError("the quadratic fit needs at least 2 distinct nonzero radii")
    return r, v


def ols_from_sums(weighted_excess: float, fourth_moment: float) -> float:
    """A = sum r^2 (Vol_nor - 1) / sum r^4."""
    return weighted_excess / fourth_moment


def paper_from_sums(volume_sum: float, squared_radius_sum: float, count: int) -> float:
    """A = (sum Vol_nor / count) / (1 + sum d_G^2 / count)."""
    return (volume_sum / count) / (1.0 + squared_radius_sum / count)


def fit_scaled(radii: Sequence[float], normalized_volumes: Sequence[float]) -> Tuple[float, float]:
    """
    Least squares of Vol_nor = c + B r^2; returns (A, c) with A = B / c.

    Raises:
        DegenerateInputError: With fewer than 2 distinct nonzero radii or an
            intercept c <= 0
    """
    r, v = _fit_inputs(radii, normalized_volumes)
    design = np.column_stack([np.ones_like(r), r * r])
    (c, b), *_ = np.linalg.lstsq(design, v, rcond=None)
    if not c > 0:
        raise DegenerateInputError(f"scaled fit has a nonpositive intercept {c:.3e}")
    return float(b / c), float(c)


def fit_quadratic(
    radii: Sequence[float],
    normalized_volumes: Sequence[float],
    variant: FitVariant = FitVariant.OLS,
    neighborhood_size: Optional[int] = None,
) -> float:
    """
    Fit Vol_nor = 1 + A r^2.

    Args:
        radii: Fit radii
        normalized_volumes: Vol_nor at each radius
        variant: ols (least-squares minimizer), scaled (intercept fitted as well)
            or paper_formula (closed form kept for comparison)
        neighborhood_size: Divisor |N_i| of the paper_formula variant; defaults to
            the number of radii

    Raises:
        DegenerateInputError: With fewer than 2 distinct nonzero radii, or a scaled
            fit whose intercept is not positive
    """
    r, v = _fit_inputs(radii, normalized_volumes)
    variant = FitVariant(variant)
    if variant is FitVariant.OLS:
        r2 = r * r
        return float(ols_from_sums(float(np.sum(r2 * (v - 1.0))), float(np.sum(r2 * r2))))
    if variant is FitVariant.SCALED:
        return fit_scaled(r, v)[0]
    count = neighborhood_size if neighborhood_size is not None else r.size
    return float(paper_from_sums(float(v.sum()), float(np.sum(r * r)), count))


def stationarity_residual(radii: Sequence[float], normalized_volumes: Sequence[float], A: float) -> float:
    """sum r^2 (1 + A r^2 - Vol_nor); zero at the least-squares A."""
    r2 = np.asarray(radii, dtype=float) ** 2
    return float(np.sum(r2 * (1.0 + A * r2 - np.asarray(normalized_volumes, dtype=float))))


def curvature(A: float, d: int) -> float:
    """Scalar curvature S = -6 (d + 2) A."""
    return -6.0 * (d + 2) * A
