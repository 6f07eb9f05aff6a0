"""
Heat-Kernel Density

rho(x_i) = sum over the neighbourhood of exp(-d_G^2 / h^2), self term included,
and its conversion into a sampling intensity (points per unit d-volume).
"""

import logging
import math
from dataclasses import dataclass, replace
from typing import Optional, Sequence, Union

import numpy as np
from scipy.special import gammainc

from src.core.errors import DegenerateInputError, ParameterError
from src.core.stats import lower_median
from src.diffusion.geodesic import GeodesicField
from src.geometry.neighborhoods import Neighborhood

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class DensityField:
    """
    Heat-kernel sums per point.

    `intensity` is set by sampling_intensity; when present, volume weights use it
    instead of the raw sum.
    """

    rho: np.ndarray
    h: float
    intensity: Optional[np.ndarray] = None

    def inverse_weights(self) -> np.ndarray:
        """Weights 1/density used for weighted counting of ball members."""
        base = self.intensity if self.intensity is not None else self.rho
        return 1.0 / base


def _check_h(h: float) -> None:
    if not (math.isfinite(h) and h > 0):
        raise ParameterError(f"density kernel scale h must be > 0, got {h}")


def density_field(
    dg: GeodesicField, neighborhoods: Sequence[Neighborhood], h: float
) -> DensityField:
    """
    Heat-kernel density at every point over its own neighbourhood.

    Raises:
        ParameterError: If h <= 0
    """
    _check_h(h)
    rho = np.empty(len(neighborhoods))
    for nb in neighborhoods:
        radii = dg.dg[nb.center_index, nb.member_indices]
        rho[nb.center_index] = np.exp(-(radii**2) / h**2).sum()
    assert np.all(rho >= 1.0 - 1e-12), "rho below the self-term floor of 1"
    rho.setflags(write=False)
    return DensityField(rho=rho, h=float(h))


def default_h(neighborhoods: Sequence[Neighborhood]) -> float:
    """
    Typical in-neighbourhood geodesic distance.

    Lower median over points of each point's lower-median nonzero radius.
    """
    per_point = [lower_median(nb.nonzero_radii()) for nb in neighborhoods if nb.nonzero_radii().size]
    if not per_point:
        raise DegenerateInputError("every neighbourhood is collapsed to a point; h cannot be chosen")
    return float(lower_median(per_point))


def resolve_h(neighborhoods: Sequence[Neighborhood], h: Union[float, str]) -> float:
    """Turn a configured h ('auto' or a number) into a value."""
    return default_h(neighborhoods) if h == "auto" else float(h)


def sampling_intensity(
    density: DensityField,
    neighborhoods: Sequence[Neighborhood],
    dims: Union[int, Sequence[int], np.ndarray],
) -> DensityField:
    """
    Divide rho by the Gaussian mass of a truncated d-ball.

    On a flat d-manifold sampled with intensity n, rho_i is close to
    n * (pi h^2)^{d/2} * P(d/2, R_i^2 / h^2), with P the regularized lower incomplete
    gamma function and R_i the outer radius of the neighbourhood. Points whose
    neighbourhood has zero outer radius get NaN.

    Args:
        density: Raw heat-kernel sums
        neighborhoods: Neighbourhoods the sums were taken over (index order)
        dims: One dimension for every point, or a single global one
    """
    n = density.rho.shape[0]
    d = np.broadcast_to(np.asarray(dims, dtype=float), (n,))
    if np.any(d < 1):
        raise ParameterError("intrinsic dimension must be >= 1")
    h2 = density.h**2
    outer = np.array([nb.outer_radius for nb in neighborhoods])
    mass = (np.pi * h2) ** (d / 2.0) * gammainc(d / 2.0, outer**2 / h2)
    with np.errstate(divide="ignore", invalid="ignore"):
        intensity = np.where(mass > 0, density.rho / mass, np.nan)
    if np.isnan(intensity).any():
        logger.warning(f"{int(np.isnan(intensity).sum())} point(s) have collapsed neighbourhoods")
    intensity.setflags(write=False)
    return replace(density, intensity=intensity)
