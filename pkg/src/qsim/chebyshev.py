"""
Chebyshev Approximation of the Gaussian

Interpolates exp(-(s x)^2) at the degree + 1 Chebyshev points of the first kind
and measures the sup error on a dense grid over [-1, 1].
"""

import logging
import math
from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np
from numpy.polynomial import chebyshev as C

from src.core.errors import ParameterError

logger = logging.getLogger(__name__)

ERROR_GRID_POINTS = 10_001

# decay constants of the Gaussian's Chebyshev error, sup_error(p) ~ C exp(-alpha p)
DECAY_C = 0.1
DECAY_ALPHA = 1.09


@dataclass(frozen=True, eq=False)
class ChebyshevApprox:
    """P(x) = factor * sum_k a_k T_k(x) approximating factor * exp(-(scale x)^2)."""

    degree: int
    coefficients: np.ndarray
    sup_error: float
    scale: float = 1.0
    factor: float = 1.0

    def __call__(self, x) -> np.ndarray:
        return C.chebval(np.asarray(x, dtype=float), self.coefficients)

    def target(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return self.factor * np.exp(-((self.scale * x) ** 2))

    def scaled(self, factor: float) -> "ChebyshevApprox":
        """Multiply the polynomial (and its error) by factor, e.g. 1/2 for an eigenvalue transform."""
        return replace(
            self,
            coefficients=self.coefficients * factor,
            sup_error=self.sup_error * abs(factor),
            factor=self.factor * factor,
        )

    @classmethod
    def from_power_coefficients(cls, coefficients: Sequence[float]) -> "ChebyshevApprox":
        """Exact polynomial given in the monomial basis (sup_error 0)."""
        cheb = C.poly2cheb(np.asarray(coefficients, dtype=float))
        return cls(degree=len(cheb) - 1, coefficients=cheb, sup_error=0.0, scale=0.0, factor=0.0)


def measured_sup_error(approx: ChebyshevApprox, grid_points: int = ERROR_GRID_POINTS) -> float:
    grid = np.linspace(-1.0, 1.0, grid_points)
    return float(np.max(np.abs(approx.target(grid) - approx(grid))))


def cheb_gaussian(p: int, scale: float = 1.0) -> ChebyshevApprox:
    """
    Degree-p Chebyshev interpolant of exp(-(scale x)^2) on [-1, 1].

    Args:
        p: Degree (>= 0)
        scale: Width parameter; 1 gives exp(-x^2)

    Returns:
        ChebyshevApprox whose sup_error is the maximum deviation over a
        10^4-point grid
    """
    if int(p) != p or p < 0:
        raise ParameterError(f"Chebyshev degree must be a non-negative integer, got {p}")
    if not (math.isfinite(scale) and scale >= 0):
        raise ParameterError(f"Gaussian scale must be finite and >= 0, got {scale}")
    p = int(p)
    coefficients = C.chebinterpolate(lambda x: np.exp(-((scale * x) ** 2)), p)
    approx = ChebyshevApprox(degree=p, coefficients=coefficients, sup_error=0.0, scale=float(scale))
    approx = replace(approx, sup_error=measured_sup_error(approx))
    logger.debug(f"Chebyshev Gaussian p={p} scale={scale:g} sup_error={approx.sup_error:.3e}")
    return approx


def default_degree(target_eps: float) -> int:
    """Smallest p with C exp(-alpha p) <= target_eps."""
    if not 0 < target_eps < DECAY_C:
        raise ParameterError(f"target error must lie in (0, {DECAY_C}), got {target_eps}")
    return math.ceil(math.log(DECAY_C / target_eps) / DECAY_ALPHA)


def decay_envelope(p: int) -> float:
    """Conservative sup-error envelope 0.5 exp(-0.9 p)."""
    return 0.5 * math.exp(-0.9 * p)
