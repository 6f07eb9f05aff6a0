"""
Affinity Kernel and Diffusion Operator

Gaussian affinity K_ij = exp(-d_ij^2 / sigma^2) and its row-normalized random-walk
operator P = D^-1 K, where D holds the row sums of K.
"""

import logging
import math
from dataclasses import dataclass
from typing import Union

import numpy as np

from src.core.errors import DegenerateInputError, ParameterError
from src.core.stats import lower_median
from src.pointcloud.cloud import DistanceMatrix

logger = logging.getLogger(__name__)


def median_sigma2(d: DistanceMatrix) -> float:
    """
    Kernel scale heuristic: lower median of the off-diagonal squared distances.

    Raises:
        DegenerateInputError: If the median is zero (all or most points coincide)
    """
    if d.n_points < 2:
        raise ParameterError("median_sigma2 needs at least 2 points")
    iu = np.triu_indices(d.n_points, k=1)
    squared = d.d[iu] ** 2
    sigma2 = lower_median(squared)
    if not sigma2 > 0:
        raise DegenerateInputError(
            "median squared distance is zero; points coincide and no kernel scale exists"
        )
    logger.debug(f"Median heuristic sigma2={sigma2:.6g} over {squared.size} pairs")
    return float(sigma2)


@dataclass(frozen=True, eq=False)
class KernelMatrix:
    """Symmetric Gaussian affinity matrix with unit diagonal."""

    k: np.ndarray
    sigma2: float

    @property
    def n_points(self) -> int:
        return self.k.shape[0]


@dataclass(frozen=True, eq=False)
class DiffusionOperator:
    """Row-stochastic P = D^-1 K together with the normalizers D_ii = sum_k K_ik."""

    p: np.ndarray
    row_sums_of_k: np.ndarray

    @property
    def n_points(self) -> int:
        return self.p.shape[0]


def resolve_sigma2(d: DistanceMatrix, sigma2: Union[float, str]) -> float:
    """Turn a configured sigma2 ('auto' or a number) into a value."""
    if sigma2 == "auto":
        return median_sigma2(d)
    return float(sigma2)


def build_kernel(d: DistanceMatrix, sigma2: float) -> KernelMatrix:
    """
    Gaussian affinity kernel.

    Raises:
        ParameterError: If sigma2 is not a finite positive number
    """
    if not (math.isfinite(sigma2) and sigma2 > 0):
        raise ParameterError(f"sigma2 must be > 0, got {sigma2}")
    k = np.exp(-d.squared() / sigma2)
    np.fill_diagonal(k, 1.0)
    k.setflags(write=False)
    return KernelMatrix(k=k, sigma2=float(sigma2))


def build_diffusion_operator(kernel: KernelMatrix) -> DiffusionOperator:
    """Row-normalize K into a Markov transition matrix."""
    row_sums = kernel.k.sum(axis=1)
    p = kernel.k / row_sums[:, None]
    p.setflags(write=False)
    row_sums.setflags(write=False)
    return DiffusionOperator(p=p, row_sums_of_k=row_sums)
