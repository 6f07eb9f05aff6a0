"""
Local PCA and Intrinsic Dimension

d_i is the smallest p whose leading squared singular values of the centered
neighbourhood matrix explain at least a fraction tau of the total variance.
"""

import logging
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np
import scipy.linalg

from src.core.errors import DegenerateInputError, ParameterError
from src.core.stats import lower_median
from src.geometry.neighborhoods import Neighborhood
from src.pointcloud.cloud import PointCloud

logger = logging.getLogger(__name__)

# cumulative ratios are compared with this slack so exact-rank data hit tau
_RATIO_SLACK = 1e-12


@dataclass(frozen=True, eq=False)
class LocalPCA:
    centroid: np.ndarray
    centered_matrix: np.ndarray
    singular_values: np.ndarray
    local_dim: int
    tau: float

    def gram(self) -> np.ndarray:
        """C_i^T C_i (D x D)."""
        return self.centered_matrix.T @ self.centered_matrix

    def explained_ratios(self) -> np.ndarray:
        squared = self.singular_values**2
        return np.cumsum(squared) / squared.sum()


def check_tau(tau: float) -> None:
    if not 0.0 < tau < 1.0:
        raise ParameterError(f"tau must lie in (0, 1), got {tau}")


def prefix_dimension(leading: Iterable[float], total: float, tau: float) -> int:
    """
    Minimal p with sum of the first p values >= tau * total.

    `leading` may be a lazy iterator of descending variances; it is consumed only
    as far as needed.

    Raises:
        DegenerateInputError: If total is not positive
        ParameterError: If the values never reach the threshold
    """
    check_tau(tau)
    if not total > 0:
        raise DegenerateInputError("zero total variance: all neighbourhood members coincide")
    running = 0.0
    for p, value in enumerate(leading, start=1):
        running += float(value)
        if running / total >= tau - _RATIO_SLACK:
            return p
    raise ParameterError(f"explained variance never reached tau={tau} (reached {running / total:.6g})")


def local_pca(cloud: PointCloud, nb: Neighborhood, tau: float) -> LocalPCA:
    """
    Centered SVD of a neighbourhood and its local dimension.

    Raises:
        ParameterError: If tau is outside (0, 1)
        DegenerateInputError: If every member sits at the same coordinates
    """
    check_tau(tau)
    members = cloud.points[nb.member_indices]
    centroid = members.mean(axis=0)
    centered = members - centroid
    singular_values = scipy.linalg.svd(centered, compute_uv=False)
    squared = singular_values**2
    total = float(squared.sum())
    scale = float(np.max(np.abs(members)))
    if total <= nb.size * (np.finfo(float).eps * scale) ** 2:
        raise DegenerateInputError(
            f"neighbourhood of point {nb.center_index} has zero variance (all members identical)"
        )
    local_dim = prefix_dimension(squared, total, tau)
    return LocalPCA(
        centroid=centroid,
        centered_matrix=centered,
        singular_values=singular_values,
        local_dim=local_dim,
        tau=float(tau),
    )


def global_dimension(local_dims: Sequence[int]) -> int:
    """Lower median of the local dimensions."""
    if len(local_dims) == 0:
        raise ParameterError("global_dimension needs at least one local dimension")
    return int(lower_median([int(d) for d in local_dims]))
