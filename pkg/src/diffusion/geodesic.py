"""
Geodesic Distance Estimation

The t-step diffusion distance d_G^2(x_i, x_j) = sum_k lambda_k^{2t} (psi_ik - psi_jk)^2
serves as the geodesic proxy. It is the Euclidean distance between the spectral
feature vectors (lambda_k^t psi_ik)_k, and is computed that way.

A diffusion distance is a chord in the spectral embedding, and chord balls hide
intrinsic curvature (on a round sphere their area grows exactly like a flat
disk). graph_geodesic_field measures path lengths instead: shortest paths through
the graph joining every point to its neighbourhood, edges at ambient length.
"""

import logging
from dataclasses import dataclass, replace
from enum import Enum
from typing import Sequence

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import shortest_path
from scipy.spatial.distance import pdist, squareform

from src.core.errors import DegenerateInputError, DomainError, ParameterError
from src.core.stats import lower_median
from src.diffusion.spectral import OperatorTag, SpectralDecomposition
from src.pointcloud.cloud import DistanceMatrix

logger = logging.getLogger(__name__)

NEGATIVE_EIGENVALUE_CLIP = -1e-12


class GeodesicSource(str, Enum):
    """Spectrum the geodesic field was built from."""
    K_SPECTRUM = "K-spectrum"
    P_SPECTRUM = "P-spectrum"
    GRAPH_PATHS = "graph-paths"


@dataclass(frozen=True, eq=False)
class GeodesicField:
    """N x N estimated geodesic distances."""

    dg: np.ndarray
    t: float
    source_tag: GeodesicSource
    scale: float = 1.0

    @property
    def n_points(self) -> int:
        return self.dg.shape[0]

    def rescaled(self, factor: float) -> "GeodesicField":
        """Multiply every distance by factor (> 0); scale records the cumulative factor."""
        if not factor > 0:
            raise ParameterError(f"rescale factor must be > 0, got {factor}")
        dg = self.dg * factor
        dg.setflags(write=False)
        return replace(self, dg=dg, scale=self.scale * factor)


def spectral_weights(spec: SpectralDecomposition, t: float) -> np.ndarray:
    """
    Per-mode weights lambda_k^{2t}.

    For a Gram decomposition the eigenvalues already are lambda_k^2 of the kernel,
    so the weight is mu_k^t.

    Raises:
        DomainError: If a fractional power meets an eigenvalue below -1e-12
    """
    values = np.asarray(spec.eigenvalues, dtype=float)
    gram = spec.operator_tag is OperatorTag.GRAM
    if float(t).is_integer() and not gram:
        return (values * values) ** t

    if np.any(values < NEGATIVE_EIGENVALUE_CLIP):
        worst = float(values.min())
        raise DomainError(
            f"eigenvalue {worst:.3e} is negative beyond roundoff; power with t={t} is undefined",
            residual=worst,
        )
    values = np.clip(values, 0.0, None)
    return values**t if gram else values ** (2.0 * t)


def geodesic_field(spec: SpectralDecomposition, t: float = 1.0) -> GeodesicField:
    """
    Diffusion-distance geodesic field from a spectral decomposition.

    Args:
        spec: Decomposition of K, P (or the Gram matrix K^T K)
        t: Diffusion timestep (> 0)

    Raises:
        ParameterError: If t <= 0
        DomainError: If an eigenvalue is negative beyond roundoff for fractional t
    """
    if not t > 0:
        raise ParameterError(f"diffusion timestep t must be > 0, got {t}")
    weights = spectral_weights(spec, t)
    features = spec.eigenvectors * np.sqrt(weights)[None, :]
    dg = squareform(pdist(features, metric="euclidean"))
    dg.setflags(write=False)

    if spec.operator_tag in (OperatorTag.P, OperatorTag.P_SYM):
        source = GeodesicSource.P_SPECTRUM
    else:
        source = GeodesicSource.K_SPECTRUM
    logger.debug(f"Geodesic field from {source.value} at t={t}", extra={"n_points": dg.shape[0]})
    return GeodesicField(dg=dg, t=float(t), source_tag=source)


def calibrate_geodesic_scale(field: GeodesicField, distances: DistanceMatrix) -> float:
    """
    Factor giving the diffusion distance length units.

    For every point take its geodesic nearest neighbour (ties by index) and the
    ratio Euclidean / geodesic distance to it; return the lower median ratio.
    At the smallest scale geodesic and Euclidean distances agree on a manifold.

    Raises:
        DegenerateInputError: If no point has a neighbour at nonzero geodesic distance
    """
    dg = np.array(field.dg, dtype=float, copy=True)
    np.fill_diagonal(dg, np.inf)
    nearest = np.argmin(dg, axis=1)  # first minimum = lowest index on ties
    rows = np.arange(dg.shape[0])
    geo = dg[rows, nearest]
    euc = distances.d[rows, nearest]
    valid = (geo > 0) & np.isfinite(geo) & (euc > 0)
    if not valid.any():
        raise DegenerateInputError(
            "cannot calibrate geodesic scale: all nearest geodesic distances are zero"
        )
    factor = lower_median(euc[valid] / geo[valid])
    logger.debug(f"Geodesic scale factor {factor:.6g} from {int(valid.sum())} nearest pairs")
    return float(factor)


def graph_geodesic_field(
    distances: DistanceMatrix, neighbor_lists: Sequence[Sequence[int]]
) -> GeodesicField:
    """
    Shortest-path lengths through the neighbour graph.

    Point i is joined to every index in neighbor_lists[i] (and back) by an edge of
    ambient length; pairs in different components stay at infinity.

    Raises:
        ParameterError: If the lists do not cover every point
    """
    n = distances.n_points
    if len(neighbor_lists) != n:
        raise ParameterError(f"need a neighbour list for each of the {n} points, got {len(neighbor_lists)}")
    rows = np.concatenate([np.full(len(members), i) for i, members in enumerate(neighbor_lists)])
    cols = np.concatenate([np.asarray(members, dtype=int) for members in neighbor_lists])
    keep = rows != cols
    rows, cols = rows[keep], cols[keep]
    lengths = distances.d[rows, cols]
    # coincident points would read as missing edges in a sparse matrix
    lengths = np.where(lengths > 0, lengths, np.finfo(float).tiny)
    graph = csr_matrix((lengths, (rows, cols)), shape=(n, n))
    dg = shortest_path(graph, method="D", directed=False)
    np.fill_diagonal(dg, 0.0)
    dg.setflags(write=False)

    unreachable = int(np.isinf(dg).sum())
    if unreachable:
        logger.warning(f"Neighbour graph is disconnected; {unreachable // 2} pair(s) have no path")
    logger.debug(f"Graph geodesic field over {rows.size} directed edges", extra={"n_points": n})
    return GeodesicField(dg=dg, t=0.0, source_tag=GeodesicSource.GRAPH_PATHS)


def bridge_components(field: GeodesicField, distances: DistanceMatrix) -> GeodesicField:
    """Replace every missing path length with the ambient distance of the pair."""
    missing = np.isinf(field.dg)
    if not missing.any():
        return field
    logger.warning(f"Bridging {int(missing.sum()) // 2} pair(s) without a path at ambient distance")
    dg = np.where(missing, distances.d, field.dg)
    dg.setflags(write=False)
    return replace(field, dg=dg)
