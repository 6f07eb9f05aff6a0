"""
Kernel Column and Gram Encodings

The Gaussian kernel is built as a column state over index pairs (i, j): the
normalized distance column u = d / max d feeds the Chebyshev recurrence
T_{k+1}(u) = 2 u T_k(u) - T_{k-1}(u) (entrywise products plus LCU), and the
Chebyshev coefficients of exp(-(Y u)^2), Y = max d / sigma, combine the T_k
columns. Tracing out the second index of |g><g| gives K^T K.
"""

import logging
import math
from typing import List, Tuple

import numpy as np

from src.core.errors import DegenerateInputError, ParameterError
from src.pointcloud.cloud import DistanceMatrix
from src.qsim.block_encoding import BlockEncoding, CostCounter
from src.qsim.chebyshev import ChebyshevApprox, cheb_gaussian
from src.qsim.columns import ColumnState, encode_column, index_qubits, uniform_column

logger = logging.getLogger(__name__)


def distance_column(d: DistanceMatrix) -> ColumnState:
    """
    Column of d_ij / max d over index pairs (i, j), flattened row-major.

    Same state as the prepared column d / ||d||_F, expressed with subnorm ||d||_F / max d.
    """
    flat = np.asarray(d.d, dtype=float).ravel()
    peak = float(flat.max())
    if peak == 0.0:
        raise DegenerateInputError("all points coincide; the distance column is zero")
    prepared = encode_column(flat)
    return ColumnState(flat / peak, prepared.subnorm / peak, 0.0, prepared.cost)


def chebyshev_columns(u: ColumnState, degree: int) -> List[ColumnState]:
    """
    Columns T_0(u) .. T_degree(u) for a column with entries in [-1, 1].

    Every T_k(u) stays in [-1, 1] entrywise, so each column carries the subnorm
    sqrt(size). Each recurrence step costs one entrywise product and one LCU.
    """
    if np.max(np.abs(u.vector), initial=0.0) > 1 + 1e-12:
        raise ParameterError("Chebyshev recurrence needs column entries in [-1, 1]")
    bound = math.sqrt(u.size)
    step_cost = CostCounter().tick("entrywise_product", index_qubits(u.size)).tick("lcu")
    columns = [uniform_column(u.size)]
    if degree >= 1:
        columns.append(ColumnState(u.vector, bound, u.err, u.cost))
    for _ in range(1, degree):
        prev, cur = columns[-2], columns[-1]
        nxt = 2.0 * u.vector * cur.vector - prev.vector
        columns.append(ColumnState(nxt, bound, max(cur.err, prev.err), cur.cost + step_cost))
    return columns


def kernel_column(d: DistanceMatrix, sigma2: float, degree: int) -> Tuple[ColumnState, ChebyshevApprox]:
    """
    Gaussian column g_(i,j) ~ exp(-d_ij^2 / sigma^2).

    Returns:
        The column (subnorm sum_k |a_k| sqrt(N^2), error sqrt(N^2) * sup_error) and
        the Chebyshev approximation used
    """
    if not (math.isfinite(sigma2) and sigma2 > 0):
        raise ParameterError(f"sigma2 must be > 0, got {sigma2}")
    u = distance_column(d)
    width = float(np.max(d.d)) / math.sqrt(sigma2)
    approx = cheb_gaussian(degree, width)
    columns = chebyshev_columns(u, degree)
    vector = sum(a * col.vector for a, col in zip(approx.coefficients, columns))
    bound = math.sqrt(u.size)
    subnorm = float(np.sum(np.abs(approx.coefficients))) * bound
    cost = columns[-1].cost.tick("lcu")
    logger.debug(
        f"Kernel column over {u.size} index pairs, degree {degree}, width {width:.4g}",
        extra={"sup_error": approx.sup_error, "subnorm": subnorm},
    )
    return ColumnState(vector, subnorm, approx.sup_error * bound, cost), approx


def kernel_matrix_encoding(column: ColumnState, n_points: int) -> BlockEncoding:
    """Encoding of K from its column: ||K|| <= ||K||_F = ||g|| <= alpha."""
    if column.size != n_points * n_points:
        raise ParameterError(f"column of size {column.size} is not an {n_points}x{n_points} kernel")
    return BlockEncoding(
        column.vector.reshape(n_points, n_points),
        column.subnorm,
        column.err,
        column.cost,
        "K",
    )


def gram_from_column(column: ColumnState, n_points: int) -> BlockEncoding:
    """
    Partial trace over the second index of |g><g|: sum_j g_ij g_kj = (G G^T)_ik.

    With g holding K this is K^T K, subnormalized by ||g||^2 bound alpha^2.
    """
    g = column.vector.reshape(n_points, n_points)
    alpha, eps = column.subnorm, column.err
    return BlockEncoding(
        g @ g.T,
        alpha**2,
        max(2 * alpha * eps + eps**2, eps),
        column.cost.tick("density_matrix").tick("partial_trace"),
        "K^T K",
    )


def build_kernel_gram_encoding(d: DistanceMatrix, sigma2: float, degree: int = 40) -> BlockEncoding:
    """Block encoding proportional to K^T K built from the kernel column."""
    column, _ = kernel_column(d, sigma2, degree)
    return gram_from_column(column, d.n_points)
