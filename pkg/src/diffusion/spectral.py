"""
Spectral Decomposition

Eigen-decomposition of the kernel, of the diffusion operator (through its
symmetric conjugate) and of arbitrary symmetric operators such as Gram matrices.
"""

import logging
from dataclasses import dataclass
from enum import Enum
from typing import Optional, Union

import numpy as np
import scipy.linalg

from src.core.errors import NumericalError, ParameterError
from src.diffusion.kernel import DiffusionOperator, KernelMatrix

logger = logging.getLogger(__name__)

RESIDUAL_TOLERANCE = 1e-8


class OperatorTag(str, Enum):
    """Which operator a decomposition belongs to."""
    K = "K"
    P = "P"
    P_SYM = "symmetrized-P"
    GRAM = "gram"


@dataclass(frozen=True, eq=False)
class SpectralDecomposition:
    """
    Eigenvalues in descending order with unit-norm eigenvectors as columns.

    For tag P the columns are right eigenvectors of P (not orthogonal in general);
    `symmetric_eigenvectors` then holds the orthonormal eigenvectors of P_sym.
    """

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    operator_tag: OperatorTag
    symmetric_eigenvectors: Optional[np.ndarray] = None
    max_residual: float = 0.0

    @property
    def size(self) -> int:
        return self.eigenvalues.shape[0]


def apply_sign_convention(vectors: np.ndarray) -> np.ndarray:
    """Flip each column so that its largest-magnitude component is positive."""
    vectors = np.array(vectors, dtype=float, copy=True)
    if vectors.ndim == 1:
        idx = int(np.argmax(np.abs(vectors)))
        return -vectors if vectors[idx] < 0 else vectors
    idx = np.argmax(np.abs(vectors), axis=0)
    signs = np.sign(vectors[idx, np.arange(vectors.shape[1])])
    signs[signs == 0] = 1.0
    return vectors * signs


def symmetric_conjugate(op: DiffusionOperator) -> np.ndarray:
    """P_sym = D^{1/2} P D^{-1/2}, symmetrized to remove roundoff asymmetry."""
    root = np.sqrt(op.row_sums_of_k)
    p_sym = root[:, None] * op.p / root[None, :]
    return 0.5 * (p_sym + p_sym.T)


def _eigh_descending(matrix: np.ndarray):
    try:
        values, vectors = scipy.linalg.eigh(matrix)
    except (np.linalg.LinAlgError, ValueError) as e:
        raise NumericalError(f"symmetric eigensolver failed: {e}") from e
    return values[::-1].copy(), vectors[:, ::-1].copy()


def _residual(matrix: np.ndarray, values: np.ndarray, vectors: np.ndarray) -> float:
    return float(np.max(np.linalg.norm(matrix @ vectors - vectors * values, axis=0)))


def spectral_decompose(
    operator: Union[KernelMatrix, DiffusionOperator, np.ndarray],
    tag: Union[OperatorTag, str, None] = None,
) -> SpectralDecomposition:
    """
    Decompose an operator into descending eigenpairs.

    Args:
        operator: A KernelMatrix, a DiffusionOperator or a symmetric ndarray
        tag: Operator tag; inferred from the operator type when omitted

    Returns:
        SpectralDecomposition whose residual ||M psi - lambda psi|| is at most
        1e-8 * ||M|| for every pair

    Raises:
        ParameterError: If the operator is not square or not finite
        NumericalError: If the eigensolver fails or the residual check does not hold
    """
    if tag is None:
        tag = OperatorTag.P if isinstance(operator, DiffusionOperator) else OperatorTag.K
    tag = OperatorTag(tag)

    if isinstance(operator, DiffusionOperator):
        if tag is not OperatorTag.P:
            raise ParameterError(f"a diffusion operator must be decomposed with tag P, got {tag.value}")
        matrix = operator.p
    elif isinstance(operator, KernelMatrix):
        matrix = operator.k
    else:
        matrix = np.asarray(operator, dtype=float)
        if tag is OperatorTag.P:
            raise ParameterError("tag P requires a DiffusionOperator (its row sums are needed)")

    if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1]:
        raise ParameterError(f"operator must be square, got shape {matrix.shape}")
    if not np.isfinite(matrix).all():
        raise ParameterError("operator has non-finite entries")

    symmetric_vectors = None
    if tag is OperatorTag.P:
        values, phi = _eigh_descending(symmetric_conjugate(operator))
        psi = phi / np.sqrt(operator.row_sums_of_k)[:, None]
        psi /= np.linalg.norm(psi, axis=0, keepdims=True)
        vectors = apply_sign_convention(psi)
        symmetric_vectors = apply_sign_convention(phi)
    else:
        values, vectors = _eigh_descending(0.5 * (matrix + matrix.T))
        vectors = apply_sign_convention(vectors)

    residual = _residual(matrix, values, vectors)
    scale = max(float(np.linalg.norm(matrix, 2)), np.finfo(float).tiny)
    if residual > RESIDUAL_TOLERANCE * scale:
        raise NumericalError(
            f"eigenpair residual exceeds {RESIDUAL_TOLERANCE:g} * ||M|| for tag {tag.value}",
            residual=residual,
        )

    logger.debug(
        f"Decomposed {tag.value} operator of size {matrix.shape[0]}",
        extra={"lambda_max": float(values[0]), "lambda_min": float(values[-1]), "residual": residual},
    )
    for arr in (values, vectors):
        arr.setflags(write=False)
    return SpectralDecomposition(
        eigenvalues=values,
        eigenvectors=vectors,
        operator_tag=tag,
        symmetric_eigenvectors=symmetric_vectors,
        max_residual=residual,
    )
