"""
Diffusion-Map Embedding

K~ = Q^-1 K Q^-1 removes the sampling density (q_i = sum_j K_ij), P = D^-1 K~ is
its random walk, and each point is embedded as (lambda_k^t psi_k(x_i))_k over the
leading right eigenvectors of P.
"""

import logging
from dataclasses import dataclass, replace
from typing import Dict, Optional, Union

import numpy as np

from src.core.errors import DegenerateInputError, DomainError, ParameterError
from src.diffusion.geodesic import NEGATIVE_EIGENVALUE_CLIP
from src.diffusion.kernel import DiffusionOperator, KernelMatrix, build_kernel, resolve_sigma2
from src.diffusion.spectral import OperatorTag, SpectralDecomposition, spectral_decompose
from src.middleware.logging import new_run_id, stage_timer
from src.pointcloud.cloud import PointCloud, pairwise_distances

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class NormalizedKernel:
    """Density-normalized kernel K~_ij = K_ij / (q_i q_j)."""

    k_tilde: np.ndarray
    q: np.ndarray

    def diffusion_operator(self) -> DiffusionOperator:
        """Row-normalize K~; row_sums_of_k then holds the sums of K~."""
        row_sums = self.k_tilde.sum(axis=1)
        p = self.k_tilde / row_sums[:, None]
        p.setflags(write=False)
        row_sums.setflags(write=False)
        return DiffusionOperator(p=p, row_sums_of_k=row_sums)


@dataclass(frozen=True, eq=False)
class DiffusionEmbedding:
    """Rows are points; columns follow descending eigenvalue."""

    coords: np.ndarray
    t: float
    n: int
    eigenvalues_used: np.ndarray
    include_trivial: bool = False
    sigma2: Optional[float] = None

    def to_metadata(self) -> Dict[str, object]:
        return {
            "t": self.t,
            "n": self.n,
            "eigenvalues": self.eigenvalues_used.tolist(),
            "include_trivial": self.include_trivial,
            "sigma2": self.sigma2,
        }


def normalize_kernel(kernel: Union[KernelMatrix, np.ndarray]) -> NormalizedKernel:
    """
    Divide out the local densities q_i = sum_j K_ij.

    Raises:
        DegenerateInputError: If a row of K sums to zero
    """
    k = kernel.k if isinstance(kernel, KernelMatrix) else np.asarray(kernel, dtype=float)
    q = k.sum(axis=1)
    if np.any(q <= 0):
        raise DegenerateInputError("kernel has a row without positive mass")
    k_tilde = k / np.outer(q, q)
    k_tilde = 0.5 * (k_tilde + k_tilde.T)
    k_tilde.setflags(write=False)
    q.setflags(write=False)
    return NormalizedKernel(k_tilde=k_tilde, q=q)


def eigenvalue_powers(values: np.ndarray, t: float) -> np.ndarray:
    """
    lambda^t per mode.

    Raises:
        DomainError: For a fractional t and an eigenvalue below -1e-12
    """
    values = np.asarray(values, dtype=float)
    if float(t).is_integer():
        return values ** int(t)
    if np.any(values < NEGATIVE_EIGENVALUE_CLIP):
        raise DomainError(
            f"eigenvalue {values.min():.3e} is negative; lambda^t with t={t} is undefined",
            residual=float(values.min()),
        )
    return np.clip(values, 0.0, None) ** t


def check_embedding_size(n: int, n_points: int, include_trivial: bool) -> None:
    available = n_points if include_trivial else n_points - 1
    if not 1 <= n <= available:
        raise ParameterError(
            f"embedding dimension n must lie in [1, {available}] for {n_points} points, got {n}"
        )


def embed_spectrum(
    spec: SpectralDecomposition, t: float, n: int, include_trivial: bool = False
) -> DiffusionEmbedding:
    """Coordinates lambda_k^t psi_k from a P decomposition."""
    check_embedding_size(n, spec.size, include_trivial)
    start = 0 if include_trivial else 1
    cols = slice(start, start + n)
    weights = eigenvalue_powers(spec.eigenvalues[cols], t)
    coords = spec.eigenvectors[:, cols] * weights[None, :]
    coords.setflags(write=False)
    used = np.array(spec.eigenvalues[cols], copy=True)
    used.setflags(write=False)
    return DiffusionEmbedding(
        coords=coords, t=float(t), n=n, eigenvalues_used=used, include_trivial=include_trivial
    )


def diffusion_map(
    cloud: PointCloud,
    sigma2: Union[float, str] = "auto",
    t: float = 1.0,
    n: int = 2,
    include_trivial: bool = False,
    run_id: Optional[str] = None,
) -> DiffusionEmbedding:
    """
    Classical diffusion-map embedding.

    Args:
        cloud: Input points
        sigma2: Kernel scale or "auto" (median squared distance)
        t: Diffusion time (> 0)
        n: Number of embedding coordinates
        include_trivial: Keep the constant lambda = 1 mode as the first coordinate

    Raises:
        ParameterError: If n is out of range or t <= 0
    """
    if not t > 0:
        raise ParameterError(f"diffusion timestep t must be > 0, got {t}")
    check_embedding_size(n, cloud.n_points, include_trivial)
    run_id = run_id or new_run_id()

    with stage_timer("diffmap_kernel", run_id, n_points=cloud.n_points) as out:
        distances = pairwise_distances(cloud)
        s2 = resolve_sigma2(distances, sigma2)
        normalized = normalize_kernel(build_kernel(distances, s2))
        out["sigma2"] = s2

    with stage_timer("diffmap_spectrum", run_id, n=n, t=t) as out:
        spec = spectral_decompose(normalized.diffusion_operator(), OperatorTag.P)
        embedding = embed_spectrum(spec, t, n, include_trivial)
        out["leading_eigenvalue"] = float(spec.eigenvalues[0])

    return replace(embedding, sigma2=s2)


def align_signs(coords: np.ndarray, reference: np.ndarray) -> np.ndarray:
    """Flip columns of coords so each has a non-negative inner product with reference."""
    coords = np.array(coords, dtype=float, copy=True)
    signs = np.sign(np.sum(coords * reference, axis=0))
    signs[signs == 0] = 1.0
    return coords * signs
