"""
Block-Encoded Diffusion Map

kernel column -> K -> row sums (diagonal from K|1>) -> Q^-1 (negative power c = 1)
-> K~ = Q^-1 K Q^-1 -> row sums of K~ -> D^-1/2 (c = 1/2) -> P_sym = D^-1/2 K~ D^-1/2
-> P_sym^T P_sym -> positive power t/2 -> power-method eigenpairs.

The eigenvalues of the final block are proportional to lambda_k^t with lambda_1 = 1,
so lambda_k^t is read as mu_k / mu_1. Right eigenvectors of P are D^-1/2 times the
eigenvectors of P_sym. Eigenvector entries are taken exactly, signs included; a
measurement would only see their squares.
"""

import logging
import math
from dataclasses import dataclass
from typing import List, Optional, Union

import numpy as np

from src.config.run_config import QsimConfig
from src.core.errors import DegenerateInputError, ParameterError
from src.diffmap.embedding import DiffusionEmbedding, check_embedding_size
from src.diffusion.kernel import resolve_sigma2
from src.diffusion.spectral import apply_sign_convention
from src.middleware.logging import new_run_id, stage_timer
from src.pointcloud.cloud import PointCloud, pairwise_distances
from src.qsim.block_encoding import (
    BlockEncoding,
    CostCounter,
    be_adjoint,
    be_negative_power,
    be_positive_power,
    be_product,
)
from src.qsim.columns import diagonal_from_column, matrix_column, uniform_column
from src.qsim.kernel_encoding import kernel_column, kernel_matrix_encoding
from src.qsim.power_method import EigenPair, power_method_run

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class QsimDiffusionRun:
    embedding: DiffusionEmbedding
    pairs: List[EigenPair]
    chain: List[BlockEncoding]
    cost: CostCounter


def inverse_diagonal_power(diag: BlockEncoding, c: float) -> BlockEncoding:
    """Negative power of a positive diagonal encoding with kappa = alpha / min entry."""
    values = np.diag(diag.encoded)
    if values.min() <= 0:
        raise DegenerateInputError(f"{diag.label} has a non-positive diagonal entry")
    kappa = max(1.0, diag.subnorm / float(values.min()))
    return be_negative_power(diag, c, kappa)


def split_exponent(c: float) -> List[float]:
    """Split c > 0 into chunks in (0, 1]: 2.5 -> [1, 1, 0.5]."""
    if not c > 0:
        raise ParameterError(f"exponent must be > 0, got {c}")
    whole = math.floor(c)
    chunks = [1.0] * whole
    rest = c - whole
    if rest > 1e-15:
        chunks.append(rest)
    return chunks


def positive_power(u: BlockEncoding, c: float) -> BlockEncoding:
    """M^c / 2^k for any c > 0, as a product of k positive powers of exponent <= 1."""
    parts = [be_positive_power(u, chunk) for chunk in split_exponent(c)]
    out = parts[0]
    for part in parts[1:]:
        out = be_product(out, part)
    return out


def qsim_diffusion_run(
    cloud: PointCloud,
    sigma2: Union[float, str] = "auto",
    t: float = 1.0,
    n: int = 2,
    config: Optional[QsimConfig] = None,
    include_trivial: bool = False,
    seed: int = 0,
    run_id: Optional[str] = None,
) -> QsimDiffusionRun:
    """
    Replay the diffusion map on block encodings.

    Raises:
        ParameterError: If n is out of range or t <= 0
        GapError: If two of the requested eigenvalues coincide
    """
    config = config or QsimConfig()
    if not t > 0:
        raise ParameterError(f"diffusion timestep t must be > 0, got {t}")
    size = cloud.n_points
    check_embedding_size(n, size, include_trivial)
    run_id = run_id or new_run_id()
    ones = uniform_column(size)

    with stage_timer("qsim_diffmap_kernel", run_id, n_points=size, degree=config.degree) as out:
        distances = pairwise_distances(cloud)
        s2 = resolve_sigma2(distances, sigma2)
        column, _ = kernel_column(distances, s2, config.degree)
        kernel = kernel_matrix_encoding(column, size)
        q_column = matrix_column(kernel, ones)
        q_inv = inverse_diagonal_power(diagonal_from_column(q_column, "Q"), 1.0)
        k_tilde = be_product(be_product(q_inv, kernel), q_inv).with_label("K~")
        out.update(sigma2=s2, subnorm=k_tilde.subnorm)

    with stage_timer("qsim_diffmap_operator", run_id, t=t) as out:
        d_column = matrix_column(k_tilde, ones)
        d_inv_half = inverse_diagonal_power(diagonal_from_column(d_column, "D"), 0.5)
        p_sym = be_product(be_product(d_inv_half, k_tilde), d_inv_half).with_label("P_sym")
        square = be_product(be_adjoint(p_sym), p_sym).with_label("P_sym^T P_sym")
        powered = positive_power(square, t / 2.0).with_label(f"(P^T P)^{t / 2:g}")
        out.update(err=powered.err)

    with stage_timer("qsim_diffmap_eigenpairs", run_id, n=n) as out:
        needed = n if include_trivial else n + 1
        run = power_method_run(
            powered,
            needed,
            tol=config.power_tol,
            seed=seed,
            max_iter=config.power_max_iter,
            max_restarts=config.max_restarts,
            check_gap=True,
        )
        values = np.array([p.value for p in run.pairs])
        lam_t = values / values[0]
        phi = np.column_stack([p.vector for p in run.pairs])
        psi = phi / np.sqrt(d_column.vector)[:, None]
        psi = apply_sign_convention(psi / np.linalg.norm(psi, axis=0, keepdims=True))
        out["iterations"] = int(sum(p.iterations for p in run.pairs))

    start = 0 if include_trivial else 1
    coords = psi[:, start:] * lam_t[None, start:]
    coords.setflags(write=False)
    used = lam_t[start:] ** (1.0 / t)
    used.setflags(write=False)
    embedding = DiffusionEmbedding(
        coords=coords,
        t=float(t),
        n=n,
        eigenvalues_used=used,
        include_trivial=include_trivial,
        sigma2=s2,
    )
    chain = [kernel, k_tilde, p_sym, square, powered]
    return QsimDiffusionRun(embedding=embedding, pairs=run.pairs, chain=chain, cost=run.cost)


def qsim_diffusion_map(
    cloud: PointCloud,
    sigma2: Union[float, str] = "auto",
    t: float = 1.0,
    n: int = 2,
    config: Optional[QsimConfig] = None,
    include_trivial: bool = False,
    seed: int = 0,
) -> DiffusionEmbedding:
    """Block-encoded counterpart of diffusion_map."""
    return qsim_diffusion_run(cloud, sigma2, t, n, config, include_trivial, seed).embedding
