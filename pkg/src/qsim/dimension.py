"""
Centered Gram Encoding and Local Dimension

The neighbourhood matrix X (rows x_j) is prepared as a state, centered with the
LCU I - J/N (J the all-ones matrix from two Hadamard layers) and multiplied with
its own adjoint, which leaves C^T C / (4 sum ||x_j||^2). Amplification brings the
block up to C^T C / 2. The local dimension then compares the power-method
eigenvalues against the trace, estimated with the maximally mixed state.
"""

import logging
import math
from typing import List, NamedTuple, Optional

import numpy as np

from src.config.run_config import QsimConfig, QsimMode
from src.core.errors import ParameterError
from src.geometry.neighborhoods import Neighborhood
from src.geometry.pca import check_tau, prefix_dimension
from src.pointcloud.cloud import PointCloud
from src.qsim.block_encoding import (
    BlockEncoding,
    CostCounter,
    be_adjoint,
    be_amplify,
    be_lcu,
    be_product,
    encode_known_matrix,
    identity_encoding,
    operator_norm,
)
from src.qsim.columns import index_qubits
from src.qsim.power_method import EigenPair, iter_eigenpairs

logger = logging.getLogger(__name__)


class TraceEstimate(NamedTuple):
    value: float
    exact: float
    cost: CostCounter


class LocalDimensionRun(NamedTuple):
    local_dim: int
    pairs: List[EigenPair]
    total: TraceEstimate
    cost: CostCounter


def mean_projector_encoding(size: int) -> BlockEncoding:
    """J / size: every entry 1 / size, norm 1."""
    return BlockEncoding(
        np.full((size, size), 1.0 / size),
        1.0,
        0.0,
        CostCounter().tick("hadamard", 2 * index_qubits(size)),
        "J/N",
    )


def centered_gram_encoding(
    cloud: PointCloud,
    nb: Neighborhood,
    amplification_tolerance: float = 1e-10,
) -> BlockEncoding:
    """
    Encoding of C_i^T C_i (D x D) for the neighbourhood's centered matrix C_i.

    Before amplification the subnorm is 4 sum ||x_j||^2; afterwards it is
    max(2, 2 ||C^T C||), i.e. C^T C / 2 when the Gram matrix has norm <= 1.
    """
    members = cloud.points[nb.member_indices]
    size = members.shape[0]
    x = encode_known_matrix(members, "X")
    centering = be_lcu([identity_encoding(size), mean_projector_encoding(size)], signs=[1, -1])
    centered = be_product(centering, x).with_label("C")
    gram = be_product(be_adjoint(centered), centered)
    gram = BlockEncoding(
        gram.encoded,
        gram.subnorm,
        gram.err,
        gram.cost.tick("permutation").tick("partial_trace"),
        "C^T C",
    )

    target = max(2.0, 2.0 * operator_norm(gram.encoded))
    gamma = gram.subnorm / target
    if gamma > 1:
        gram = be_amplify(gram, gamma, amplification_tolerance).with_label("C^T C")
    logger.debug(
        f"Centered Gram of point {nb.center_index}: subnorm {gram.subnorm:.6g}",
        extra={"amplification": max(gamma, 1.0), "size": size},
    )
    return gram


def trace_estimate(
    u: BlockEncoding,
    mode: QsimMode = QsimMode.EXACT,
    epsilon: float = 0.01,
    rng: Optional[np.random.Generator] = None,
) -> TraceEstimate:
    """
    Tr(A) as dim * Tr(A I / dim), the expectation in the maximally mixed state.

    Shot mode multiplies the exact value by 1 + epsilon * N(0, 1).
    """
    exact = float(np.trace(u.encoded))
    cost = CostCounter().tick("trace_estimation")
    if QsimMode(mode) is QsimMode.EXACT:
        return TraceEstimate(exact, exact, cost)
    rng = rng if rng is not None else np.random.default_rng(0)
    noisy = exact * (1.0 + epsilon * float(rng.standard_normal()))
    shots = math.ceil(1.0 / epsilon**2)
    return TraceEstimate(noisy, exact, cost.tick("trace_shots", shots))


def local_dimension_run(
    gram: BlockEncoding,
    tau: float,
    config: Optional[QsimConfig] = None,
    rng: Optional[np.random.Generator] = None,
    seed: int = 0,
) -> LocalDimensionRun:
    """
    Minimal p whose leading eigenvalues reach tau of the trace.

    Eigenpairs are drawn lazily, so only p deflation rounds run. If the pairs
    run out first (a noisy trace above the true one) the full rank is returned.
    """
    check_tau(tau)
    config = config or QsimConfig()
    rng = rng if rng is not None else np.random.default_rng(seed)
    total = trace_estimate(gram, config.mode, config.shot_epsilon, rng)

    pairs: List[EigenPair] = []
    eigenpairs = iter_eigenpairs(
        gram,
        tol=config.power_tol,
        rng=rng,
        max_iter=config.power_max_iter,
        max_restarts=config.max_restarts,
        check_gap=False,
    )

    def leading():
        for pair in eigenpairs:
            pairs.append(pair)
            yield max(pair.value, 0.0)

    try:
        local_dim = prefix_dimension(leading(), total.value, tau)
    except ParameterError:
        local_dim = gram.dim
        logger.warning(
            f"Eigenvalues never reached tau={tau} of the estimated trace; using full rank {local_dim}"
        )

    cost = (gram.cost + total.cost).tick(
        "power_method_iter", sum(p.iterations for p in pairs)
    ).tick("deflation", len(pairs))
    return LocalDimensionRun(local_dim, pairs, total, cost)


def qsim_local_dimension(
    gram: BlockEncoding,
    tau: float,
    config: Optional[QsimConfig] = None,
    rng: Optional[np.random.Generator] = None,
) -> int:
    """Local dimension d_i from a centered Gram encoding."""
    return local_dimension_run(gram, tau, config, rng).local_dim
