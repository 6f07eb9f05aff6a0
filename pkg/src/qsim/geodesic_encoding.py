"""
Geodesic Encodings and Neighbour Search

E_i has row j equal to e_i - e_j (row i zero), so (E_i K^T K E_i^T)_jj is the
squared K-spectrum diffusion distance between x_i and x_j at t = 1. Filtering
the diagonal squares it, an inverse quarter power turns d_G^4 into 1/d_G, and
power-method PCA reads the nearest neighbours off the dominant coordinates.
"""

import logging
import math
from dataclasses import dataclass
from typing import List, Optional

import numpy as np

from src.config.run_config import QsimConfig, RunConfig
from src.core.errors import DegenerateInputError, GapError, ParameterError
from src.diffusion.kernel import resolve_sigma2
from src.geometry.neighborhoods import Neighborhood, check_neighborhood_size
from src.pointcloud.cloud import PointCloud, pairwise_distances
from src.qsim.block_encoding import (
    BlockEncoding,
    CostCounter,
    be_adjoint,
    be_amplify,
    be_diagonal_filter,
    be_lcu,
    be_negative_power,
    be_product,
    be_tensor,
    encode_known_matrix,
    identity_encoding,
    select_block,
)
from src.qsim.kernel_encoding import build_kernel_gram_encoding
from src.qsim.power_method import EigenPair, power_method_run

logger = logging.getLogger(__name__)


def difference_matrix(n: int, i: int) -> np.ndarray:
    """E_i: row j = e_i - e_j for j != i, row i zero."""
    e = np.zeros((n, n))
    others = np.delete(np.arange(n), i)
    e[others, i] = 1.0
    e[others, others] = -1.0
    return e


def build_difference_operator(n: int, i: Optional[int] = None) -> BlockEncoding:
    """
    Encoding of E_i, or of the block-diagonal sum_i |i><i| (x) E_i when i is None.

    Subnorm is the Frobenius norm of the constructed matrix: sqrt(2 (N - 1)) per
    E_i and sqrt(2 N (N - 1)) for the full operator.
    """
    if n < 2:
        raise ParameterError("difference operator needs at least 2 points")
    if i is None:
        blocks = [difference_matrix(n, k) for k in range(n)]
        full = np.zeros((n * n, n * n))
        for k, block in enumerate(blocks):
            full[k * n : (k + 1) * n, k * n : (k + 1) * n] = block
        enc = encode_known_matrix(full, "E")
    else:
        if not 0 <= i < n:
            raise ParameterError(f"point index {i} out of range for {n} points")
        enc = encode_known_matrix(difference_matrix(n, i), f"E_{i}")
    logger.debug(f"Difference operator {enc.label} with ||E||_F = {enc.subnorm:.6g}")
    return enc


def geodesic_diag_encoding(
    gram: BlockEncoding, E: BlockEncoding, i: Optional[int] = None
) -> BlockEncoding:
    """
    Diagonal encoding with entries (E K^T K E^T)_jj^2, i.e. d_G^4(x_i, x_j).

    With a full block-diagonal E, the product runs on I (x) K^T K and block i is
    selected afterwards.
    """
    n = gram.dim
    if E.dim == n * n:
        if i is None:
            raise ParameterError("the full difference operator needs the row index i")
        operator = be_tensor(identity_encoding(n), gram)
    elif E.dim == n:
        operator = gram
    else:
        raise ParameterError(
            f"difference operator of size {E.dim} does not match a gram of size {n}"
        )

    sandwich = be_product(be_product(E, operator), be_adjoint(E))
    filtered = be_diagonal_filter(sandwich)
    if E.dim == n * n:
        filtered = select_block(filtered, i, n)
    return filtered.with_label(f"dG4[{'' if i is None else i}]")


def inverse_distance_encoding(
    diag4: BlockEncoding,
    exclude: Optional[int] = None,
    amplification_tolerance: float = 1e-10,
) -> BlockEncoding:
    """
    Diagonal encoding with entries proportional to 1/d_G.

    The excluded (self) entry is regularized to twice the largest entry before
    inversion; the block is then amplified so its largest entry is 1/2 and the
    c = 1/4 negative power is applied with kappa = 1 / (smallest normalized entry).
    """
    entries = np.diag(diag4.encoded).copy()
    enc = diag4
    if exclude is not None:
        projector = np.zeros_like(diag4.encoded)
        projector[exclude, exclude] = 2.0 * float(entries.max()) - entries[exclude]
        shift = BlockEncoding(
            projector,
            max(diag4.subnorm, abs(projector[exclude, exclude])),
            0.0,
            CostCounter().tick("state_preparation"),
            f"reg[{exclude}]",
        )
        enc = be_lcu([diag4, shift])

    values = np.diag(enc.encoded)
    if values.min() <= 0:
        raise DegenerateInputError(
            "inverse distances need distinct points (a neighbour distance is zero)"
        )
    gamma = enc.subnorm / (2.0 * float(values.max()))
    if gamma > 1:
        enc = be_amplify(enc, gamma, amplification_tolerance)
    kappa = enc.subnorm / float(values.min())
    return be_negative_power(enc, 0.25, kappa).with_label("inv_dG")


@dataclass(frozen=True, eq=False)
class NeighborhoodSearch:
    """Result of one block-encoded neighbour search."""

    neighborhood: Neighborhood
    diag4: BlockEncoding
    inverse: BlockEncoding
    pairs: List[EigenPair]
    cost: CostCounter
    used_fallback: bool


def _classical_order(d4: np.ndarray, i: int, count: int) -> np.ndarray:
    others = np.delete(np.arange(d4.shape[0]), i)
    return others[np.lexsort((others, d4[others]))][:count]


def neighborhood_search(
    gram: BlockEncoding,
    i: int,
    nn: int,
    config: Optional[QsimConfig] = None,
    rng: Optional[np.random.Generator] = None,
    seed: int = 0,
) -> NeighborhoodSearch:
    """
    Find the nn - 1 geodesically nearest points of x_i.

    The readout of eigenvector k is the index of its largest-magnitude coordinate,
    radii are diag4 entries to the power 1/4. On a gap error (tied distances) or a
    repeated readout the classical (distance, index) order is used when
    config.tie_fallback is set.
    """
    config = config or QsimConfig()
    n = gram.dim
    check_neighborhood_size(n, nn)
    E = build_difference_operator(n, i)
    diag4 = geodesic_diag_encoding(gram, E, i)
    inverse = inverse_distance_encoding(
        diag4, exclude=i, amplification_tolerance=config.amplification_tolerance
    )
    d4 = np.clip(np.diag(diag4.encoded), 0.0, None)

    used_fallback = False
    pairs: List[EigenPair] = []
    cost = inverse.cost
    try:
        run = power_method_run(
            inverse,
            nn - 1,
            tol=config.power_tol,
            seed=seed,
            rng=rng,
            max_iter=config.power_max_iter,
            max_restarts=config.max_restarts,
            check_gap=True,
        )
        pairs, cost = run.pairs, run.cost
        readout = np.array([int(np.argmax(np.abs(p.vector))) for p in pairs])
        if len(set(readout.tolist())) != readout.size or i in readout:
            raise GapError(f"ambiguous readout for point {i}: {readout.tolist()}")
    except GapError as e:
        if not config.tie_fallback:
            raise
        logger.warning(f"Neighbour search for point {i} fell back to the classical tie rule: {e}")
        readout = _classical_order(d4, i, nn - 1)
        used_fallback = True

    members = np.concatenate([[i], readout]).astype(int)
    radii = np.concatenate([[0.0], d4[readout] ** 0.25])
    members.setflags(write=False)
    radii.setflags(write=False)
    nb = Neighborhood(center_index=int(i), member_indices=members, geodesic_radii=radii)
    return NeighborhoodSearch(nb, diag4, inverse, pairs, cost, used_fallback)


def qsim_neighborhood(
    cloud: PointCloud, i: int, nn: int, config: Optional[RunConfig] = None
) -> Neighborhood:
    """
    Block-encoded neighbourhood of x_i.

    Radii are raw K-spectrum diffusion distances at t = 1, so the result compares
    with nearest_neighborhood on the uncalibrated K-spectrum geodesic field.
    """
    config = config or RunConfig()
    distances = pairwise_distances(cloud)
    sigma2 = resolve_sigma2(distances, config.sigma2)
    gram = build_kernel_gram_encoding(distances, sigma2, config.qsim.degree)
    rng = np.random.default_rng((config.seed, i))
    return neighborhood_search(gram, i, nn, config.qsim, rng=rng).neighborhood


def rescale_neighborhood(nb: Neighborhood, factor: float) -> Neighborhood:
    """Multiply every radius by factor."""
    if not (math.isfinite(factor) and factor > 0):
        raise ParameterError(f"rescale factor must be > 0, got {factor}")
    radii = nb.geodesic_radii * factor
    radii.setflags(write=False)
    return Neighborhood(nb.center_index, nb.member_indices, radii)
