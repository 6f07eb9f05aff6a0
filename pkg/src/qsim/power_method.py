"""
Power-Method PCA with Deflation

Stand-in for quantum PCA: top eigenpairs of a symmetric PSD encoded matrix by
power iteration from seeded random starts, deflating A <- A - lambda v v^T after
every converged pair. Start vectors whose overlap with the dominant eigenvector
falls below 1/N are redrawn through tenacity; a pair that needs more power steps
than its gap bound is a convergence failure.
"""

import logging
import math
from itertools import islice
from typing import Iterator, List, NamedTuple, Optional, Tuple, Union

import numpy as np
import scipy.linalg
from tenacity import Retrying, before_sleep_log, retry_if_exception_type, stop_after_attempt

from src.core.errors import (
    ContractError,
    ConvergenceError,
    GapError,
    ParameterError,
    StartVectorOverlapError,
)
from src.diffusion.spectral import apply_sign_convention
from src.qsim.block_encoding import BlockEncoding, CostCounter

logger = logging.getLogger(__name__)

MIN_RELATIVE_GAP = 1e-12


class EigenPair(NamedTuple):
    value: float
    vector: np.ndarray
    iterations: int
    residual: float


class PowerMethodRun(NamedTuple):
    pairs: List[EigenPair]
    cost: CostCounter


def _as_matrix(u: Union[BlockEncoding, np.ndarray]) -> np.ndarray:
    matrix = u.encoded if isinstance(u, BlockEncoding) else np.asarray(u, dtype=float)
    if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1]:
        raise ParameterError(f"power method needs a square matrix, got shape {matrix.shape}")
    scale = max(float(np.max(np.abs(matrix), initial=0.0)), 1e-300)
    if np.max(np.abs(matrix - matrix.T), initial=0.0) > 1e-10 * scale:
        raise ContractError("power method needs a symmetric matrix")
    return 0.5 * (matrix + matrix.T)


def _dominant_mode(work: np.ndarray, norm: float) -> Optional[Tuple[np.ndarray, float]]:
    """
    Top eigenvector of the working matrix and the rate |lambda_2| / |lambda_1|.

    Simulator-side spectrum; None once deflation has emptied the matrix.
    """
    if norm == 0 or np.max(np.abs(work)) <= 1e-14 * norm:
        return None
    values, vectors = scipy.linalg.eigh(work)
    order = np.argsort(-np.abs(values), kind="stable")
    ratio = abs(values[order[1]]) / abs(values[order[0]]) if values.size > 1 else 0.0
    return vectors[:, order[0]], float(ratio)


def _start_vector(rng: np.random.Generator, n: int, top: Optional[np.ndarray]) -> np.ndarray:
    x = np.asarray(rng.standard_normal(n), dtype=float)
    x /= np.linalg.norm(x)
    if top is not None:
        overlap = abs(float(top @ x))
        if overlap < 1.0 / n:
            raise StartVectorOverlapError(
                f"start vector overlap {overlap:.3e} below 1/N = {1.0 / n:.3e}", residual=overlap
            )
    return x


def iteration_cap(n: int, tol: float, ratio: float) -> Optional[int]:
    """
    Power steps ceil(log(N / tol) / gap), gap = 1 - |lambda_2| / |lambda_1|.

    A start overlapping the top eigenvector by at least 1/N converges within it.
    None when the top eigenvalue has no gap.
    """
    gap = 1.0 - ratio
    if not gap > 0:
        return None
    return math.ceil(math.log(n / tol) / gap)


def _iterate(work: np.ndarray, x: np.ndarray, tol: float, norm: float, max_iter: int):
    for iteration in range(1, max_iter + 1):
        y = work @ x
        value = float(x @ y)
        residual = float(np.linalg.norm(y - value * x))
        if residual <= tol * norm:
            return value, x, iteration, residual
        y_norm = float(np.linalg.norm(y))
        x = y / y_norm
    raise ConvergenceError(
        f"power method did not converge within {max_iter} iterations", residual=residual
    )


def iter_eigenpairs(
    u: Union[BlockEncoding, np.ndarray],
    tol: float = 1e-12,
    rng: Optional[np.random.Generator] = None,
    seed: int = 0,
    max_iter: int = 200_000,
    max_restarts: int = 20,
    check_gap: bool = True,
) -> Iterator[EigenPair]:
    """
    Lazily yield eigenpairs of the encoded matrix in descending order.

    Eigenvalues are in the units of the encoded matrix. Convergence means
    ||A x - <x|A|x> x|| <= tol * ||A||.

    Raises:
        ConvergenceError: If a pair does not converge within max_iter iterations,
            or (with check_gap) takes more power steps than iteration_cap allows
        GapError: If check_gap and two consecutive eigenvalues are within 1e-12 ||A||
        StartVectorOverlapError: If every restart draws a start below the 1/N overlap
    """
    work = _as_matrix(u)
    n = work.shape[0]
    rng = rng if rng is not None else np.random.default_rng(seed)
    norm = float(scipy.linalg.norm(work, 2))
    previous: Optional[EigenPair] = None

    for k in range(n):
        mode = _dominant_mode(work, norm)
        for attempt in Retrying(
            stop=stop_after_attempt(max_restarts),
            retry=retry_if_exception_type(StartVectorOverlapError),
            before_sleep=before_sleep_log(logger, logging.DEBUG),
            reraise=True,
        ):
            with attempt:
                x0 = _start_vector(rng, n, mode[0] if mode is not None else None)

        if norm == 0.0:
            value, vector, iterations, residual = 0.0, x0, 1, 0.0
        else:
            value, vector, iterations, residual = _iterate(work, x0, tol, norm, max_iter)

        cap = iteration_cap(n, tol, mode[1]) if mode is not None else None
        if cap is not None and iterations - 1 > cap:
            message = f"eigenpair {k + 1} took {iterations - 1} power steps, above the gap bound {cap}"
            if check_gap:
                raise ConvergenceError(message, residual=residual)
            logger.warning(message)

        vector = apply_sign_convention(vector / np.linalg.norm(vector))
        pair = EigenPair(value, vector, iterations, residual)

        if previous is not None:
            gap = previous.value - value
            if check_gap and abs(gap) < MIN_RELATIVE_GAP * max(norm, 1e-300):
                raise GapError(
                    f"eigenvalues {k} and {k + 1} coincide ({previous.value:.15g} vs {value:.15g})",
                    residual=abs(gap),
                )

        yield pair
        previous = pair
        work = work - value * np.outer(vector, vector)


def power_method_pca(
    u: Union[BlockEncoding, np.ndarray],
    k: int,
    tol: float = 1e-12,
    seed: int = 0,
    rng: Optional[np.random.Generator] = None,
    max_iter: int = 200_000,
    max_restarts: int = 20,
    check_gap: bool = True,
) -> List[EigenPair]:
    """Top-k eigenpairs (value, vector, iterations, residual) in descending order."""
    return power_method_run(u, k, tol, seed, rng, max_iter, max_restarts, check_gap).pairs


def power_method_run(
    u: Union[BlockEncoding, np.ndarray],
    k: int,
    tol: float = 1e-12,
    seed: int = 0,
    rng: Optional[np.random.Generator] = None,
    max_iter: int = 200_000,
    max_restarts: int = 20,
    check_gap: bool = True,
) -> PowerMethodRun:
    """power_method_pca plus the iteration cost, added to the encoding's own cost."""
    size = _as_matrix(u).shape[0]
    if not 1 <= k <= size:
        raise ParameterError(f"k must lie in [1, {size}], got {k}")
    pairs = list(
        islice(
            iter_eigenpairs(u, tol, rng, seed, max_iter, max_restarts, check_gap),
            k,
        )
    )
    base = u.cost if isinstance(u, BlockEncoding) else CostCounter()
    cost = base.tick("power_method_iter", sum(p.iterations for p in pairs)).tick("deflation", len(pairs))
    return PowerMethodRun(pairs=pairs, cost=cost)
