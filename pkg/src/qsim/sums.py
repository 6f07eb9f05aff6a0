"""
Hadamard-Test Sums

Sums over a neighbourhood are inner products of prepared states: sum_j v_j is
<v/||v|| | u> * ||v|| * sqrt(N) with u the uniform state. The Hadamard test
measures Re<a|b> through P(0) = (1 + <a|b>) / 2; exact mode returns the overlap
itself, shot mode draws a binomial count with enough shots that the rescaled
estimate has standard deviation at most epsilon.
"""

import logging
import math
from typing import NamedTuple, Optional, Sequence, Tuple

import numpy as np

from src.config.run_config import QsimMode
from src.core.errors import ParameterError
from src.qsim.block_encoding import CostCounter

logger = logging.getLogger(__name__)

# binomial draws beyond this are replaced by their normal approximation
MAX_EXACT_SHOTS = 10**12


class HadamardEstimate(NamedTuple):
    value: float
    exact: float
    shots: int
    cost: CostCounter


class FitSums(NamedTuple):
    """Estimated sums entering both fit variants of one point."""

    volume_sum: float
    squared_radius_sum: float
    weighted_excess: float
    fourth_moment: float
    cost: CostCounter


def hadamard_inner_product(
    a: Sequence[float],
    b: Sequence[float],
    mode: QsimMode = QsimMode.EXACT,
    epsilon: float = 0.01,
    rng: Optional[np.random.Generator] = None,
) -> HadamardEstimate:
    """
    Estimate <a, b> with a Hadamard test on the normalized states.

    Shot mode uses ceil((||a|| ||b|| / epsilon)^2) shots, so the estimate's standard
    deviation is at most epsilon.

    Raises:
        ParameterError: If the vectors differ in length or epsilon <= 0
    """
    a = np.asarray(a, dtype=float).ravel()
    b = np.asarray(b, dtype=float).ravel()
    if a.shape != b.shape:
        raise ParameterError(f"inner product of vectors with lengths {a.size} and {b.size}")
    norm_a, norm_b = float(np.linalg.norm(a)), float(np.linalg.norm(b))
    exact = float(a @ b)
    if norm_a == 0.0 or norm_b == 0.0:
        return HadamardEstimate(0.0, 0.0, 0, CostCounter())

    cost = CostCounter().tick("state_preparation", 2).tick("hadamard_test")
    if QsimMode(mode) is QsimMode.EXACT:
        return HadamardEstimate(exact, exact, 1, cost)

    if not epsilon > 0:
        raise ParameterError(f"shot-mode epsilon must be > 0, got {epsilon}")
    rng = rng if rng is not None else np.random.default_rng(0)
    scale = norm_a * norm_b
    overlap = float(np.clip(exact / scale, -1.0, 1.0))
    shots = math.ceil((scale / epsilon) ** 2)
    p0 = (1.0 + overlap) / 2.0
    if shots <= MAX_EXACT_SHOTS:
        zeros = int(rng.binomial(shots, p0))
        estimate = 2.0 * zeros / shots - 1.0
    else:
        estimate = overlap + math.sqrt((1.0 - overlap**2) / shots) * float(rng.standard_normal())
    return HadamardEstimate(scale * estimate, exact, shots, cost.tick("hadamard_shots", shots))


def uniform_sum(
    values: Sequence[float],
    mode: QsimMode = QsimMode.EXACT,
    epsilon: float = 0.01,
    rng: Optional[np.random.Generator] = None,
) -> HadamardEstimate:
    """sum_j v_j as the inner product with the all-ones vector."""
    values = np.asarray(values, dtype=float).ravel()
    return hadamard_inner_product(values, np.ones_like(values), mode, epsilon, rng)


def qsim_curvature_sums(
    volumes: Sequence[float],
    dg_row: Sequence[float],
    mode: QsimMode = QsimMode.EXACT,
    epsilon: float = 0.01,
    rng: Optional[np.random.Generator] = None,
) -> Tuple[float, float]:
    """
    (sum_j Vol_nor_j, sum_j d_G^2) over one neighbourhood.

    These are the two sums of the closed-form fit variant.
    """
    volume_sum = uniform_sum(volumes, mode, epsilon, rng)
    squared = uniform_sum(np.asarray(dg_row, dtype=float) ** 2, mode, epsilon, rng)
    return volume_sum.value, squared.value


def qsim_fit_sums(
    radii: Sequence[float],
    normalized_volumes: Sequence[float],
    mode: QsimMode = QsimMode.EXACT,
    epsilon: float = 0.01,
    rng: Optional[np.random.Generator] = None,
) -> FitSums:
    """
    All four fit sums from Hadamard tests.

    The least-squares sums are <r^2, Vol_nor - 1> and <r^2, r^2>.
    """
    r2 = np.asarray(radii, dtype=float) ** 2
    vol = np.asarray(normalized_volumes, dtype=float)
    estimates = [
        uniform_sum(vol, mode, epsilon, rng),
        uniform_sum(r2, mode, epsilon, rng),
        hadamard_inner_product(r2, vol - 1.0, mode, epsilon, rng),
        hadamard_inner_product(r2, r2, mode, epsilon, rng),
    ]
    cost = CostCounter.combine(e.cost for e in estimates)
    return FitSums(*(e.value for e in estimates), cost=cost)


def shot_calibration(
    a: Sequence[float],
    b: Sequence[float],
    epsilon: float,
    trials: int = 200,
    seed: int = 0,
) -> dict:
    """
    Repeat a shot-mode Hadamard test and compare its spread with epsilon.

    Returns:
        Dict with trials, epsilon, empirical_std, fraction_within_5eps and shots
    """
    rng = np.random.default_rng(seed)
    runs = [hadamard_inner_product(a, b, QsimMode.SHOT, epsilon, rng) for _ in range(trials)]
    values = np.array([r.value for r in runs])
    exact = runs[0].exact
    within = float(np.mean(np.abs(values - exact) <= 5 * epsilon))
    return {
        "trials": trials,
        "epsilon": epsilon,
        "exact": exact,
        "empirical_std": float(values.std(ddof=1)) if trials > 1 else 0.0,
        "fraction_within_5eps": within,
        "shots": runs[0].shots,
    }
