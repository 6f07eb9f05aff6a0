"""
Column States

State-preparation columns: a vector v embedded as the first column of a unitary,
scaled by 1/alpha with ||v|| <= alpha. Entrywise products of such columns (the
tensor-and-permute construction) give entrywise powers and, through the
Chebyshev recurrence, entrywise polynomials.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from src.core.errors import ParameterError, SubnormalizationError
from src.qsim.block_encoding import NORM_SLACK, BlockEncoding, CostCounter

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class ColumnState:
    """Vector v with subnorm alpha >= ||v||, error bound and cost."""

    vector: np.ndarray
    subnorm: float
    err: float = 0.0
    cost: CostCounter = field(default_factory=CostCounter)

    def __post_init__(self):
        v = np.array(self.vector, dtype=float, copy=True).ravel()
        if not self.subnorm > 0:
            raise SubnormalizationError(f"column subnormalization must be positive, got {self.subnorm}")
        norm = float(np.linalg.norm(v))
        if norm > self.subnorm * (1 + NORM_SLACK):
            raise SubnormalizationError(
                f"column norm {norm:.6g} exceeds subnormalization {self.subnorm:.6g}"
            )
        v.setflags(write=False)
        object.__setattr__(self, "vector", v)

    @property
    def size(self) -> int:
        return self.vector.shape[0]

    def normalized(self) -> np.ndarray:
        return self.vector / self.subnorm


def index_qubits(size: int) -> int:
    return max(1, math.ceil(math.log2(size))) if size > 1 else 1


def encode_column(v: np.ndarray) -> ColumnState:
    """Prepare the normalized state v / ||v||."""
    v = np.asarray(v, dtype=float).ravel()
    norm = float(np.linalg.norm(v))
    if norm == 0.0:
        raise SubnormalizationError("cannot prepare the zero vector")
    return ColumnState(v, norm, 0.0, CostCounter().tick("state_preparation"))


def entrywise_product_column(a: ColumnState, b: ColumnState) -> ColumnState:
    """Column a * b (entrywise) with subnorm alpha_a alpha_b."""
    if a.size != b.size:
        raise ParameterError("entrywise product needs columns of equal length")
    err = a.subnorm * b.err + b.subnorm * a.err
    return ColumnState(
        a.vector * b.vector,
        a.subnorm * b.subnorm,
        max(err, a.err, b.err),
        (a.cost + b.cost).tick("entrywise_product", index_qubits(a.size)),
    )


def entrywise_power_column(v: ColumnState, p: int) -> ColumnState:
    """
    Entrywise p-th power of the normalized input: entries (v_i / alpha)^p, subnorm 1.

    Costs p * ceil(log2 N) entrywise-product ticks.
    """
    if int(p) != p or p < 1:
        raise ParameterError(f"entrywise power must be an integer >= 1, got {p}")
    p = int(p)
    x = v.normalized()
    err = p * v.err / v.subnorm
    return ColumnState(
        x**p,
        1.0,
        max(err, v.err),
        v.cost.tick("entrywise_power", p * index_qubits(v.size)),
    )


def column_lcu(columns: Sequence[ColumnState], coefficients: Sequence[float]) -> ColumnState:
    """Column sum_k c_k v_k with subnorm sum_k |c_k| alpha_k."""
    if len(columns) != len(coefficients) or not columns:
        raise ParameterError("column LCU needs one coefficient per column")
    coefficients = np.asarray(coefficients, dtype=float)
    vector = sum(c * col.vector for c, col in zip(coefficients, columns))
    subnorm = float(sum(abs(c) * col.subnorm for c, col in zip(coefficients, columns)))
    err = float(sum(abs(c) * col.err for c, col in zip(coefficients, columns)))
    return ColumnState(
        vector,
        subnorm,
        max([err] + [col.err for col in columns]),
        CostCounter.combine(col.cost for col in columns).tick("lcu"),
    )


def diagonal_from_column(col: ColumnState, label: str = "diag") -> BlockEncoding:
    """Diagonal encoding diag(v) with the column's subnorm (|v_i| <= ||v|| <= alpha)."""
    return BlockEncoding(
        np.diag(col.vector),
        col.subnorm,
        col.err,
        col.cost.tick("diagonal_from_column"),
        label,
    )


def matrix_column(u: BlockEncoding, v: ColumnState) -> ColumnState:
    """Apply an encoded matrix to a column: A v with subnorm alpha_A alpha_v."""
    err = u.subnorm * v.err + v.subnorm * u.err
    return ColumnState(
        u.encoded @ v.vector,
        u.subnorm * v.subnorm,
        max(err, u.err, v.err),
        (u.cost + v.cost).tick("product"),
    )


def uniform_column(size: int) -> ColumnState:
    """All-ones column (Hadamard transform of |0>), subnorm sqrt(size)."""
    cost = CostCounter().tick("hadamard", index_qubits(size))
    return ColumnState(np.ones(size), math.sqrt(size), 0.0, cost)
