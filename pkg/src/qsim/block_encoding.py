"""
Block Encodings at Matrix Level

A block encoding is simulated as the matrix it encodes, its subnormalization
alpha (so A / alpha is the top-left block of some unitary), an accumulated error
bound and a counter of primitive applications. Unitary completions are never
built; the norm invariant ||A|| <= alpha guarantees that one exists.

Errors are absolute, in the units of the encoded matrix.
"""

import logging
import math
from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Optional, Protocol, Sequence

import numpy as np
import scipy.linalg

from src.core.errors import (
    AmplificationRangeError,
    ContractError,
    ParameterError,
    PolynomialBoundError,
    SubnormalizationError,
)

logger = logging.getLogger(__name__)

NORM_SLACK = 1e-12
SPECTRUM_SLACK = 1e-10
POLY_GRID_POINTS = 10_001


@dataclass(frozen=True)
class CostCounter:
    """Primitive-application counts keyed by primitive name."""

    counts: Mapping[str, int] = field(default_factory=dict)

    def tick(self, primitive: str, times: int = 1) -> "CostCounter":
        if times < 0:
            raise ParameterError("cost ticks must be non-negative")
        merged = Counter(self.counts)
        merged[primitive] += int(times)
        return CostCounter(dict(merged))

    def __add__(self, other: "CostCounter") -> "CostCounter":
        merged = Counter(self.counts)
        merged.update(other.counts)
        return CostCounter(dict(merged))

    def __getitem__(self, primitive: str) -> int:
        return int(self.counts.get(primitive, 0))

    @property
    def total(self) -> int:
        return int(sum(self.counts.values()))

    def to_dict(self) -> dict:
        return dict(sorted(self.counts.items()))

    @staticmethod
    def combine(counters: Iterable["CostCounter"]) -> "CostCounter":
        out = CostCounter()
        for c in counters:
            out = out + c
        return out


def operator_norm(matrix: np.ndarray) -> float:
    """Largest singular value."""
    if matrix.size == 0:
        return 0.0
    return float(scipy.linalg.norm(matrix, 2))


@dataclass(frozen=True, eq=False)
class BlockEncoding:
    """
    (encoded, subnorm, err, cost) with ||encoded|| <= subnorm.

    Raises:
        SubnormalizationError: If the encoded matrix is too large for its subnorm
    """

    encoded: np.ndarray
    subnorm: float
    err: float = 0.0
    cost: CostCounter = field(default_factory=CostCounter)
    label: str = ""

    def __post_init__(self):
        a = np.array(self.encoded, dtype=float, copy=True)
        if a.ndim != 2:
            raise ParameterError(f"a block encoding holds a 2-D matrix, got shape {a.shape}")
        if not np.isfinite(a).all():
            raise ContractError(f"{self.label or 'block encoding'} has non-finite entries")
        if not (math.isfinite(self.subnorm) and self.subnorm > 0):
            raise SubnormalizationError(f"subnormalization must be positive, got {self.subnorm}")
        if not self.err >= 0:
            raise ContractError(f"error bound must be non-negative, got {self.err}")
        # Frobenius bounds the operator norm, so the SVD is only needed when it does not fit
        if np.linalg.norm(a) > self.subnorm * (1 + NORM_SLACK):
            ratio = operator_norm(a) / self.subnorm
            if ratio > 1 + NORM_SLACK:
                raise SubnormalizationError(
                    f"{self.label or 'block encoding'}: ||A|| / alpha = {ratio:.15g} exceeds 1"
                )
        a.setflags(write=False)
        object.__setattr__(self, "encoded", a)

    @property
    def shape(self):
        return self.encoded.shape

    @property
    def dim(self) -> int:
        return self.encoded.shape[0]

    def normalized(self) -> np.ndarray:
        """The block A / alpha actually sitting in the unitary."""
        return self.encoded / self.subnorm

    def is_symmetric(self, tol: float = NORM_SLACK) -> bool:
        a = self.encoded
        if a.shape[0] != a.shape[1]:
            return False
        return bool(np.max(np.abs(a - a.T), initial=0.0) <= tol * max(np.max(np.abs(a)), 1e-300))

    def with_label(self, label: str) -> "BlockEncoding":
        return BlockEncoding(self.encoded, self.subnorm, self.err, self.cost, label)

    def summary(self) -> dict:
        return {"label": self.label, "shape": list(self.shape), "subnorm": self.subnorm, "err": self.err}


def _combined_err(*errs: float) -> float:
    """Errors never shrink along a chain."""
    return float(max(errs))


def encode_known_matrix(a: np.ndarray, label: str = "known_matrix") -> BlockEncoding:
    """
    Encode a classically known matrix with subnormalization ||A||_F.

    Raises:
        SubnormalizationError: For the zero matrix
    """
    a = np.asarray(a, dtype=float)
    frob = float(np.linalg.norm(a))
    if frob == 0.0:
        raise SubnormalizationError(
            "the zero matrix has no block encoding with positive subnormalization"
        )
    return BlockEncoding(a, frob, 0.0, CostCounter().tick("state_preparation"), label)


def identity_encoding(n: int) -> BlockEncoding:
    return BlockEncoding(np.eye(n), 1.0, 0.0, CostCounter(), "identity")


def be_product(u1: BlockEncoding, u2: BlockEncoding) -> BlockEncoding:
    """Encoding of A1 A2 with subnorm alpha1 alpha2."""
    if u1.shape[1] != u2.shape[0]:
        raise ParameterError(f"cannot multiply encodings of shapes {u1.shape} and {u2.shape}")
    err = u1.subnorm * u2.err + u2.subnorm * u1.err
    return BlockEncoding(
        u1.encoded @ u2.encoded,
        u1.subnorm * u2.subnorm,
        _combined_err(err, u1.err, u2.err),
        (u1.cost + u2.cost).tick("product"),
        f"({u1.label}*{u2.label})",
    )


def be_lcu(units: Sequence[BlockEncoding], signs: Optional[Sequence[int]] = None) -> BlockEncoding:
    """
    Signed sum of encodings.

    Every input is first scaled down to the common subnorm alpha_c = max alpha_i; the
    normalized result is sum +-(A_i / alpha_c) / m, i.e. the encoded matrix is
    sum +-A_i with subnorm m alpha_c.
    """
    if not units:
        raise ParameterError("LCU needs at least one term")
    signs = list(signs) if signs is not None else [1] * len(units)
    if len(signs) != len(units) or any(s not in (1, -1) for s in signs):
        raise ParameterError("LCU signs must be +1 or -1, one per term")
    shape = units[0].shape
    if any(u.shape != shape for u in units):
        raise ParameterError("LCU terms must share a shape")

    common = max(u.subnorm for u in units)
    encoded = sum(s * u.encoded for s, u in zip(signs, units))
    cost = CostCounter.combine(u.cost for u in units)
    scaled = sum(1 for u in units if u.subnorm < common)
    return BlockEncoding(
        encoded,
        len(units) * common,
        float(sum(u.err for u in units)),
        cost.tick("scale", scaled).tick("lcu"),
        "(" + " ".join(("+" if s > 0 else "-") + u.label for s, u in zip(signs, units)) + ")",
    )


def be_tensor(u1: BlockEncoding, u2: BlockEncoding) -> BlockEncoding:
    """Kronecker product; subnorms multiply."""
    err = u1.subnorm * u2.err + u2.subnorm * u1.err
    return BlockEncoding(
        np.kron(u1.encoded, u2.encoded),
        u1.subnorm * u2.subnorm,
        _combined_err(err, u1.err, u2.err),
        (u1.cost + u2.cost).tick("tensor"),
        f"({u1.label}(x){u2.label})",
    )


def be_scale_down(u: BlockEncoding, p: float) -> BlockEncoding:
    """Encoding of A / p (p > 1) with the subnorm unchanged."""
    if not p > 1:
        raise ParameterError(f"scale-down factor must be > 1, got {p}")
    return BlockEncoding(u.encoded / p, u.subnorm, u.err, u.cost.tick("scale"), f"{u.label}/{p:g}")


def be_amplify(u: BlockEncoding, gamma: float, tolerance: float = 1e-10) -> BlockEncoding:
    """
    Uniform amplification: the subnorm shrinks by gamma.

    Costs ceil(gamma) applications and adds tolerance * (new subnorm) to the error.

    Raises:
        AmplificationRangeError: If gamma ||A|| / alpha exceeds 1/2
    """
    if not gamma > 1:
        raise ParameterError(f"amplification factor must be > 1, got {gamma}")
    ratio = gamma * operator_norm(u.encoded) / u.subnorm
    if ratio > 0.5 * (1 + NORM_SLACK):
        raise AmplificationRangeError(
            f"{u.label}: gamma * ||A|| / alpha = {ratio:.6g} exceeds 1/2 (gamma={gamma:g})"
        )
    new_subnorm = u.subnorm / gamma
    return BlockEncoding(
        u.encoded,
        new_subnorm,
        u.err + tolerance * new_subnorm,
        u.cost.tick("amplify", math.ceil(gamma)),
        f"amp({u.label})",
    )


def be_adjoint(u: BlockEncoding) -> BlockEncoding:
    """Encoding of A^T (inverse of the block-encoding unitary)."""
    return BlockEncoding(u.encoded.T, u.subnorm, u.err, u.cost.tick("adjoint"), f"{u.label}^T")


def be_diagonal_filter(u: BlockEncoding) -> BlockEncoding:
    """
    Keep the diagonal, squared: encoded diag(M_jj^2) with subnorm alpha^2 n.

    The normalized block is sum_j (M_jj / alpha)^2 / n |j><j|.
    """
    if u.shape[0] != u.shape[1]:
        raise ParameterError("diagonal filtering needs a square encoding")
    diag = np.diag(u.encoded)
    n = u.shape[0]
    return BlockEncoding(
        np.diag(diag**2),
        u.subnorm**2 * n,
        _combined_err(2 * u.subnorm * u.err + u.err**2, u.err),
        u.cost.tick("diagonal_filter"),
        f"diag({u.label})",
    )


def select_block(u: BlockEncoding, block: int, size: int) -> BlockEncoding:
    """Diagonal sub-block `block` of width `size` (a row-selection permutation)."""
    start = block * size
    if start + size > u.shape[0]:
        raise ParameterError(f"block {block} of size {size} is outside a {u.shape} encoding")
    sub = u.encoded[start : start + size, start : start + size]
    return BlockEncoding(sub, u.subnorm, u.err, u.cost.tick("permutation"), f"{u.label}[{block}]")


class BoundedPolynomial(Protocol):
    """Polynomial on [-1, 1] with a known degree and approximation error."""

    degree: int
    sup_error: float

    def __call__(self, x: np.ndarray) -> np.ndarray: ...


def _symmetric_eigh(u: BlockEncoding, operation: str):
    if not u.is_symmetric(1e-10):
        raise ContractError(f"{operation} needs a symmetric encoded matrix ({u.label})")
    a = u.normalized()
    return scipy.linalg.eigh(0.5 * (a + a.T))


def be_poly_transform(u: BlockEncoding, poly: BoundedPolynomial) -> BlockEncoding:
    """
    Eigenvalue transform P(A / alpha) with subnorm 1.

    Error: 4 * degree * sqrt(err / alpha) + the polynomial's own approximation error.

    Raises:
        ContractError: If A is not symmetric
        PolynomialBoundError: If |P| exceeds 1/2 somewhere on [-1, 1]
    """
    grid = np.linspace(-1.0, 1.0, POLY_GRID_POINTS)
    peak = float(np.max(np.abs(poly(grid))))
    if peak > 0.5 + NORM_SLACK:
        raise PolynomialBoundError(f"|P(x)| reaches {peak:.6g} on [-1, 1]; the transform needs <= 1/2")
    values, vectors = _symmetric_eigh(u, "polynomial transform")
    transformed = (vectors * poly(values)) @ vectors.T
    err = 4 * poly.degree * math.sqrt(u.err / u.subnorm) + poly.sup_error
    return BlockEncoding(
        transformed,
        1.0,
        _combined_err(err, u.err),
        u.cost.tick("poly_transform", max(int(poly.degree), 1)),
        f"P{poly.degree}({u.label})",
    )


def _check_spectrum(values: np.ndarray, lower: float, operation: str, label: str) -> None:
    if values.min() < lower - SPECTRUM_SLACK or values.max() > 1 + SPECTRUM_SLACK:
        raise ContractError(
            f"{operation} of {label}: spectrum [{values.min():.6g}, {values.max():.6g}] "
            f"is outside [{lower:.6g}, 1]"
        )


def be_negative_power(u: BlockEncoding, c: float, kappa: float) -> BlockEncoding:
    """
    Encoding of M^{-c} / (2 kappa^c), M = A / alpha with I / kappa <= M <= I.

    Cost weight ceil(kappa (1 + c)).
    """
    if not 0 < c <= 1:
        raise ParameterError(f"negative power exponent must lie in (0, 1], got {c}")
    if not kappa >= 1:
        raise ParameterError(f"condition bound kappa must be >= 1, got {kappa}")
    values, vectors = _symmetric_eigh(u, "negative power")
    _check_spectrum(values, 1.0 / kappa, "negative power", u.label)
    values = np.clip(values, 1.0 / kappa, 1.0)
    encoded = (vectors * (values**-c / (2 * kappa**c))) @ vectors.T
    # x^-c is c kappa^{1+c}-Lipschitz on [1/kappa, 1]
    err = c * kappa * (u.err / u.subnorm) / 2
    return BlockEncoding(
        encoded,
        1.0,
        _combined_err(err, u.err),
        u.cost.tick("negative_power", math.ceil(kappa * (1 + c))),
        f"{u.label}^-{c:g}",
    )


def be_positive_power(u: BlockEncoding, c: float, kappa: Optional[float] = None) -> BlockEncoding:
    """
    Encoding of M^c / 2, M = A / alpha with 0 <= M <= I (I / kappa <= M if kappa is given).

    Cost weight ceil(kappa (1 + c)), kappa defaulting to 1.
    """
    if not 0 < c <= 1:
        raise ParameterError(f"positive power exponent must lie in (0, 1], got {c}")
    if kappa is not None and not kappa >= 1:
        raise ParameterError(f"condition bound kappa must be >= 1, got {kappa}")
    lower = 1.0 / kappa if kappa is not None else 0.0
    values, vectors = _symmetric_eigh(u, "positive power")
    _check_spectrum(values, lower, "positive power", u.label)
    values = np.clip(values, lower, 1.0)
    encoded = (vectors * (values**c / 2)) @ vectors.T
    # x^c is c-Hoelder with constant 1 on [0, 1]
    err = (u.err / u.subnorm) ** c / 2
    return BlockEncoding(
        encoded,
        1.0,
        _combined_err(err, u.err),
        u.cost.tick("positive_power", math.ceil((kappa or 1.0) * (1 + c))),
        f"{u.label}^{c:g}",
    )
