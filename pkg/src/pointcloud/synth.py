"""
Synthetic Manifold Generator

Samples points on manifolds with known scalar curvature, optionally adding
isotropic ambient Gaussian noise. Used as fixtures with analytic ground truth.
"""

import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Dict, Mapping, Optional

import numpy as np

from src.core.errors import ParameterError
from src.pointcloud.cloud import PointCloud

logger = logging.getLogger(__name__)


class ManifoldKind(str, Enum):
    """Supported synthetic manifolds."""
    PLANE = "plane"
    LINE = "line"
    CIRCLE = "circle"
    SPHERE = "sphere"
    TORUS = "torus"
    SWISS_ROLL = "swiss_roll"


# Allowed parameter names per kind; defaults that depend on n are filled in later.
_PARAM_DEFAULTS: Dict[ManifoldKind, Dict[str, Any]] = {
    ManifoldKind.PLANE: {"side": None, "ambient_dim": 3},
    ManifoldKind.LINE: {"length": None, "ambient_dim": 3},
    ManifoldKind.CIRCLE: {"radius": 1.0, "ambient_dim": 2},
    ManifoldKind.SPHERE: {"radius": 1.0, "dim": 2, "ambient_dim": None},
    ManifoldKind.TORUS: {"major_radius": 2.0, "minor_radius": 1.0},
    ManifoldKind.SWISS_ROLL: {"height": 21.0},
}

TORUS_CURVATURE_FORMULA = "2*cos(theta)/(r*(R+r*cos(theta)))"


@dataclass(frozen=True)
class ManifoldMeta:
    """Provenance of a synthetic cloud plus its analytic curvature."""

    kind: ManifoldKind
    params: Dict[str, Any]
    noise_sigma: float
    seed: int
    analytic_curvature: Optional[float] = None
    curvature_formula: Optional[str] = field(default=None)

    def curvature_at(self, points: np.ndarray) -> np.ndarray:
        """Analytic scalar curvature at each point (nearest manifold point for noisy data)."""
        points = np.atleast_2d(np.asarray(points, dtype=float))
        if self.kind is ManifoldKind.TORUS:
            big_r = self.params["major_radius"]
            small_r = self.params["minor_radius"]
            rho = np.hypot(points[:, 0], points[:, 1])
            theta = np.arctan2(points[:, 2], rho - big_r)
            return 2.0 * np.cos(theta) / (small_r * (big_r + small_r * np.cos(theta)))
        return np.full(points.shape[0], float(self.analytic_curvature))

    def residual(self, points: np.ndarray) -> np.ndarray:
        """Distance-like residual of each point from the manifold's defining equations."""
        x = np.atleast_2d(np.asarray(points, dtype=float))
        p = self.params
        if self.kind is ManifoldKind.PLANE:
            return np.linalg.norm(x[:, 2:], axis=1)
        if self.kind is ManifoldKind.LINE:
            return np.linalg.norm(x[:, 1:], axis=1)
        if self.kind in (ManifoldKind.CIRCLE, ManifoldKind.SPHERE):
            k = 2 if self.kind is ManifoldKind.CIRCLE else p["dim"] + 1
            radial = np.abs(np.linalg.norm(x[:, :k], axis=1) - p["radius"])
            return radial + np.linalg.norm(x[:, k:], axis=1)
        if self.kind is ManifoldKind.TORUS:
            rho = np.hypot(x[:, 0], x[:, 1])
            return np.abs(np.hypot(rho - p["major_radius"], x[:, 2]) - p["minor_radius"])
        # swiss roll: (t cos t, y, t sin t) with t = |(x, z)|
        t = np.hypot(x[:, 0], x[:, 2])
        return np.hypot(x[:, 0] - t * np.cos(t), x[:, 2] - t * np.sin(t))

    def to_json_dict(self) -> Dict[str, Any]:
        """Sidecar representation (keys: kind, params, noise_sigma, seed, analytic_curvature)."""
        curvature: Any = self.analytic_curvature
        if curvature is None and self.curvature_formula:
            curvature = {"pointwise": self.curvature_formula}
        return {
            "kind": self.kind.value,
            "params": dict(self.params),
            "noise_sigma": self.noise_sigma,
            "seed": self.seed,
            "analytic_curvature": curvature,
        }

    @classmethod
    def from_json_dict(cls, data: Mapping[str, Any]) -> "ManifoldMeta":
        curvature = data.get("analytic_curvature")
        formula = None
        if isinstance(curvature, Mapping):
            formula = curvature.get("pointwise")
            curvature = None
        return cls(
            kind=ManifoldKind(data["kind"]),
            params=dict(data.get("params", {})),
            noise_sigma=float(data.get("noise_sigma", 0.0)),
            seed=int(data.get("seed", 0)),
            analytic_curvature=curvature,
            curvature_formula=formula,
        )


def _resolve_params(kind: ManifoldKind, n: int, params: Optional[Mapping[str, Any]]) -> Dict[str, Any]:
    allowed = _PARAM_DEFAULTS[kind]
    given = dict(params or {})
    unknown = set(given) - set(allowed)
    if unknown:
        raise ParameterError(f"unknown parameter(s) for {kind.value}: {', '.join(sorted(unknown))}")
    resolved = {**allowed, **{k: v for k, v in given.items() if v is not None}}

    if kind is ManifoldKind.PLANE and resolved["side"] is None:
        resolved["side"] = math.sqrt(n)  # unit mean spacing
    if kind is ManifoldKind.LINE and resolved["length"] is None:
        resolved["length"] = float(n)
    if kind is ManifoldKind.SPHERE:
        resolved["dim"] = int(resolved["dim"])
        if resolved["dim"] < 1:
            raise ParameterError("sphere dim must be >= 1")
        if resolved["ambient_dim"] is None:
            resolved["ambient_dim"] = resolved["dim"] + 1

    for key in ("side", "length", "radius", "major_radius", "minor_radius", "height"):
        if key in resolved and not float(resolved[key]) > 0:
            raise ParameterError(f"{kind.value} parameter '{key}' must be > 0, got {resolved[key]}")

    minimum_ambient = {
        ManifoldKind.PLANE: 2,
        ManifoldKind.LINE: 1,
        ManifoldKind.CIRCLE: 2,
        ManifoldKind.SPHERE: resolved.get("dim", 0) + 1,
    }
    if kind in minimum_ambient:
        resolved["ambient_dim"] = int(resolved["ambient_dim"])
        need, got = minimum_ambient[kind], resolved["ambient_dim"]
        if got < need:
            raise ParameterError(f"{kind.value} needs ambient_dim >= {need}, got {got}")
    return resolved


def _pad(points: np.ndarray, ambient_dim: int) -> np.ndarray:
    if points.shape[1] == ambient_dim:
        return points
    out = np.zeros((points.shape[0], ambient_dim))
    out[:, : points.shape[1]] = points
    return out


def generate_manifold(
    kind: ManifoldKind | str,
    n: int,
    params: Optional[Mapping[str, Any]] = None,
    noise_sigma: float = 0.0,
    seed: int = 0,
) -> PointCloud:
    """
    Sample n points on a manifold, then add ambient Gaussian noise.

    Args:
        kind: plane, line, circle, sphere, torus or swiss_roll
        n: Number of points (>= 2)
        params: Generator parameters (radius, dim, ambient_dim, ...); see _PARAM_DEFAULTS
        noise_sigma: Standard deviation of the isotropic ambient noise
        seed: Seed of the numpy Generator; same seed gives the same cloud

    Returns:
        PointCloud whose meta records the parameters and analytic curvature

    Raises:
        ParameterError: On an unknown kind, bad parameters, n < 2 or noise < 0
    """
    try:
        kind = ManifoldKind(kind)
    except ValueError:
        raise ParameterError(f"unknown manifold kind '{kind}'")
    if n < 2:
        raise ParameterError(f"n must be >= 2, got {n}")
    if noise_sigma < 0 or not math.isfinite(noise_sigma):
        raise ParameterError(f"noise_sigma must be a finite value >= 0, got {noise_sigma}")

    p = _resolve_params(kind, n, params)
    rng = np.random.default_rng(seed)
    curvature: Optional[float] = 0.0
    formula = None

    if kind is ManifoldKind.PLANE:
        uv = rng.uniform(0.0, p["side"], size=(n, 2))
        points = _pad(uv, p["ambient_dim"])
    elif kind is ManifoldKind.LINE:
        s = rng.uniform(0.0, p["length"], size=(n, 1))
        points = _pad(s, p["ambient_dim"])
    elif kind is ManifoldKind.CIRCLE:
        angle = rng.uniform(0.0, 2 * np.pi, size=n)
        points = _pad(p["radius"] * np.column_stack([np.cos(angle), np.sin(angle)]), p["ambient_dim"])
    elif kind is ManifoldKind.SPHERE:
        # normalized Gaussian vectors are exactly uniform on the sphere
        g = rng.standard_normal(size=(n, p["dim"] + 1))
        g /= np.linalg.norm(g, axis=1, keepdims=True)
        points = _pad(p["radius"] * g, p["ambient_dim"])
        curvature = p["dim"] * (p["dim"] - 1) / p["radius"] ** 2
    elif kind is ManifoldKind.TORUS:
        # uniform in both angles, hence non-uniform in area
        theta = rng.uniform(0.0, 2 * np.pi, size=n)
        phi = rng.uniform(0.0, 2 * np.pi, size=n)
        ring = p["major_radius"] + p["minor_radius"] * np.cos(theta)
        height = p["minor_radius"] * np.sin(theta)
        points = np.column_stack([ring * np.cos(phi), ring * np.sin(phi), height])
        curvature = None
        formula = TORUS_CURVATURE_FORMULA
    else:
        t = 1.5 * np.pi * (1.0 + 2.0 * rng.uniform(size=n))
        y = p["height"] * rng.uniform(size=n)
        points = np.column_stack([t * np.cos(t), y, t * np.sin(t)])

    if noise_sigma > 0:
        points = points + rng.normal(0.0, noise_sigma, size=points.shape)

    meta = ManifoldMeta(
        kind=kind,
        params=p,
        noise_sigma=float(noise_sigma),
        seed=int(seed),
        analytic_curvature=curvature,
        curvature_formula=formula,
    )
    logger.debug(f"Generated {kind.value} cloud n={n} noise={noise_sigma} seed={seed}")
    return PointCloud(points, meta=meta)
