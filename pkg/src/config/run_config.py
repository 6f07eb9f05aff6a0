"""
Run Configuration

Hyperparameters for one estimation run. Values come from three layers with
precedence flags > config file > defaults; the file may be JSON or YAML.
"""

import json
import logging
from enum import Enum
from pathlib import Path
from typing import Any, Dict, Literal, Mapping, Optional, Union

import yaml
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

logger = logging.getLogger(__name__)

SCHEMA_VERSION = "1"


class FitVariant(str, Enum):
    """How the quadratic volume fit solves for A."""
    OLS = "ols"                      # exact minimizer of the stated cost
    PAPER_FORMULA = "paper_formula"  # closed form reproduced verbatim
    SCALED = "scaled"                # Vol_nor = c (1 + A r^2), c fitted too


class BallCount(str, Enum):
    """Which members a ball of radius r_j counts."""
    CLOSED = "closed"  # center plus every member with d <= r_j
    OPEN = "open"      # members with 0 < d < r_j


class DimMode(str, Enum):
    """Which dimension normalizes ball volumes."""
    LOCAL = "local"
    GLOBAL = "global"


class SpectrumSource(str, Enum):
    """Operator whose spectrum defines the geodesic field."""
    K = "K"
    P = "P"


class GeodesicScale(str, Enum):
    """Calibration applied to the raw diffusion distance."""
    NONE = "none"
    LOCAL_EUCLIDEAN = "local_euclidean"


class DensityNormalization(str, Enum):
    """How the heat-kernel sum is turned into inverse-density weights."""
    NONE = "none"                # verbatim 1 / rho
    HEAT_KERNEL = "heat_kernel"  # divide rho by the truncated Gaussian mass


class QsimMode(str, Enum):
    """Trace estimation and Hadamard tests run exact or with simulated shot noise."""
    EXACT = "exact"
    SHOT = "shot"


class QsimConfig(BaseModel):
    """Knobs of the block-encoding simulator."""

    model_config = ConfigDict(extra="forbid", use_enum_values=False)

    mode: QsimMode = Field(default=QsimMode.EXACT, description="exact or shot-noise emulation")
    degree: int = Field(default=40, ge=1, le=200, description="Chebyshev degree of the Gaussian approximation")
    power_tol: float = Field(default=1e-12, gt=0.0, lt=1e-2, description="Power-method residual tolerance")
    power_max_iter: int = Field(default=200_000, ge=10, description="Hard cap on power iterations per eigenpair")
    max_restarts: int = Field(default=20, ge=1, le=50, description="Fresh start vectors tried per eigenpair")
    shot_epsilon: float = Field(default=0.01, gt=0.0, description="Declared std of shot-mode estimates")
    amplification_tolerance: float = Field(default=1e-10, ge=0.0, description="Relative error added by amplification")
    tie_fallback: bool = Field(default=True, description="Resolve neighbour ties classically instead of failing")
    verify_tolerance: float = Field(default=1e-6, gt=0.0, description="qverify pass threshold (relative)")
    fault_stage: Optional[str] = Field(default=None, description="Test hook: perturb this qverify stage")


class RunConfig(BaseModel):
    """All hyperparameters of an estimation run."""

    model_config = ConfigDict(extra="forbid")

    sigma2: Union[float, Literal["auto"]] = Field(default="auto", description="Kernel scale sigma^2 or 'auto' (median heuristic)")
    t: float = Field(default=1.0, gt=0.0, description="Diffusion timestep")
    nn: int = Field(default=20, ge=2, description="Neighbourhood size, center included")
    tau: float = Field(default=0.95, gt=0.0, lt=1.0, description="Explained-variance threshold for d_i")
    h: Union[float, Literal["auto"]] = Field(default="auto", description="Density kernel scale or 'auto'")
    fit_variant: FitVariant = Field(default=FitVariant.SCALED)
    dim_mode: DimMode = Field(default=DimMode.GLOBAL)
    spectrum: SpectrumSource = Field(default=SpectrumSource.P)
    geodesic_scale: GeodesicScale = Field(default=GeodesicScale.LOCAL_EUCLIDEAN)
    density_normalization: DensityNormalization = Field(default=DensityNormalization.HEAT_KERNEL)
    geodesic_paths: bool = Field(default=True, description="Measure balls in shortest paths through the neighbour graph")
    ball_scale: Optional[float] = Field(default=8.0, gt=1.0, description="Ball extent in units of h; null keeps the nn-neighbourhood")
    ball_count: BallCount = Field(default=BallCount.OPEN)
    r_min: Union[float, Literal["auto"], None] = Field(default="auto", description="Smallest radius kept in the fit, 'auto' = h")
    r_max: Optional[float] = Field(default=None, gt=0.0, description="Largest radius kept in the fit")
    seed: int = Field(default=0, ge=0)
    qsim: QsimConfig = Field(default_factory=QsimConfig)

    @field_validator("sigma2", "h", mode="after")
    @classmethod
    def check_positive_scale(cls, v):
        """Numeric scales must be strictly positive."""
        if v != "auto" and not v > 0:
            raise ValueError("scale must be > 0 or 'auto'")
        return v

    @field_validator("r_min", mode="after")
    @classmethod
    def check_r_min(cls, v):
        """A numeric r_min must be nonnegative."""
        if v is not None and v != "auto" and not v >= 0:
            raise ValueError("r_min must be >= 0, 'auto' or null")
        return v

    @model_validator(mode="after")
    def check_radius_window(self) -> "RunConfig":
        """A numeric r_min must lie below r_max when both are set."""
        numeric = self.r_min is not None and self.r_min != "auto"
        if numeric and self.r_max is not None and self.r_min >= self.r_max:
            raise ValueError("r_min must be smaller than r_max")
        return self

    def fit_floor(self, h: float) -> Optional[float]:
        """Resolve r_min against the density scale h."""
        return float(h) if self.r_min == "auto" else self.r_min

    def neighborhood_run(self) -> "RunConfig":
        """
        The same run with volumes measured on the nn-neighbourhood in d_G.

        Closed balls, no graph paths and a fit through 1; the block-encoded
        pipeline and its oracle work this way. An automatic r_min is dropped and
        a scaled fit falls back to ols.
        """
        update: Dict[str, Any] = {
            "geodesic_paths": False,
            "ball_scale": None,
            "ball_count": BallCount.CLOSED,
        }
        if self.fit_variant is FitVariant.SCALED:
            update["fit_variant"] = FitVariant.OLS
        if self.r_min == "auto":
            update["r_min"] = None
        return self.model_copy(update=update)

    # -------------------------------------------------------------------------
    # Layering
    # -------------------------------------------------------------------------
    @staticmethod
    def read_file(path: Union[str, Path]) -> Dict[str, Any]:
        """
        Read a JSON or YAML config file into a plain dict.

        JSON is a subset of YAML, so one safe_load handles both.
        """
        text = Path(path).read_text(encoding="utf-8")
        data = yaml.safe_load(text) or {}
        if not isinstance(data, dict):
            raise ValueError(f"config file {path} must contain a mapping")
        logger.debug(f"Loaded config file {path} with keys {sorted(data)}")
        return data

    @classmethod
    def merged(
        cls,
        file_values: Optional[Mapping[str, Any]] = None,
        flag_values: Optional[Mapping[str, Any]] = None,
    ) -> "RunConfig":
        """
        Build a config from defaults, then file values, then flags.

        Flags set to None are treated as "not given"; a null in the file clears a
        nullable field. Nested qsim values merge key by key.
        """
        data: Dict[str, Any] = {}
        for layer, is_flags in ((file_values or {}, False), (flag_values or {}, True)):
            for key, value in layer.items():
                if value is None and is_flags:
                    continue
                if key == "qsim" and isinstance(value, Mapping):
                    nested = dict(data.get("qsim", {}))
                    nested.update({k: v for k, v in value.items() if v is not None})
                    data["qsim"] = nested
                else:
                    data[key] = value
        return cls.model_validate(data)

    @classmethod
    def load(cls, path: Union[str, Path], **flags: Any) -> "RunConfig":
        """Load a config file and apply flag overrides."""
        return cls.merged(cls.read_file(path), flags)

    def to_json(self) -> str:
        """Stable JSON rendering (field declaration order)."""
        return json.dumps(self.model_dump(mode="json"), indent=2)
