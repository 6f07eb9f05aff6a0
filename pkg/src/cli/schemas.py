"""
CLI Report Schemas

Pydantic models for every JSON document the command line writes. Each carries a
top-level "schema" key so readers can detect format changes.
"""

from typing import Any, Dict, List, Literal, Optional

from pydantic import BaseModel, ConfigDict, Field

from src.config.run_config import SCHEMA_VERSION


class Report(BaseModel):
    schema_version: Literal["1"] = Field(
        default=SCHEMA_VERSION, alias="schema", description="Report format version"
    )
    command: str = Field(..., description="Subcommand that produced the report")

    model_config = ConfigDict(populate_by_name=True)

    def render(self) -> str:
        """UTF-8 JSON in field declaration order."""
        return self.model_dump_json(by_alias=True, indent=2)


class SynthReport(Report):
    command: Literal["synth"] = "synth"
    points_path: str
    meta_path: str
    kind: str
    n_points: int
    ambient_dim: int
    analytic_curvature: Optional[float] = Field(
        default=None, description="Constant S of the manifold; null when it varies"
    )


class PointReport(BaseModel):
    index: int
    local_dim: int
    dim_used: int
    A: float
    S: float
    A_ols: float
    A_paper: float
    A_scaled: Optional[float] = None
    fit_variant: str
    radii: List[float]
    vol_nor: List[float]


class EstimateReport(Report):
    command: Literal["estimate"] = "estimate"
    input: str
    n_points: int
    global_dim: int
    median_local_dim: int
    median_S: float
    sigma2: float
    h: float
    geodesic_scale: float
    config: Dict[str, Any]
    points: List[PointReport]
    fit_files: List[str] = Field(default_factory=list)


class DiffmapReport(Report):
    command: Literal["diffmap"] = "diffmap"
    input: str
    embedding_path: Optional[str] = None
    qsim: bool = False
    t: float
    n: int
    include_trivial: bool
    sigma2: Optional[float]
    eigenvalues: List[float]


class StageReport(BaseModel):
    name: str
    max_relative_deviation: float
    tolerance: float
    passed: bool
    detail: Dict[str, Any] = Field(default_factory=dict)


class QverifyReport(Report):
    command: Literal["qverify"] = "qverify"
    passed: bool
    failed_stages: List[str]
    n_points: int
    nn: int
    mode: str
    stages: List[StageReport]
    subnorm_chain: List[Dict[str, Any]]
    costs: Dict[str, Dict[str, int]]
    calibration: Optional[Dict[str, Any]] = None
    config: Dict[str, Any]
