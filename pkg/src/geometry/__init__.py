"""Neighbourhoods, local dimension, density, ball volumes and scalar curvature."""

from src.geometry.density import (
    DensityField,
    default_h,
    density_field,
    resolve_h,
    sampling_intensity,
)
from src.geometry.estimator import (
    EstimationResult,
    GeometryContext,
    LocalGeometryReport,
    build_context,
    estimate_all,
    estimate_point,
)
from src.geometry.neighborhoods import (
    Neighborhood,
    all_neighborhoods,
    ball_neighborhood,
    nearest_neighborhood,
)
from src.geometry.pca import LocalPCA, global_dimension, local_pca, prefix_dimension
from src.geometry.volumes import (
    CurvatureReport,
    VolumeProfile,
    ball_volumes,
    curvature,
    fit_quadratic,
    fit_scaled,
    stationarity_residual,
    unit_ball_volume,
)

__all__ = [
    "CurvatureReport",
    "DensityField",
    "EstimationResult",
    "GeometryContext",
    "LocalGeometryReport",
    "LocalPCA",
    "Neighborhood",
    "VolumeProfile",
    "all_neighborhoods",
    "ball_neighborhood",
    "ball_volumes",
    "build_context",
    "curvature",
    "default_h",
    "density_field",
    "estimate_all",
    "estimate_point",
    "fit_quadratic",
    "fit_scaled",
    "global_dimension",
    "local_pca",
    "nearest_neighborhood",
    "prefix_dimension",
    "resolve_h",
    "sampling_intensity",
    "stationarity_residual",
    "unit_ball_volume",
]
