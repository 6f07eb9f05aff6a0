"""
Curvature Estimation Pipeline

Runs kernel -> spectrum -> geodesics -> neighbourhoods -> local dimension ->
global dimension -> graph paths -> density -> ball volumes -> quadratic fit ->
scalar curvature for every point of a cloud (estimate_all) or for a single point
(estimate_point). With geodesic_paths off, density and balls stay on the diffusion
field and its nn-neighbourhoods.
Each stage runs inside a stage timer so the run can be followed in the logs.
"""

import logging
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional

import numpy as np

from src.config.run_config import (
    DensityNormalization,
    DimMode,
    FitVariant,
    GeodesicScale,
    RunConfig,
    SpectrumSource,
)
from src.core.errors import (
    CurvscopeError,
    DegenerateInputError,
    ParameterError,
    PointEstimationError,
)
from src.core.stats import lower_median
from src.diffusion.geodesic import (
    GeodesicField,
    bridge_components,
    calibrate_geodesic_scale,
    geodesic_field,
    graph_geodesic_field,
)
from src.diffusion.kernel import (
    KernelMatrix,
    build_diffusion_operator,
    build_kernel,
    resolve_sigma2,
)
from src.diffusion.spectral import OperatorTag, SpectralDecomposition, spectral_decompose
from src.geometry.density import DensityField, density_field, resolve_h, sampling_intensity
from src.geometry.neighborhoods import (
    Neighborhood,
    all_neighborhoods,
    ball_neighborhood,
    check_neighborhood_size,
)
from src.geometry.pca import LocalPCA, global_dimension, local_pca
from src.geometry.volumes import (
    CurvatureReport,
    VolumeProfile,
    ball_volumes,
    curvature,
    fit_quadratic,
    fit_scaled,
)
from src.middleware.logging import new_run_id, stage_timer
from src.pointcloud.cloud import DistanceMatrix, PointCloud, pairwise_distances

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class LocalGeometryReport:
    """Everything estimated at one point."""

    index: int
    neighborhood: Neighborhood
    local_dim: int
    singular_values: np.ndarray
    curvature: CurvatureReport

    @property
    def A(self) -> float:
        return self.curvature.fit_A

    @property
    def S(self) -> float:
        return self.curvature.curvature

    def to_dict(self) -> Dict[str, Any]:
        c = self.curvature
        return {
            "index": self.index,
            "local_dim": self.local_dim,
            "dim_used": c.local_dim_used,
            "A": c.fit_A,
            "S": c.curvature,
            "A_ols": c.A_ols,
            "A_paper": c.A_paper,
            "A_scaled": c.A_scaled,
            "radii": c.radii.tolist(),
            "vol_nor": c.normalized_volumes.tolist(),
            "fit_variant": c.fit_variant.value,
        }


@dataclass(frozen=True, eq=False)
class GeometryContext:
    """
    Shared, read-only products of the stages that precede the per-point fit.

    `neighborhoods` come from the diffusion field and feed the PCA; density and
    balls live on `volume_field` with its own nn-neighbourhoods.
    """

    cloud: PointCloud
    config: RunConfig
    distances: DistanceMatrix
    kernel: KernelMatrix
    spectrum: SpectralDecomposition
    field: GeodesicField
    neighborhoods: List[Neighborhood]
    pcas: List[LocalPCA]
    global_dim: int
    volume_field: GeodesicField
    volume_neighborhoods: List[Neighborhood]
    density: DensityField
    run_id: str

    @property
    def local_dims(self) -> List[int]:
        return [p.local_dim for p in self.pcas]

    def dim_for(self, i: int, dim_mode: DimMode) -> int:
        return self.global_dim if dim_mode is DimMode.GLOBAL else self.pcas[i].local_dim


@dataclass(frozen=True, eq=False)
class EstimationResult:
    """Reports for the requested points plus the run-wide quantities."""

    reports: List[LocalGeometryReport]
    global_dim: int
    sigma2: float
    h: float
    geodesic_scale: float
    config: RunConfig
    run_id: str = field(default="")

    def curvatures(self) -> np.ndarray:
        return np.array([r.S for r in self.reports])

    def local_dims(self) -> np.ndarray:
        return np.array([r.local_dim for r in self.reports])

    def median_curvature(self) -> float:
        return float(np.median(self.curvatures()))

    def to_dict(self) -> Dict[str, Any]:
        return {
            "global_dim": self.global_dim,
            "sigma2": self.sigma2,
            "h": self.h,
            "geodesic_scale": self.geodesic_scale,
            "median_local_dim": int(lower_median(self.local_dims())),
            "median_S": self.median_curvature(),
            "points": [r.to_dict() for r in self.reports],
        }


def per_point(index: int, fn, *args, **kwargs):
    try:
        return fn(*args, **kwargs)
    except PointEstimationError:
        raise
    except CurvscopeError as e:
        raise PointEstimationError(index, e) from e


def decompose_for(kernel: KernelMatrix, source: SpectrumSource) -> SpectralDecomposition:
    """Spectrum of K or of P = D^-1 K."""
    if SpectrumSource(source) is SpectrumSource.K:
        return spectral_decompose(kernel, OperatorTag.K)
    return spectral_decompose(build_diffusion_operator(kernel), OperatorTag.P)


def build_context(cloud: PointCloud, config: RunConfig, run_id: Optional[str] = None) -> GeometryContext:
    """
    Run every stage shared by all points.

    Raises:
        ParameterError: If nn does not fit the cloud
        PointEstimationError: If a per-point stage fails (carries the index)
    """
    run_id = run_id or new_run_id()
    n = cloud.n_points
    check_neighborhood_size(n, config.nn)

    with stage_timer("pairwise_distances", run_id, n_points=n):
        distances = pairwise_distances(cloud)

    with stage_timer("kernel", run_id) as out:
        sigma2 = resolve_sigma2(distances, config.sigma2)
        kernel = build_kernel(distances, sigma2)
        out["sigma2"] = sigma2

    with stage_timer("spectral_decompose", run_id, spectrum=config.spectrum.value) as out:
        spectrum = decompose_for(kernel, config.spectrum)
        out["residual"] = spectrum.max_residual

    with stage_timer("geodesic_field", run_id, t=config.t) as out:
        field_ = geodesic_field(spectrum, config.t)
        if config.geodesic_scale is GeodesicScale.LOCAL_EUCLIDEAN:
            field_ = field_.rescaled(calibrate_geodesic_scale(field_, distances))
        out["scale"] = field_.scale

    with stage_timer("neighborhoods", run_id, nn=config.nn):
        neighborhoods = all_neighborhoods(field_, config.nn)

    with stage_timer("local_pca", run_id, tau=config.tau) as out:
        pcas = [per_point(i, local_pca, cloud, neighborhoods[i], config.tau) for i in range(n)]
        global_dim = global_dimension([p.local_dim for p in pcas])
        out["global_dim"] = global_dim

    volume_field, volume_neighborhoods = field_, neighborhoods
    if config.geodesic_paths:
        with stage_timer("geodesic_paths", run_id) as out:
            paths = graph_geodesic_field(distances, [nb.member_indices for nb in neighborhoods])
            out["unreachable_pairs"] = int(np.isinf(paths.dg).sum()) // 2
            volume_field = bridge_components(paths, distances)
            volume_neighborhoods = all_neighborhoods(volume_field, config.nn)

    with stage_timer("density", run_id) as out:
        h = resolve_h(volume_neighborhoods, config.h)
        density = density_field(volume_field, volume_neighborhoods, h)
        if config.density_normalization is DensityNormalization.HEAT_KERNEL:
            dims = global_dim if config.dim_mode is DimMode.GLOBAL else [p.local_dim for p in pcas]
            density = sampling_intensity(density, volume_neighborhoods, dims)
        out["h"] = h

    return GeometryContext(
        cloud=cloud,
        config=config,
        distances=distances,
        kernel=kernel,
        spectrum=spectrum,
        field=field_,
        neighborhoods=neighborhoods,
        pcas=pcas,
        global_dim=global_dim,
        volume_field=volume_field,
        volume_neighborhoods=volume_neighborhoods,
        density=density,
        run_id=run_id,
    )


def fit_window(profile: VolumeProfile, config: RunConfig, h: float) -> VolumeProfile:
    """
    Clip the profile to [r_min, r_max].

    An automatic r_min (= h) is skipped when fewer than 2 distinct radii reach it.
    """
    clipped = profile.clipped(config.fit_floor(h), config.r_max)
    if config.r_min == "auto" and np.unique(clipped.radii).size < 2:
        logger.debug(f"Point {profile.center_index}: fewer than 2 radii above h, fitting without a floor")
        clipped = profile.clipped(None, config.r_max)
    return clipped


def fit_profile(
    profile: VolumeProfile, config: RunConfig, neighborhood_size: int, h: float
) -> CurvatureReport:
    """
    Clip radii, fit every variant and report the configured one.

    A scaled fit without a positive intercept is reported as None; when it was
    the configured variant the point falls back to ols and says so in fit_variant.
    """
    clipped = fit_window(profile, config, h)
    a_ols = fit_quadratic(clipped.radii, clipped.normalized_volumes, FitVariant.OLS)
    a_paper = fit_quadratic(
        clipped.radii, clipped.normalized_volumes, FitVariant.PAPER_FORMULA, neighborhood_size
    )
    variant = config.fit_variant
    try:
        a_scaled: Optional[float] = fit_scaled(clipped.radii, clipped.normalized_volumes)[0]
    except DegenerateInputError as e:
        a_scaled = None
        if variant is FitVariant.SCALED:
            logger.warning(f"Point {profile.center_index}: {e}; falling back to ols")
            variant = FitVariant.OLS
    chosen = {FitVariant.OLS: a_ols, FitVariant.PAPER_FORMULA: a_paper, FitVariant.SCALED: a_scaled}[variant]
    return CurvatureReport(
        center_index=profile.center_index,
        radii=clipped.radii,
        raw_volumes=clipped.raw_volumes,
        normalized_volumes=clipped.normalized_volumes,
        fit_A=chosen,
        local_dim_used=profile.local_dim_used,
        curvature=curvature(chosen, profile.local_dim_used),
        fit_variant=variant,
        A_ols=a_ols,
        A_paper=a_paper,
        A_scaled=a_scaled,
    )


def volume_neighborhood(ctx: GeometryContext, i: int) -> Neighborhood:
    """Members of point i's balls: the nn-neighbourhood, or everything out to ball_scale * h."""
    nb = ctx.volume_neighborhoods[i]
    if ctx.config.ball_scale is None:
        return nb
    return ball_neighborhood(ctx.volume_field, i, ctx.config.ball_scale * ctx.density.h, nb.size)


def report_for_point(ctx: GeometryContext, i: int) -> LocalGeometryReport:
    """Volumes, fit and curvature for point i on a prepared context."""
    d = ctx.dim_for(i, ctx.config.dim_mode)
    ball = per_point(i, volume_neighborhood, ctx, i)
    profile = per_point(
        i, ball_volumes, ctx.volume_field, ctx.density, ball, d, ctx.config.ball_count
    )
    report = per_point(i, fit_profile, profile, ctx.config, ball.size, ctx.density.h)
    return LocalGeometryReport(
        index=i,
        neighborhood=ctx.neighborhoods[i],
        local_dim=ctx.pcas[i].local_dim,
        singular_values=ctx.pcas[i].singular_values,
        curvature=report,
    )


def estimate_all(cloud: PointCloud, config: Optional[RunConfig] = None) -> EstimationResult:
    """
    Local dimension and scalar curvature at every point.

    Uses config.dim_mode (global d by default) in the unit-ball normalization.
    """
    config = config or RunConfig()
    ctx = build_context(cloud, config)
    with stage_timer("curvature", ctx.run_id, dim_mode=config.dim_mode.value) as out:
        reports = [report_for_point(ctx, i) for i in range(cloud.n_points)]
        out["median_S"] = float(np.median([r.S for r in reports]))
    return EstimationResult(
        reports=reports,
        global_dim=ctx.global_dim,
        sigma2=ctx.kernel.sigma2,
        h=ctx.density.h,
        geodesic_scale=ctx.field.scale,
        config=config,
        run_id=ctx.run_id,
    )


def estimate_point(
    cloud: PointCloud,
    i: int,
    config: Optional[RunConfig] = None,
    dim_mode: DimMode = DimMode.LOCAL,
) -> LocalGeometryReport:
    """
    Single-point query; normalizes with the local d_i unless told otherwise.

    The geodesic field and densities still need the whole cloud.
    """
    config = (config or RunConfig()).model_copy(update={"dim_mode": DimMode(dim_mode)})
    if not 0 <= i < cloud.n_points:
        raise ParameterError(f"point index {i} out of range for {cloud.n_points} points")
    ctx = build_context(cloud, config)
    with stage_timer("curvature", ctx.run_id, point=i):
        return report_for_point(ctx, i)
