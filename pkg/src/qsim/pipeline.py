"""
Block-Encoded Curvature Pipeline

Replays the curvature workflow on block encodings: kernel Gram encoding ->
geodesic diagonals -> power-method neighbour search -> centered Gram encodings ->
local dimension -> Hadamard-test density and fit sums -> scalar curvature.
Geometry that needs no quantum primitive (unit-ball volumes, weighted ball
counts) reuses the classical functions on the simulated geodesic field. Volumes
are always measured on the nn-neighbourhood in d_G (RunConfig.neighborhood_run).
"""

import logging
from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import numpy as np

from src.config.run_config import (
    DensityNormalization,
    DimMode,
    FitVariant,
    GeodesicScale,
    RunConfig,
)
from src.core.errors import DegenerateInputError, ParameterError, PointEstimationError
from src.diffusion.geodesic import GeodesicField, GeodesicSource, calibrate_geodesic_scale
from src.diffusion.kernel import resolve_sigma2
from src.geometry.density import DensityField, resolve_h, sampling_intensity
from src.geometry.estimator import LocalGeometryReport, per_point
from src.geometry.neighborhoods import Neighborhood, check_neighborhood_size
from src.geometry.pca import global_dimension
from src.geometry.volumes import (
    CurvatureReport,
    ball_volumes,
    curvature,
    fit_scaled,
    ols_from_sums,
    paper_from_sums,
)
from src.middleware.logging import new_run_id, stage_timer
from src.pointcloud.cloud import DistanceMatrix, PointCloud, pairwise_distances
from src.qsim.block_encoding import BlockEncoding, CostCounter
from src.qsim.dimension import LocalDimensionRun, centered_gram_encoding, local_dimension_run
from src.qsim.geodesic_encoding import NeighborhoodSearch, neighborhood_search, rescale_neighborhood
from src.qsim.kernel_encoding import build_kernel_gram_encoding
from src.qsim.sums import FitSums, qsim_fit_sums, uniform_sum

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class QsimPointReport:
    """A point's report plus the Hadamard-test sums behind its fit."""

    report: LocalGeometryReport
    sums: FitSums


@dataclass(frozen=True, eq=False)
class QsimGeometryRun:
    """Every shared product of the block-encoded pipeline, in point order."""

    cloud: PointCloud
    config: RunConfig
    distances: DistanceMatrix
    sigma2: float
    gram: BlockEncoding
    searches: List[NeighborhoodSearch]
    field: GeodesicField
    neighborhoods: List[Neighborhood]
    centered_grams: List[BlockEncoding]
    dimension_runs: List[LocalDimensionRun]
    global_dim: int
    density: DensityField
    density_cost: CostCounter
    run_id: str = field(default="")

    @property
    def local_dims(self) -> List[int]:
        return [r.local_dim for r in self.dimension_runs]

    def dim_for(self, i: int) -> int:
        if self.config.dim_mode is DimMode.GLOBAL:
            return self.global_dim
        return self.dimension_runs[i].local_dim

    def rng_for(self, i: int, stage: int) -> np.random.Generator:
        """Independent, reproducible stream per (point, stage)."""
        return np.random.default_rng((self.config.seed, i, stage))

    def total_cost(self) -> CostCounter:
        return CostCounter.combine(
            [s.cost for s in self.searches]
            + [r.cost for r in self.dimension_runs]
            + [self.density_cost]
        )


def _check_qsim_config(config: RunConfig) -> None:
    if config.t != 1.0:
        raise ParameterError(f"the block-encoded pipeline runs at t = 1 only, got t={config.t}")


def _field_from_searches(searches: List[NeighborhoodSearch]) -> GeodesicField:
    d4 = np.array([np.clip(np.diag(s.diag4.encoded), 0.0, None) for s in searches])
    dg = d4**0.25
    dg = 0.5 * (dg + dg.T)
    np.fill_diagonal(dg, 0.0)
    dg.setflags(write=False)
    return GeodesicField(dg=dg, t=1.0, source_tag=GeodesicSource.K_SPECTRUM)


def qsim_density(
    run_field: GeodesicField,
    neighborhoods: List[Neighborhood],
    h: float,
    config: RunConfig,
) -> Tuple[DensityField, CostCounter]:
    """Heat-kernel sums, each one a Hadamard test against the uniform state."""
    rho = np.empty(len(neighborhoods))
    costs = []
    for nb in neighborhoods:
        radii = run_field.dg[nb.center_index, nb.member_indices]
        rng = np.random.default_rng((config.seed, nb.center_index, 3))
        estimate = uniform_sum(
            np.exp(-(radii**2) / h**2), config.qsim.mode, config.qsim.shot_epsilon, rng
        )
        rho[nb.center_index] = estimate.value
        costs.append(estimate.cost)
    rho.setflags(write=False)
    return DensityField(rho=rho, h=float(h)), CostCounter.combine(costs)


def build_qsim_run(
    cloud: PointCloud, config: Optional[RunConfig] = None, run_id: Optional[str] = None
) -> QsimGeometryRun:
    """
    Run every shared stage of the block-encoded pipeline.

    Raises:
        ParameterError: If t != 1 or nn does not fit the cloud
    """
    config = (config or RunConfig()).neighborhood_run()
    _check_qsim_config(config)
    run_id = run_id or new_run_id()
    n = cloud.n_points
    check_neighborhood_size(n, config.nn)
    qcfg = config.qsim

    with stage_timer("qsim_kernel_gram", run_id, n_points=n, degree=qcfg.degree) as out:
        distances = pairwise_distances(cloud)
        sigma2 = resolve_sigma2(distances, config.sigma2)
        gram = build_kernel_gram_encoding(distances, sigma2, qcfg.degree)
        out.update(subnorm=gram.subnorm, err=gram.err)

    with stage_timer("qsim_neighbor_search", run_id, nn=config.nn) as out:
        searches = [
            per_point(
                i,
                neighborhood_search,
                gram,
                i,
                config.nn,
                qcfg,
                rng=np.random.default_rng((config.seed, i, 0)),
            )
            for i in range(n)
        ]
        run_field = _field_from_searches(searches)
        neighborhoods = [s.neighborhood for s in searches]
        if config.geodesic_scale is GeodesicScale.LOCAL_EUCLIDEAN:
            factor = calibrate_geodesic_scale(run_field, distances)
            run_field = run_field.rescaled(factor)
            neighborhoods = [rescale_neighborhood(nb, factor) for nb in neighborhoods]
        out.update(fallbacks=sum(s.used_fallback for s in searches), scale=run_field.scale)

    with stage_timer("qsim_local_dimension", run_id, tau=config.tau) as out:
        centered = [
            per_point(i, centered_gram_encoding, cloud, nb, qcfg.amplification_tolerance)
            for i, nb in enumerate(neighborhoods)
        ]
        dimension_runs = [
            per_point(
                i,
                local_dimension_run,
                enc,
                config.tau,
                qcfg,
                rng=np.random.default_rng((config.seed, i, 1)),
            )
            for i, enc in enumerate(centered)
        ]
        global_dim = global_dimension([r.local_dim for r in dimension_runs])
        out["global_dim"] = global_dim

    with stage_timer("qsim_density", run_id) as out:
        h = resolve_h(neighborhoods, config.h)
        density, density_cost = qsim_density(run_field, neighborhoods, h, config)
        if config.density_normalization is DensityNormalization.HEAT_KERNEL:
            dims = (
                global_dim
                if config.dim_mode is DimMode.GLOBAL
                else [r.local_dim for r in dimension_runs]
            )
            density = sampling_intensity(density, neighborhoods, dims)
        out["h"] = h

    return QsimGeometryRun(
        cloud=cloud,
        config=config,
        distances=distances,
        sigma2=sigma2,
        gram=gram,
        searches=searches,
        field=run_field,
        neighborhoods=neighborhoods,
        centered_grams=centered,
        dimension_runs=dimension_runs,
        global_dim=global_dim,
        density=density,
        density_cost=density_cost,
        run_id=run_id,
    )


def _fit_from_sums(sums: FitSums, config: RunConfig, count: int):
    a_ols = ols_from_sums(sums.weighted_excess, sums.fourth_moment)
    a_paper = paper_from_sums(sums.volume_sum, sums.squared_radius_sum, count)
    chosen = a_ols if config.fit_variant is FitVariant.OLS else a_paper
    return chosen, a_ols, a_paper


def qsim_report_for_point(run: QsimGeometryRun, i: int) -> QsimPointReport:
    """Ball volumes, Hadamard-test fit sums and curvature for point i."""
    config = run.config
    nb = run.neighborhoods[i]
    d = run.dim_for(i)
    profile = per_point(i, ball_volumes, run.field, run.density, nb, d)
    profile = profile.clipped(config.r_min, config.r_max)
    if np.unique(profile.radii).size < 2:
        raise PointEstimationError(
            i, DegenerateInputError("the quadratic fit needs at least 2 distinct nonzero radii")
        )
    sums = qsim_fit_sums(
        profile.radii,
        profile.normalized_volumes,
        config.qsim.mode,
        config.qsim.shot_epsilon,
        run.rng_for(i, 2),
    )
    chosen, a_ols, a_paper = _fit_from_sums(sums, config, nb.size)
    try:
        a_scaled: Optional[float] = fit_scaled(profile.radii, profile.normalized_volumes)[0]
    except DegenerateInputError:
        a_scaled = None
    report = CurvatureReport(
        center_index=i,
        radii=profile.radii,
        raw_volumes=profile.raw_volumes,
        normalized_volumes=profile.normalized_volumes,
        fit_A=chosen,
        local_dim_used=d,
        curvature=curvature(chosen, d),
        fit_variant=config.fit_variant,
        A_ols=a_ols,
        A_paper=a_paper,
        A_scaled=a_scaled,
    )
    eigenvalues = np.array([p.value for p in run.dimension_runs[i].pairs])
    local = LocalGeometryReport(
        index=i,
        neighborhood=nb,
        local_dim=run.dimension_runs[i].local_dim,
        singular_values=np.sqrt(np.clip(eigenvalues, 0.0, None)),
        curvature=report,
    )
    return QsimPointReport(report=local, sums=sums)


def qsim_estimate_point(
    cloud: PointCloud,
    i: int,
    config: Optional[RunConfig] = None,
    dim_mode: DimMode = DimMode.LOCAL,
) -> QsimPointReport:
    """Block-encoded counterpart of estimate_point (local d_i unless told otherwise)."""
    config = (config or RunConfig()).model_copy(update={"dim_mode": DimMode(dim_mode)})
    if not 0 <= i < cloud.n_points:
        raise ParameterError(f"point index {i} out of range for {cloud.n_points} points")
    run = build_qsim_run(cloud, config)
    with stage_timer("qsim_curvature", run.run_id, point=i):
        return qsim_report_for_point(run, i)
