"""
Tests for the Geometry Stages

Neighbourhoods, local PCA, density, ball volumes, the quadratic fit and the
end-to-end estimator.
"""

import math

import numpy as np
import pytest
from scipy.special import gammainc, gammaln
from scipy.stats import special_ortho_group

from src.config.run_config import (
    BallCount,
    DensityNormalization,
    DimMode,
    FitVariant,
    GeodesicScale,
    RunConfig,
)
from src.core.errors import DegenerateInputError, ParameterError, PointEstimationError
from src.diffusion.geodesic import GeodesicField, GeodesicSource
from src.geometry.density import DensityField, default_h, density_field, sampling_intensity
from src.geometry.estimator import build_context, estimate_all, estimate_point, fit_profile
from src.geometry.neighborhoods import (
    Neighborhood,
    all_neighborhoods,
    ball_neighborhood,
    nearest_neighborhood,
)
from src.geometry.pca import global_dimension, local_pca, prefix_dimension
from src.geometry.volumes import (
    VolumeProfile,
    ball_volumes,
    curvature,
    fit_quadratic,
    fit_scaled,
    stationarity_residual,
    unit_ball_volume,
)
from src.pointcloud.cloud import PointCloud, pairwise_distances
from src.pointcloud.synth import generate_manifold


def line_field(xs) -> GeodesicField:
    """Geodesic field of points on a line: |x_i - x_j|."""
    xs = np.asarray(xs, dtype=float)
    return GeodesicField(
        dg=np.abs(xs[:, None] - xs[None, :]), t=1.0, source_tag=GeodesicSource.K_SPECTRUM
    )


def whole_cloud(field: GeodesicField, center: int = 0) -> Neighborhood:
    """Neighbourhood of center holding every point of the field."""
    dist = field.dg[center]
    order = np.lexsort((np.arange(dist.size), dist))
    return Neighborhood(center_index=center, member_indices=order, geodesic_radii=dist[order])


def unit_density(n: int) -> DensityField:
    return DensityField(rho=np.ones(n), h=1.0)


class TestNeighborhoods:
    """Center first, then ascending radius with ties by index."""

    def test_ordering_and_ties(self):
        """Equal radii are ordered by index after the center."""
        field = line_field([0.0, 1.0, -1.0, 2.0, 5.0])
        nb = nearest_neighborhood(field, 0, 4)
        assert nb.member_indices.tolist() == [0, 1, 2, 3]
        assert nb.geodesic_radii.tolist() == [0.0, 1.0, 1.0, 2.0]
        assert nb.outer_radius == 2.0
        assert nb.nonzero_radii().tolist() == [1.0, 1.0, 2.0]

    def test_all_neighborhoods_in_index_order(self):
        """One neighbourhood per point, listed by center index."""
        nbs = all_neighborhoods(line_field([0.0, 1.0, 3.0, 6.0]), 2)
        assert [nb.center_index for nb in nbs] == [0, 1, 2, 3]
        assert [int(nb.member_indices[1]) for nb in nbs] == [1, 0, 1, 2]

    @pytest.mark.parametrize("nn", [1, 5, 6])
    def test_size_bounds(self, nn):
        """nn outside [2, N) is rejected."""
        with pytest.raises(ParameterError):
            nearest_neighborhood(line_field(range(5)), 0, nn)

    def test_index_bounds(self):
        """A center outside the cloud is rejected."""
        with pytest.raises(ParameterError):
            nearest_neighborhood(line_field(range(5)), 5, 3)


class TestBallNeighborhood:
    """Every point within a radius, never fewer than min_size."""

    def test_collects_points_inside_radius(self):
        """Members are the points within the radius, boundary included."""
        field = line_field([0.0, 1.0, -1.5, 2.0, 3.5, 9.0])
        nb = ball_neighborhood(field, 0, 2.0, 2)
        assert nb.member_indices.tolist() == [0, 1, 2, 3]
        assert nb.geodesic_radii.tolist() == [0.0, 1.0, 1.5, 2.0]

    def test_small_radius_keeps_nearest(self):
        """A radius smaller than the min_size shell returns the nearest neighbourhood."""
        field = line_field([0.0, 1.0, 2.0, 3.0, 4.0])
        nb = ball_neighborhood(field, 0, 0.5, 3)
        assert nb.member_indices.tolist() == [0, 1, 2]

    def test_ties_by_index(self):
        """Equal radii inside the ball follow index order."""
        field = line_field([0.0, -1.0, 1.0, 5.0])
        nb = ball_neighborhood(field, 0, 1.0, 2)
        assert nb.member_indices.tolist() == [0, 1, 2]

    def test_negative_radius(self):
        """A negative radius is a parameter error."""
        with pytest.raises(ParameterError):
            ball_neighborhood(line_field(range(4)), 0, -1.0, 2)


class TestLocalPCA:
    """Explained-variance dimension."""

    @pytest.mark.parametrize(
        "values, tau, expected",
        [([3.0, 1.0], 0.75, 1), ([3.0, 1.0], 0.8, 2), ([1.0, 1.0, 1.0], 0.95, 3)],
    )
    def test_prefix_dimension(self, values, tau, expected):
        """Smallest prefix whose share reaches tau."""
        assert prefix_dimension(values, sum(values), tau) == expected

    def test_prefix_dimension_consumes_lazily(self):
        """Values past the threshold are never read."""
        consumed = []

        def values():
            for v in [5.0, 4.0, 1.0]:
                consumed.append(v)
                yield v

        assert prefix_dimension(values(), 10.0, 0.5) == 1
        assert consumed == [5.0]

    @pytest.mark.parametrize("tau", [0.0, 1.0, -0.2])
    def test_bad_tau(self, tau):
        """tau must lie strictly inside (0, 1)."""
        with pytest.raises(ParameterError):
            prefix_dimension([1.0], 1.0, tau)

    def test_planar_patch_has_dimension_two(self, rng):
        """A rotated flat patch has two nonzero singular values."""
        pts = np.column_stack([rng.normal(size=(12, 2)), np.zeros(12)])
        rotated = pts @ special_ortho_group.rvs(3, random_state=2).T
        cloud = PointCloud(rotated)
        nb = nearest_neighborhood(pairwise_distances(cloud).d, 0, 12 - 1)
        pca = local_pca(cloud, nb, 0.95)
        assert pca.local_dim == 2
        assert pca.singular_values[2] < 1e-10
        assert np.allclose(pca.gram(), pca.centered_matrix.T @ pca.centered_matrix)

    def test_coincident_members(self):
        """A neighbourhood of identical points has no variance."""
        cloud = PointCloud(np.vstack([np.ones((4, 3)), np.zeros((2, 3))]))
        nb = nearest_neighborhood(pairwise_distances(cloud).d, 0, 4)
        with pytest.raises(DegenerateInputError):
            local_pca(cloud, nb, 0.95)

    @pytest.mark.parametrize("dims, expected", [([1, 2, 2, 3], 2), ([1, 2], 1), ([4], 4)])
    def test_global_dimension_is_lower_median(self, dims, expected):
        """Global dimension is the lower median of the local ones."""
        assert global_dimension(dims) == expected


class TestDensity:
    """Heat-kernel sums and sampling intensity."""

    def test_rho_sums_over_neighbourhood(self):
        """rho adds exp(-r^2 / h^2) over the neighbourhood, self term included."""
        field = line_field([0.0, 1.0, 2.0, 4.0])
        nbs = all_neighborhoods(field, 3)
        density = density_field(field, nbs, 1.0)
        assert density.rho[0] == pytest.approx(1.0 + math.exp(-1.0) + math.exp(-4.0))
        assert np.all(density.rho >= 1.0)

    def test_default_h_is_lower_median_radius(self):
        """Automatic h is the lower median of per-point median radii."""
        nbs = all_neighborhoods(line_field([0.0, 1.0, 2.0, 4.0]), 3)
        # per point lower medians: 1, 1, 1, 2
        assert default_h(nbs) == 1.0

    def test_bad_h(self):
        """h must be positive."""
        field = line_field([0.0, 1.0, 2.0])
        with pytest.raises(ParameterError):
            density_field(field, all_neighborhoods(field, 2), 0.0)

    def test_intensity_divides_by_truncated_mass(self):
        """Intensity is rho over the Gaussian mass of the truncated ball."""
        field = line_field([0.0, 1.0, 2.0, 4.0])
        nbs = all_neighborhoods(field, 3)
        density = sampling_intensity(density_field(field, nbs, 1.5), nbs, 1)
        mass = math.sqrt(math.pi * 1.5**2) * gammainc(0.5, nbs[0].outer_radius**2 / 1.5**2)
        assert density.intensity[0] == pytest.approx(density.rho[0] / mass)
        assert np.allclose(density.inverse_weights(), 1.0 / density.intensity)

    def test_collapsed_neighbourhood_gets_nan(self):
        """Zero outer radius leaves the intensity undefined."""
        field = line_field([0.0, 0.0, 5.0])
        nbs = all_neighborhoods(field, 2)
        density = sampling_intensity(density_field(field, nbs, 1.0), nbs, 2)
        assert np.isnan(density.intensity[0])
        assert np.isfinite(density.intensity[2])


class TestBallVolumes:
    """Weighted counts and their unit-ball normalization."""

    @pytest.mark.parametrize("d", range(1, 11))
    def test_unit_ball_volume(self, d):
        """Recurrence matches pi^{d/2} / Gamma(d/2 + 1)."""
        expected = math.exp((d / 2) * math.log(math.pi) - gammaln(d / 2 + 1))
        assert unit_ball_volume(d) == pytest.approx(expected, rel=1e-12)

    def test_unit_ball_volume_domain(self):
        """Dimension 0 has no unit ball."""
        with pytest.raises(ParameterError):
            unit_ball_volume(0)

    def test_counts_on_a_line(self):
        """Closed balls hold the center plus every member within r."""
        field = line_field([0.0, 1.0, 2.0, 3.0])
        profile = ball_volumes(field, unit_density(4), whole_cloud(field), 1)
        assert profile.radii.tolist() == [1.0, 2.0, 3.0]
        assert profile.raw_volumes.tolist() == [2.0, 3.0, 4.0]
        assert np.allclose(profile.normalized_volumes, [1.0, 0.75, 4.0 / 6.0])

    def test_open_counts_on_a_line(self):
        """Open balls leave out the center and the boundary member."""
        field = line_field([0.0, 1.0, 2.0, 3.0])
        profile = ball_volumes(field, unit_density(4), whole_cloud(field), 1, BallCount.OPEN)
        assert profile.raw_volumes.tolist() == [0.0, 1.0, 2.0]
        assert np.allclose(profile.normalized_volumes, [0.0, 0.25, 1.0 / 3.0])

    def test_equal_radii_share_a_ball(self):
        """Members at the same radius enter a ball together."""
        field = line_field([0.0, 1.0, -1.0, 3.0])
        closed = ball_volumes(field, unit_density(4), whole_cloud(field), 1)
        opened = ball_volumes(field, unit_density(4), whole_cloud(field), 1, BallCount.OPEN)
        assert closed.raw_volumes.tolist() == [3.0, 3.0, 4.0]
        assert opened.raw_volumes.tolist() == [0.0, 0.0, 2.0]

    def test_first_ball_in_the_plane(self):
        """With unit density in d = 2 the r_1 ball gives 2 / (pi r_1^2)."""
        pts = np.array([[0.0, 0.0], [0.5, 0.0], [0.0, 0.8], [1.0, 1.0]])
        field = GeodesicField(
            dg=pairwise_distances(PointCloud(pts)).d, t=1.0, source_tag=GeodesicSource.K_SPECTRUM
        )
        profile = ball_volumes(field, unit_density(4), whole_cloud(field), 2)
        assert profile.radii[0] == pytest.approx(0.5)
        assert profile.normalized_volumes[0] == pytest.approx(2.0 / (math.pi * 0.5**2))

    def test_weights_are_inverse_density(self):
        """Each member counts 1 / rho."""
        field = line_field([0.0, 1.0, 2.0])
        density = DensityField(rho=np.array([2.0, 4.0, 1.0]), h=1.0)
        profile = ball_volumes(field, density, whole_cloud(field), 1)
        assert profile.raw_volumes.tolist() == [0.75, 1.75]

    def test_undefined_density(self):
        """A member without a finite weight makes the profile degenerate."""
        field = line_field([0.0, 1.0, 2.0])
        density = DensityField(rho=np.ones(3), h=1.0, intensity=np.array([1.0, np.nan, 1.0]))
        with pytest.raises(DegenerateInputError):
            ball_volumes(field, density, whole_cloud(field), 1)

    def test_clipping(self):
        """clipped keeps radii inside [r_min, r_max]."""
        profile = VolumeProfile(
            center_index=0,
            radii=np.array([0.5, 1.0, 2.0, 4.0]),
            raw_volumes=np.arange(4.0),
            normalized_volumes=np.ones(4),
            local_dim_used=2,
        )
        clipped = profile.clipped(r_min=1.0, r_max=2.0)
        assert clipped.radii.tolist() == [1.0, 2.0]
        assert clipped.raw_volumes.tolist() == [1.0, 2.0]


class TestQuadraticFit:
    """Vol_nor = 1 + A r^2 and S = -6 (d + 2) A."""

    def test_ols_recovers_exact_volumes(self, rng):
        """OLS returns A exactly and zeroes the stationarity residual."""
        for _ in range(100):
            a0 = rng.uniform(-5, 5)
            radii = np.sort(rng.uniform(0.01, 1.0, size=rng.integers(2, 40)))
            volumes = 1.0 + a0 * radii**2
            a = fit_quadratic(radii, volumes, FitVariant.OLS)
            assert a == pytest.approx(a0, abs=1e-10)
            assert abs(stationarity_residual(radii, volumes, a)) <= 1e-9

    def test_scaled_fit_ignores_level(self, rng):
        """The scaled fit recovers A and c from c (1 + A r^2)."""
        for _ in range(50):
            a0, c0 = rng.uniform(-1, 1), rng.uniform(0.3, 3.0)
            radii = np.sort(rng.uniform(0.05, 1.0, size=rng.integers(3, 30)))
            volumes = c0 * (1.0 + a0 * radii**2)
            a, c = fit_scaled(radii, volumes)
            assert a == pytest.approx(a0, abs=1e-8)
            assert c == pytest.approx(c0, rel=1e-8)
            assert fit_quadratic(radii, volumes, FitVariant.SCALED) == pytest.approx(a)

    def test_ols_is_biased_by_level(self):
        """A fit through 1 reads a density error as curvature."""
        radii = np.linspace(0.1, 1.0, 10)
        volumes = 1.2 * np.ones_like(radii)
        assert fit_quadratic(radii, volumes, FitVariant.OLS) > 0.1
        assert fit_scaled(radii, volumes)[0] == pytest.approx(0.0, abs=1e-12)

    def test_scaled_fit_needs_positive_intercept(self):
        """A nonpositive intercept is degenerate."""
        radii = np.array([1.0, 2.0, 3.0])
        with pytest.raises(DegenerateInputError):
            fit_scaled(radii, -1.0 + radii**2)

    def test_paper_formula(self):
        """Closed form (mean Vol_nor) / (1 + mean r^2)."""
        radii = np.array([1.0, 2.0])
        volumes = np.array([1.0, 0.5])
        a = fit_quadratic(radii, volumes, FitVariant.PAPER_FORMULA, neighborhood_size=3)
        assert a == pytest.approx((1.5 / 3) / (1.0 + 5.0 / 3))

    def test_single_radius_is_degenerate(self):
        """One distinct radius cannot fix a slope."""
        with pytest.raises(DegenerateInputError):
            fit_quadratic([1.0, 1.0], [1.0, 2.0])

    def test_sphere_relation(self):
        """A unit 2-sphere has A = -1/12, hence S = 2."""
        assert curvature(-1.0 / 12.0, 2) == pytest.approx(2.0)


class TestEstimator:
    """Full pipeline on small clouds."""

    def test_plane_is_two_dimensional(self, plane_cloud):
        """A flat patch is two-dimensional with finite curvature everywhere."""
        result = estimate_all(plane_cloud, RunConfig(nn=15))
        assert result.global_dim == 2
        assert len(result.reports) == plane_cloud.n_points
        assert np.all(np.isfinite(result.curvatures()))

    def test_plane_is_nearly_flat(self, plane_cloud):
        """Median |S| of a flat patch stays small."""
        result = estimate_all(plane_cloud, RunConfig(nn=20))
        assert np.median(np.abs(result.curvatures())) <= 0.5

    def test_sphere_has_positive_curvature(self, sphere_cloud):
        """The unit sphere reads positive, within a factor of 3 of S = 2."""
        median_s = estimate_all(sphere_cloud, RunConfig(nn=20)).median_curvature()
        assert 2.0 / 3.0 <= median_s <= 6.0

    def test_curvature_scales_with_inverse_square_radius(self):
        """Doubling the sphere divides S by four."""
        unit = generate_manifold("sphere", 300, {"radius": 1.0}, seed=7)
        double = PointCloud(2.0 * unit.points)
        config = RunConfig(nn=20)
        ratio = estimate_all(unit, config).median_curvature() / estimate_all(double, config).median_curvature()
        assert ratio == pytest.approx(4.0, rel=1e-6)

    def test_graph_paths_feed_volumes(self, sphere_cloud):
        """Volumes use graph paths by default and the diffusion field when switched off."""
        ctx = build_context(sphere_cloud, RunConfig(nn=15))
        assert ctx.volume_field.source_tag is GeodesicSource.GRAPH_PATHS
        assert np.all(ctx.volume_field.dg >= ctx.distances.d - 1e-12)
        flat = build_context(sphere_cloud, RunConfig(nn=15, geodesic_paths=False))
        assert flat.volume_field is flat.field
        assert flat.volume_neighborhoods is flat.neighborhoods

    def test_ball_extent(self, sphere_cloud):
        """Balls reach ball_scale * h, or stop at nn with ball_scale unset."""
        wide = estimate_all(sphere_cloud, RunConfig(nn=15))
        narrow = estimate_all(sphere_cloud, RunConfig(nn=15, ball_scale=None, r_min=None))
        assert max(r.curvature.radii.max() for r in wide.reports) <= 8.0 * wide.h + 1e-12
        assert all(r.curvature.radii.size <= 14 for r in narrow.reports)
        assert wide.reports[0].curvature.radii.size > narrow.reports[0].curvature.radii.size

    def test_auto_fit_floor_is_h(self, sphere_cloud):
        """An automatic r_min drops radii below h."""
        result = estimate_all(sphere_cloud, RunConfig(nn=15))
        assert all(r.curvature.radii.min() >= result.h for r in result.reports)

    def test_all_fit_variants_reported(self, sphere_cloud):
        """Every variant is computed and the configured one is reported as A."""
        runs = {
            variant: estimate_all(sphere_cloud, RunConfig(nn=15, fit_variant=variant)).reports[0]
            for variant in FitVariant
        }
        ols, paper, scaled = runs[FitVariant.OLS], runs[FitVariant.PAPER_FORMULA], runs[FitVariant.SCALED]
        assert ols.curvature.A_ols == pytest.approx(paper.curvature.A_ols)
        assert ols.A == ols.curvature.A_ols
        assert paper.A == paper.curvature.A_paper
        assert scaled.A == scaled.curvature.A_scaled
        assert ols.A != paper.A

    def test_scaled_fit_falls_back_to_ols(self):
        """A point whose scaled fit has no positive intercept is fitted by ols."""
        radii = np.array([1.0, 2.0, 3.0])
        profile = VolumeProfile(
            center_index=3,
            radii=radii,
            raw_volumes=np.zeros(3),
            normalized_volumes=-1.0 + radii**2,
            local_dim_used=2,
        )
        report = fit_profile(profile, RunConfig(r_min=None), neighborhood_size=4, h=1.0)
        assert report.fit_variant is FitVariant.OLS
        assert report.A_scaled is None
        assert report.fit_A == report.A_ols

    def test_neighborhood_run_volumes(self, sphere_cloud):
        """The nn-neighbourhood preset fits closed balls in d_G through 1."""
        config = RunConfig(nn=15).neighborhood_run()
        report = estimate_all(sphere_cloud, config).reports[0]
        assert report.curvature.fit_variant is FitVariant.OLS
        assert report.curvature.radii.size == 14
        assert report.curvature.raw_volumes[-1] >= report.curvature.raw_volumes[0]

    def test_rigid_motion_invariance(self, sphere_cloud):
        """Rotating and translating the cloud leaves every S unchanged."""
        rotation = special_ortho_group.rvs(3, random_state=8)
        moved = sphere_cloud.transformed(rotation, np.array([3.0, 0.0, -1.0]))
        config = RunConfig(nn=15)
        before = estimate_all(sphere_cloud, config).curvatures()
        after = estimate_all(moved, config).curvatures()
        assert np.allclose(before, after, rtol=1e-6, atol=1e-8)

    def test_relabeling_permutes_reports(self, sphere_cloud, rng):
        """Permuting the input permutes the reports."""
        order = rng.permutation(sphere_cloud.n_points)
        config = RunConfig(nn=15)
        before = estimate_all(sphere_cloud, config).curvatures()
        after = estimate_all(sphere_cloud.permuted(order), config).curvatures()
        assert np.allclose(after, before[order], rtol=1e-6, atol=1e-8)

    def test_estimate_point_uses_local_dimension(self, sphere_cloud):
        """A single-point query matches the local-mode run at that point."""
        config = RunConfig(nn=15)
        single = estimate_point(sphere_cloud, 4, config)
        full = estimate_all(sphere_cloud, config.model_copy(update={"dim_mode": DimMode.LOCAL}))
        assert single.S == pytest.approx(full.reports[4].S)
        assert single.curvature.local_dim_used == single.local_dim

    def test_estimate_point_index_bounds(self, sphere_cloud):
        """A point index outside the cloud is rejected."""
        with pytest.raises(ParameterError):
            estimate_point(sphere_cloud, sphere_cloud.n_points)

    def test_radius_clipping_shortens_fit(self, sphere_cloud):
        """r_max drops the outer radii of every fit."""
        base = estimate_all(sphere_cloud, RunConfig(nn=15, geodesic_scale=GeodesicScale.LOCAL_EUCLIDEAN))
        # every point keeps at least its three innermost radii
        cut = max(float(r.curvature.radii[2]) for r in base.reports)
        clipped = estimate_all(sphere_cloud, RunConfig(nn=15, r_max=cut))
        for report in clipped.reports:
            assert report.curvature.radii.max() <= cut
            assert report.curvature.radii.size >= 3

    def test_raw_density_weights(self, sphere_cloud):
        """Plain 1 / rho weights still give finite curvature."""
        result = estimate_all(
            sphere_cloud, RunConfig(nn=15, density_normalization=DensityNormalization.NONE)
        )
        assert np.all(np.isfinite(result.curvatures()))

    def test_neighbourhood_larger_than_cloud(self, random_cloud):
        """nn must be smaller than the cloud."""
        with pytest.raises(ParameterError):
            estimate_all(random_cloud, RunConfig(nn=8))

    def test_tiny_cloud(self, random_cloud):
        """Eight scattered points still get a finite curvature each."""
        result = estimate_all(random_cloud, RunConfig(nn=3))
        assert np.all(np.isfinite(result.curvatures()))

    def test_coincident_cluster_names_a_point(self, rng):
        """A per-point failure carries the point index."""
        pts = np.vstack([np.zeros((10, 3)), rng.normal(size=(20, 3))])
        with pytest.raises(PointEstimationError) as exc:
            estimate_all(PointCloud(pts), RunConfig(nn=5))
        assert exc.value.index in range(10)
        assert f"point {exc.value.index}" in str(exc.value)

    def test_result_serializes(self, plane_cloud):
        """to_dict carries the run-wide values and every fit."""
        result = estimate_all(plane_cloud, RunConfig(nn=10))
        out = result.to_dict()
        assert out["global_dim"] == 2
        assert len(out["points"]) == plane_cloud.n_points
        assert {"A", "S", "A_ols", "A_paper", "A_scaled", "radii", "vol_nor"} <= set(out["points"][0])
