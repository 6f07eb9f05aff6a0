"""
Tests for the Block-Encoded Pipeline

Each simulated stage is compared with its classical counterpart on the
K-spectrum at t = 1.
"""

import numpy as np
import pytest

from src.config.run_config import QsimConfig, QsimMode, SpectrumSource
from src.config.settings import settings
from src.core.errors import DegenerateInputError, GapError, ParameterError
from src.diffusion.geodesic import geodesic_field
from src.diffusion.kernel import build_kernel, median_sigma2
from src.diffusion.spectral import spectral_decompose
from src.geometry.estimator import estimate_point
from src.geometry.neighborhoods import nearest_neighborhood
from src.geometry.pca import local_pca
from src.pointcloud.cloud import PointCloud, pairwise_distances
from src.qsim.columns import ColumnState
from src.qsim.dimension import (
    centered_gram_encoding,
    local_dimension_run,
    mean_projector_encoding,
    qsim_local_dimension,
    trace_estimate,
)
from src.qsim.geodesic_encoding import (
    build_difference_operator,
    difference_matrix,
    geodesic_diag_encoding,
    inverse_distance_encoding,
    neighborhood_search,
    qsim_neighborhood,
    rescale_neighborhood,
)
from src.qsim.kernel_encoding import (
    build_kernel_gram_encoding,
    chebyshev_columns,
    distance_column,
    gram_from_column,
    kernel_column,
    kernel_matrix_encoding,
)
from src.qsim.pipeline import build_qsim_run, qsim_estimate_point
from src.qsim.sums import (
    hadamard_inner_product,
    qsim_curvature_sums,
    qsim_fit_sums,
    shot_calibration,
    uniform_sum,
)
from src.qsim.verify import STAGES, relative_deviation, run_verification


def raw_k_field(cloud: PointCloud):
    """Kernel (median sigma^2) and its uncalibrated K-spectrum field at t = 1."""
    distances = pairwise_distances(cloud)
    kernel = build_kernel(distances, median_sigma2(distances))
    return kernel, geodesic_field(spectral_decompose(kernel), 1.0)


@pytest.fixture
def qsim_gram(qsim_cloud):
    distances = pairwise_distances(qsim_cloud)
    return build_kernel_gram_encoding(distances, median_sigma2(distances))


@pytest.fixture
def square_with_center() -> PointCloud:
    """Centre point equidistant from four corners."""
    return PointCloud(np.array([[1.0, 1.0], [1.0, -1.0], [-1.0, 1.0], [-1.0, -1.0], [0.0, 0.0]]))


class TestKernelEncoding:
    """Kernel column, kernel matrix and Gram encodings."""

    def test_chebyshev_columns_follow_cosine_form(self):
        """Column k holds T_k(x) = cos(k arccos x)."""
        x = np.array([-1.0, -0.5, 0.0, 0.3, 1.0])
        u = ColumnState(x, float(np.sqrt(x.size)))
        columns = chebyshev_columns(u, 5)
        for k, col in enumerate(columns):
            assert np.allclose(col.vector, np.cos(k * np.arccos(x)), atol=1e-12)

    def test_kernel_column_matches_kernel(self, qsim_cloud):
        """The kernel column and matrix match K within the Chebyshev error."""
        kernel, _ = raw_k_field(qsim_cloud)
        column, approx = kernel_column(pairwise_distances(qsim_cloud), kernel.sigma2, 40)
        assert np.allclose(column.vector, kernel.k.ravel(), atol=1e-10)
        assert column.err == pytest.approx(approx.sup_error * 12)
        enc = kernel_matrix_encoding(column, 12)
        assert np.allclose(enc.encoded, kernel.k, atol=1e-10)

    def test_gram_is_kernel_transpose_times_kernel(self, qsim_cloud, qsim_gram):
        """The Gram encoding holds K^T K."""
        kernel, _ = raw_k_field(qsim_cloud)
        expected = kernel.k.T @ kernel.k
        assert np.allclose(qsim_gram.encoded, expected, atol=1e-9 * np.abs(expected).max())
        assert qsim_gram.cost["partial_trace"] == 1
        assert qsim_gram.cost["entrywise_product"] > 0

    def test_gram_from_column_subnorm(self, qsim_cloud):
        """The Gram subnorm is the squared column subnorm."""
        kernel, _ = raw_k_field(qsim_cloud)
        column, _ = kernel_column(pairwise_distances(qsim_cloud), kernel.sigma2, 20)
        gram = gram_from_column(column, 12)
        assert gram.subnorm == pytest.approx(column.subnorm**2)

    def test_coincident_cloud(self):
        """A cloud of one repeated point has no distance scale."""
        with pytest.raises(DegenerateInputError):
            distance_column(pairwise_distances(PointCloud(np.zeros((3, 2)))))

    def test_bad_arguments(self, qsim_cloud):
        """sigma^2 must be positive and the column must reshape to N x N."""
        distances = pairwise_distances(qsim_cloud)
        with pytest.raises(ParameterError):
            kernel_column(distances, 0.0, 10)
        column, _ = kernel_column(distances, 1.0, 10)
        with pytest.raises(ParameterError):
            kernel_matrix_encoding(column, 11)


class TestGeodesicEncoding:
    """Difference operators, d_G^4 diagonals and inverse distances."""

    def test_difference_matrix_rows(self):
        """Row j of E_i is e_i - e_j."""
        e = difference_matrix(4, 1)
        assert np.array_equal(e[1], np.zeros(4))
        assert np.array_equal(e[3], [0.0, 1.0, 0.0, -1.0])

    def test_difference_operator_subnorms(self):
        """Subnorms sqrt(2 (N - 1)) for one row and sqrt(2 N (N - 1)) for all."""
        assert build_difference_operator(5, 2).subnorm == pytest.approx(np.sqrt(8.0))
        assert build_difference_operator(5).subnorm == pytest.approx(np.sqrt(40.0))
        with pytest.raises(ParameterError):
            build_difference_operator(1)
        with pytest.raises(ParameterError):
            build_difference_operator(5, 5)

    @pytest.mark.parametrize("full", [False, True])
    def test_diagonal_holds_fourth_power_distances(self, qsim_cloud, qsim_gram, full):
        """The diagonal holds d_G^4 from the center."""
        _, raw = raw_k_field(qsim_cloud)
        i = 3
        E = build_difference_operator(12) if full else build_difference_operator(12, i)
        diag4 = geodesic_diag_encoding(qsim_gram, E, i)
        expected = raw.dg[i] ** 4
        assert np.allclose(np.diag(diag4.encoded), expected, atol=1e-9 * expected.max())

    def test_full_operator_needs_row(self, qsim_gram):
        """The all-pairs operator needs a center row."""
        with pytest.raises(ParameterError):
            geodesic_diag_encoding(qsim_gram, build_difference_operator(12))

    def test_inverse_distances(self, qsim_cloud, qsim_gram):
        """Inverse distances are proportional to 1 / d_G and capped at 1/2."""
        _, raw = raw_k_field(qsim_cloud)
        i = 0
        diag4 = geodesic_diag_encoding(qsim_gram, build_difference_operator(12, i), i)
        inverse = np.diag(inverse_distance_encoding(diag4, exclude=i).encoded)
        others = np.arange(1, 12)
        products = inverse[others] * raw.dg[i, others]
        assert np.allclose(products, products[0], rtol=1e-8)
        assert inverse[i] < inverse[others].min()
        assert inverse.max() <= 0.5 + 1e-12


class TestNeighborSearch:
    """Power-method neighbour readout."""

    @pytest.mark.parametrize("i", [0, 5, 11])
    def test_matches_classical_neighborhood(self, qsim_cloud, qsim_gram, i):
        """The readout reproduces the classical neighbourhood."""
        _, raw = raw_k_field(qsim_cloud)
        search = neighborhood_search(qsim_gram, i, 5, seed=i)
        expected = nearest_neighborhood(raw, i, 5)
        assert not search.used_fallback
        assert np.array_equal(search.neighborhood.member_indices, expected.member_indices)
        assert np.allclose(search.neighborhood.geodesic_radii, expected.geodesic_radii, rtol=1e-8)
        assert search.cost["power_method_iter"] > 0

    def test_qsim_neighborhood(self, qsim_cloud, qsim_config):
        """The cloud-level search matches the classical neighbourhood."""
        _, raw = raw_k_field(qsim_cloud)
        nb = qsim_neighborhood(qsim_cloud, 7, qsim_config.nn, qsim_config)
        assert np.array_equal(nb.member_indices, nearest_neighborhood(raw, 7, 5).member_indices)

    def test_tied_distances_fall_back(self, square_with_center):
        """Equal distances fall back to the classical tie rule."""
        gram = build_kernel_gram_encoding(pairwise_distances(square_with_center), 4.0)
        search = neighborhood_search(gram, 4, 3)
        assert search.used_fallback
        members = search.neighborhood.member_indices
        assert members[0] == 4
        assert set(members[1:].tolist()) <= {0, 1, 2, 3}
        assert search.neighborhood.geodesic_radii[1] == pytest.approx(
            search.neighborhood.geodesic_radii[2]
        )

    def test_ties_raise_without_fallback(self, square_with_center):
        """Without the fallback ties raise a gap error."""
        gram = build_kernel_gram_encoding(pairwise_distances(square_with_center), 4.0)
        with pytest.raises(GapError):
            neighborhood_search(gram, 4, 3, QsimConfig(tie_fallback=False))

    def test_rescale(self, qsim_cloud, qsim_config):
        """Radii scale by a positive factor only."""
        nb = qsim_neighborhood(qsim_cloud, 0, 5, qsim_config)
        assert np.allclose(rescale_neighborhood(nb, 2.0).geodesic_radii, 2 * nb.geodesic_radii)
        with pytest.raises(ParameterError):
            rescale_neighborhood(nb, -1.0)


class TestCenteredGram:
    """Centered Gram encoding and the local dimension read off it."""

    def test_mean_projector(self):
        """The mean projector is idempotent."""
        enc = mean_projector_encoding(4)
        assert np.allclose(enc.encoded @ enc.encoded, enc.encoded)

    def test_matches_local_pca(self, qsim_cloud):
        """The centered Gram encoding equals the PCA Gram."""
        _, raw = raw_k_field(qsim_cloud)
        for i in (0, 4, 9):
            nb = nearest_neighborhood(raw, i, 5)
            enc = centered_gram_encoding(qsim_cloud, nb)
            expected = local_pca(qsim_cloud, nb, 0.95).gram()
            assert np.allclose(enc.encoded, expected, atol=1e-12 * np.abs(expected).max())
            assert enc.subnorm >= 2.0

    def test_local_dimension_matches_pca(self, qsim_cloud):
        """Simulated and classical local dimensions agree for every tau."""
        _, raw = raw_k_field(qsim_cloud)
        for i in range(12):
            nb = nearest_neighborhood(raw, i, 5)
            enc = centered_gram_encoding(qsim_cloud, nb)
            for tau in (0.5, 0.8, 0.95):
                assert qsim_local_dimension(enc, tau) == local_pca(qsim_cloud, nb, tau).local_dim

    def test_planar_patch(self):
        """A planar patch stops after two eigenpairs."""
        rng = np.random.default_rng(8)
        pts = np.column_stack([rng.uniform(size=(7, 2)), np.zeros(7)])
        cloud = PointCloud(pts)
        nb = nearest_neighborhood(pairwise_distances(cloud).d, 0, 6)
        run = local_dimension_run(centered_gram_encoding(cloud, nb), 0.999)
        assert run.local_dim == 2
        assert len(run.pairs) == 2
        assert run.cost["deflation"] == 2

    def test_trace_estimate(self, qsim_cloud):
        """Exact traces match; shot traces stay near them with seeded noise."""
        _, raw = raw_k_field(qsim_cloud)
        enc = centered_gram_encoding(qsim_cloud, nearest_neighborhood(raw, 0, 5))
        exact = trace_estimate(enc)
        assert exact.value == pytest.approx(np.trace(enc.encoded))
        noisy = trace_estimate(enc, QsimMode.SHOT, 0.01, np.random.default_rng(1))
        assert noisy.exact == exact.value
        assert noisy.value != exact.value
        assert abs(noisy.value / exact.value - 1) <= 0.05
        assert noisy.cost["trace_shots"] in (10_000, 10_001)


class TestHadamardSums:
    """Inner products and sums from Hadamard tests."""

    def test_exact_inner_product(self, rng):
        """Exact Hadamard tests return the inner product."""
        a, b = rng.normal(size=6), rng.normal(size=6)
        estimate = hadamard_inner_product(a, b)
        assert estimate.value == pytest.approx(a @ b)
        assert estimate.cost["hadamard_test"] == 1

    def test_zero_vector(self):
        """A zero vector needs no shots."""
        estimate = hadamard_inner_product([0.0, 0.0], [1.0, 2.0], QsimMode.SHOT)
        assert estimate.value == 0.0
        assert estimate.shots == 0

    def test_length_mismatch(self):
        """Vectors must have equal length."""
        with pytest.raises(ParameterError):
            hadamard_inner_product([1.0], [1.0, 2.0])

    def test_shot_estimate(self):
        """Shot sums are seeded and within a few epsilon."""
        a = np.array([0.3, 0.5, 0.2, 0.9])
        first = uniform_sum(a, QsimMode.SHOT, 0.01, np.random.default_rng(2))
        again = uniform_sum(a, QsimMode.SHOT, 0.01, np.random.default_rng(2))
        assert first.value == again.value
        assert first.exact == pytest.approx(1.9)
        assert abs(first.value - first.exact) <= 0.05
        assert first.shots == int(np.ceil((np.linalg.norm(a) * 2.0 / 0.01) ** 2))

    def test_shot_calibration(self):
        """Calibration reports the empirical spread."""
        a = np.array([0.3, 0.5, 0.2, 0.9])
        stats = shot_calibration(a, np.ones(4), 0.01, trials=200, seed=0)
        assert stats["trials"] == 200
        assert stats["empirical_std"] <= 1.3 * 0.01
        assert stats["fraction_within_5eps"] == 1.0

    def test_fit_sums(self):
        """The four fit sums come from Hadamard tests."""
        radii = np.array([0.5, 1.0, 1.5])
        volumes = np.array([1.0, 0.9, 0.8])
        sums = qsim_fit_sums(radii, volumes)
        r2 = radii**2
        assert sums.volume_sum == pytest.approx(volumes.sum())
        assert sums.squared_radius_sum == pytest.approx(r2.sum())
        assert sums.weighted_excess == pytest.approx(np.sum(r2 * (volumes - 1)))
        assert sums.fourth_moment == pytest.approx(np.sum(r2**2))
        assert sums.cost["hadamard_test"] == 4

    def test_curvature_sums(self):
        """Volume and squared-radius sums."""
        assert qsim_curvature_sums([1.0, 0.5], [2.0, 3.0]) == pytest.approx((1.5, 13.0))


class TestQsimPipeline:
    """Whole-cloud runs against the classical estimator."""

    def test_single_timestep_only(self, qsim_cloud, qsim_config):
        """The simulator runs at t = 1 only."""
        with pytest.raises(ParameterError):
            build_qsim_run(qsim_cloud, qsim_config.model_copy(update={"t": 2.0}))

    @pytest.mark.parametrize("i", [0, 6])
    def test_point_matches_classical(self, qsim_cloud, qsim_config, i):
        """A simulated point matches the classical neighbourhood-volume estimate."""
        oracle = qsim_config.neighborhood_run().model_copy(update={"spectrum": SpectrumSource.K})
        expected = estimate_point(qsim_cloud, i, oracle)
        got = qsim_estimate_point(qsim_cloud, i, qsim_config)
        assert got.report.local_dim == expected.local_dim
        assert np.array_equal(
            got.report.neighborhood.member_indices, expected.neighborhood.member_indices
        )
        assert got.report.S == pytest.approx(expected.S, rel=1e-6, abs=1e-6)
        assert got.sums.volume_sum == pytest.approx(
            expected.curvature.normalized_volumes.sum(), rel=1e-9
        )

    def test_index_out_of_range(self, qsim_cloud, qsim_config):
        """A point index outside the cloud is rejected."""
        with pytest.raises(ParameterError):
            qsim_estimate_point(qsim_cloud, 12, qsim_config)

    def test_run_is_reproducible(self, qsim_cloud, qsim_config):
        """Two runs with one seed agree exactly."""
        first = build_qsim_run(qsim_cloud, qsim_config)
        second = build_qsim_run(qsim_cloud, qsim_config)
        assert np.array_equal(first.field.dg, second.field.dg)
        assert first.local_dims == second.local_dims
        assert first.total_cost().to_dict() == second.total_cost().to_dict()
        assert first.total_cost()["power_method_iter"] > 0


class TestVerification:
    """Stage-by-stage comparison with the classical oracle."""

    def test_relative_deviation(self):
        """Relative deviation with mismatched shapes and a floor."""
        assert relative_deviation(np.array([1.0, 2.0]), np.array([1.0, 4.0])) == pytest.approx(0.5)
        assert relative_deviation(np.zeros(2), np.zeros(3)) == float("inf")
        floored = relative_deviation(np.array([0.1]), np.array([0.0]), floor=1.0)
        assert floored == pytest.approx(0.1)

    def test_exact_mode_passes(self, qsim_cloud, qsim_config):
        """Exact mode passes every stage."""
        report = run_verification(qsim_cloud, qsim_config)
        assert report.passed, report.to_dict()
        assert [s.name for s in report.stages] == list(STAGES)
        assert report.calibration is None
        assert report.costs["total"]["power_method_iter"] > 0
        assert report.to_dict()["failed_stages"] == []

    @pytest.mark.parametrize("stage", ["kernel_gram", "centered_gram", "curvature"])
    def test_injected_fault_is_named(self, qsim_cloud, qsim_config, stage):
        """An injected fault fails only its stage."""
        config = qsim_config.model_copy(update={"qsim": QsimConfig(fault_stage=stage)})
        report = run_verification(qsim_cloud, config)
        assert not report.passed
        assert report.failed_stages == [stage]

    def test_unknown_fault_stage(self, qsim_cloud, qsim_config):
        """An unknown fault stage is rejected."""
        config = qsim_config.model_copy(update={"qsim": QsimConfig(fault_stage="nope")})
        with pytest.raises(ParameterError):
            run_verification(qsim_cloud, config)

    def test_shot_mode_reports_calibration(self, qsim_cloud, qsim_config):
        """Shot mode adds a calibration and keeps deterministic stages exact."""
        config = qsim_config.model_copy(update={"qsim": QsimConfig(mode=QsimMode.SHOT)})
        report = run_verification(qsim_cloud, config)
        assert report.calibration is not None
        assert report.calibration["trials"] == 200
        deterministic = {s.name: s.passed for s in report.stages}
        assert deterministic["kernel_gram"] and deterministic["geodesic_diag"]

    def test_cloud_size_cap(self, qsim_cloud, qsim_config, monkeypatch):
        """Clouds above the size cap are refused."""
        monkeypatch.setattr(settings, "max_qverify_points", 10)
        with pytest.raises(ParameterError):
            run_verification(qsim_cloud, qsim_config)
