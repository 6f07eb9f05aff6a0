"""
Acceptance Tests

Large-cloud checks against analytic ground truth. Deselected by default; run with

    pytest -m acceptance
"""

import time

import numpy as np
import pytest
import scipy.linalg
from scipy.stats import ortho_group, special_ortho_group

from src.config.run_config import RunConfig
from src.core.stats import lower_median
from src.diffmap import align_signs, diffusion_map, qsim_diffusion_map
from src.geometry.estimator import estimate_all
from src.geometry.volumes import fit_quadratic, stationarity_residual
from src.pointcloud.cloud import PointCloud
from src.pointcloud.synth import generate_manifold
from src.qsim.chebyshev import cheb_gaussian, decay_envelope
from src.qsim.power_method import power_method_pca
from src.qsim.verify import run_verification

pytestmark = pytest.mark.acceptance

ROUNDOFF_FLOOR = 64 * np.finfo(float).eps


def timed(fn, *args, **kwargs):
    start = time.perf_counter()
    out = fn(*args, **kwargs)
    return out, time.perf_counter() - start


class TestCurvature:
    """Flat and spherical fixtures."""

    def test_flat_plane(self):
        """A unit-density plane is two-dimensional with near-zero curvature."""
        cloud = generate_manifold("plane", 1500, seed=1)
        result, elapsed = timed(estimate_all, cloud, RunConfig(nn=20, tau=0.95))
        assert np.mean(result.local_dims() == 2) >= 0.9
        assert np.median(np.abs(result.curvatures())) <= 0.3
        assert elapsed <= 60

    def test_unit_sphere_sign_and_scale(self):
        """The unit sphere curves positively and S scales like 1 / R^2."""
        unit = generate_manifold("sphere", 2000, {"radius": 1.0}, seed=2)
        result, elapsed = timed(estimate_all, unit)
        median_s = result.median_curvature()
        assert lower_median(result.local_dims()) == 2
        assert median_s > 0
        assert 2.0 / 3.0 <= median_s <= 6.0

        larger = estimate_all(generate_manifold("sphere", 2000, {"radius": 2.0}, seed=2))
        assert 2.5 <= median_s / larger.median_curvature() <= 6.0
        assert elapsed <= 300


class TestFit:
    """Least-squares recovery from exact quadratic volumes."""

    def test_recovers_curvature_coefficient(self):
        """Exact quadratic volumes give back their coefficient."""
        rng = np.random.default_rng(0)
        for _ in range(100):
            a0 = rng.uniform(-2, 2)
            radii = np.sort(rng.uniform(0.05, 1.0, size=rng.integers(2, 30)))
            volumes = 1 + a0 * radii**2
            a = fit_quadratic(radii, volumes)
            assert a == pytest.approx(a0, abs=1e-10)
            assert abs(stationarity_residual(radii, volumes, a)) <= 1e-9


class TestDimension:
    """Global dimension on known manifolds."""

    @pytest.mark.parametrize(
        "kind, n, params, nn, expected",
        [
            ("swiss_roll", 1500, {}, 20, 2),
            ("line", 500, {}, 20, 1),
            ("sphere", 3000, {"dim": 5, "ambient_dim": 7}, 40, 5),
        ],
    )
    def test_global_dimension(self, kind, n, params, nn, expected):
        """Global dimension matches the sampled manifold."""
        cloud = generate_manifold(kind, n, params, seed=3)
        assert estimate_all(cloud, RunConfig(nn=nn)).global_dim == expected


class TestQsimOracle:
    """Every simulated stage within 1e-6 of its oracle."""

    def test_sixteen_points(self):
        """Sixteen uniform points pass qverify in exact mode."""
        cloud = PointCloud(np.random.default_rng(0).uniform(size=(16, 3)))
        report, elapsed = timed(run_verification, cloud, RunConfig(nn=6, t=1.0))
        assert report.passed, report.failed_stages
        assert all(s.deviation <= 1e-6 for s in report.stages)
        assert elapsed <= 30


class TestPowerMethod:
    """Power-method PCA against a symmetric eigensolver."""

    def test_random_spd_matrices(self):
        """Top eigenpairs of random SPD matrices match eigh."""
        rng = np.random.default_rng(42)
        for trial in range(200):
            dim = int(rng.integers(2, 33))
            k = int(rng.integers(1, min(dim, 5) + 1))
            q = ortho_group.rvs(dim, random_state=trial)
            # top-k levels stay 0.1 apart; the tail sits below them
            top = 1.0 - 0.15 * np.arange(k) - rng.uniform(0, 0.05, size=k)
            tail = np.sort(rng.uniform(0.01, 0.2, size=dim - k))[::-1]
            values = np.concatenate([top, tail])
            a = (q * values) @ q.T
            pairs = power_method_pca(a, k, seed=trial)
            ref_values, ref_vectors = scipy.linalg.eigh(a)
            ref_values, ref_vectors = ref_values[::-1], ref_vectors[:, ::-1]
            for idx, pair in enumerate(pairs):
                assert pair.value == pytest.approx(ref_values[idx], abs=1e-8)
                assert abs(pair.vector @ ref_vectors[:, idx]) >= 1 - 1e-8


class TestChebyshev:
    """Gaussian approximation error envelope."""

    @pytest.mark.parametrize("p", [10, 20, 30, 40])
    def test_envelope(self, p):
        """Sup error stays under the decay envelope or the roundoff floor."""
        assert cheb_gaussian(p).sup_error <= max(decay_envelope(p), ROUNDOFF_FLOOR)


class TestDiffusionMap:
    """Circle embedding and the block-encoded replay."""

    def test_circle_is_radially_uniform(self):
        """A uniform circle embeds at a constant radius."""
        angle = 2 * np.pi * np.arange(64) / 64
        cloud = PointCloud(np.column_stack([np.cos(angle), np.sin(angle)]))
        radii = np.linalg.norm(diffusion_map(cloud, n=2).coords, axis=1)
        assert np.all(np.abs(radii / radii.mean() - 1) <= 0.05)

    def test_qsim_matches_classical_on_ellipse(self):
        """Unequal axes keep the two leading modes apart, as the power method needs."""
        angle = 2 * np.pi * np.arange(64) / 64
        cloud = PointCloud(np.column_stack([np.cos(angle), 0.5 * np.sin(angle)]))
        classical = diffusion_map(cloud, n=2)
        quantum = qsim_diffusion_map(cloud, n=2)
        aligned = align_signs(quantum.coords, classical.coords)
        assert np.allclose(aligned, classical.coords, atol=1e-6)


class TestInvariance:
    """Rigid motions, relabeling and seeds over randomized trials."""

    def test_fifty_trials(self):
        """Curvatures survive rigid motions and relabeling."""
        rng = np.random.default_rng(9)
        config = RunConfig(nn=6)
        for trial in range(50):
            cloud = PointCloud(rng.normal(size=(20, 3)))
            base = estimate_all(cloud, config)

            rotation = special_ortho_group.rvs(3, random_state=trial)
            moved = estimate_all(cloud.transformed(rotation, rng.normal(size=3)), config)
            assert np.allclose(moved.curvatures(), base.curvatures(), rtol=1e-6, atol=1e-8)

            order = rng.permutation(20)
            relabeled = estimate_all(cloud.permuted(order), config)
            expected = base.curvatures()[order]
            assert np.allclose(relabeled.curvatures(), expected, rtol=1e-6, atol=1e-8)

            a = generate_manifold("torus", 30, seed=trial)
            b = generate_manifold("torus", 30, seed=trial)
            assert np.array_equal(a.points, b.points)
