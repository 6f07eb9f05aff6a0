"""
Oracle Verification

Runs the block-encoded pipeline and the classical K-spectrum pipeline (t = 1)
on the same cloud and compares them stage by stage. Both measure volumes on the
nn-neighbourhood in d_G, the way the block-encoded algorithm does. A stage's deviation is the
largest absolute difference relative to the largest oracle magnitude; the final
curvature uses max(|S|, 1) per point as its scale.
"""

import logging
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
import scipy.linalg

from src.config.run_config import QsimMode, RunConfig, SpectrumSource
from src.config.settings import settings
from src.core.errors import ParameterError
from src.geometry.estimator import GeometryContext, build_context, report_for_point
from src.middleware.logging import new_run_id, stage_timer
from src.pointcloud.cloud import PointCloud
from src.qsim.block_encoding import CostCounter
from src.qsim.pipeline import QsimGeometryRun, QsimPointReport, build_qsim_run, qsim_report_for_point
from src.qsim.sums import shot_calibration

logger = logging.getLogger(__name__)

STAGES = (
    "kernel_gram",
    "geodesic_diag",
    "neighbors",
    "power_method",
    "centered_gram",
    "local_dimension",
    "curvature_sums",
    "curvature",
)
SAMPLED_STAGES = ("local_dimension", "curvature_sums", "curvature")
FAULT_FACTOR = 1.01

Comparison = Tuple[np.ndarray, np.ndarray]


@dataclass(frozen=True)
class StageCheck:
    name: str
    deviation: float
    tolerance: float
    passed: bool
    detail: Dict[str, Any] = field(default_factory=dict)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "name": self.name,
            "max_relative_deviation": self.deviation,
            "tolerance": self.tolerance,
            "passed": self.passed,
            **self.detail,
        }


@dataclass(frozen=True)
class VerificationReport:
    """Per-stage deviations plus the subnormalization/error chain and costs."""

    stages: List[StageCheck]
    n_points: int
    nn: int
    mode: QsimMode
    subnorm_chain: List[Dict[str, Any]]
    costs: Dict[str, Dict[str, int]]
    calibration: Optional[Dict[str, Any]] = None
    run_id: str = ""

    @property
    def passed(self) -> bool:
        return all(s.passed for s in self.stages)

    @property
    def failed_stages(self) -> List[str]:
        return [s.name for s in self.stages if not s.passed]

    def to_dict(self) -> Dict[str, Any]:
        out = {
            "passed": self.passed,
            "failed_stages": self.failed_stages,
            "n_points": self.n_points,
            "nn": self.nn,
            "mode": self.mode.value,
            "stages": [s.to_dict() for s in self.stages],
            "subnorm_chain": self.subnorm_chain,
            "costs": self.costs,
        }
        if self.calibration is not None:
            out["calibration"] = self.calibration
        return out


def relative_deviation(qsim: np.ndarray, oracle: np.ndarray, floor: Optional[float] = None) -> float:
    """
    max |q - o| / max |o|, or max |q - o| / max(|o|, floor) entrywise with a floor.

    Shapes that disagree count as total failure (inf).
    """
    q = np.asarray(qsim, dtype=float)
    o = np.asarray(oracle, dtype=float)
    if q.shape != o.shape:
        return float("inf")
    if q.size == 0:
        return 0.0
    diff = np.abs(q - o)
    if floor is not None:
        return float(np.max(diff / np.maximum(np.abs(o), floor)))
    scale = float(np.max(np.abs(o)))
    return float(np.max(diff) / scale) if scale > 0 else float(np.max(diff))


def _check(
    name: str,
    comparisons: Sequence[Comparison],
    tolerance: float,
    fault_stage: Optional[str],
    floor: Optional[float] = None,
    **detail: Any,
) -> StageCheck:
    factor = FAULT_FACTOR if name == fault_stage else 1.0
    deviation = max(
        (relative_deviation(q * factor, o, floor) for q, o in comparisons), default=0.0
    )
    passed = bool(deviation <= tolerance)
    if not passed:
        logger.warning(f"qverify stage {name} failed: deviation {deviation:.3e} > {tolerance:.1e}")
    return StageCheck(name, deviation, tolerance, passed, detail)


def _oracle_context(cloud: PointCloud, config: RunConfig, run_id: str) -> GeometryContext:
    oracle_config = config.neighborhood_run().model_copy(
        update={"spectrum": SpectrumSource.K, "t": 1.0}
    )
    return build_context(cloud, oracle_config, run_id)


def _as_float(values) -> np.ndarray:
    return np.asarray(values, dtype=float)


def _power_method_comparisons(run: QsimGeometryRun) -> List[Comparison]:
    comparisons: List[Comparison] = []
    for search in run.searches:
        if not search.pairs:
            continue
        values, vectors = scipy.linalg.eigh(search.inverse.encoded)
        order = np.argsort(values)[::-1][: len(search.pairs)]
        got = np.array([p.value for p in search.pairs])
        overlaps = np.array([abs(float(p.vector @ vectors[:, k])) for p, k in zip(search.pairs, order)])
        comparisons.append((got, values[order]))
        comparisons.append((overlaps, np.ones_like(overlaps)))
    return comparisons


def _direct_sums(report) -> np.ndarray:
    r2 = report.curvature.radii**2
    v = report.curvature.normalized_volumes
    return np.array([v.sum(), r2.sum(), float(np.sum(r2 * (v - 1.0))), float(np.sum(r2 * r2))])


def run_verification(cloud: PointCloud, config: Optional[RunConfig] = None) -> VerificationReport:
    """
    Check every block-encoded stage against its classical oracle.

    Raises:
        ParameterError: If the cloud exceeds max_qverify_points, t != 1 or the
            fault stage is unknown
    """
    config = config or RunConfig()
    qcfg = config.qsim
    if cloud.n_points > settings.max_qverify_points:
        raise ParameterError(
            f"qverify runs on at most {settings.max_qverify_points} points, got {cloud.n_points}"
        )
    if qcfg.fault_stage is not None and qcfg.fault_stage not in STAGES:
        raise ParameterError(f"unknown fault stage {qcfg.fault_stage!r}; choose from {', '.join(STAGES)}")

    run_id = new_run_id()
    shot = qcfg.mode is QsimMode.SHOT
    tol = qcfg.verify_tolerance
    sampled_tol = max(tol, 5 * qcfg.shot_epsilon) if shot else tol

    with stage_timer("qverify_oracle", run_id, n_points=cloud.n_points):
        ctx = _oracle_context(cloud, config, run_id)
        classical = [report_for_point(ctx, i) for i in range(cloud.n_points)]

    with stage_timer("qverify_qsim", run_id, mode=qcfg.mode.value):
        run = build_qsim_run(cloud, config, run_id)
        points: List[QsimPointReport] = [
            qsim_report_for_point(run, i) for i in range(cloud.n_points)
        ]

    fault = qcfg.fault_stage
    raw_dg = ctx.field.dg / ctx.field.scale
    checks = [
        _check(
            "kernel_gram",
            [(run.gram.encoded, ctx.kernel.k.T @ ctx.kernel.k)],
            tol,
            fault,
        ),
        _check(
            "geodesic_diag",
            [(np.array([np.diag(s.diag4.encoded) for s in run.searches]), raw_dg**4)],
            tol,
            fault,
        ),
        _check(
            "neighbors",
            [
                (_as_float([nb.member_indices for nb in run.neighborhoods]),
                 _as_float([nb.member_indices for nb in ctx.neighborhoods])),
                (_as_float([nb.geodesic_radii for nb in run.neighborhoods]),
                 _as_float([nb.geodesic_radii for nb in ctx.neighborhoods])),
            ],
            tol,
            fault,
            fallbacks=int(sum(s.used_fallback for s in run.searches)),
        ),
        _check("power_method", _power_method_comparisons(run), tol, fault),
        _check(
            "centered_gram",
            [(enc.encoded, pca.gram()) for enc, pca in zip(run.centered_grams, ctx.pcas)],
            tol,
            fault,
        ),
        _check(
            "local_dimension",
            [
                (_as_float(run.local_dims), _as_float(ctx.local_dims)),
                (_as_float([run.global_dim]), _as_float([ctx.global_dim])),
            ],
            sampled_tol,
            fault,
            global_dim=run.global_dim,
        ),
        _check(
            "curvature_sums",
            [
                (
                    np.array([p.sums[k] for p in points]),
                    np.array([_direct_sums(r)[k] for r in classical]),
                )
                for k in range(4)
            ],
            sampled_tol,
            fault,
        ),
        _check(
            "curvature",
            [(np.array([p.report.S for p in points]), np.array([r.S for r in classical]))],
            sampled_tol,
            fault,
            floor=1.0,
        ),
    ]

    chain = [
        run.gram.summary(),
        run.searches[0].diag4.summary(),
        run.searches[0].inverse.summary(),
        run.centered_grams[0].summary(),
    ]
    costs = {
        "kernel_gram": run.gram.cost.to_dict(),
        "neighbor_search": CostCounter.combine(s.cost for s in run.searches).to_dict(),
        "local_dimension": CostCounter.combine(r.cost for r in run.dimension_runs).to_dict(),
        "density": run.density_cost.to_dict(),
        "curvature_sums": CostCounter.combine(p.sums.cost for p in points).to_dict(),
    }
    costs["total"] = CostCounter.combine(
        CostCounter(c) for c in costs.values()
    ).to_dict()

    calibration = None
    if shot:
        volumes = points[0].report.curvature.normalized_volumes
        calibration = shot_calibration(volumes, np.ones_like(volumes), qcfg.shot_epsilon, seed=config.seed)

    report = VerificationReport(
        stages=checks,
        n_points=cloud.n_points,
        nn=config.nn,
        mode=qcfg.mode,
        subnorm_chain=chain,
        costs=costs,
        calibration=calibration,
        run_id=run_id,
    )
    logger.info(
        f"qverify {'passed' if report.passed else 'failed'}",
        extra={"run_id": run_id, "failed_stages": report.failed_stages},
    )
    return report
