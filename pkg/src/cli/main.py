"""
Curvscope Command Line

Subcommands:
    synth    sample a synthetic manifold into CSV (+ meta sidecar)
    estimate local dimension and scalar curvature for every point of a CSV cloud
    diffmap  diffusion-map embedding, classical or block-encoded (--qsim)
    qverify  block-encoded pipeline against its classical oracle, stage by stage

Exit codes: 0 success, 1 data or numerical failure, 2 usage or input error.
"""

import argparse
import csv
import logging
import sys
from pathlib import Path
from typing import Any, Dict, List, Optional

import numpy as np
import yaml
from pydantic import ValidationError

from src.cli.schemas import (
    DiffmapReport,
    EstimateReport,
    PointReport,
    QverifyReport,
    StageReport,
    SynthReport,
)
from src.config.run_config import (
    BallCount,
    DensityNormalization,
    DimMode,
    FitVariant,
    GeodesicScale,
    QsimMode,
    RunConfig,
    SpectrumSource,
)
from src.config.settings import settings
from src.core.errors import CurvscopeError, InputError, ParameterError
from src.core.stats import lower_median
from src.diffmap import diffusion_map, qsim_diffusion_map
from src.geometry.estimator import EstimationResult, estimate_all
from src.middleware.logging import configure_logging
from src.pointcloud.cloud import PointCloud
from src.pointcloud.io import load_csv, meta_path_for, save_csv
from src.pointcloud.synth import ManifoldKind, generate_manifold
from src.qsim.verify import STAGES, run_verification

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_USAGE = 2

# qverify runs on tiny clouds, where the estimate default of 20 neighbours is too many
QVERIFY_NN = 6
QVERIFY_AMBIENT_DIM = 3

# Short spellings accepted on the command line
_FIT_VARIANTS = {
    "ols": FitVariant.OLS,
    "paper": FitVariant.PAPER_FORMULA,
    "paper_formula": FitVariant.PAPER_FORMULA,
    "scaled": FitVariant.SCALED,
}


def _scale(value: str) -> Any:
    """sigma2 / h flag: a positive number or 'auto'."""
    if value == "auto":
        return value
    try:
        return float(value)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a number or 'auto', got '{value}'")


# =============================================================================
# Parser
# =============================================================================


def _common_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("-v", "--verbose", action="store_true", help="Log at DEBUG level")
    common.add_argument("--config", type=Path, help="JSON or YAML file with RunConfig values")
    common.add_argument("--seed", type=int, help="Random seed (default: CURVSCOPE_DEFAULT_SEED)")
    return common


def _add_kernel_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--sigma2", type=_scale, help="Kernel scale sigma^2 or 'auto' (median heuristic)")
    p.add_argument("--t", type=float, help="Diffusion timestep (> 0)")


def _add_qsim_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--mode", choices=[m.value for m in QsimMode], help="exact or shot-noise emulation")
    p.add_argument("--degree", type=int, help="Chebyshev degree of the Gaussian approximation")
    p.add_argument("--epsilon", type=float, help="Declared std of shot-mode estimates")


def build_parser() -> argparse.ArgumentParser:
    common = _common_parser()
    parser = argparse.ArgumentParser(
        prog="curvscope",
        description="Intrinsic dimension and scalar curvature from diffusion geometry.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    synth = sub.add_parser("synth", parents=[common], help="Sample a synthetic manifold")
    synth.add_argument("--kind", required=True, choices=[k.value for k in ManifoldKind])
    synth.add_argument("--n", type=int, required=True, help="Number of points")
    synth.add_argument("--radius", type=float)
    synth.add_argument("--dim", type=int, help="Sphere dimension d of S^d")
    synth.add_argument("--ambient-dim", type=int)
    synth.add_argument("--side", type=float)
    synth.add_argument("--length", type=float)
    synth.add_argument("--major-radius", type=float)
    synth.add_argument("--minor-radius", type=float)
    synth.add_argument("--height", type=float)
    synth.add_argument("--noise", type=float, default=0.0, help="Ambient Gaussian noise std")
    synth.add_argument("--output", type=Path, help="CSV path (default: <output_dir>/<kind>.csv)")

    est = sub.add_parser("estimate", parents=[common], help="Estimate d_i and S at every point")
    est.add_argument("input", type=Path, help="CSV point file")
    _add_kernel_flags(est)
    est.add_argument("--nn", type=int, help="Neighbourhood size, center included")
    est.add_argument("--tau", type=float, help="Explained-variance threshold in (0, 1)")
    est.add_argument("--h", type=_scale, help="Density kernel scale or 'auto'")
    est.add_argument("--fit-variant", choices=sorted(_FIT_VARIANTS))
    est.add_argument("--dim-mode", choices=[m.value for m in DimMode])
    est.add_argument("--spectrum", choices=[s.value for s in SpectrumSource])
    est.add_argument("--geodesic-scale", choices=[g.value for g in GeodesicScale])
    est.add_argument("--density-normalization", choices=[d.value for d in DensityNormalization])
    est.add_argument(
        "--no-geodesic-paths", action="store_true", help="Measure balls in d_G instead of graph paths"
    )
    est.add_argument("--ball-scale", type=float, help="Ball extent in units of h")
    est.add_argument("--ball-count", choices=[c.value for c in BallCount])
    est.add_argument(
        "--neighborhood-volumes",
        action="store_true",
        help="Volumes on the nn-neighbourhood in d_G: closed balls, fit through 1",
    )
    est.add_argument("--r-min", type=float)
    est.add_argument("--r-max", type=float)
    est.add_argument(
        "--point", type=int, action="append", default=[], help="Point index for --emit-fit (repeatable)"
    )
    est.add_argument(
        "--emit-fit", type=Path, metavar="DIR", help="Write (r^2, Vol_nor) CSVs for --point indices"
    )
    est.add_argument("--output", type=Path, help="JSON report path (default: stdout)")

    dm = sub.add_parser("diffmap", parents=[common], help="Diffusion-map embedding")
    dm.add_argument("input", type=Path, help="CSV point file")
    _add_kernel_flags(dm)
    dm.add_argument("--n", type=int, default=2, help="Embedding dimension")
    dm.add_argument("--include-trivial", action="store_true", help="Keep the constant lambda = 1 mode")
    dm.add_argument("--qsim", action="store_true", help="Run on the block-encoding simulator")
    _add_qsim_flags(dm)
    dm.add_argument("--output", type=Path, help="Embedding CSV path (default: stdout)")

    qv = sub.add_parser("qverify", parents=[common], help="Check the simulator against its oracle")
    qv.add_argument("--input", type=Path, help="CSV point file (default: random cloud)")
    qv.add_argument("--n-points", type=int, default=16, help="Size of the random cloud")
    qv.add_argument("--nn", type=int, help=f"Neighbourhood size (default {QVERIFY_NN})")
    qv.add_argument("--sigma2", type=_scale)
    qv.add_argument("--tau", type=float)
    _add_qsim_flags(qv)
    qv.add_argument("--tolerance", type=float, help="Relative deviation allowed per stage")
    qv.add_argument("--no-tie-fallback", action="store_true", help="Fail on neighbour ties")
    qv.add_argument(
        "--inject-fault", choices=STAGES, metavar="STAGE", help="Test hook: perturb one stage"
    )
    qv.add_argument("--output", type=Path, help="JSON report path (default: stdout)")
    return parser


# =============================================================================
# Helpers
# =============================================================================


def _run_config(args: argparse.Namespace, defaults: Optional[Dict[str, Any]] = None) -> RunConfig:
    """Defaults < config file < flags."""
    file_values = {"seed": settings.default_seed, **(defaults or {})}
    if args.config is not None:
        if not args.config.is_file():
            raise InputError(f"config file not found: {args.config}")
        file_values.update(RunConfig.read_file(args.config))

    flags: Dict[str, Any] = {"seed": args.seed}
    for key in ("sigma2", "t", "nn", "tau", "h", "dim_mode", "spectrum", "geodesic_scale",
                "density_normalization", "ball_scale", "ball_count", "r_min", "r_max"):
        flags[key] = getattr(args, key, None)
    if getattr(args, "no_geodesic_paths", False):
        flags["geodesic_paths"] = False
    if getattr(args, "fit_variant", None) is not None:
        flags["fit_variant"] = _FIT_VARIANTS[args.fit_variant]
    flags["qsim"] = {
        "mode": getattr(args, "mode", None),
        "degree": getattr(args, "degree", None),
        "shot_epsilon": getattr(args, "epsilon", None),
        "verify_tolerance": getattr(args, "tolerance", None),
        "fault_stage": getattr(args, "inject_fault", None),
        "tie_fallback": False if getattr(args, "no_tie_fallback", False) else None,
    }
    config = RunConfig.merged(file_values, flags)
    if getattr(args, "neighborhood_volumes", False):
        config = config.neighborhood_run()
    return config


def _emit(text: str, path: Optional[Path]) -> None:
    if path is None:
        sys.stdout.write(text + "\n")
        return
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text + "\n", encoding="utf-8")
    logger.info(f"Wrote {path}")


def _write_rows(path: Optional[Path], header: List[str], rows: np.ndarray) -> None:
    """RFC-4180 CSV with 17 significant digits; stdout when path is None."""
    if path is None:
        _write_csv(sys.stdout, header, rows)
        return
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="", encoding="utf-8") as fh:
        _write_csv(fh, header, rows)
    logger.info(f"Wrote {path}")


def _write_csv(fh, header: List[str], rows: np.ndarray) -> None:
    writer = csv.writer(fh)
    writer.writerow(header)
    for row in rows:
        writer.writerow([format(float(v), ".17g") for v in row])


def random_cloud(n_points: int, seed: int, ambient_dim: int = QVERIFY_AMBIENT_DIM) -> PointCloud:
    """Uniform points in the unit cube; generic enough to avoid distance ties."""
    if n_points < 2:
        raise ParameterError(f"--n-points must be >= 2, got {n_points}")
    rng = np.random.default_rng(seed)
    return PointCloud(rng.uniform(size=(n_points, ambient_dim)))


# =============================================================================
# Commands
# =============================================================================


def cmd_synth(args: argparse.Namespace) -> int:
    params = {
        "radius": args.radius,
        "dim": args.dim,
        "ambient_dim": args.ambient_dim,
        "side": args.side,
        "length": args.length,
        "major_radius": args.major_radius,
        "minor_radius": args.minor_radius,
        "height": args.height,
    }
    params = {k: v for k, v in params.items() if v is not None}
    seed = settings.default_seed if args.seed is None else args.seed
    cloud = generate_manifold(args.kind, args.n, params, noise_sigma=args.noise, seed=seed)

    path = args.output or settings.ensure_output_dir() / f"{args.kind}.csv"
    save_csv(cloud, path)
    report = SynthReport(
        points_path=str(path),
        meta_path=str(meta_path_for(path)),
        kind=args.kind,
        n_points=cloud.n_points,
        ambient_dim=cloud.ambient_dim,
        analytic_curvature=cloud.meta.analytic_curvature,
    )
    _emit(report.render(), None)
    return EXIT_OK


def _emit_fits(result: EstimationResult, points: List[int], directory: Path) -> List[str]:
    written = []
    for i in points:
        if not 0 <= i < len(result.reports):
            raise ParameterError(f"--point {i} out of range for {len(result.reports)} points")
        path = directory / f"fit_point_{i}.csv"
        _write_rows(path, ["r2", "vol_nor"], result.reports[i].curvature.fit_points())
        written.append(str(path))
    return written


def cmd_estimate(args: argparse.Namespace) -> int:
    if args.emit_fit is not None and not args.point:
        raise ParameterError("--emit-fit needs at least one --point")
    config = _run_config(args)
    cloud = load_csv(args.input)
    result = estimate_all(cloud, config)

    fit_files: List[str] = []
    if args.emit_fit is not None:
        fit_files = _emit_fits(result, args.point, args.emit_fit)

    report = EstimateReport(
        input=str(args.input),
        n_points=cloud.n_points,
        global_dim=result.global_dim,
        median_local_dim=int(lower_median(result.local_dims())),
        median_S=result.median_curvature(),
        sigma2=result.sigma2,
        h=result.h,
        geodesic_scale=result.geodesic_scale,
        config=config.model_dump(mode="json"),
        points=[PointReport(**r.to_dict()) for r in result.reports],
        fit_files=fit_files,
    )
    _emit(report.render(), args.output)
    return EXIT_OK


def cmd_diffmap(args: argparse.Namespace) -> int:
    config = _run_config(args)
    cloud = load_csv(args.input)
    if args.qsim:
        embedding = qsim_diffusion_map(
            cloud,
            sigma2=config.sigma2,
            t=config.t,
            n=args.n,
            config=config.qsim,
            include_trivial=args.include_trivial,
            seed=config.seed,
        )
    else:
        embedding = diffusion_map(
            cloud, sigma2=config.sigma2, t=config.t, n=args.n, include_trivial=args.include_trivial
        )

    header = [f"psi{k}" for k in range(embedding.coords.shape[1])]
    _write_rows(args.output, header, embedding.coords)

    if args.output is not None:
        report = DiffmapReport(
            input=str(args.input),
            embedding_path=str(args.output),
            qsim=args.qsim,
            **embedding.to_metadata(),
        )
        meta_path_for(args.output).write_text(report.render() + "\n", encoding="utf-8")
    return EXIT_OK


def cmd_qverify(args: argparse.Namespace) -> int:
    config = _run_config(args, defaults={"nn": QVERIFY_NN})
    cloud = load_csv(args.input) if args.input is not None else random_cloud(args.n_points, config.seed)
    result = run_verification(cloud, config)

    report = QverifyReport(
        passed=result.passed,
        failed_stages=result.failed_stages,
        n_points=result.n_points,
        nn=result.nn,
        mode=result.mode.value,
        stages=[
            StageReport(
                name=s.name,
                max_relative_deviation=s.deviation,
                tolerance=s.tolerance,
                passed=s.passed,
                detail=s.detail,
            )
            for s in result.stages
        ],
        subnorm_chain=result.subnorm_chain,
        costs=result.costs,
        calibration=result.calibration,
        config=config.model_dump(mode="json"),
    )
    _emit(report.render(), args.output)
    if not result.passed:
        sys.stderr.write(f"qverify failed at stage(s): {', '.join(result.failed_stages)}\n")
        return EXIT_FAILURE
    return EXIT_OK


COMMANDS = {
    "synth": cmd_synth,
    "estimate": cmd_estimate,
    "diffmap": cmd_diffmap,
    "qverify": cmd_qverify,
}


# =============================================================================
# Entry points
# =============================================================================


def main(argv: Optional[List[str]] = None) -> int:
    """Parse argv, run one subcommand and return its exit code."""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)

    configure_logging("DEBUG" if args.verbose else settings.log_level, settings.json_logs)

    try:
        return COMMANDS[args.command](args)
    except (InputError, ParameterError, ValidationError) as e:
        logger.error(f"{args.command}: {e}")
        sys.stderr.write(f"error: {e}\n")
        return EXIT_USAGE
    except CurvscopeError as e:
        logger.error(f"{args.command} failed: {e}")
        sys.stderr.write(f"error: {e}\n")
        return EXIT_FAILURE
    except (ValueError, yaml.YAMLError) as e:
        # malformed config files
        sys.stderr.write(f"error: {e}\n")
        return EXIT_USAGE


def run() -> None:
    """Console-script entry point."""
    sys.exit(main())


if __name__ == "__main__":
    run()
