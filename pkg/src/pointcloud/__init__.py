"""Point clouds, synthetic manifolds with analytic curvature, and CSV I/O."""

from src.pointcloud.cloud import DistanceMatrix, PointCloud, pairwise_distances
from src.pointcloud.io import load_csv, meta_path_for, save_csv
from src.pointcloud.synth import ManifoldKind, ManifoldMeta, generate_manifold

__all__ = [
    "DistanceMatrix",
    "ManifoldKind",
    "ManifoldMeta",
    "PointCloud",
    "generate_manifold",
    "load_csv",
    "meta_path_for",
    "pairwise_distances",
    "save_csv",
]
