"""Affinity kernels, diffusion operators, spectra and diffusion-distance geodesics."""

from src.diffusion.geodesic import (
    GeodesicField,
    GeodesicSource,
    bridge_components,
    calibrate_geodesic_scale,
    geodesic_field,
    graph_geodesic_field,
)
from src.diffusion.kernel import (
    DiffusionOperator,
    KernelMatrix,
    build_diffusion_operator,
    build_kernel,
    median_sigma2,
    resolve_sigma2,
)
from src.diffusion.spectral import (
    OperatorTag,
    SpectralDecomposition,
    apply_sign_convention,
    spectral_decompose,
    symmetric_conjugate,
)

__all__ = [
    "DiffusionOperator",
    "GeodesicField",
    "GeodesicSource",
    "KernelMatrix",
    "OperatorTag",
    "SpectralDecomposition",
    "apply_sign_convention",
    "build_diffusion_operator",
    "bridge_components",
    "build_kernel",
    "calibrate_geodesic_scale",
    "geodesic_field",
    "graph_geodesic_field",
    "median_sigma2",
    "resolve_sigma2",
    "spectral_decompose",
    "symmetric_conjugate",
]
