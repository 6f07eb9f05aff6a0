"""Classical and block-encoded diffusion-map embeddings."""

from src.diffmap.embedding import (
    DiffusionEmbedding,
    NormalizedKernel,
    align_signs,
    diffusion_map,
    normalize_kernel,
)
from src.diffmap.quantum import QsimDiffusionRun, qsim_diffusion_map, qsim_diffusion_run

__all__ = [
    "DiffusionEmbedding",
    "NormalizedKernel",
    "QsimDiffusionRun",
    "align_signs",
    "diffusion_map",
    "normalize_kernel",
    "qsim_diffusion_map",
    "qsim_diffusion_run",
]
