"""Dense-matrix simulator of the block-encoded curvature and diffusion-map pipelines."""

from src.qsim.block_encoding import (
    BlockEncoding,
    CostCounter,
    be_adjoint,
    be_amplify,
    be_diagonal_filter,
    be_lcu,
    be_negative_power,
    be_poly_transform,
    be_positive_power,
    be_product,
    be_scale_down,
    be_tensor,
    encode_known_matrix,
    identity_encoding,
    select_block,
)
from src.qsim.chebyshev import ChebyshevApprox, cheb_gaussian, decay_envelope, default_degree
from src.qsim.columns import (
    ColumnState,
    column_lcu,
    diagonal_from_column,
    encode_column,
    entrywise_power_column,
    entrywise_product_column,
    matrix_column,
)
from src.qsim.dimension import centered_gram_encoding, qsim_local_dimension, trace_estimate
from src.qsim.geodesic_encoding import (
    build_difference_operator,
    geodesic_diag_encoding,
    inverse_distance_encoding,
    neighborhood_search,
    qsim_neighborhood,
)
from src.qsim.kernel_encoding import (
    build_kernel_gram_encoding,
    kernel_column,
    kernel_matrix_encoding,
)
from src.qsim.pipeline import QsimGeometryRun, build_qsim_run, qsim_estimate_point
from src.qsim.power_method import EigenPair, power_method_pca
from src.qsim.sums import hadamard_inner_product, qsim_curvature_sums, qsim_fit_sums
from src.qsim.verify import STAGES, VerificationReport, run_verification

__all__ = [
    "STAGES",
    "BlockEncoding",
    "ChebyshevApprox",
    "ColumnState",
    "CostCounter",
    "EigenPair",
    "QsimGeometryRun",
    "VerificationReport",
    "be_adjoint",
    "be_amplify",
    "be_diagonal_filter",
    "be_lcu",
    "be_negative_power",
    "be_poly_transform",
    "be_positive_power",
    "be_product",
    "be_scale_down",
    "be_tensor",
    "build_difference_operator",
    "build_kernel_gram_encoding",
    "build_qsim_run",
    "centered_gram_encoding",
    "cheb_gaussian",
    "column_lcu",
    "decay_envelope",
    "default_degree",
    "diagonal_from_column",
    "encode_column",
    "encode_known_matrix",
    "entrywise_power_column",
    "entrywise_product_column",
    "geodesic_diag_encoding",
    "hadamard_inner_product",
    "identity_encoding",
    "inverse_distance_encoding",
    "kernel_column",
    "kernel_matrix_encoding",
    "matrix_column",
    "neighborhood_search",
    "power_method_pca",
    "qsim_curvature_sums",
    "qsim_estimate_point",
    "qsim_fit_sums",
    "qsim_local_dimension",
    "qsim_neighborhood",
    "run_verification",
    "select_block",
    "trace_estimate",
]
