"""Nearest-neighbor contingency table tests for spatial segregation."""

from .neighbors import (
    NNGraph,
    PointSet,
    QRStats,
    ValidationError,
    apply_inner_buffer,
    apply_outer_buffer,
    apply_toroidal,
    build_nn_graph,
    compute_qr,
    inner_buffer_width,
)
from .nnct import NNCT, build_nnct
from .pielou import (
    TestResult,
    chisq_sf,
    normal_sf,
    pielou_chisq,
    pielou_z_multinomial,
    pielou_z_rowwise,
)
from .dixon import (
    CSR_MEAN_Q_OVER_N,
    CSR_MEAN_R_OVER_N,
    DixonMoments,
    dixon_cell_test,
    dixon_moments,
    dixon_overall_test,
    qr_adjust,
)
from .nullmodels import (
    NullSpec,
    SizeEstimate,
    agreement_proportion,
    available_tests,
    empirical_size,
    generate,
    mc_randomization_test,
    random_labeling,
)
from .ripley import LCurve, l_bivariate, l_envelope, l_univariate

__version__ = "0.1.0"

__all__ = [
    "PointSet",
    "NNGraph",
    "QRStats",
    "ValidationError",
    "build_nn_graph",
    "compute_qr",
    "apply_toroidal",
    "apply_outer_buffer",
    "apply_inner_buffer",
    "inner_buffer_width",
    "NNCT",
    "build_nnct",
    "TestResult",
    "chisq_sf",
    "normal_sf",
    "pielou_chisq",
    "pielou_z_rowwise",
    "pielou_z_multinomial",
    "DixonMoments",
    "dixon_moments",
    "dixon_cell_test",
    "dixon_overall_test",
    "qr_adjust",
    "CSR_MEAN_Q_OVER_N",
    "CSR_MEAN_R_OVER_N",
    "NullSpec",
    "SizeEstimate",
    "random_labeling",
    "generate",
    "available_tests",
    "empirical_size",
    "agreement_proportion",
    "mc_randomization_test",
    "LCurve",
    "l_univariate",
    "l_bivariate",
    "l_envelope",
    "__version__",
]
