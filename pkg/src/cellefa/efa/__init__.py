"""Factor-analysis engine."""

from .extraction import extract_factors
from .linalg import Eigen, Standardized, correlation_matrix, jacobi_eigen, standardize, sym_eigen
from .model import FactorModel, finalize_model, read_model, write_model
from .parallel import ParallelAnalysisResult, parallel_analysis
from .rotation import promax, rotate, varimax, varimax_criterion

__all__ = [
    "Eigen",
    "FactorModel",
    "ParallelAnalysisResult",
    "Standardized",
    "correlation_matrix",
    "extract_factors",
    "finalize_model",
    "jacobi_eigen",
    "parallel_analysis",
    "promax",
    "read_model",
    "rotate",
    "standardize",
    "sym_eigen",
    "varimax",
    "varimax_criterion",
    "write_model",
]
