"""Iterated principal-axis factor extraction."""

from __future__ import annotations

import logging
import warnings

import numpy as np

from ..errors import HeywoodWarning, NoConvergenceWarning, NotPositiveDefiniteWarning
from .linalg import sym_eigen
from .model import FactorModel

logger = logging.getLogger(__name__)

MIN_UNIQUENESS = 1e-3


def squared_multiple_correlations(r: np.ndarray) -> np.ndarray | None:
    """``1 - 1 / diag(R^-1)``, or None when R is not positive definite."""
    try:
        chol = np.linalg.cholesky(r)
    except np.linalg.LinAlgError:
        return None
    inv_chol = np.linalg.solve(chol, np.eye(r.shape[0]))
    diag_inv = np.sum(inv_chol * inv_chol, axis=0)
    if not np.all(np.isfinite(diag_inv)) or np.any(diag_inv < 1.0 - 1e-12):
        return None
    return 1.0 - 1.0 / diag_inv


def extract_factors(
    r,
    k: int,
    *,
    max_iter: int = 100,
    tol: float = 1e-6,
    eigen_method: str = "lapack",
) -> FactorModel:
    """Fit ``k`` unrotated factors to a correlation matrix.

    Communalities start at the squared multiple correlations (or, when ``r``
    is singular, at each variable's largest absolute correlation).  Each
    iteration places the current communalities on the diagonal, keeps the
    top ``k`` eigenpairs and recomputes communalities from the resulting
    loadings, until the largest change is at most ``tol``.

    Communalities are capped at ``1 - 1e-3``; capped variables are listed
    under ``flags["heywood"]``.  Hitting ``max_iter`` returns the last
    iterate with ``flags["converged"] = False``.
    """
    r = np.asarray(r, dtype=np.float64)
    n = r.shape[0]
    if not 1 <= k < n:
        raise ValueError(f"need 1 <= k < {n}, got k={k}")
    cap = 1.0 - MIN_UNIQUENESS
    flags: dict = {"init": "smc"}

    h2 = squared_multiple_correlations(r)
    if h2 is None:
        warnings.warn(
            "correlation matrix is not positive definite; starting from max |r|",
            NotPositiveDefiniteWarning,
            stacklevel=2,
        )
        off = np.abs(r - np.diag(np.diag(r)))
        h2 = off.max(axis=1)
        flags["init"] = "max_abs_r"
    h2 = np.clip(h2, 0.0, cap)

    converged = False
    work = r.copy()
    for iteration in range(1, max_iter + 1):
        np.fill_diagonal(work, h2)
        eig = sym_eigen(work, method=eigen_method)
        values = np.maximum(eig.values[:k], 0.0)
        loadings = eig.vectors[:, :k] * np.sqrt(values)
        new = np.sum(loadings * loadings, axis=1)
        new = np.clip(new, 0.0, cap)
        delta = np.max(np.abs(new - h2))
        h2 = new
        if delta <= tol:
            converged = True
            break
    flags["iterations"] = iteration
    flags["converged"] = converged
    if not converged:
        warnings.warn(
            f"principal-axis iteration did not converge in {max_iter} iterations "
            f"(last change {delta:.3g})",
            NoConvergenceWarning,
            stacklevel=2,
        )

    row = np.sum(loadings * loadings, axis=1)
    heywood = np.flatnonzero(row > cap)
    if heywood.size:
        loadings[heywood] *= np.sqrt(cap / row[heywood])[:, None]
        warnings.warn(
            f"{heywood.size} Heywood variables clamped to uniqueness {MIN_UNIQUENESS}",
            HeywoodWarning,
            stacklevel=2,
        )
    flags["heywood"] = heywood.tolist()

    communalities = np.sum(loadings * loadings, axis=1)
    return FactorModel(
        pattern=loadings,
        phi=np.eye(k),
        uniqueness=1.0 - communalities,
        communalities=communalities,
        explained_variance=np.sum(loadings * loadings, axis=0),
        rotation="none",
        flags=flags,
    )
