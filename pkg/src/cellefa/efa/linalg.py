"""Standardization, correlation and symmetric eigendecomposition."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import ConvergenceFailure, ZeroVarianceVariable

# z-scores are snapped to this grid before re-standardizing so that
# sub-ulp perturbations of the raw data (e.g. rescaling a column) cannot
# leak into downstream results
SNAP_RESOLUTION = 2.0**-20


@dataclass(frozen=True)
class Standardized:
    z: np.ndarray
    mean: np.ndarray
    std: np.ndarray


def _zscore(x: np.ndarray) -> np.ndarray:
    mean = x.mean(axis=0)
    std = x.std(axis=0, ddof=1)
    return (x - mean) / std


def standardize(x, *, resolution: float | None = SNAP_RESOLUTION) -> Standardized:
    """Z-score every column (sample standard deviation, divisor n - 1).

    Parameters
    ----------
    x : array_like, shape (n_obs, n_vars)
    resolution : float or None
        Grid the z-scores are rounded to before a final re-centering and
        re-scaling pass.  This makes the output bit-identical under any
        positive rescaling of a column, at a cost of about ``resolution / 2``
        in each entry.  ``None`` disables it.

    Returns
    -------
    Standardized
        ``z`` with column means 0 and sample standard deviations 1, plus the
        raw column ``mean`` and ``std``.

    Raises
    ------
    ZeroVarianceVariable
        Some columns are constant; their indices are reported.
    """
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2 or x.shape[0] < 2:
        raise ValueError(f"need a 2-D matrix with at least 2 rows, got shape {x.shape}")
    if not np.isfinite(x).all():
        raise ValueError("matrix contains non-finite values")
    mean = x.mean(axis=0)
    std = x.std(axis=0, ddof=1)
    scale = np.maximum(np.abs(x).max(axis=0), np.finfo(np.float64).tiny)
    constant = np.flatnonzero(~(std > 1e-12 * scale))
    if constant.size:
        raise ZeroVarianceVariable(constant)
    z = (x - mean) / std
    if resolution is not None:
        z = _zscore(np.round(z / resolution) * resolution)
    return Standardized(z=z, mean=mean, std=std)


def correlation_matrix(z) -> np.ndarray:
    """Pearson correlation of standardized columns, ``Z'Z / (n - 1)``.

    The result is exactly symmetric with a unit diagonal and entries
    clipped to [-1, 1].
    """
    z = np.asarray(z, dtype=np.float64)
    r = z.T @ z / (z.shape[0] - 1)
    r = (r + r.T) / 2.0
    np.clip(r, -1.0, 1.0, out=r)
    np.fill_diagonal(r, 1.0)
    return r


def check_correlation(r, *, atol: float = 1e-12) -> None:
    r = np.asarray(r)
    if r.ndim != 2 or r.shape[0] != r.shape[1]:
        raise ValueError(f"correlation matrix must be square, got {r.shape}")
    if np.max(np.abs(r - r.T), initial=0.0) > atol:
        raise ValueError("correlation matrix is not symmetric")
    if np.max(np.abs(np.diag(r) - 1.0), initial=0.0) > atol:
        raise ValueError("correlation matrix diagonal is not 1")
    if np.max(np.abs(r), initial=0.0) > 1.0 + atol:
        raise ValueError("correlation entries outside [-1, 1]")


@dataclass(frozen=True)
class Eigen:
    values: np.ndarray
    vectors: np.ndarray
    sweeps: int = 0


def _canonical(values: np.ndarray, vectors: np.ndarray) -> Eigen:
    order = np.argsort(-values, kind="stable")
    values = values[order]
    vectors = vectors[:, order]
    # largest-magnitude component of each eigenvector is positive
    pivot = np.argmax(np.abs(vectors), axis=0)
    signs = np.where(vectors[pivot, np.arange(vectors.shape[1])] < 0, -1.0, 1.0)
    return Eigen(values, vectors * signs)


def _round_robin(n: int) -> list[tuple[np.ndarray, np.ndarray]]:
    """Rounds of disjoint index pairs covering every pair once (circle method)."""
    m = n + (n % 2)
    players = list(range(m))
    rounds = []
    for _ in range(m - 1):
        p, q = [], []
        for i in range(m // 2):
            a, b = players[i], players[m - 1 - i]
            if a < n and b < n:
                p.append(min(a, b))
                q.append(max(a, b))
        rounds.append((np.array(p, dtype=np.intp), np.array(q, dtype=np.intp)))
        players = [players[0], players[-1], *players[1:-1]]
    return rounds


def jacobi_eigen(a, *, tol: float = 1e-14, max_sweeps: int = 100) -> Eigen:
    """Cyclic Jacobi eigendecomposition of a symmetric matrix.

    Each sweep visits every off-diagonal pair once, applying disjoint plane
    rotations in parallel rounds.  Stops when the off-diagonal Frobenius
    norm falls below ``tol`` times the matrix norm.
    """
    a = np.array(a, dtype=np.float64)
    n = a.shape[0]
    v = np.eye(n)
    if n == 1:
        return Eigen(np.diag(a).copy(), v)
    norm = np.linalg.norm(a)
    if norm == 0.0:
        return _canonical(np.zeros(n), v)
    rounds = _round_robin(n)

    def off(m):
        return np.sqrt(2.0 * np.sum(np.triu(m, 1) ** 2))

    for sweep in range(1, max_sweeps + 1):
        if off(a) <= tol * norm:
            e = _canonical(np.diag(a).copy(), v)
            return Eigen(e.values, e.vectors, sweep - 1)
        for p, q in rounds:
            apq = a[p, q]
            active = apq != 0.0
            if not active.any():
                continue
            with np.errstate(over="ignore", divide="ignore"):
                theta = (a[q, q] - a[p, p]) / (2.0 * np.where(active, apq, 1.0))
                big = np.abs(theta) > 1e150
                safe = np.where(big, 1.0, theta)
                t = np.where(safe >= 0, 1.0, -1.0) / (np.abs(safe) + np.sqrt(safe * safe + 1.0))
                t = np.where(big, 0.5 / theta, t)
            t = np.where(active, t, 0.0)
            c = 1.0 / np.sqrt(t * t + 1.0)
            s = t * c

            ap, aq = a[:, p], a[:, q]
            a[:, p], a[:, q] = c * ap - s * aq, s * ap + c * aq
            ap, aq = a[p, :], a[q, :]
            a[p, :], a[q, :] = c[:, None] * ap - s[:, None] * aq, s[:, None] * ap + c[:, None] * aq
            a[p, q] = 0.0
            a[q, p] = 0.0
            vp, vq = v[:, p], v[:, q]
            v[:, p], v[:, q] = c * vp - s * vq, s * vp + c * vq
    if off(a) <= tol * norm:
        e = _canonical(np.diag(a).copy(), v)
        return Eigen(e.values, e.vectors, max_sweeps)
    raise ConvergenceFailure(f"Jacobi eigensolver did not converge in {max_sweeps} sweeps")


def sym_eigen(r, *, method: str = "lapack") -> Eigen:
    """Eigenvalues (descending) and orthonormal eigenvectors of a symmetric matrix.

    ``method="lapack"`` uses the divide-and-conquer routine behind
    :func:`numpy.linalg.eigh`; ``method="jacobi"`` uses :func:`jacobi_eigen`.
    Eigenvectors are sign-normalized so their largest component is positive.
    """
    r = np.asarray(r, dtype=np.float64)
    if r.ndim != 2 or r.shape[0] != r.shape[1]:
        raise ValueError(f"matrix must be square, got {r.shape}")
    if method == "jacobi":
        return jacobi_eigen(r)
    if method != "lapack":
        raise ValueError(f"unknown eigen method {method!r}")
    try:
        values, vectors = np.linalg.eigh((r + r.T) / 2.0)
    except np.linalg.LinAlgError as exc:
        raise ConvergenceFailure(str(exc)) from exc
    return _canonical(values, vectors)


def eigenvalues(r) -> np.ndarray:
    """Eigenvalues only, descending."""
    return np.sort(np.linalg.eigvalsh(np.asarray(r, dtype=np.float64)))[::-1]
