"""Varimax and promax rotation of a loading matrix."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field, replace

import numpy as np

from ..errors import NoConvergenceWarning, SingularTransformWarning
from .model import FactorModel


@dataclass(frozen=True)
class VarimaxResult:
    loadings: np.ndarray
    rotation: np.ndarray
    criterion: list[float] = field(default_factory=list)
    sweeps: int = 0
    converged: bool = True


def _column_criteria(x: np.ndarray) -> np.ndarray:
    sq = x * x
    n = x.shape[0]
    return np.sum(sq * sq, axis=0) - np.sum(sq, axis=0) ** 2 / n


def varimax_criterion(loadings) -> float:
    """Sum over factors of ``sum(l^4) - (sum(l^2))^2 / n``."""
    return math.fsum(_column_criteria(np.asarray(loadings, dtype=np.float64)).tolist())


def _pair_angle(x: np.ndarray, y: np.ndarray) -> float:
    n = x.shape[0]
    u = x * x - y * y
    v = 2.0 * x * y
    a, b = u.sum(), v.sum()
    c = np.sum(u * u - v * v)
    d = 2.0 * np.sum(u * v)
    return math.atan2(d - 2.0 * a * b / n, c - (a * a - b * b) / n) / 4.0


def varimax(
    loadings,
    *,
    normalize: bool = True,
    tol: float = 1e-8,
    max_sweeps: int = 1000,
) -> VarimaxResult:
    """Orthogonal varimax rotation by successive planar rotations.

    Each sweep rotates every factor pair by the angle that maximizes the
    criterion for that pair.  A planar step is kept only when it raises the
    pair's criterion, so the recorded criterion never decreases.  Rows are
    Kaiser-normalized during rotation (when ``normalize``) and rescaled
    afterwards.  Iteration stops once a sweep gains at most ``tol``.

    Returns the rotated loadings ``loadings @ T`` and the orthogonal ``T``.
    ``criterion`` holds the (normalized) criterion before the first sweep
    and after every sweep.
    """
    lam = np.asarray(loadings, dtype=np.float64)
    n, k = lam.shape
    if k < 2:
        return VarimaxResult(lam.copy(), np.eye(k), [varimax_criterion(lam)], 0, True)

    if normalize:
        h = np.sqrt(np.sum(lam * lam, axis=1))
        scale = np.where(h > 0, h, 1.0)
        x = lam / scale[:, None]
    else:
        x = lam.copy()
    t = np.eye(k)
    crit = _column_criteria(x)
    trace = [math.fsum(crit.tolist())]
    converged = False
    sweeps = 0
    for sweeps in range(1, max_sweeps + 1):
        for i in range(k - 1):
            for j in range(i + 1, k):
                phi = _pair_angle(x[:, i], x[:, j])
                if phi == 0.0:
                    continue
                cos, sin = math.cos(phi), math.sin(phi)
                xi, xj = x[:, i], x[:, j]
                new_i = cos * xi + sin * xj
                new_j = -sin * xi + cos * xj
                pair = _column_criteria(np.column_stack((new_i, new_j)))
                if not pair[0] + pair[1] > crit[i] + crit[j]:
                    continue
                x[:, i], x[:, j] = new_i, new_j
                crit[i], crit[j] = pair
                ti, tj = t[:, i].copy(), t[:, j].copy()
                t[:, i] = cos * ti + sin * tj
                t[:, j] = -sin * ti + cos * tj
        trace.append(math.fsum(crit.tolist()))
        if trace[-1] - trace[-2] <= tol:
            converged = True
            break
    if not converged:
        warnings.warn(
            f"varimax reached {max_sweeps} sweeps without converging",
            NoConvergenceWarning,
            stacklevel=2,
        )
    return VarimaxResult(lam @ t, t, trace, sweeps, converged)


@dataclass(frozen=True)
class PromaxResult:
    pattern: np.ndarray
    phi: np.ndarray
    transform: np.ndarray
    singular: bool = False


def _normalized_phi(u: np.ndarray) -> np.ndarray:
    inv = np.linalg.inv(u.T @ u)
    d = np.sqrt(np.diag(inv))
    phi = inv / np.outer(d, d)
    phi = (phi + phi.T) / 2.0
    np.clip(phi, -1.0, 1.0, out=phi)
    np.fill_diagonal(phi, 1.0)
    return phi


def promax(varimax_loadings, kappa: int = 4, *, cond_limit: float = 1e12) -> PromaxResult:
    """Oblique promax rotation of varimax-rotated loadings.

    The target raises every loading's magnitude to ``kappa + 1`` keeping
    its sign (``|l|^(kappa+1) / l``).  The least-squares transform
    ``U = (L'L)^-1 L' P`` is column-rescaled so the implied factor
    correlations ``(U'U)^-1`` have a unit diagonal, and the pattern is
    ``L U``.  If ``L'L`` or ``U'U`` is numerically singular the varimax
    solution is returned unchanged with ``phi = I`` and ``singular=True``.
    """
    lam = np.asarray(varimax_loadings, dtype=np.float64)
    k = lam.shape[1]
    if kappa < 1:
        raise ValueError(f"kappa must be >= 1, got {kappa}")

    def fallback(reason: str) -> PromaxResult:
        warnings.warn(f"promax transform is singular ({reason}); keeping varimax", SingularTransformWarning, stacklevel=3)
        return PromaxResult(lam.copy(), np.eye(k), np.eye(k), singular=True)

    if k < 2:
        return PromaxResult(lam.copy(), np.eye(k), np.eye(k))
    gram = lam.T @ lam
    if not np.isfinite(gram).all() or np.linalg.cond(gram) > cond_limit:
        return fallback("collinear loadings")
    target = np.zeros_like(lam)
    nz = lam != 0.0
    target[nz] = np.abs(lam[nz]) ** (kappa + 1) / lam[nz]
    u = np.linalg.solve(gram, lam.T @ target)
    utu = u.T @ u
    if not np.isfinite(utu).all() or np.linalg.cond(utu) > cond_limit:
        return fallback("degenerate target fit")
    d = np.diag(np.linalg.inv(utu))
    if np.any(d <= 0):
        return fallback("non-positive scale")
    u = u * np.sqrt(d)
    return PromaxResult(lam @ u, _normalized_phi(u), u)


def rotate(model: FactorModel, method: str = "promax", *, kappa: int = 4, tol: float = 1e-8, max_sweeps: int = 1000) -> FactorModel:
    """Apply varimax, or varimax followed by promax, to an unrotated model."""
    if method == "none":
        return model
    if method not in ("varimax", "promax"):
        raise ValueError(f"unknown rotation {method!r}")
    vm = varimax(model.pattern, tol=tol, max_sweeps=max_sweeps)
    flags = {**model.flags, "varimax_sweeps": vm.sweeps, "varimax_converged": vm.converged}
    if method == "varimax":
        return replace(
            model,
            pattern=vm.loadings,
            phi=np.eye(model.k),
            explained_variance=np.sum(vm.loadings**2, axis=0),
            rotation="varimax",
            flags=flags,
        )
    pm = promax(vm.loadings, kappa)
    flags["promax_singular"] = pm.singular
    flags["kappa"] = kappa
    structure = pm.pattern @ pm.phi
    return replace(
        model,
        pattern=pm.pattern,
        phi=pm.phi,
        explained_variance=np.sum(structure**2, axis=0),
        rotation="varimax" if pm.singular else "promax",
        flags=flags,
    )
