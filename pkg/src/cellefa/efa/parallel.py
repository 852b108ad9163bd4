"""Horn's parallel analysis for choosing the number of factors."""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .linalg import correlation_matrix, eigenvalues


@dataclass(frozen=True)
class ParallelAnalysisResult:
    observed: np.ndarray
    thresholds: np.ndarray
    k: int
    replicates: int
    quantile: float
    seed: int

    def to_dict(self) -> dict:
        return {
            "k": self.k,
            "replicates": self.replicates,
            "quantile": self.quantile,
            "seed": self.seed,
            "observed": self.observed.tolist(),
            "thresholds": self.thresholds.tolist(),
        }


def replicate_eigenvalues(shape: tuple[int, int], seed: int, index: int) -> np.ndarray:
    """Correlation eigenvalues of one standard-normal replicate.

    The replicate's generator is seeded from ``(seed, index)`` so results do
    not depend on execution order.
    """
    rng = np.random.default_rng(np.random.SeedSequence([seed, index]))
    g = rng.standard_normal(shape)
    g = (g - g.mean(axis=0)) / g.std(axis=0, ddof=1)
    return eigenvalues(correlation_matrix(g))


def retained_count(observed: np.ndarray, thresholds: np.ndarray) -> int:
    above = observed > thresholds
    return int(above.size if above.all() else np.argmin(above))


def parallel_analysis(
    z,
    replicates: int = 100,
    quantile: float = 0.95,
    seed: int = 0,
    *,
    workers: int = 1,
) -> ParallelAnalysisResult:
    """Compare observed correlation eigenvalues against random data.

    ``K`` is the length of the leading run of observed eigenvalues that
    exceed the per-rank ``quantile`` of eigenvalues from ``replicates``
    i.i.d. standard-normal matrices of the same shape as ``z``.  Running
    replicates on several threads gives the same result as running them
    in sequence.
    """
    z = np.asarray(z, dtype=np.float64)
    if replicates < 1:
        raise ValueError(f"replicates must be >= 1, got {replicates}")
    if not 0.0 < quantile < 1.0:
        raise ValueError(f"quantile must be in (0, 1), got {quantile}")
    observed = eigenvalues(correlation_matrix(z))

    def run(i: int) -> np.ndarray:
        return replicate_eigenvalues(z.shape, seed, i)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            draws = list(pool.map(run, range(replicates)))
    else:
        draws = [run(i) for i in range(replicates)]
    thresholds = np.quantile(np.vstack(draws), quantile, axis=0)
    return ParallelAnalysisResult(
        observed=observed,
        thresholds=thresholds,
        k=retained_count(observed, thresholds),
        replicates=replicates,
        quantile=quantile,
        seed=seed,
    )
