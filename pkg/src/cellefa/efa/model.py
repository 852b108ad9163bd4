"""Factor model container, canonical ordering and JSON serialization."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

ROTATIONS = ("none", "varimax", "promax")


@dataclass(frozen=True)
class FactorModel:
    """Fitted common-factor model for standardized variables.

    Attributes
    ----------
    pattern : ndarray, shape (n_vars, k)
        Pattern loadings.
    phi : ndarray, shape (k, k)
        Factor correlations (identity for orthogonal solutions).
    uniqueness, communalities : ndarray, shape (n_vars,)
        Sum to one for every variable.
    explained_variance : ndarray, shape (k,)
        Sum of squared structure loadings per factor.
    rotation : {"none", "varimax", "promax"}
    flags : dict
        Convergence and fallback diagnostics.
    """

    pattern: np.ndarray
    phi: np.ndarray
    uniqueness: np.ndarray
    communalities: np.ndarray
    explained_variance: np.ndarray
    rotation: str = "none"
    flags: dict = field(default_factory=dict)

    @property
    def k(self) -> int:
        return self.pattern.shape[1]

    @property
    def n_vars(self) -> int:
        return self.pattern.shape[0]

    @property
    def structure(self) -> np.ndarray:
        return self.pattern @ self.phi

    def to_dict(self) -> dict:
        return {
            "n_vars": self.n_vars,
            "k": self.k,
            "rotation": self.rotation,
            "pattern": self.pattern.tolist(),
            "phi": self.phi.tolist(),
            "uniqueness": self.uniqueness.tolist(),
            "communalities": self.communalities.tolist(),
            "explained_variance": self.explained_variance.tolist(),
            "flags": self.flags,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "FactorModel":
        k = int(data["k"])
        n = int(data["n_vars"])
        return cls(
            pattern=np.asarray(data["pattern"], dtype=np.float64).reshape(n, k),
            phi=np.asarray(data["phi"], dtype=np.float64).reshape(k, k),
            uniqueness=np.asarray(data["uniqueness"], dtype=np.float64),
            communalities=np.asarray(data["communalities"], dtype=np.float64),
            explained_variance=np.asarray(data["explained_variance"], dtype=np.float64),
            rotation=data.get("rotation", "none"),
            flags=dict(data.get("flags", {})),
        )


def exact_structure(pattern: np.ndarray, phi: np.ndarray) -> np.ndarray:
    """``pattern @ phi`` with correctly rounded sums.

    Unlike BLAS, the result does not depend on the order of the factors, so
    quantities derived from it are exactly permutation-equivariant.
    """
    n, k = pattern.shape
    out = np.empty((n, k))
    for j in range(k):
        prod = pattern * phi[:, j]
        out[:, j] = [math.fsum(row) for row in prod.tolist()]
    return out


def explained_variance(pattern: np.ndarray, phi: np.ndarray) -> np.ndarray:
    s = exact_structure(pattern, phi)
    return np.array([math.fsum(col) for col in (s * s).T.tolist()])


def finalize_model(model: FactorModel) -> FactorModel:
    """Sort factors by explained variance and fix column signs.

    Factors are ordered by descending sum of squared structure loadings and
    each pattern column is negated if its sum is negative, with ``phi``
    permuted and re-signed to match.  Applying this twice changes nothing.
    """
    if model.k == 0:
        return model
    ev = explained_variance(model.pattern, model.phi)
    order = np.argsort(-ev, kind="stable")
    pattern = model.pattern[:, order]
    phi = model.phi[np.ix_(order, order)]
    signs = np.where(pattern.sum(axis=0) < 0, -1.0, 1.0)
    pattern = pattern * signs
    phi = phi * np.outer(signs, signs)
    return replace(model, pattern=pattern, phi=phi, explained_variance=ev[order])


def write_model(model: FactorModel, path, **extra) -> Path:
    """Write the model as JSON; ``extra`` keys are stored alongside it."""
    path = Path(path)
    doc = {**model.to_dict(), **extra}
    path.write_text(json.dumps(doc, indent=2, allow_nan=False) + "\n", encoding="utf-8")
    return path


def read_model(path) -> FactorModel:
    return FactorModel.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))
