"""Regression (Thurstone) factor scores and per-factor cell rankings."""

from __future__ import annotations

import csv
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import pandas as pd

from .efa.model import FactorModel
from .errors import IndexOutOfRange, SingularCorrelationWarning

RIDGE = 1e-8


@dataclass(frozen=True)
class ScoreTable:
    cell_ids: tuple[str, ...]
    scores: np.ndarray
    coordinates: np.ndarray
    labels: tuple[str, ...] = ()
    flags: dict = field(default_factory=dict)

    def __post_init__(self):
        if not self.labels:
            object.__setattr__(self, "labels", tuple(f"f{j + 1}" for j in range(self.k)))

    @property
    def k(self) -> int:
        return self.scores.shape[1]

    def to_frame(self) -> pd.DataFrame:
        frame = pd.DataFrame(self.scores, columns=list(self.labels))
        frame.insert(0, "lon", self.coordinates[:, 1])
        frame.insert(0, "lat", self.coordinates[:, 0])
        frame.insert(0, "cell_id", list(self.cell_ids))
        return frame


def score_weights(r: np.ndarray, model: FactorModel) -> tuple[np.ndarray, bool]:
    """``R^-1 S`` for the model's structure matrix ``S``.

    A ridge of 1e-8 is added to R's diagonal when it is not positive
    definite; the second return value reports that.
    """
    s = model.pattern @ model.phi
    try:
        chol = np.linalg.cholesky(r)
        ridge = False
    except np.linalg.LinAlgError:
        chol = np.linalg.cholesky(r + RIDGE * np.eye(r.shape[0]))
        ridge = True
    w = np.linalg.solve(chol.T, np.linalg.solve(chol, s))
    return w, ridge


def regression_scores(z, r, model: FactorModel, cell_ids=None, coordinates=None) -> ScoreTable:
    """Per-cell factor scores ``Z R^-1 S``.

    ``z`` must be the standardized matrix the correlation matrix ``r`` was
    computed from.  Score columns have mean zero because ``z`` is centered.
    """
    z = np.asarray(z, dtype=np.float64)
    r = np.asarray(r, dtype=np.float64)
    w, ridge = score_weights(r, model)
    if ridge:
        warnings.warn("correlation matrix is singular; scores use a 1e-8 ridge", SingularCorrelationWarning, stacklevel=2)
    scores = z @ w
    n = z.shape[0]
    if cell_ids is None:
        cell_ids = [str(i) for i in range(n)]
    if coordinates is None:
        coordinates = np.full((n, 2), np.nan)
    return ScoreTable(
        cell_ids=tuple(cell_ids),
        scores=scores,
        coordinates=np.asarray(coordinates, dtype=np.float64),
        flags={"ridge": ridge},
    )


def top_cells(table: ScoreTable, factor: int, n: int) -> list[str]:
    """The ``n`` highest-scoring cells on ``factor`` (0-based), best first.

    Equal scores are ordered by ascending cell id.
    """
    if not 0 <= factor < table.k:
        raise IndexOutOfRange(f"factor {factor} outside 0..{table.k - 1}")
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    col = table.scores[:, factor]
    order = sorted(range(len(col)), key=lambda i: (-col[i], table.cell_ids[i]))
    return [table.cell_ids[i] for i in order[:n]]


def write_scores(table: ScoreTable, path) -> Path:
    """``cell_id,lat,lon,f1..fK`` with shortest round-trip floats."""
    path = Path(path)
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["cell_id", "lat", "lon", *table.labels])
        for cid, (lat, lon), row in zip(table.cell_ids, table.coordinates.tolist(), table.scores.tolist()):
            w.writerow([cid, _num(lat), _num(lon), *map(repr, row)])
    return path


def read_scores(path) -> ScoreTable:
    frame = pd.read_csv(path, dtype={"cell_id": str}, float_precision="round_trip", keep_default_na=True)
    labels = tuple(c for c in frame.columns if c not in ("cell_id", "lat", "lon"))
    return ScoreTable(
        cell_ids=tuple(frame["cell_id"]),
        scores=frame[list(labels)].to_numpy(dtype=np.float64),
        coordinates=frame[["lat", "lon"]].to_numpy(dtype=np.float64),
        labels=labels,
    )


def _num(x: float) -> str:
    return "" if x != x else repr(x)
