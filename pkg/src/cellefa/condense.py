"""Condense a multi-week observation window into one median week per cell.

Each cell becomes one row of 168 hour-of-week slots (Monday 00h first).  A
slot holds the median of every measurement of the chosen metric that fell on
that weekday and hour.  Even-sized buckets use the mean of the two middle
values.
"""

from __future__ import annotations

import csv
import enum
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import pandas as pd

from .errors import NoEligibleCells, OutOfRange
from .ingest import CellDataset

logger = logging.getLogger(__name__)

DAYS = 7
HOURS = 24
SLOTS = DAYS * HOURS
DAY_LABELS = ("Mon", "Tue", "Wed", "Thu", "Fri", "Sat", "Sun")


class Metric(str, enum.Enum):
    DL = "DL"
    UL = "UL"
    USERS = "USERS"

    @property
    def column(self) -> str:
        return {"DL": "dl_gb", "UL": "ul_gb", "USERS": "active_users"}[self.value]

    @classmethod
    def parse(cls, value) -> "Metric":
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).upper())
        except ValueError:
            raise ValueError(f"unknown metric {value!r}; expected one of DL, UL, USERS") from None


def slot_index(day: int, hour: int) -> int:
    """Flat hour-of-week index, ``day * 24 + hour`` with Monday = 0."""
    if not (0 <= day < DAYS and 0 <= hour < HOURS):
        raise OutOfRange(f"(day={day}, hour={hour}) outside 0-6 x 0-23")
    return day * HOURS + hour


def slot_of(index: int) -> tuple[int, int]:
    if not 0 <= index < SLOTS:
        raise OutOfRange(f"slot index {index} outside 0-167")
    return divmod(index, HOURS)


def slot_names() -> list[str]:
    return [f"d{d}h{h}" for d in range(DAYS) for h in range(HOURS)]


@dataclass(frozen=True)
class MedianWeekMatrix:
    """Cells x 168 matrix of median hourly values.

    ``coordinates`` is a ``(n_cells, 2)`` array of (lat, lon), NaN where a
    cell's site has no location.  ``dropped`` lists cells removed by the
    completeness policy and ``imputed`` counts filled slots per kept cell.
    """

    metric: Metric
    cell_ids: tuple[str, ...]
    values: np.ndarray
    coordinates: np.ndarray
    dropped: tuple[str, ...] = ()
    imputed: tuple[int, ...] = field(default=())

    def __post_init__(self):
        if self.values.shape != (len(self.cell_ids), SLOTS):
            raise ValueError(f"values shape {self.values.shape} != ({len(self.cell_ids)}, {SLOTS})")

    @property
    def n_cells(self) -> int:
        return len(self.cell_ids)

    def to_frame(self) -> pd.DataFrame:
        frame = pd.DataFrame(self.values, columns=slot_names())
        frame.insert(0, "cell_id", list(self.cell_ids))
        return frame

    def with_values(self, values: np.ndarray) -> "MedianWeekMatrix":
        return MedianWeekMatrix(
            self.metric, self.cell_ids, np.asarray(values, dtype=np.float64),
            self.coordinates, self.dropped, self.imputed,
        )


def _slot_codes(frame: pd.DataFrame) -> np.ndarray:
    weekday = frame["date"].dt.dayofweek.to_numpy(dtype=np.int64)
    return weekday * HOURS + frame["hour"].to_numpy(dtype=np.int64)


def _cell_codes(frame: pd.DataFrame) -> tuple[np.ndarray, list[str]]:
    cells = frame["cell_id"].astype(str).to_numpy()
    names, codes = np.unique(cells, return_inverse=True)
    return codes.astype(np.int64), [str(c) for c in names]


def _bucket_medians(keys: np.ndarray, values: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Median of ``values`` within each distinct ``keys`` bucket.

    Returns (unique keys, medians, bucket sizes).
    """
    order = np.lexsort((values, keys))
    k = keys[order]
    v = values[order]
    starts = np.flatnonzero(np.r_[True, k[1:] != k[:-1]])
    counts = np.diff(np.r_[starts, len(k)])
    mid = starts + counts // 2
    med = v[mid].copy()
    even = counts % 2 == 0
    med[even] = (v[mid[even] - 1] + v[mid[even]]) / 2.0
    return k[starts], med, counts


def completeness_report(dataset: CellDataset, metric=Metric.DL) -> pd.DataFrame:
    """Per-cell count of hour-of-week slots with at least one observation."""
    Metric.parse(metric)
    frame = dataset.frame
    if len(frame) == 0:
        return pd.DataFrame({"cell_id": [], "covered_slots": [], "coverage": []})
    cell, names = _cell_codes(frame)
    slot = _slot_codes(frame)
    seen = np.zeros((len(names), SLOTS), dtype=bool)
    seen[cell, slot] = True
    covered = seen.sum(axis=1)
    return pd.DataFrame(
        {"cell_id": names, "covered_slots": covered, "coverage": covered / SLOTS}
    )


def _cell_coordinates(frame: pd.DataFrame, cell: np.ndarray, n_cells: int) -> np.ndarray:
    coords = np.full((n_cells, 2), np.nan)
    if "lat" not in frame.columns:
        return coords
    # first record of each cell decides its site
    _, first = np.unique(cell, return_index=True)
    coords[cell[first], 0] = frame["lat"].to_numpy()[first]
    coords[cell[first], 1] = frame["lon"].to_numpy()[first]
    return coords


def build_median_week(
    dataset: CellDataset,
    metric=Metric.DL,
    *,
    min_coverage: float = 1.0,
) -> MedianWeekMatrix:
    """Build the per-cell median week for one metric.

    Parameters
    ----------
    dataset : CellDataset
    metric : Metric or {"DL", "UL", "USERS"}
    min_coverage : float
        Fraction of the 168 slots a cell must cover to be kept.  With the
        default 1.0 only fully observed cells survive.  Below 1.0, a
        missing slot is filled with the median of that cell's measurements
        at the same hour on any day (or of all its measurements if that
        hour was never observed).

    Raises
    ------
    NoEligibleCells
        No cell meets the coverage threshold.
    """
    metric = Metric.parse(metric)
    if not 0.0 < min_coverage <= 1.0:
        raise OutOfRange(f"min_coverage must be in (0, 1], got {min_coverage}")
    frame = dataset.frame
    if len(frame) == 0:
        raise NoEligibleCells("dataset has no records")

    cell, names = _cell_codes(frame)
    n_cells = len(names)
    slot = _slot_codes(frame)
    values = frame[metric.column].to_numpy(dtype=np.float64)

    keys, med, _ = _bucket_medians(cell * SLOTS + slot, values)
    matrix = np.full((n_cells, SLOTS), np.nan)
    matrix[keys // SLOTS, keys % SLOTS] = med

    missing = np.isnan(matrix)
    covered = SLOTS - missing.sum(axis=1)
    need = int(np.ceil(min_coverage * SLOTS - 1e-9))
    keep = covered >= need
    if not keep.any():
        raise NoEligibleCells(
            f"no cell covers {need} of {SLOTS} slots (best coverage {int(covered.max())})"
        )

    imputed = np.zeros(n_cells, dtype=np.int64)
    if missing[keep].any():
        hour = slot % HOURS
        hkeys, hmed, _ = _bucket_medians(cell * HOURS + hour, values)
        by_hour = np.full((n_cells, HOURS), np.nan)
        by_hour[hkeys // HOURS, hkeys % HOURS] = hmed
        ckeys, cmed, _ = _bucket_medians(cell, values)
        overall = np.full(n_cells, np.nan)
        overall[ckeys] = cmed
        by_hour = np.where(np.isnan(by_hour), overall[:, None], by_hour)
        fill = np.tile(by_hour, (1, DAYS))
        matrix = np.where(missing, fill, matrix)
        imputed = missing.sum(axis=1)

    coords = _cell_coordinates(frame, cell, n_cells)
    dropped = tuple(n for n, k in zip(names, keep) if not k)
    if dropped:
        logger.info("dropped %d cells below coverage %.3f", len(dropped), min_coverage)
    return MedianWeekMatrix(
        metric=metric,
        cell_ids=tuple(n for n, k in zip(names, keep) if k),
        values=matrix[keep],
        coordinates=coords[keep],
        dropped=dropped,
        imputed=tuple(int(i) for i in imputed[keep]),
    )


def write_median_week(matrix: MedianWeekMatrix, path, coords_path=None) -> list[Path]:
    """Persist the matrix as ``cell_id,d0h0..d6h23`` plus a coordinate CSV."""
    path = Path(path)
    written = [path]
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["cell_id", *slot_names()])
        for cid, row in zip(matrix.cell_ids, matrix.values):
            w.writerow([cid, *map(repr, row.tolist())])
    if coords_path is not None:
        coords_path = Path(coords_path)
        with coords_path.open("w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["cell_id", "lat", "lon"])
            for cid, (lat, lon) in zip(matrix.cell_ids, matrix.coordinates.tolist()):
                w.writerow([cid, "" if np.isnan(lat) else repr(lat), "" if np.isnan(lon) else repr(lon)])
        written.append(coords_path)
    return written


def read_median_week(path, coords_path=None, metric=Metric.DL) -> MedianWeekMatrix:
    table = pd.read_csv(path, dtype={"cell_id": str}, float_precision="round_trip")
    expected = ["cell_id", *slot_names()]
    if list(table.columns) != expected:
        raise ValueError(f"{path}: unexpected median-week header")
    cells = tuple(table["cell_id"])
    coords = np.full((len(cells), 2), np.nan)
    if coords_path is not None:
        ct = pd.read_csv(coords_path, dtype={"cell_id": str}, float_precision="round_trip")
        lookup = {c: (la, lo) for c, la, lo in zip(ct["cell_id"], ct["lat"], ct["lon"])}
        for i, c in enumerate(cells):
            if c in lookup:
                coords[i] = lookup[c]
    return MedianWeekMatrix(
        metric=Metric.parse(metric),
        cell_ids=cells,
        values=table[expected[1:]].to_numpy(dtype=np.float64),
        coordinates=coords,
    )
