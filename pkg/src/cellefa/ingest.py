"""Raw KPI export parsing, site-location join and descriptive aggregates.

A KPI export is a CSV with one row per (cell, date, hour).  Rows are read in
chunks with the :mod:`csv` module, validated column-wise with pandas, and
concatenated into a single columnar frame.  Identifier columns are kept as
categoricals so month-scale operator exports stay within desk memory.
"""

from __future__ import annotations

import csv
import datetime as dt
import logging
import math
from collections import Counter
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable, Iterator, Mapping

import numpy as np
import pandas as pd
from pandas.api.types import union_categoricals

from .errors import (
    DuplicateSiteId,
    EmptyDataset,
    EmptyFile,
    InvalidLocation,
    MalformedRow,
    MissingColumn,
    UnknownDistrict,
)

logger = logging.getLogger(__name__)

FIELDS = (
    "date",
    "hour",
    "region",
    "city",
    "district",
    "site_id",
    "cell_id",
    "dl_gb",
    "ul_gb",
    "active_users",
)
TEXT_FIELDS = ("region", "city", "district", "site_id", "cell_id")
NUMERIC_FIELDS = ("dl_gb", "ul_gb", "active_users")
DEFAULT_SCHEMA: dict[str, str] = {name: name for name in FIELDS}
LOCATION_FIELDS = ("site_id", "lat", "lon")

DEFAULT_MAX_REJECT_RATE = 0.01


@dataclass(frozen=True)
class KpiRecord:
    """One hourly measurement of one cell."""

    date: dt.date
    hour: int
    region: str
    city: str
    district: str
    site_id: str
    cell_id: str
    dl_gb: float
    ul_gb: float
    active_users: float

    def __post_init__(self):
        if not 0 <= self.hour <= 23:
            raise ValueError(f"hour out of range: {self.hour}")
        if not self.cell_id or not self.site_id:
            raise ValueError("cell_id and site_id must be non-empty")
        for name in NUMERIC_FIELDS:
            value = getattr(self, name)
            if not value >= 0:
                raise ValueError(f"{name} must be non-negative, got {value}")


@dataclass(frozen=True)
class SiteLocation:
    site_id: str
    latitude: float
    longitude: float

    def __post_init__(self):
        if not -90.0 <= self.latitude <= 90.0:
            raise InvalidLocation(f"site {self.site_id}: latitude {self.latitude} outside [-90, 90]")
        if not -180.0 <= self.longitude <= 180.0:
            raise InvalidLocation(f"site {self.site_id}: longitude {self.longitude} outside [-180, 180]")


@dataclass(frozen=True)
class CellDataset:
    """Validated KPI records plus the site-location table.

    ``frame`` holds one row per record in file order with the columns of
    :data:`FIELDS` (``date`` as ``datetime64``), plus ``lat``/``lon`` once
    :func:`join_locations` has run.  Treat it as read-only.
    """

    frame: pd.DataFrame
    start: dt.date
    end: dt.date
    locations: Mapping[str, SiteLocation] = field(default_factory=dict)
    unlocated: tuple[str, ...] = ()
    rows_read: int = 0
    rejected: int = 0
    reject_reasons: Mapping[str, int] = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.frame)

    @property
    def located(self) -> bool:
        return "lat" in self.frame.columns

    @property
    def days(self) -> int:
        return (self.end - self.start).days + 1

    def records(self) -> Iterator[KpiRecord]:
        f = self.frame
        cols = [f[c].to_numpy() for c in FIELDS[1:]]
        for d, *rest in zip(f["date"].dt.date, *cols):
            hour, region, city, district, site, cell, dl, ul, users = rest
            yield KpiRecord(
                d, int(hour), str(region), str(city), str(district), str(site), str(cell),
                float(dl), float(ul), float(users),
            )


def _parse_number(raw: pd.Series) -> pd.Series:
    # thousands separators are stripped before parsing
    cleaned = raw.str.strip().str.replace(",", "", regex=False)
    try:
        # exact (round-trip) conversion; pd.to_numeric is not
        return cleaned.astype(np.float64)
    except ValueError:
        return cleaned.map(_to_float).astype(np.float64)


def _to_float(text: str) -> float:
    try:
        return float(text) if text else np.nan
    except ValueError:
        return np.nan


def _validate_chunk(rows: list[list[str]], positions: list[int], reasons: Counter) -> pd.DataFrame:
    chunk = pd.DataFrame(rows, columns=list(FIELDS))
    bad = pd.Series(False, index=chunk.index)

    def flag(mask: pd.Series, reason: str) -> None:
        fresh = mask & ~bad
        n = int(fresh.sum())
        if n:
            reasons[reason] += n
        bad.loc[mask] = True

    for name in TEXT_FIELDS:
        chunk[name] = chunk[name].str.strip()
    flag((chunk["cell_id"] == "") | (chunk["site_id"] == ""), "missing_id")

    dates = pd.to_datetime(chunk["date"].str.strip(), format="%Y-%m-%d", errors="coerce")
    flag(dates.isna(), "bad_date")

    hours = _parse_number(chunk["hour"])
    flag(hours.isna() | (hours % 1 != 0) | (hours < 0) | (hours > 23), "bad_hour")

    numeric = {}
    for name in NUMERIC_FIELDS:
        values = _parse_number(chunk[name])
        flag(values.isna() | ~np.isfinite(values.fillna(0.0)), "bad_number")
        flag(values < 0, "negative_value")
        numeric[name] = values

    keep = ~bad
    out = pd.DataFrame(
        {
            "date": dates[keep],
            "hour": hours[keep].astype(np.int64),
            **{name: chunk.loc[keep, name].astype("category") for name in TEXT_FIELDS},
            **{name: numeric[name][keep].astype(np.float64) for name in NUMERIC_FIELDS},
        }
    )
    out.index = pd.Index(np.asarray(positions, dtype=np.int64)[keep.to_numpy()])
    return out


def _concat(parts: list[pd.DataFrame]) -> pd.DataFrame:
    if not parts:
        frame = pd.DataFrame({name: pd.Series(dtype=object) for name in FIELDS})
        frame["date"] = pd.Series(dtype="datetime64[ns]")
        return frame
    columns = {}
    for name in FIELDS:
        pieces = [p[name] for p in parts]
        if name in TEXT_FIELDS:
            columns[name] = union_categoricals(pieces, sort_categories=True)
        else:
            columns[name] = np.concatenate([p.to_numpy() for p in pieces])
    frame = pd.DataFrame(columns)
    frame["date"] = frame["date"].astype("datetime64[ns]")
    return frame


def parse_kpi_csv(
    path,
    schema: Mapping[str, str] | None = None,
    *,
    window: tuple[dt.date, dt.date] | None = None,
    max_reject_rate: float = DEFAULT_MAX_REJECT_RATE,
    chunksize: int = 200_000,
) -> CellDataset:
    """Parse a KPI export into a :class:`CellDataset`.

    Parameters
    ----------
    path : path-like
        CSV file with a header row.
    schema : mapping, optional
        Maps each logical field in :data:`FIELDS` to the column name used in
        the file.  Unmapped fields use their own name.
    window : (date, date), optional
        Inclusive observation window.  Rows outside it are rejected.  By
        default the window spans the first to the last record date.
    max_reject_rate : float
        Malformed rows are skipped and counted; parsing fails only when
        the fraction of rejected rows exceeds this threshold.
    chunksize : int
        Rows validated per batch.  The result does not depend on it.

    Returns
    -------
    CellDataset
        Records in file order.

    Raises
    ------
    EmptyFile
        The file has no header or no data rows.
    MissingColumn
        A mapped column is absent from the header.
    MalformedRow
        The reject rate exceeds ``max_reject_rate``.
    """
    path = Path(path)
    mapping = {**DEFAULT_SCHEMA, **(schema or {})}
    unknown = set(mapping) - set(FIELDS)
    if unknown:
        raise MissingColumn(f"schema maps unknown fields: {sorted(unknown)}")

    reasons: Counter = Counter()
    parts: list[pd.DataFrame] = []
    rows_read = 0
    with path.open(newline="", encoding="utf-8-sig") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if not header or all(not h.strip() for h in header):
            raise EmptyFile(f"{path}: no header row")
        header = [h.strip() for h in header]
        missing = [mapping[f] for f in FIELDS if mapping[f] not in header]
        if missing:
            raise MissingColumn(f"{path}: missing columns {missing}")
        idx = [header.index(mapping[f]) for f in FIELDS]
        width = len(header)

        rows: list[list[str]] = []
        positions: list[int] = []
        for row in reader:
            if not row:
                continue
            pos = rows_read
            rows_read += 1
            if len(row) != width:
                reasons["field_count"] += 1
                continue
            rows.append([row[i] for i in idx])
            positions.append(pos)
            if len(rows) >= chunksize:
                parts.append(_validate_chunk(rows, positions, reasons))
                rows, positions = [], []
        if rows:
            parts.append(_validate_chunk(rows, positions, reasons))

    if rows_read == 0:
        raise EmptyFile(f"{path}: no data rows")

    frame = _concat(parts)
    if window is not None:
        start, end = window
        inside = (frame["date"] >= pd.Timestamp(start)) & (frame["date"] <= pd.Timestamp(end))
        n_out = int((~inside).sum())
        if n_out:
            reasons["outside_window"] += n_out
            frame = frame.loc[inside.to_numpy()].reset_index(drop=True)
    elif len(frame):
        start = frame["date"].min().date()
        end = frame["date"].max().date()
    else:
        start = end = dt.date.min

    rejected = sum(reasons.values())
    if rejected:
        logger.warning("%s: rejected %d of %d rows %s", path, rejected, rows_read, dict(reasons))
    if rejected / rows_read > max_reject_rate:
        raise MalformedRow(
            f"{path}: {rejected} of {rows_read} rows malformed "
            f"({rejected / rows_read:.2%} > {max_reject_rate:.2%}): {dict(sorted(reasons.items()))}"
        )
    return CellDataset(
        frame=frame,
        start=start,
        end=end,
        rows_read=rows_read,
        rejected=rejected,
        reject_reasons=dict(sorted(reasons.items())),
    )


def write_kpi_csv(dataset: CellDataset, path) -> Path:
    """Serialize records in the default ingest schema (lossless floats)."""
    path = Path(path)
    f = dataset.frame
    out = pd.DataFrame({name: f[name] for name in FIELDS})
    out["date"] = f["date"].dt.strftime("%Y-%m-%d")
    for name in TEXT_FIELDS:
        out[name] = out[name].astype(str)
    out.to_csv(path, index=False, lineterminator="\n", float_format=None)
    return path


def read_locations(path) -> dict[str, SiteLocation]:
    """Read a ``site_id,lat,lon`` CSV into a site -> location map."""
    path = Path(path)
    table = pd.read_csv(path, dtype={"site_id": str}, keep_default_na=False)
    missing = [c for c in LOCATION_FIELDS if c not in table.columns]
    if missing:
        raise MissingColumn(f"{path}: missing columns {missing}")
    return _location_map(
        SiteLocation(str(s).strip(), float(lat), float(lon))
        for s, lat, lon in zip(table["site_id"], table["lat"], table["lon"])
    )


def _location_map(items: Iterable[SiteLocation]) -> dict[str, SiteLocation]:
    out: dict[str, SiteLocation] = {}
    for loc in items:
        seen = out.get(loc.site_id)
        if seen is not None and seen != loc:
            raise DuplicateSiteId(
                f"site {loc.site_id} listed with conflicting coordinates "
                f"({seen.latitude}, {seen.longitude}) and ({loc.latitude}, {loc.longitude})"
            )
        out[loc.site_id] = loc
    return out


def write_locations(locations: Mapping[str, SiteLocation], path) -> Path:
    path = Path(path)
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(LOCATION_FIELDS)
        for site in sorted(locations):
            loc = locations[site]
            w.writerow([site, repr(loc.latitude), repr(loc.longitude)])
    return path


def join_locations(dataset: CellDataset, locations) -> CellDataset:
    """Append site coordinates to every record.

    ``locations`` is a mapping of site id to :class:`SiteLocation` or an
    iterable of :class:`SiteLocation`.  Records on unknown sites keep NaN
    coordinates and their site ids are listed in ``unlocated``; no record
    is dropped.  Joining twice gives the same dataset.
    """
    if isinstance(locations, Mapping):
        items = list(locations.values())
    else:
        items = list(locations)
    table = _location_map(items)

    frame = dataset.frame.drop(columns=["lat", "lon"], errors="ignore").copy()
    sites = frame["site_id"].astype(str)
    lat = {s: loc.latitude for s, loc in table.items()}
    lon = {s: loc.longitude for s, loc in table.items()}
    frame["lat"] = sites.map(lat).astype(np.float64)
    frame["lon"] = sites.map(lon).astype(np.float64)
    unlocated = tuple(sorted(set(sites[frame["lat"].isna()].unique())))
    if unlocated:
        logger.warning("%d sites without coordinates", len(unlocated))
    return replace(dataset, frame=frame, locations=table, unlocated=unlocated)


def unlocated_report(dataset: CellDataset) -> pd.DataFrame:
    """Sites with no coordinates and the number of records on each."""
    if not dataset.unlocated:
        return pd.DataFrame({"site_id": pd.Series(dtype=str), "records": pd.Series(dtype=np.int64)})
    sites = dataset.frame["site_id"].astype(str)
    counts = sites[sites.isin(dataset.unlocated)].value_counts()
    return pd.DataFrame(
        {"site_id": list(dataset.unlocated), "records": [int(counts[s]) for s in dataset.unlocated]}
    )


@dataclass(frozen=True)
class DistrictSummary:
    district: str
    dl_gb: float
    ul_gb: float
    active_users: float
    records: int


def district_summary(dataset: CellDataset, district: str) -> DistrictSummary:
    """Summed DL/UL volume and mean active users over one district's records."""
    mask = (dataset.frame["district"] == district).to_numpy()
    if not mask.any():
        raise UnknownDistrict(f"district not in dataset: {district!r}")
    sub = dataset.frame.loc[mask]
    return DistrictSummary(
        district=district,
        dl_gb=math.fsum(sub["dl_gb"]),
        ul_gb=math.fsum(sub["ul_gb"]),
        active_users=math.fsum(sub["active_users"]) / len(sub),
        records=len(sub),
    )


def district_table(dataset: CellDataset) -> pd.DataFrame:
    """:func:`district_summary` for every district, sorted by name."""
    names = sorted(set(dataset.frame["district"].astype(str)))
    rows = [district_summary(dataset, d) for d in names]
    return pd.DataFrame([r.__dict__ for r in rows])


@dataclass(frozen=True)
class DatasetStats:
    rows: int
    districts: int
    dl_gb_per_day: float
    ul_gb_per_day: float
    mean_active_users: float
    days: int
    start: str
    end: str

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame([self.__dict__])


def dataset_stats(dataset: CellDataset) -> DatasetStats:
    """Headline statistics over the observation window.

    Per-day means divide the window totals by the number of calendar days
    in the window, inclusive of both ends.
    """
    if len(dataset) == 0:
        raise EmptyDataset("dataset has no records")
    f = dataset.frame
    days = dataset.days
    return DatasetStats(
        rows=len(f),
        districts=int(f["district"].astype(str).nunique()),
        dl_gb_per_day=math.fsum(f["dl_gb"]) / days,
        ul_gb_per_day=math.fsum(f["ul_gb"]) / days,
        mean_active_users=math.fsum(f["active_users"]) / len(f),
        days=days,
        start=dataset.start.isoformat(),
        end=dataset.end.isoformat(),
    )


def write_report(table: pd.DataFrame, path) -> Path:
    """Write a report table as UTF-8 CSV with a header row."""
    path = Path(path)
    table.to_csv(path, index=False, lineterminator="\n")
    return path
