"""Synthetic KPI datasets with planted land-use temporal profiles.

Every synthetic cell follows exactly one profile.  Its hourly value is::

    base_volume * multiplier * template[slot] * (1 + eps),  eps ~ N(0, noise_sigma)

clamped at zero, where ``slot`` is the hour of the week and ``multiplier``
is a fixed per-cell volume factor spread log-normally around 1 within the
profile (``volume_spread``).  The multiplier gives cells of one profile
different sizes, which real cells have and which a factor model needs: with
identical volumes, M profiles span only M - 1 directions once the columns
are centered.
"""

from __future__ import annotations

import datetime as dt
import json
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
import pandas as pd
import yaml
from scipy.special import ndtri

from .condense import DAY_LABELS, DAYS, HOURS, SLOTS
from .errors import InvalidProfile
from .ingest import FIELDS, TEXT_FIELDS, CellDataset, SiteLocation, join_locations, write_kpi_csv, write_locations

DEFAULT_START = dt.date(2017, 11, 29)
CELLS_PER_SITE = 3
UL_RATIO = 0.12
USERS_PER_GB = 25.0
CENTER = (41.02, 28.98)


@dataclass(frozen=True)
class ProfileSpec:
    name: str
    template: np.ndarray
    cell_count: int = 100
    base_volume: float = 1.0
    noise_sigma: float = 0.2
    volume_spread: float = 0.5

    def __post_init__(self):
        t = np.asarray(self.template, dtype=np.float64)
        object.__setattr__(self, "template", t)
        if not self.name:
            raise InvalidProfile("profile name must be non-empty")
        if t.shape != (SLOTS,):
            raise InvalidProfile(f"profile {self.name}: template needs {SLOTS} values, got {t.shape}")
        if not np.isfinite(t).all() or (t < 0).any():
            raise InvalidProfile(f"profile {self.name}: template values must be finite and non-negative")
        if not (t > 0).any():
            raise InvalidProfile(f"profile {self.name}: template has no active slot")
        if self.cell_count < 1:
            raise InvalidProfile(f"profile {self.name}: cell_count must be >= 1")
        if not self.base_volume > 0:
            raise InvalidProfile(f"profile {self.name}: base_volume must be positive")
        if not self.noise_sigma >= 0:
            raise InvalidProfile(f"profile {self.name}: noise_sigma must be >= 0")
        if not self.volume_spread >= 0:
            raise InvalidProfile(f"profile {self.name}: volume_spread must be >= 0")

    def multipliers(self) -> np.ndarray:
        q = (np.arange(self.cell_count) + 0.5) / self.cell_count
        return np.exp(self.volume_spread * ndtri(q))

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "cell_count": self.cell_count,
            "base_volume": self.base_volume,
            "noise_sigma": self.noise_sigma,
            "volume_spread": self.volume_spread,
            "template": self.template.tolist(),
        }


_DAY_ALIASES = {label.lower(): i for i, label in enumerate(DAY_LABELS)}


def _parse_days(spec) -> list[int]:
    if isinstance(spec, (list, tuple)):
        return sorted({d for part in spec for d in _parse_days(part)})
    text = str(spec).strip().lower()
    if text in ("all", "*", "mon-sun"):
        return list(range(DAYS))
    if text == "weekdays":
        return list(range(5))
    if text == "weekend":
        return [5, 6]
    out = set()
    for part in text.split(","):
        part = part.strip()
        if "-" in part:
            a, b = (_DAY_ALIASES[p.strip()[:3]] for p in part.split("-"))
            out.update(range(a, b + 1))
        else:
            out.add(_DAY_ALIASES[part[:3]])
    return sorted(out)


def _parse_hours(spec) -> list[int]:
    """Half-open hour range ``"8-17"`` -> 8..16; a single ``"3"`` -> [3]."""
    m = re.fullmatch(r"\s*(\d+)\s*(?:-\s*(\d+))?\s*", str(spec))
    if not m:
        raise InvalidProfile(f"bad hour range {spec!r}")
    start = int(m.group(1))
    end = int(m.group(2)) if m.group(2) else start + 1
    if not 0 <= start < end <= HOURS:
        raise InvalidProfile(f"hour range {spec!r} outside 0-24")
    return list(range(start, end))


def window_template(windows: Sequence[dict], floor: float = 0.0) -> np.ndarray:
    """168-slot template from ``{days, hours, level}`` window rules over a floor."""
    t = np.full((DAYS, HOURS), float(floor))
    for rule in windows:
        try:
            days = _parse_days(rule.get("days", "all"))
        except KeyError as exc:
            raise InvalidProfile(f"bad day spec {rule.get('days')!r}") from exc
        hours = _parse_hours(rule["hours"])
        t[np.ix_(days, hours)] = float(rule.get("level", 1.0))
    return t.reshape(SLOTS)


def built_in_profiles(cell_count: int = 100, noise_sigma: float = 0.2) -> list[ProfileSpec]:
    """Five land-use profiles with the commonly reported activity windows.

    Hour ranges are half-open: business 08:00-17:00 weekdays, morning commute
    07:00-09:00 weekdays, evening commute 17:00-20:00 weekdays, nightlife
    02:00-04:00 every day.  Residential takes weekday evenings and nights and
    the whole weekend outside the nightlife hours, so every slot of the week
    is active in at least one profile.  Templates are 0/1 indicators.
    """
    def make(name, windows, base):
        return ProfileSpec(name, window_template(windows), cell_count, base, noise_sigma)

    residential = [
        {"days": "Mon-Sun", "hours": "0-2"},
        {"days": "Mon-Fri", "hours": "4-7"},
        {"days": "Mon-Fri", "hours": "20-24"},
        {"days": "Sat-Sun", "hours": "4-24"},
    ]
    return [
        make("residential", residential, 2.0),
        make("business", [{"days": "Mon-Fri", "hours": "8-17"}], 2.0),
        make("morning_commute", [{"days": "Mon-Fri", "hours": "7-9"}], 4.0),
        make("evening_commute", [{"days": "Mon-Fri", "hours": "17-20"}], 2.0),
        make("nightlife", [{"days": "all", "hours": "2-4"}], 1.0),
    ]


def load_profiles(path) -> list[ProfileSpec]:
    """Read profiles from a YAML (or JSON) file.

    Each entry under ``profiles`` has a ``name`` and either explicit
    ``values`` (168 numbers) or ``windows`` rules with an optional ``floor``,
    plus optional ``cell_count``, ``base_volume``, ``noise_sigma`` and
    ``volume_spread``.
    """
    doc = yaml.safe_load(Path(path).read_text(encoding="utf-8")) or {}
    entries = doc.get("profiles", []) if isinstance(doc, dict) else doc
    profiles = []
    for entry in entries or []:
        if "values" in entry:
            template = np.asarray(entry["values"], dtype=np.float64)
        elif "windows" in entry:
            template = window_template(entry["windows"], entry.get("floor", 0.0))
        else:
            raise InvalidProfile(f"profile {entry.get('name')!r} needs 'values' or 'windows'")
        profiles.append(
            ProfileSpec(
                name=str(entry.get("name", "")),
                template=template,
                cell_count=int(entry.get("cell_count", 100)),
                base_volume=float(entry.get("base_volume", 1.0)),
                noise_sigma=float(entry.get("noise_sigma", 0.2)),
                volume_spread=float(entry.get("volume_spread", 0.5)),
            )
        )
    if not profiles:
        raise InvalidProfile(f"{path}: no profiles defined")
    return profiles


@dataclass(frozen=True)
class SyntheticGroundTruth:
    profiles: tuple[ProfileSpec, ...]
    assignment: dict[str, str]
    seed: int
    days: int
    start: dt.date
    multipliers: dict[str, float] = field(default_factory=dict)

    def templates(self) -> np.ndarray:
        """Planted templates as a (168, n_profiles) matrix."""
        return np.column_stack([p.template for p in self.profiles])

    def cells_of(self, name: str) -> list[str]:
        return [c for c, p in self.assignment.items() if p == name]

    def to_dict(self) -> dict:
        return {
            "seed": self.seed,
            "days": self.days,
            "start": self.start.isoformat(),
            "profiles": [p.to_dict() for p in self.profiles],
            "assignment": self.assignment,
            "multipliers": self.multipliers,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "SyntheticGroundTruth":
        profiles = tuple(
            ProfileSpec(
                p["name"], np.asarray(p["template"]), p["cell_count"], p["base_volume"],
                p["noise_sigma"], p.get("volume_spread", 0.5),
            )
            for p in data["profiles"]
        )
        return cls(
            profiles=profiles,
            assignment=dict(data["assignment"]),
            seed=int(data["seed"]),
            days=int(data["days"]),
            start=dt.date.fromisoformat(data["start"]),
            multipliers=dict(data.get("multipliers", {})),
        )


def generate(
    profiles: Sequence[ProfileSpec],
    days: int = 28,
    seed: int = 0,
    *,
    start: dt.date = DEFAULT_START,
) -> tuple[CellDataset, SyntheticGroundTruth]:
    """Generate hourly records for every cell of every profile.

    Records are ordered by date, hour, then cell.  Each cell draws its noise
    from its own generator seeded with ``(seed, cell index)``; site
    coordinates are scattered around one cluster centre per profile.
    """
    profiles = list(profiles)
    if not profiles:
        raise InvalidProfile("at least one profile is required")
    if days < 7:
        raise InvalidProfile(f"days must be >= 7, got {days}")
    names = [p.name for p in profiles]
    if len(set(names)) != len(names):
        raise InvalidProfile(f"duplicate profile names: {names}")

    dates = [start + dt.timedelta(days=d) for d in range(days)]
    weekday = np.array([d.weekday() for d in dates])
    slots = (weekday[:, None] * HOURS + np.arange(HOURS)[None, :]).reshape(-1)
    n_hours = slots.size

    cell_ids, site_ids, districts, assignment, mult_map = [], [], [], {}, {}
    dl_cols, ul_cols, users_cols = [], [], []
    locations: dict[str, SiteLocation] = {}
    g = 0
    for p_idx, prof in enumerate(profiles):
        angle = 2.0 * np.pi * p_idx / len(profiles)
        centre = (CENTER[0] + 0.08 * np.cos(angle), CENTER[1] + 0.12 * np.sin(angle))
        district = f"{prof.name}_district"
        mults = prof.multipliers()
        for i in range(prof.cell_count):
            cid = f"C{g:05d}"
            sid = f"S{p_idx:02d}{i // CELLS_PER_SITE:04d}"
            if sid not in locations:
                srng = np.random.default_rng([seed, 1, p_idx, i // CELLS_PER_SITE])
                lat, lon = centre + srng.normal(0.0, 0.01, size=2)
                locations[sid] = SiteLocation(sid, round(float(lat), 6), round(float(lon), 6))
            rng = np.random.default_rng([seed, 0, g])
            level = prof.base_volume * mults[i] * prof.template[slots]
            eps = rng.normal(0.0, prof.noise_sigma, size=(3, n_hours)) if prof.noise_sigma > 0 else np.zeros((3, n_hours))
            dl_cols.append(np.maximum(level * (1.0 + eps[0]), 0.0))
            ul_cols.append(np.maximum(UL_RATIO * level * (1.0 + eps[1]), 0.0))
            users_cols.append(np.maximum(USERS_PER_GB * level * (1.0 + eps[2]), 0.0))
            cell_ids.append(cid)
            site_ids.append(sid)
            districts.append(district)
            assignment[cid] = prof.name
            mult_map[cid] = float(mults[i])
            g += 1

    n_cells = g
    # rows ordered (date, hour, cell)
    frame = pd.DataFrame(
        {
            "date": pd.to_datetime(np.repeat([d.isoformat() for d in dates], HOURS * n_cells)),
            "hour": np.tile(np.repeat(np.arange(HOURS), n_cells), days),
            "region": "Marmara",
            "city": "Istanbul",
            "district": np.tile(districts, n_hours),
            "site_id": np.tile(site_ids, n_hours),
            "cell_id": np.tile(cell_ids, n_hours),
            "dl_gb": np.column_stack(dl_cols).reshape(-1),
            "ul_gb": np.column_stack(ul_cols).reshape(-1),
            "active_users": np.column_stack(users_cols).reshape(-1),
        }
    )[list(FIELDS)]
    frame["hour"] = frame["hour"].astype(np.int64)
    for name in TEXT_FIELDS:
        frame[name] = pd.Categorical(frame[name], categories=sorted(set(frame[name])))
    dataset = CellDataset(frame=frame, start=dates[0], end=dates[-1], rows_read=len(frame))
    dataset = join_locations(dataset, locations)
    truth = SyntheticGroundTruth(
        profiles=tuple(profiles),
        assignment=assignment,
        seed=seed,
        days=days,
        start=start,
        multipliers=mult_map,
    )
    return dataset, truth


def write_synthetic(dataset: CellDataset, truth: SyntheticGroundTruth, out_dir) -> dict[str, Path]:
    """Emit ``kpi.csv``, ``locations.csv`` and ``ground_truth.json``."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {
        "kpi": write_kpi_csv(dataset, out / "kpi.csv"),
        "locations": write_locations(dataset.locations, out / "locations.csv"),
        "ground_truth": out / "ground_truth.json",
    }
    paths["ground_truth"].write_text(json.dumps(truth.to_dict(), indent=2) + "\n", encoding="utf-8")
    return paths


@dataclass(frozen=True)
class Match:
    planted: int
    recovered: int
    coefficient: float

    @property
    def negative(self) -> bool:
        return self.coefficient < 0


def tucker_matrix(a, b) -> np.ndarray:
    """Tucker congruence between every column of ``a`` and every column of ``b``."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape[0] != b.shape[0]:
        raise ValueError(f"row counts differ: {a.shape[0]} vs {b.shape[0]}")
    num = a.T @ b
    den = np.sqrt(np.outer(np.sum(a * a, axis=0), np.sum(b * b, axis=0)))
    with np.errstate(invalid="ignore", divide="ignore"):
        c = np.where(den > 0, num / den, 0.0)
    return np.clip(c, -1.0, 1.0)


def congruence(recovered, planted) -> list[Match]:
    """Greedy sign-blind matching of planted columns to recovered columns.

    Repeatedly takes the unmatched (recovered, planted) pair with the
    largest absolute Tucker coefficient.  Returns one :class:`Match` per
    matched pair, ordered by planted index.
    """
    c = tucker_matrix(recovered, planted)
    free = np.abs(c)
    matches = []
    for _ in range(min(c.shape)):
        i, j = np.unravel_index(np.argmax(free), free.shape)
        matches.append(Match(planted=int(j), recovered=int(i), coefficient=float(c[i, j])))
        free[i, :] = -1.0
        free[:, j] = -1.0
    return sorted(matches, key=lambda m: m.planted)
