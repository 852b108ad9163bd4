import csv
import datetime as dt

import numpy as np
import pytest

from cellefa.synth import built_in_profiles, generate

HEADER = ["date", "hour", "region", "city", "district", "site_id", "cell_id", "dl_gb", "ul_gb", "active_users"]

ACCEPTANCE: dict[str, tuple[bool, str]] = {}


def record_acceptance(name: str, passed: bool, detail: str = "") -> None:
    ACCEPTANCE[name] = (bool(passed), detail)
    print(f"[{'PASS' if passed else 'FAIL'}] {name} {detail}")


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for name in sorted(ACCEPTANCE):
        passed, detail = ACCEPTANCE[name]
        terminalreporter.write_line(f"{'PASS' if passed else 'FAIL'}  {name}  {detail}")


def write_rows(path, rows, header=HEADER):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)
    return path


def random_records(n, seed, n_cells=7, start=dt.date(2017, 11, 29), days=28):
    """Random KPI rows with duplicate-heavy (cell, slot) buckets."""
    rng = np.random.default_rng(seed)
    rows = []
    for _ in range(n):
        d = start + dt.timedelta(days=int(rng.integers(days)))
        cell = int(rng.integers(n_cells))
        rows.append([
            d.isoformat(), int(rng.integers(24)), "Marmara", "Istanbul", f"D{cell % 3}",
            f"S{cell // 2}", f"C{cell}",
            repr(float(rng.integers(0, 50)) / 4.0), repr(float(rng.gamma(2.0))), repr(float(rng.integers(0, 9))),
        ])
    return rows


@pytest.fixture
def kpi_file(tmp_path):
    def make(rows, name="kpi.csv", header=HEADER):
        return write_rows(tmp_path / name, rows, header)
    return make


@pytest.fixture(scope="session")
def planted():
    """Acceptance fixture: five built-in profiles x 100 cells, 28 days, noise 0.2, seed 7."""
    return generate(built_in_profiles(cell_count=100, noise_sigma=0.2), days=28, seed=7)
