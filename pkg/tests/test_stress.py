"""Full-scale ingest run; set ``CELLEFA_STRESS=1`` to enable."""

import os

import numpy as np
import pandas as pd
import pytest

from cellefa.ingest import dataset_stats, parse_kpi_csv

from .conftest import HEADER

ROWS = 6_264_286
DISTRICTS = 40

pytestmark = [
    pytest.mark.slow,
    pytest.mark.skipif(os.environ.get("CELLEFA_STRESS") != "1", reason="set CELLEFA_STRESS=1 to run"),
]


def write_big_file(path, rows=ROWS, chunk=1_000_000, seed=0):
    rng = np.random.default_rng(seed)
    dates = pd.date_range("2017-11-29", periods=28).strftime("%Y-%m-%d").to_numpy()
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(",".join(HEADER) + "\n")
        for start in range(0, rows, chunk):
            n = min(chunk, rows - start)
            idx = np.arange(start, start + n)
            cell = idx % 9_000
            district = cell % DISTRICTS
            frame = pd.DataFrame({
                "date": dates[(idx // 9_000) % 28],
                "hour": (idx // (9_000 * 28)) % 24,
                "region": "Marmara",
                "city": "Istanbul",
                "district": np.char.add("D", district.astype(str)),
                "site_id": np.char.add("S", (cell // 3).astype(str)),
                "cell_id": np.char.add("C", cell.astype(str)),
                "dl_gb": rng.gamma(2.0, 1.0, n).round(6),
                "ul_gb": rng.gamma(2.0, 0.1, n).round(6),
                "active_users": rng.integers(0, 300, n),
            })
            frame.to_csv(fh, header=False, index=False, lineterminator="\n")
    return path


def test_full_scale_ingest(tmp_path):
    ds = parse_kpi_csv(write_big_file(tmp_path / "big.csv"))
    assert ds.rows_read == ROWS and ds.rejected == 0 and len(ds) == ROWS
    stats = dataset_stats(ds)
    assert stats.districts == DISTRICTS and stats.days == 28
