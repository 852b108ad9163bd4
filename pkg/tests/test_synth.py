import json

import numpy as np
import pytest

from cellefa.condense import build_median_week, slot_index
from cellefa.config import PipelineConfig
from cellefa.errors import InvalidProfile
from cellefa.ingest import parse_kpi_csv
from cellefa.pipeline import fit
from cellefa.synth import (
    ProfileSpec,
    SyntheticGroundTruth,
    built_in_profiles,
    congruence,
    generate,
    load_profiles,
    tucker_matrix,
    window_template,
    write_synthetic,
)


def four_profiles(cell_count=125, noise=0.2):
    """Four profiles covering every slot of the week (no nightlife)."""
    def make(name, windows, base):
        return ProfileSpec(name, window_template(windows), cell_count, base, noise)

    return [
        make("residential", [
            {"days": "Mon-Fri", "hours": "0-7"},
            {"days": "Mon-Fri", "hours": "20-24"},
            {"days": "Sat-Sun", "hours": "0-24"},
        ], 2.0),
        make("business", [{"days": "Mon-Fri", "hours": "8-17"}], 2.0),
        make("morning_commute", [{"days": "Mon-Fri", "hours": "7-9"}], 4.0),
        make("evening_commute", [{"days": "Mon-Fri", "hours": "17-20"}], 2.0),
    ]


def by_name(name):
    return next(p for p in built_in_profiles() if p.name == name)


def grid(profile):
    return profile.template.reshape(7, 24)


def test_noise_free_median_is_template():
    rng = np.random.default_rng(0)
    t = rng.uniform(0, 3, size=168)
    ds, _ = generate([ProfileSpec("p", t, cell_count=1, base_volume=2.5, noise_sigma=0.0)], days=7, seed=3)
    m = build_median_week(ds)
    assert np.array_equal(m.values[0], 2.5 * t)


def test_noise_free_survives_csv(tmp_path):
    t = window_template([{"days": "weekdays", "hours": "9-18", "level": 3.0}], floor=0.25)
    ds, truth = generate([ProfileSpec("p", t, cell_count=4, base_volume=1.5, noise_sigma=0.0)], days=14, seed=1)
    paths = write_synthetic(ds, truth, tmp_path)
    m = build_median_week(parse_kpi_csv(paths["kpi"]))
    mult = np.array([truth.multipliers[c] for c in m.cell_ids])
    assert np.array_equal(m.values, 1.5 * mult[:, None] * t[None, :])


def test_same_seed_byte_identical(tmp_path):
    profiles = built_in_profiles(cell_count=6)
    a = write_synthetic(*generate(profiles, 7, 5), tmp_path / "a")
    b = write_synthetic(*generate(profiles, 7, 5), tmp_path / "b")
    for key in a:
        assert a[key].read_bytes() == b[key].read_bytes()
    c = write_synthetic(*generate(profiles, 7, 6), tmp_path / "c")
    assert a["kpi"].read_bytes() != c["kpi"].read_bytes()


def test_per_cell_streams_independent_of_layout():
    small, _ = generate(built_in_profiles(cell_count=3)[:1], 7, 2)
    large, _ = generate(built_in_profiles(cell_count=3)[:2], 7, 2)
    a = small.frame[small.frame.cell_id == "C00001"].dl_gb.to_numpy()
    b = large.frame[large.frame.cell_id == "C00001"].dl_gb.to_numpy()
    assert np.array_equal(a, b)


def test_record_count_and_assignment():
    ds, truth = generate(built_in_profiles(cell_count=4), days=8, seed=0)
    assert len(ds) == 8 * 24 * 20
    assert len(truth.assignment) == 20 and set(truth.assignment.values()) == {p.name for p in built_in_profiles()}
    assert ds.unlocated == ()
    assert (ds.frame[["dl_gb", "ul_gb", "active_users"]] >= 0).all().all()


def test_four_profiles_retain_four():
    ds, truth = generate(four_profiles(), days=28, seed=11)
    res = fit(build_median_week(ds), PipelineConfig(kpi="unused", seed=11))
    assert res.model.k == 4
    assert all(abs(m.coefficient) >= 0.95 for m in congruence(res.model.pattern, truth.templates()))


def test_business_template():
    g = grid(by_name("business"))
    assert np.all(g[:5, 8:17] == 1.0)
    mask = np.ones_like(g, dtype=bool)
    mask[:5, 8:17] = False
    assert np.all(g[mask] <= 0.1)


def test_morning_commute_template():
    g = grid(by_name("morning_commute"))
    assert set(zip(*np.nonzero(g))) == {(d, h) for d in range(5) for h in (7, 8)}


def test_evening_commute_template():
    g = grid(by_name("evening_commute"))
    assert set(zip(*np.nonzero(g))) == {(d, h) for d in range(5) for h in (17, 18, 19)}


def test_nightlife_template():
    g = grid(by_name("nightlife"))
    assert set(zip(*np.nonzero(g))) == {(d, h) for d in range(7) for h in (2, 3)}


def test_residential_weekend_and_evening():
    g = grid(by_name("residential"))
    assert np.all(g[5:, 12]) and np.all(g[:5, 21]) and not np.any(g[:5, 8:17])


def test_built_in_profiles_cover_every_slot():
    total = sum(p.template for p in built_in_profiles())
    assert np.all(total > 0)


def test_window_template_rules():
    t = window_template([{"days": ["Sat", "sun"], "hours": "3"}, {"days": "Tue-Thu", "hours": "22-24", "level": 2}], floor=0.1)
    g = t.reshape(7, 24)
    assert g[5, 3] == g[6, 3] == 1.0 and g[5, 4] == 0.1
    assert g[1:4, 22:].tolist() == [[2.0, 2.0]] * 3
    assert g[0, 0] == 0.1 and t[slot_index(4, 23)] == 0.1


@pytest.mark.parametrize("hours", ["8-25", "9-9", "x"])
def test_bad_hour_range(hours):
    with pytest.raises(InvalidProfile):
        window_template([{"hours": hours}])


@pytest.mark.parametrize(
    "kwargs",
    [
        {"template": np.zeros(168)},
        {"template": np.ones(10)},
        {"template": -np.ones(168)},
        {"cell_count": 0},
        {"base_volume": 0.0},
        {"noise_sigma": -0.1},
        {"name": ""},
    ],
)
def test_invalid_profile(kwargs):
    args = {"name": "p", "template": np.ones(168), **kwargs}
    with pytest.raises(InvalidProfile):
        ProfileSpec(**args)


def test_generate_preconditions():
    with pytest.raises(InvalidProfile):
        generate([], 28, 0)
    with pytest.raises(InvalidProfile):
        generate(built_in_profiles(cell_count=1), 6, 0)
    p = built_in_profiles(cell_count=1)[0]
    with pytest.raises(InvalidProfile):
        generate([p, p], 7, 0)


def test_congruence_examples():
    x = np.array([[1.0], [2.0], [3.0]])
    assert tucker_matrix(x, x)[0, 0] == 1.0
    assert tucker_matrix(np.array([[1.0], [0.0]]), np.array([[0.0], [1.0]]))[0, 0] == 0.0
    (m,) = congruence(-x, x)
    assert abs(m.coefficient) == 1.0 and m.negative


def test_congruence_greedy_matching():
    planted = np.eye(4)[:, :3]
    recovered = np.column_stack([planted[:, 2] * 0.9 + 0.1, -planted[:, 0], planted[:, 1]])
    matches = congruence(recovered, planted)
    assert [(m.planted, m.recovered) for m in matches] == [(0, 1), (1, 2), (2, 0)]
    assert matches[0].negative
    c = tucker_matrix(np.random.default_rng(0).standard_normal((20, 5)), planted[:4].repeat(5, axis=0))
    assert np.all(np.abs(c) <= 1.0)


def test_load_profiles_yaml(tmp_path):
    path = tmp_path / "profiles.yaml"
    path.write_text(
        "profiles:\n"
        "  - name: office\n"
        "    cell_count: 3\n"
        "    base_volume: 2.0\n"
        "    windows:\n"
        "      - {days: weekdays, hours: 9-17}\n"
        "  - name: flat\n"
        "    noise_sigma: 0\n"
        f"    values: {[1.0] * 168}\n"
    )
    office, flat = load_profiles(path)
    assert office.cell_count == 3 and office.base_volume == 2.0
    assert office.template.reshape(7, 24)[0, 9] == 1.0 and office.template.reshape(7, 24)[5, 9] == 0.0
    assert flat.noise_sigma == 0.0 and np.all(flat.template == 1.0)


def test_load_profiles_empty(tmp_path):
    path = tmp_path / "p.yaml"
    path.write_text("profiles: []\n")
    with pytest.raises(InvalidProfile):
        load_profiles(path)


def test_ground_truth_round_trip(tmp_path):
    ds, truth = generate(built_in_profiles(cell_count=2), 7, 4)
    paths = write_synthetic(ds, truth, tmp_path)
    back = SyntheticGroundTruth.from_dict(json.loads(paths["ground_truth"].read_text()))
    assert back.assignment == truth.assignment and back.seed == 4
    assert np.array_equal(back.templates(), truth.templates())
