"""Command-line entry point.

Subcommands: ``stats``, ``condense``, ``analyze``, ``synth``, ``export``.
Exit codes: 0 success, 1 usage error, 2 data error, 3 numeric failure.
Set ``CELLEFA_LOG_LEVEL`` (e.g. ``DEBUG``) for more logging.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

from . import __version__
from .condense import build_median_week, write_median_week
from .config import ConfigError, PipelineConfig
from .efa.model import read_model
from .errors import CellEfaError
from .geo_export import export_heatmaps, export_score_map
from .ingest import dataset_stats, district_table, join_locations, parse_kpi_csv, read_locations, unlocated_report, write_report
from .pipeline import analyze
from .scoring import read_scores
from .synth import built_in_profiles, generate, load_profiles, write_synthetic

logger = logging.getLogger("cellefa")

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 0, 1, 2, 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _metrics(value: str) -> list[str]:
    return [m.strip() for m in value.split(",") if m.strip()]


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="cellefa", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"cellefa {__version__}")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("stats", help="dataset statistics and per-district totals")
    s.add_argument("kpi")
    s.add_argument("locations", nargs="?")
    s.add_argument("--out", default="stats")
    s.add_argument("--max-reject-rate", type=float, default=0.01)

    c = sub.add_parser("condense", help="build per-cell median-week matrices")
    c.add_argument("kpi")
    c.add_argument("locations", nargs="?")
    c.add_argument("--metric", type=_metrics, default=["DL"], help="DL, UL, USERS or a comma list")
    c.add_argument("--min-coverage", type=float, default=1.0)
    c.add_argument("--out", default="condensed")

    a = sub.add_parser("analyze", help="run the full factor-analysis pipeline")
    a.add_argument("--config", help="YAML/JSON config file; flags override it")
    a.add_argument("--kpi")
    a.add_argument("--locations")
    a.add_argument("--matrix", help="median-week CSV instead of raw KPIs")
    a.add_argument("--coordinates", help="coordinate CSV for --matrix")
    a.add_argument("--metric", dest="metrics", type=_metrics)
    a.add_argument("--replicates", type=int)
    a.add_argument("--quantile", type=float)
    a.add_argument("--seed", type=int)
    a.add_argument("--n-factors", type=int)
    a.add_argument("--kappa", type=int)
    a.add_argument("--rotation", choices=["none", "varimax", "promax"])
    a.add_argument("--min-coverage", type=float)
    a.add_argument("--eigen-method", choices=["lapack", "jacobi"])
    a.add_argument("--workers", type=int)
    a.add_argument("--out")

    y = sub.add_parser("synth", help="generate a synthetic dataset with planted profiles")
    y.add_argument("--profiles", help="YAML/JSON profile file (default: built-in profiles)")
    y.add_argument("--seed", type=int, default=7)
    y.add_argument("--days", type=int, default=28)
    y.add_argument("--cells", type=int, default=100, help="cells per built-in profile")
    y.add_argument("--noise", type=float, default=0.2, help="noise sigma for built-in profiles")
    y.add_argument("--out", default="synth")

    e = sub.add_parser("export", help="heatmaps and GeoJSON from a saved model and scores")
    e.add_argument("--model", required=True)
    e.add_argument("--scores", required=True)
    e.add_argument("--out", default="export")
    return p


def _load_dataset(kpi, locations, max_reject_rate=0.01):
    for path in (kpi, locations):
        if path is not None and not Path(path).is_file():
            raise FileNotFoundError(path)
    dataset = parse_kpi_csv(kpi, max_reject_rate=max_reject_rate)
    if locations is not None:
        dataset = join_locations(dataset, read_locations(locations))
    return dataset


def cmd_stats(args) -> int:
    dataset = _load_dataset(args.kpi, args.locations, args.max_reject_rate)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    stats = dataset_stats(dataset)
    write_report(stats.to_frame(), out / "stats.csv")
    write_report(district_table(dataset), out / "districts.csv")
    if args.locations is not None:
        write_report(unlocated_report(dataset), out / "unlocated.csv")
    print(json.dumps({**stats.__dict__, "rejected": dataset.rejected}, indent=2))
    return EXIT_OK


def cmd_condense(args) -> int:
    dataset = _load_dataset(args.kpi, args.locations)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for metric in args.metric:
        m = build_median_week(dataset, metric, min_coverage=args.min_coverage)
        write_median_week(m, out / f"median_week_{m.metric.value}.csv", out / f"coordinates_{m.metric.value}.csv")
        print(f"{m.metric.value}: {m.n_cells} cells, {len(m.dropped)} dropped")
    return EXIT_OK


def cmd_analyze(args) -> int:
    overrides = {
        k: getattr(args, k)
        for k in (
            "kpi", "locations", "matrix", "coordinates", "metrics", "replicates", "quantile", "seed",
            "n_factors", "kappa", "rotation", "min_coverage", "eigen_method", "workers", "out",
        )
    }
    config = PipelineConfig.load(args.config, **overrides)
    for path in (config.kpi, config.locations, config.matrix, config.coordinates):
        if path is not None and not Path(path).is_file():
            raise FileNotFoundError(path)
    manifest = analyze(config)
    for metric, run in manifest["runs"].items():
        print(f"{metric}: K={run['k']} over {run['cells']} cells -> {Path(config.out) / metric}")
    return EXIT_OK


def cmd_synth(args) -> int:
    if args.profiles is not None:
        if not Path(args.profiles).is_file():
            raise FileNotFoundError(args.profiles)
        profiles = load_profiles(args.profiles)
    else:
        profiles = built_in_profiles(cell_count=args.cells, noise_sigma=args.noise)
    dataset, truth = generate(profiles, args.days, args.seed)
    paths = write_synthetic(dataset, truth, args.out)
    print(f"{len(dataset)} records for {len(truth.assignment)} cells -> {paths['kpi']}")
    return EXIT_OK


def cmd_export(args) -> int:
    for path in (args.model, args.scores):
        if not Path(path).is_file():
            raise FileNotFoundError(path)
    model = read_model(args.model)
    table = read_scores(args.scores)
    out = Path(args.out)
    files = export_heatmaps(model, out)
    export_score_map(table, out / "score_map.geojson")
    print(f"{len(files)} heatmaps and score_map.geojson -> {out}")
    return EXIT_OK


COMMANDS = {
    "stats": cmd_stats,
    "condense": cmd_condense,
    "analyze": cmd_analyze,
    "synth": cmd_synth,
    "export": cmd_export,
}


def main(argv=None) -> int:
    logging.basicConfig(
        level=os.environ.get("CELLEFA_LOG_LEVEL", "WARNING").upper(),
        format="%(levelname)s %(name)s: %(message)s",
    )
    args = build_parser().parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"cellefa: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except FileNotFoundError as exc:
        print(f"cellefa: file not found: {exc.filename or exc.args[0]}", file=sys.stderr)
        return EXIT_DATA
    except CellEfaError as exc:
        print(f"cellefa: error [{exc.module}] {type(exc).__name__}: {exc}", file=sys.stderr)
        return exc.exit_code


if __name__ == "__main__":
    sys.exit(main())
