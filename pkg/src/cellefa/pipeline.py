"""End-to-end analysis: median week -> factor model -> scores -> exports."""

from __future__ import annotations

import hashlib
import json
import logging
import platform
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import __version__
from .condense import MedianWeekMatrix, build_median_week, read_median_week, write_median_week
from .config import PipelineConfig
from .efa.extraction import extract_factors
from .efa.linalg import Standardized, correlation_matrix, standardize
from .efa.model import FactorModel, finalize_model, write_model
from .efa.parallel import ParallelAnalysisResult, parallel_analysis
from .efa.rotation import rotate
from .errors import NumericError
from .geo_export import export_heatmaps, export_score_map
from .ingest import join_locations, parse_kpi_csv, read_locations
from .scoring import ScoreTable, regression_scores, write_scores

logger = logging.getLogger(__name__)


class NoFactorsRetained(NumericError):
    module = "efa"


@dataclass(frozen=True)
class EfaResult:
    standardized: Standardized
    correlation: np.ndarray
    parallel: ParallelAnalysisResult
    model: FactorModel
    scores: ScoreTable


def fit(matrix: MedianWeekMatrix, config: PipelineConfig) -> EfaResult:
    """Standardize, choose K, extract, rotate, finalize and score."""
    st = standardize(matrix.values)
    r = correlation_matrix(st.z)
    pa = parallel_analysis(st.z, config.replicates, config.quantile, config.seed, workers=config.workers)
    k = config.n_factors if config.n_factors is not None else pa.k
    if k < 1:
        raise NoFactorsRetained(
            f"parallel analysis retained no factors (largest eigenvalue {pa.observed[0]:.4g} "
            f"vs random {pa.thresholds[0]:.4g})"
        )
    model = extract_factors(r, k, max_iter=config.max_iter, tol=config.tol, eigen_method=config.eigen_method)
    model = finalize_model(rotate(model, config.rotation, kappa=config.kappa))
    scores = regression_scores(st.z, r, model, matrix.cell_ids, matrix.coordinates)
    return EfaResult(st, r, pa, model, scores)


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def versions() -> dict:
    import pandas
    import scipy

    return {
        "cellefa": __version__,
        "python": platform.python_version(),
        "numpy": np.__version__,
        "scipy": scipy.__version__,
        "pandas": pandas.__version__,
    }


def load_matrices(config: PipelineConfig) -> dict[str, MedianWeekMatrix]:
    if config.matrix is not None:
        m = read_median_week(config.matrix, config.coordinates, config.metrics[0])
        return {m.metric.value: m}
    dataset = parse_kpi_csv(config.kpi, max_reject_rate=config.max_reject_rate)
    if config.locations is not None:
        dataset = join_locations(dataset, read_locations(config.locations))
    return {
        metric: build_median_week(dataset, metric, min_coverage=config.min_coverage)
        for metric in config.metrics
    }


def analyze(config: PipelineConfig) -> dict:
    """Run the full pipeline for every configured metric.

    Writes, under ``config.out``: ``config.json``, ``manifest.json`` and per
    metric a directory with the median-week CSV and coordinates, the
    parallel-analysis result, ``model.json``, ``scores.csv``, heatmap CSVs
    and ``score_map.geojson``.  Returns the manifest.
    """
    config.validate()
    out = Path(config.out)
    out.mkdir(parents=True, exist_ok=True)
    config.dump(out / "config.json")
    matrices = load_matrices(config)

    runs = {}
    for metric, matrix in matrices.items():
        mdir = out / metric
        mdir.mkdir(exist_ok=True)
        logger.info("%s: %d cells x %d slots", metric, matrix.n_cells, matrix.values.shape[1])
        files = write_median_week(matrix, mdir / "median_week.csv", mdir / "coordinates.csv")
        res = fit(matrix, config)
        pa_path = mdir / "parallel_analysis.json"
        pa_path.write_text(json.dumps(res.parallel.to_dict(), indent=2) + "\n", encoding="utf-8")
        files.append(pa_path)
        files.append(
            write_model(
                res.model,
                mdir / "model.json",
                metric=metric,
                seed=config.seed,
                parameters={
                    "replicates": config.replicates,
                    "quantile": config.quantile,
                    "kappa": config.kappa,
                    "max_iter": config.max_iter,
                    "tol": config.tol,
                    "rotation": config.rotation,
                    "eigen_method": config.eigen_method,
                },
            )
        )
        files.append(write_scores(res.scores, mdir / "scores.csv"))
        files.extend(export_heatmaps(res.model, mdir / "heatmaps"))
        located = not np.isnan(matrix.coordinates).all()
        if located:
            export_score_map(res.scores, mdir / "score_map.geojson")
            files.append(mdir / "score_map.geojson")
        else:
            logger.warning("%s: no coordinates available, score map skipped", metric)
        runs[metric] = {
            "cells": matrix.n_cells,
            "dropped_cells": list(matrix.dropped),
            "imputed_slots": int(sum(matrix.imputed)),
            "k": res.model.k,
            "parallel_k": res.parallel.k,
            "flags": {**res.model.flags, "score_ridge": res.scores.flags.get("ridge", False)},
            "score_map": located,
            "files": {str(p.relative_to(out)): _sha256(p) for p in files},
        }

    manifest = {
        "config": config.to_dict(),
        "seed": config.seed,
        "versions": versions(),
        "runs": runs,
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return manifest
