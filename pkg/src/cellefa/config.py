"""Pipeline configuration: file loading, flag overrides and validation."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import yaml

from .condense import Metric


class ConfigError(ValueError):
    exit_code = 1
    module = "config"


@dataclass
class PipelineConfig:
    kpi: str | None = None
    locations: str | None = None
    matrix: str | None = None
    coordinates: str | None = None
    metrics: list[str] = field(default_factory=lambda: ["DL"])
    replicates: int = 100
    quantile: float = 0.95
    seed: int = 0
    n_factors: int | None = None
    max_iter: int = 100
    tol: float = 1e-6
    rotation: str = "promax"
    kappa: int = 4
    min_coverage: float = 1.0
    max_reject_rate: float = 0.01
    eigen_method: str = "lapack"
    workers: int = 1
    out: str = "out"

    def validate(self) -> "PipelineConfig":
        if not self.metrics:
            raise ConfigError("at least one metric is required")
        try:
            self.metrics = [Metric.parse(m).value for m in self.metrics]
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        if len(set(self.metrics)) != len(self.metrics):
            raise ConfigError(f"duplicate metrics: {self.metrics}")
        checks = [
            (self.replicates >= 1, "replicates must be >= 1"),
            (0.0 < self.quantile < 1.0, "quantile must be in (0, 1)"),
            (self.n_factors is None or self.n_factors >= 1, "n_factors must be >= 1"),
            (self.max_iter >= 1, "max_iter must be >= 1"),
            (self.tol > 0, "tol must be positive"),
            (self.rotation in ("none", "varimax", "promax"), "rotation must be none, varimax or promax"),
            (self.kappa >= 1, "kappa must be >= 1"),
            (0.0 < self.min_coverage <= 1.0, "min_coverage must be in (0, 1]"),
            (0.0 <= self.max_reject_rate <= 1.0, "max_reject_rate must be in [0, 1]"),
            (self.eigen_method in ("lapack", "jacobi"), "eigen_method must be lapack or jacobi"),
            (self.workers >= 1, "workers must be >= 1"),
            (self.kpi is not None or self.matrix is not None, "an input (kpi or matrix) is required"),
        ]
        for ok, message in checks:
            if not ok:
                raise ConfigError(message)
        return self

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "PipelineConfig":
        known = {f.name for f in fields(cls)}
        data = dict(data)
        if "metric" in data and "metrics" not in data:
            m = data.pop("metric")
            data["metrics"] = m if isinstance(m, list) else [m]
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        return cls(**data)

    @classmethod
    def load(cls, path, **overrides) -> "PipelineConfig":
        """Read a YAML/JSON config; non-None ``overrides`` win over file values."""
        data = {}
        if path is not None:
            try:
                data = yaml.safe_load(Path(path).read_text(encoding="utf-8")) or {}
            except FileNotFoundError:
                raise ConfigError(f"config file not found: {path}") from None
            if not isinstance(data, dict):
                raise ConfigError(f"{path}: config must be a mapping")
        data.update({k: v for k, v in overrides.items() if v is not None})
        return cls.from_dict(data).validate()

    def dump(self, path) -> Path:
        path = Path(path)
        path.write_text(json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n", encoding="utf-8")
        return path
