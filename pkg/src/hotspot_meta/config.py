"""Every tunable default in one place.

A ``RunConfig`` is echoed (as canonical JSON plus its SHA-256) into each file
the CLI writes, so any output can be traced back to the settings that made it.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
from dataclasses import dataclass, field

from .errors import DataError

PRNG_NAME = "PCG64"


@dataclass(frozen=True)
class GenConfig:
    width: int = 50_000
    height: int = 50_000
    rect_count: int = 400
    min_dim: int = 200
    max_dim: int = 450
    min_spacing: int = 60
    # fraction of rect_count spent on minimum-spacing risk motifs
    motif_rate: float = 0.05
    # drawn dimensions are quantum*k + r with 0 <= r <= quantum // 2
    dim_quantum: int = 100
    max_attempts: int = 500


@dataclass(frozen=True)
class OracleConfig:
    sigma: float = 40.0
    intensity_threshold: float = 0.5
    epe_c0: float = 6.0
    epe_c1: float = 4.5
    sample_step: float = 0.01
    scan_steps: int = 64


@dataclass(frozen=True)
class FeatureConfig:
    frag_len: int = 100
    window: int = 1200
    grid: int = 8


@dataclass(frozen=True)
class AnnTrainConfig:
    hidden_count: int = 16
    learning_rate: float = 1.0
    epochs: int = 2000
    init_scale: float = 0.5
    seed: int = 0


@dataclass(frozen=True)
class SvmTrainConfig:
    c_bound: float = 10.0
    # None means 1 / feature dimension
    gamma: float | None = 0.005
    kkt_tol: float = 1e-3
    max_passes: int = 200
    seed: int = 0


@dataclass(frozen=True)
class PmConfig:
    quant_levels: int = 8
    match_tolerance: int = 1
    mismatch_budget: int = 4


@dataclass(frozen=True)
class CalibConfig:
    lambda0_init: float = 1e-3
    levels_per_base: tuple[int, ...] = (4, 4, 2)
    psi_alpha: float = 1.0
    psi_beta: float = -0.02
    theta_grid_size: int = 512
    qp_tol: float = 1e-8
    qp_max_iter: int = 1_000_000
    ann: AnnTrainConfig = field(default_factory=AnnTrainConfig)
    svm: SvmTrainConfig = field(default_factory=SvmTrainConfig)
    pm: PmConfig = field(default_factory=PmConfig)
    # base outputs fed to the QP come from this many cross-fitted folds;
    # 0 or 1 means in-sample outputs of the final base models
    meta_folds: int = 5
    seed: int = 0

    def __post_init__(self):
        if not self.psi_alpha > 0:
            raise DataError(f"psi_alpha must be positive, got {self.psi_alpha}")
        if not self.psi_beta < 0:
            raise DataError(f"psi_beta must be negative, got {self.psi_beta}")


@dataclass(frozen=True)
class RunConfig:
    gen: GenConfig = field(default_factory=GenConfig)
    oracle: OracleConfig = field(default_factory=OracleConfig)
    features: FeatureConfig = field(default_factory=FeatureConfig)
    calib: CalibConfig = field(default_factory=CalibConfig)
    target_class: str = "C0"
    calib_fraction: float = 0.6

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))

    def digest(self) -> str:
        return hashlib.sha256(self.to_json().encode()).hexdigest()


def _build(cls, data: dict, path: str):
    kwargs = {}
    names = {f.name: f for f in dataclasses.fields(cls)}
    for key, value in data.items():
        if key not in names:
            raise DataError(f"unknown config key {path}{key}")
        default = getattr(cls(), key)
        if dataclasses.is_dataclass(default):
            if not isinstance(value, dict):
                raise DataError(f"config key {path}{key} must be an object")
            kwargs[key] = _build(type(default), value, f"{path}{key}.")
        elif isinstance(default, tuple):
            kwargs[key] = tuple(value)
        else:
            kwargs[key] = value
    return cls(**kwargs)


def config_from_dict(data: dict) -> RunConfig:
    """Build a RunConfig from a (possibly partial) nested dict of overrides."""
    return _build(RunConfig, data, "")


def load_config(path) -> RunConfig:
    try:
        with open(path, encoding="utf-8") as fh:
            data = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise DataError(f"cannot read config {path}: {exc}") from exc
    if not isinstance(data, dict):
        raise DataError(f"config {path} must hold a JSON object")
    return config_from_dict(data)


def header_lines(cfg: RunConfig) -> list[str]:
    """Comment lines echoing the configuration into an output file."""
    return [
        f"# config_sha256={cfg.digest()} prng={PRNG_NAME}",
        f"# config={cfg.to_json()}",
    ]
