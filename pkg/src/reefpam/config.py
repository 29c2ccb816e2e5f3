"""Run configuration with strict YAML loading.

Unknown keys are rejected rather than ignored, so a typo in a config file
fails loudly instead of silently running with defaults. Command-line flags
override file values; the REEFPAM_CONFIG environment variable supplies a
default config path.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field, fields
from pathlib import Path

import yaml

from .dsp import BandSpec

ENV_CONFIG = "REEFPAM_CONFIG"


class ConfigError(Exception):
    pass


@dataclass
class BandsConfig:
    low: tuple[float, float] = (100.0, 1000.0)
    high: tuple[float, float] = (1000.0, 48000.0)

    def low_band(self) -> BandSpec:
        return BandSpec(self.low[0], self.low[1], "low")

    def high_band(self) -> BandSpec:
        return BandSpec(self.high[0], self.high[1], "high")


@dataclass
class AciConfig:
    step_s: float = 0.128
    overlap: float = 0.5
    window: str = "hann"
    segment_s: float = 5.0  # temporal segment length fed to the ACI sum

    def __post_init__(self):
        if not (0 <= self.overlap < 1):
            raise ConfigError("aci.overlap must be in [0, 1)")
        if self.step_s <= 0 or self.segment_s <= 0:
            raise ConfigError("aci step_s and segment_s must be positive")


@dataclass
class SnapConfig:
    percentile: float = 99.9
    refractory_ms: float = 2.0
    high_band_prefilter: bool = False

    def __post_init__(self):
        if not (0 < self.percentile < 100):
            raise ConfigError("snap.percentile must be in (0, 100)")
        if self.refractory_ms <= 0:
            raise ConfigError("snap.refractory_ms must be positive")


@dataclass
class RunConfig:
    bands: BandsConfig = field(default_factory=BandsConfig)
    segment_len_s: float = 60.0
    aci: AciConfig = field(default_factory=AciConfig)
    snap: SnapConfig = field(default_factory=SnapConfig)
    seed: int = 0
    workers: int = 1
    out_dir: str = "out"

    def __post_init__(self):
        if self.segment_len_s <= 0:
            raise ConfigError("segment_len_s must be positive")
        if self.workers < 1:
            raise ConfigError("workers must be at least 1")


def _build(cls, data: dict, path: str):
    known = {f.name: f for f in fields(cls)}
    unknown = set(data) - set(known)
    if unknown:
        raise ConfigError(f"unknown config keys at {path}: {sorted(unknown)}")
    kwargs = {}
    for name, value in data.items():
        ftype = known[name].type
        if name == "bands":
            kwargs[name] = _build(BandsConfig, value, f"{path}.bands")
        elif name == "aci":
            kwargs[name] = _build(AciConfig, value, f"{path}.aci")
        elif name == "snap":
            kwargs[name] = _build(SnapConfig, value, f"{path}.snap")
        elif name in ("low", "high"):
            if not (isinstance(value, (list, tuple)) and len(value) == 2):
                raise ConfigError(f"{path}.{name} must be a [lo_hz, hi_hz] pair")
            kwargs[name] = (float(value[0]), float(value[1]))
        else:
            kwargs[name] = value
    return cls(**kwargs)


def load_config(path: str | Path | None = None) -> RunConfig:
    """Load a RunConfig from YAML; defaults when no path or env var is set."""
    if path is None:
        path = os.environ.get(ENV_CONFIG) or None
    if path is None:
        return RunConfig()
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    with open(path) as fh:
        data = yaml.safe_load(fh) or {}
    if not isinstance(data, dict):
        raise ConfigError("config root must be a mapping")
    return _build(RunConfig, data, "config")
