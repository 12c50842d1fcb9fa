"""Key/value config file covering every tunable default.

Files are plain text, one `section.key = value` per line, `#` comments.
Values are parsed as int, float, bool, comma-separated float tuple, or string.
Example:

    change.t_r = 0.12
    gridmap.t_unmerge = 0.25
    sensor.odom_sigma = 0.004, 0.004, 0.002
    run.detectors = change, gridmap
"""

from __future__ import annotations

from dataclasses import dataclass, field, fields
from pathlib import Path

import numpy as np

from .detectors.change import ChangeDetectorConfig
from .detectors.entropy import EntropyConfig
from .detectors.gridmap import GridmapDetectorConfig
from .detectors.histogram import HistogramConfig
from .simulate import SensorModel


@dataclass
class FrontendConfig:
    """Graph-building policy of the evaluation pipeline."""

    odom_info: tuple = (400.0, 400.0, 1600.0)  # diagonal of the odometry information
    lc_stride: int = 5        # try a ground-truth loop closure every this many vertices
    lc_min_gap: int = 12      # minimum ordinal gap to an earlier vertex
    lc_radius: float = 1.0    # ground-truth distance limit for loop closures
    lc_info: tuple = (1000.0, 1000.0, 4000.0)
    opt_max_iters: int = 30
    opt_tol: float = 1e-9


@dataclass
class RunConfig:
    detectors: tuple = ("change", "gridmap", "entropy", "histogram")


@dataclass
class Config:
    sensor: SensorModel = field(default_factory=SensorModel)
    change: ChangeDetectorConfig = field(default_factory=ChangeDetectorConfig)
    gridmap: GridmapDetectorConfig = field(default_factory=GridmapDetectorConfig)
    entropy: EntropyConfig = field(default_factory=EntropyConfig)
    histogram: HistogramConfig = field(default_factory=HistogramConfig)
    frontend: FrontendConfig = field(default_factory=FrontendConfig)
    run: RunConfig = field(default_factory=RunConfig)


def _parse_value(text: str):
    text = text.strip()
    if "," in text:
        parts = [p.strip() for p in text.split(",") if p.strip()]
        try:
            return tuple(float(p) for p in parts)
        except ValueError:
            return tuple(parts)
    if text.lower() in ("true", "false"):
        return text.lower() == "true"
    try:
        return int(text)
    except ValueError:
        pass
    try:
        return float(text)
    except ValueError:
        pass
    return text


def apply_override(cfg: Config, dotted_key: str, raw_value: str) -> None:
    try:
        section_name, key = dotted_key.split(".", 1)
    except ValueError:
        raise ValueError(f"config key must look like section.key, got {dotted_key!r}")
    try:
        section = getattr(cfg, section_name)
    except AttributeError:
        raise ValueError(f"unknown config section {section_name!r}")
    if not any(f.name == key for f in fields(section)):
        raise ValueError(f"unknown config key {dotted_key!r}")
    current = getattr(section, key)
    value = _parse_value(raw_value)
    if isinstance(current, float) and isinstance(value, int):
        value = float(value)
    if isinstance(current, tuple) and isinstance(value, (int, float)):
        value = (value,)
    setattr(section, key, value)


def load_config(path=None, overrides: dict | None = None) -> Config:
    """Defaults, then file entries, then explicit overrides."""
    cfg = Config()
    if path is not None:
        for lineno, line in enumerate(Path(path).read_text().splitlines(), start=1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"{path}:{lineno}: expected 'key = value'")
            key, value = line.split("=", 1)
            apply_override(cfg, key.strip(), value)
    for key, value in (overrides or {}).items():
        apply_override(cfg, key, str(value))
    return cfg


def odom_information(cfg: Config) -> np.ndarray:
    return np.diag(cfg.frontend.odom_info)


def lc_information(cfg: Config) -> np.ndarray:
    return np.diag(cfg.frontend.lc_info)
