"""Invalid-merge detectors: change detection, gridmap, entropy, histogram."""

from .base import DetectorReport
from .change import ChangeDetector, ChangeDetectorConfig, ClassLabel, fuse
from .entropy import EntropyConfig, EntropyDetector
from .gridmap import GridmapDetector, GridmapDetectorConfig
from .histogram import HistogramConfig, HistogramDetector

__all__ = [
    "DetectorReport",
    "ChangeDetector",
    "ChangeDetectorConfig",
    "ClassLabel",
    "fuse",
    "EntropyConfig",
    "EntropyDetector",
    "GridmapDetector",
    "GridmapDetectorConfig",
    "HistogramConfig",
    "HistogramDetector",
]


def make_detector(name: str, config):
    """Instantiate a detector by name using the matching section of `config`."""
    if name == "change":
        return ChangeDetector(config.change)
    if name == "gridmap":
        return GridmapDetector(config.gridmap)
    if name == "entropy":
        return EntropyDetector(config.entropy)
    if name == "histogram":
        return HistogramDetector(config.histogram)
    raise ValueError(f"unknown detector {name!r}")
