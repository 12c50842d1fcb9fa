"""Shared detector types."""

from __future__ import annotations

from dataclasses import dataclass


@dataclass
class DetectorReport:
    """Per-vertex invalidity verdict of one detector."""

    detector: str
    vertex_id: int
    score: float
    alarm: bool
    compute_ms: float
