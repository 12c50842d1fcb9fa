"""Multi-epoch pose-graph management with online invalid-merge detection."""

from .geometry import Pose2, rotation_about, wrap_angle
from .model import Edge, GraphSnapshot, GraphStore, Scan, SlamGraph, Vertex
from .optimize import OptimizationResult, optimize

__all__ = [
    "Pose2",
    "rotation_about",
    "wrap_angle",
    "Edge",
    "GraphSnapshot",
    "GraphStore",
    "Scan",
    "SlamGraph",
    "Vertex",
    "OptimizationResult",
    "optimize",
]

__version__ = "0.1.0"
