"""Metric-based anisotropic mesh adaptation toolkit."""

from .meshkit import MeshError, SimplicialMesh, structured_mesh
from .metric import AdaptOptions, MetricField

__all__ = [
    "AdaptOptions",
    "MeshError",
    "MetricField",
    "SimplicialMesh",
    "structured_mesh",
]

__version__ = "0.1.0"
