from .io import MeditParseError, read_medit, read_sol, read_sol_values, write_medit, write_sol, write_vtk
from .mesh import (
    MeshError,
    SimplicialMesh,
    check_validity,
    detect_corners,
    exterior_facets,
    signed_measures,
    structured_mesh,
)
from .quality import (
    STATS_HEADER,
    MeshStatistics,
    aspect_ratio,
    aspect_ratios,
    qualities,
    quality,
    read_statistics_csv,
    statistics,
    statistics_csv,
    triangle_quality,
)

__all__ = [
    "MeditParseError",
    "MeshError",
    "MeshStatistics",
    "STATS_HEADER",
    "SimplicialMesh",
    "aspect_ratio",
    "aspect_ratios",
    "check_validity",
    "detect_corners",
    "exterior_facets",
    "qualities",
    "quality",
    "read_medit",
    "read_sol",
    "read_sol_values",
    "read_statistics_csv",
    "signed_measures",
    "statistics",
    "statistics_csv",
    "structured_mesh",
    "triangle_quality",
    "write_medit",
    "write_sol",
    "write_vtk",
]
