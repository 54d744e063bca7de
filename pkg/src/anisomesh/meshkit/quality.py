"""
Element shape measures and whole-mesh statistics.
"""
from __future__ import annotations

import csv
import io
from dataclasses import asdict, dataclass, fields

import numpy as np

from .mesh import SimplicialMesh

STATS_HEADER = (
    "elements",
    "vertices",
    "ar_max",
    "ar_mean",
    "ar_std",
    "frac_ar_gt2",
    "measure_min",
    "measure_max",
)


def _triangle_aspect_ratios(x):
    a = np.linalg.norm(x[:, 1] - x[:, 2], axis=-1)
    b = np.linalg.norm(x[:, 2] - x[:, 0], axis=-1)
    c = np.linalg.norm(x[:, 0] - x[:, 1], axis=-1)
    e1, e2 = x[:, 1] - x[:, 0], x[:, 2] - x[:, 0]
    if x.shape[-1] == 2:
        area = 0.5 * np.abs(e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0])
    else:
        area = 0.5 * np.linalg.norm(np.cross(e1, e2), axis=-1)
    s = 0.5 * (a + b + c)
    with np.errstate(divide="ignore", invalid="ignore"):
        circum = a * b * c / (4.0 * area)
        inradius = area / s
        ar = circum / (2.0 * inradius)
    return np.where(area > 0, ar, np.inf)


def _tetra_aspect_ratios(x):
    e = x[:, 1:] - x[:, :1]
    vol = np.abs(np.linalg.det(e)) / 6.0
    faces = [(1, 2, 3), (0, 2, 3), (0, 1, 3), (0, 1, 2)]
    area_sum = np.zeros(len(x))
    for f in faces:
        y = x[:, f]
        area_sum += 0.5 * np.linalg.norm(np.cross(y[:, 1] - y[:, 0], y[:, 2] - y[:, 0]), axis=-1)
    # circumcentre c solves 2 e_i . c = |e_i|^2 relative to vertex 0
    rhs = 0.5 * np.einsum("kij,kij->ki", e, e)
    ok = vol > 0
    circum = np.full(len(x), np.inf)
    if ok.any():
        centre = np.linalg.solve(e[ok], rhs[ok][..., None])[..., 0]
        circum[ok] = np.linalg.norm(centre, axis=-1)
    with np.errstate(divide="ignore", invalid="ignore"):
        inradius = 3.0 * vol / area_sum
        ar = circum / (3.0 * inradius)
    return np.where(ok, ar, np.inf)


def aspect_ratios(mesh: SimplicialMesh) -> np.ndarray:
    """Circumradius over ``d`` times inradius for every cell; 1 for regular simplices."""
    x = mesh.points[mesh.cells]
    if mesh.dim == 2:
        return _triangle_aspect_ratios(x)
    return _tetra_aspect_ratios(x)


def aspect_ratio(mesh: SimplicialMesh, cell: int) -> float:
    x = mesh.points[mesh.cells[[cell]]]
    if mesh.dim == 2:
        return float(_triangle_aspect_ratios(x)[0])
    return float(_tetra_aspect_ratios(x)[0])


def triangle_quality(x, m):
    """
    Metric shape measure of triangles.

    :arg x: ``(k, 3, 2)`` vertex coordinates
    :arg m: ``(k, 3, 2, 2)`` vertex metrics
    :returns: ``(k,)`` values, 1 for a triangle that is equilateral under the
        vertex-averaged metric and larger for worse shapes; ``inf`` if degenerate
    """
    mbar = m.mean(axis=1)
    e = np.stack([x[:, 1] - x[:, 0], x[:, 2] - x[:, 1], x[:, 0] - x[:, 2]], axis=1)
    sq = np.einsum("kei,kij,kej->k", e, mbar, e)
    det = mbar[:, 0, 0] * mbar[:, 1, 1] - mbar[:, 0, 1] * mbar[:, 1, 0]
    area = 0.5 * (e[:, 0, 0] * e[:, 1, 1] - e[:, 0, 1] * e[:, 1, 0])
    area_m = np.sqrt(np.maximum(det, 0.0)) * area
    with np.errstate(divide="ignore", invalid="ignore"):
        q = sq / (4.0 * np.sqrt(3.0) * area_m)
    return np.where(area_m > 0, q, np.inf)


def quality(mesh: SimplicialMesh, metric, cell: int) -> float:
    """Metric quality of a single triangle (see :func:`triangle_quality`)."""
    if mesh.dim != 2:
        raise ValueError("metric quality is defined for triangles only")
    values = getattr(metric, "values", metric)
    tri = mesh.cells[cell]
    return float(triangle_quality(mesh.points[tri][None], values[tri][None])[0])


def qualities(mesh: SimplicialMesh, metric) -> np.ndarray:
    values = getattr(metric, "values", metric)
    return triangle_quality(mesh.points[mesh.cells], values[mesh.cells])


@dataclass
class MeshStatistics:
    element_count: int
    vertex_count: int
    ar_max: float
    ar_mean: float
    ar_std: float
    frac_ar_gt2: float
    measure_min: float
    measure_max: float

    def as_row(self) -> list:
        return [
            self.element_count,
            self.vertex_count,
            self.ar_max,
            self.ar_mean,
            self.ar_std,
            self.frac_ar_gt2,
            self.measure_min,
            self.measure_max,
        ]

    def asdict(self) -> dict:
        return asdict(self)


def statistics(mesh: SimplicialMesh) -> MeshStatistics:
    if mesh.num_cells == 0:
        raise ValueError("statistics of an empty mesh are undefined")
    ar = aspect_ratios(mesh)
    meas = mesh.measures
    return MeshStatistics(
        element_count=mesh.num_cells,
        vertex_count=mesh.num_vertices,
        ar_max=float(ar.max()),
        # summation roundoff can lift the mean of equal values above their max
        ar_mean=float(min(ar.mean(), ar.max())),
        ar_std=float(ar.std()),
        frac_ar_gt2=float(np.mean(ar > 2.0)),
        measure_min=float(meas.min()),
        measure_max=float(meas.max()),
    )


def statistics_csv(stats_list, comment: str | None = None) -> str:
    """Render statistics rows under the fixed CSV header."""
    buf = io.StringIO()
    if comment:
        for line in comment.splitlines():
            buf.write(f"# {line}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(STATS_HEADER)
    for s in stats_list:
        writer.writerow([repr(v) if isinstance(v, float) else v for v in s.as_row()])
    return buf.getvalue()


def read_statistics_csv(text: str) -> list[MeshStatistics]:
    lines = [ln for ln in text.splitlines() if ln and not ln.startswith("#")]
    reader = csv.reader(lines)
    header = next(reader)
    if tuple(header) != STATS_HEADER:
        raise ValueError(f"unexpected statistics header {header}")
    out = []
    types = [f.type for f in fields(MeshStatistics)]
    for row in reader:
        vals = [int(v) if t in (int, "int") else float(v) for v, t in zip(row, types)]
        out.append(MeshStatistics(*vals))
    return out
