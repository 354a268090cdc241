"""Mesh-refinement studies: field projection, weighted L2 errors, EOC.

Fields move between meshes by closest-point P1 interpolation; errors use
mass-lumped vertex quadrature normalized by the total measure, so a constant
difference evaluates to itself on any mesh; the experimental order of
convergence compares consecutive refinement levels.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree

from .errors import (
    DimensionMismatchError,
    NonPositiveInputError,
    OutOfDomainError,
    ParseError,
)
from .mesh import SurfaceMesh, TetMesh, mean_mesh_size

ZERO_ERROR_FLOOR = 1e-14


def _closest_point_barycentric(p, a, b, c):
    """Closest point on triangles (a, b, c) to points p, as barycentrics.

    Vectorized region classification; returns (bary (m, 3), distance (m,)).
    """
    ab = b - a
    ac = c - a
    ap = p - a
    d1 = np.einsum("ij,ij->i", ab, ap)
    d2 = np.einsum("ij,ij->i", ac, ap)
    bp = p - b
    d3 = np.einsum("ij,ij->i", ab, bp)
    d4 = np.einsum("ij,ij->i", ac, bp)
    cp = p - c
    d5 = np.einsum("ij,ij->i", ab, cp)
    d6 = np.einsum("ij,ij->i", ac, cp)
    va = d3 * d6 - d5 * d4
    vb = d5 * d2 - d1 * d6
    vc = d1 * d4 - d3 * d2

    def safe_div(num, den):
        return num / np.where(np.abs(den) < 1e-300, 1.0, den)

    v_ab = safe_div(d1, d1 - d3)
    w_ac = safe_div(d2, d2 - d6)
    w_bc = safe_div(d4 - d3, (d4 - d3) + (d5 - d6))
    denom = safe_div(np.ones_like(va), va + vb + vc)
    v_in = vb * denom
    w_in = vc * denom

    zeros = np.zeros_like(d1)
    ones = np.ones_like(d1)
    conditions = [
        (d1 <= 0) & (d2 <= 0),                      # vertex a
        (d3 >= 0) & (d4 <= d3),                     # vertex b
        (d6 >= 0) & (d5 <= d6),                     # vertex c
        (vc <= 0) & (d1 >= 0) & (d3 <= 0),          # edge ab
        (vb <= 0) & (d2 >= 0) & (d6 <= 0),          # edge ac
        (va <= 0) & (d4 - d3 >= 0) & (d5 - d6 >= 0),  # edge bc
    ]
    u_choices = [ones, zeros, zeros, 1 - v_ab, 1 - w_ac, zeros]
    v_choices = [zeros, ones, zeros, v_ab, zeros, 1 - w_bc]
    w_choices = [zeros, zeros, ones, zeros, w_ac, w_bc]
    u = np.select(conditions, u_choices, default=1 - v_in - w_in)
    v = np.select(conditions, v_choices, default=v_in)
    w = np.select(conditions, w_choices, default=w_in)
    bary = np.stack([u, v, w], axis=1)
    closest = u[:, None] * a + v[:, None] * b + w[:, None] * c
    return bary, np.linalg.norm(p - closest, axis=1)


def _project_surface(coarse: SurfaceMesh, values: np.ndarray, points: np.ndarray,
                     tolerance: float, workers: int):
    tris = coarse.triangles
    corners = coarse.vertices[tris]
    centroids = corners.mean(axis=1)
    tree = cKDTree(centroids)
    k = min(24, len(tris))
    _, cand = tree.query(points, k=k, workers=workers)
    cand = cand.reshape(len(points), k)

    best_dist = np.full(len(points), np.inf)
    best_bary = np.zeros((len(points), 3))
    best_tri = np.zeros(len(points), dtype=np.int64)
    for col in range(k):
        tri_idx = cand[:, col]
        a, b, c = (corners[tri_idx, 0], corners[tri_idx, 1], corners[tri_idx, 2])
        bary, dist = _closest_point_barycentric(points, a, b, c)
        better = dist < best_dist
        best_dist[better] = dist[better]
        best_bary[better] = bary[better]
        best_tri[better] = tri_idx[better]

    far = np.flatnonzero(best_dist > tolerance)
    if far.size:
        # exhaustive re-check for points the candidate set missed
        for i in far:
            p = np.broadcast_to(points[i], (len(tris), 3))
            bary, dist = _closest_point_barycentric(
                p, corners[:, 0], corners[:, 1], corners[:, 2]
            )
            j = int(np.argmin(dist))
            best_dist[i] = dist[j]
            best_bary[i] = bary[j]
            best_tri[i] = j
        still = best_dist > tolerance
        if still.any():
            i = int(np.flatnonzero(still)[0])
            raise OutOfDomainError(
                f"point {i} lies {best_dist[i]:.4g} mm from the coarse surface "
                f"(tolerance {tolerance:.4g} mm)"
            )
    vert_ids = tris[best_tri]
    return np.einsum("nk,nk...->n...", best_bary, values[vert_ids])


def _project_volume(coarse: TetMesh, values: np.ndarray, points: np.ndarray,
                    tolerance: float, workers: int):
    tets = coarse.tets
    corners = coarse.vertices[tets]
    centroids = corners.mean(axis=1)
    tree = cKDTree(centroids)
    k = min(24, len(tets))
    _, cand = tree.query(points, k=k, workers=workers)
    cand = cand.reshape(len(points), k)

    best_pen = np.full(len(points), np.inf)  # negative barycentric excess
    best_bary = np.zeros((len(points), 4))
    best_tet = np.zeros(len(points), dtype=np.int64)
    for col in range(k):
        tet_idx = cand[:, col]
        a = corners[tet_idx, 0]
        mats = np.stack(
            [corners[tet_idx, 1] - a, corners[tet_idx, 2] - a, corners[tet_idx, 3] - a],
            axis=2,
        )
        lam = np.linalg.solve(mats, (points - a)[..., None])[..., 0]
        bary = np.concatenate([(1 - lam.sum(axis=1))[:, None], lam], axis=1)
        pen = np.maximum(-bary.min(axis=1), 0.0)
        better = pen < best_pen
        best_pen[better] = pen[better]
        best_bary[better] = bary[better]
        best_tet[better] = tet_idx[better]
    # clip slightly-outside points to the element and renormalize
    size = np.cbrt(np.abs(coarse.volumes()).mean())
    if np.any(best_pen * size > tolerance):
        i = int(np.argmax(best_pen))
        raise OutOfDomainError(f"point {i} lies outside the coarse tet mesh")
    bary = np.maximum(best_bary, 0.0)
    bary /= bary.sum(axis=1)[:, None]
    return np.einsum("nk,nk...->n...", bary, values[tets[best_tet]])


def project_field(coarse_mesh, coarse_field, fine_mesh, tolerance: float | None = None,
                  workers: int = 1) -> np.ndarray:
    """P1-interpolate a per-vertex field from a coarse mesh onto a fine one.

    Each fine vertex takes the barycentric interpolation at its closest
    point on the coarse mesh. Raises OutOfDomainError when that closest
    point is farther than the tolerance (default half the coarse mesh size),
    which separates real domain mismatch from curvature gaps between
    refinement levels.
    """
    values = np.asarray(coarse_field, dtype=float)
    points = fine_mesh.vertices if hasattr(fine_mesh, "vertices") else np.asarray(fine_mesh)
    if isinstance(coarse_mesh, SurfaceMesh):
        if values.shape[0] != coarse_mesh.n_vertices:
            raise DimensionMismatchError("field does not match coarse mesh vertices")
        if tolerance is None:
            tolerance = 0.5 * coarse_mesh.mean_edge_length()
        return _project_surface(coarse_mesh, values, points, tolerance, workers)
    if isinstance(coarse_mesh, TetMesh):
        if values.shape[0] != len(coarse_mesh.vertices):
            raise DimensionMismatchError("field does not match coarse mesh vertices")
        if tolerance is None:
            tolerance = 0.5 * mean_mesh_size(coarse_mesh)
        return _project_volume(coarse_mesh, values, points, tolerance, workers)
    raise ParseError(f"unsupported coarse mesh type {type(coarse_mesh)!r}")


def lumped_vertex_measure(mesh, measure: str = "surface") -> np.ndarray:
    """Per-vertex quadrature weights: one third/fourth of incident elements."""
    if measure == "surface":
        if not isinstance(mesh, SurfaceMesh):
            raise ParseError("surface measure needs a SurfaceMesh")
        areas = mesh.triangle_areas()
        w = np.zeros(mesh.n_vertices)
        for k in range(3):
            np.add.at(w, mesh.triangles[:, k], areas / 3.0)
        return w
    if measure == "volume":
        if not isinstance(mesh, TetMesh):
            raise ParseError("volume measure needs a TetMesh")
        vols = np.abs(mesh.volumes())
        w = np.zeros(len(mesh.vertices))
        for k in range(4):
            np.add.at(w, mesh.tets[:, k], vols / 4.0)
        return w
    raise ParseError(f"unknown measure {measure!r}")


def weighted_l2_error(field_i, field_ref, mesh_ref, measure: str = "surface") -> float:
    """Normalized L2 distance (1/sqrt|domain|) ||f_i - f_ref|| by lumped quadrature.

    Both fields live on mesh_ref (project first). Vector fields use the
    Euclidean norm of the pointwise difference.
    """
    fi = np.asarray(field_i, dtype=float)
    fr = np.asarray(field_ref, dtype=float)
    if fi.shape != fr.shape:
        raise DimensionMismatchError(
            f"field shapes differ: {fi.shape} vs {fr.shape}"
        )
    w = lumped_vertex_measure(mesh_ref, measure)
    if fi.shape[0] != len(w):
        raise DimensionMismatchError("fields do not match mesh_ref vertices")
    diff = fi - fr
    sq = diff**2 if diff.ndim == 1 else (diff**2).reshape(len(diff), -1).sum(axis=1)
    return float(np.sqrt((w * sq).sum() / w.sum()))


def eoc(errs, hs) -> list[float]:
    """Experimental order of convergence between consecutive meshes."""
    errs = np.asarray(errs, dtype=float)
    hs = np.asarray(hs, dtype=float)
    if errs.shape != hs.shape or errs.ndim != 1 or len(errs) < 2:
        raise NonPositiveInputError("need matching err/h lists of length >= 2")
    if np.any(errs <= 0) or np.any(hs <= 0):
        raise NonPositiveInputError("errors and mesh sizes must be positive")
    return list(np.log(errs[:-1] / errs[1:]) / np.log(hs[:-1] / hs[1:]))


@dataclass
class ConvergenceRow:
    mesh_id: int
    element_count: int | None
    h: float
    errors: dict[str, float]
    eoc: dict[str, float | None]


@dataclass
class ConvergenceReport:
    """Per-mesh (h, err, EOC) table against a reference solution."""

    rows: list[ConvergenceRow]
    field_names: list[str]
    reference_id: int | None = None
    measure: str = "surface"

    def eoc_column(self, name: str) -> list[float]:
        return [r.eoc[name] for r in self.rows if r.eoc[name] is not None]

    def mean_eoc(self, name: str) -> float:
        col = self.eoc_column(name)
        return float(np.mean(col)) if col else float("nan")


def _eoc_with_guard(errs, hs):
    out: list[float | None] = []
    for i in range(len(errs) - 1):
        if errs[i] < ZERO_ERROR_FLOOR or errs[i + 1] < ZERO_ERROR_FLOOR:
            out.append(None)
        else:
            out.append(eoc(errs[i : i + 2], hs[i : i + 2])[0])
    out.append(None)
    return out


def report_from_error_table(hs, errors_by_name: dict, element_counts=None,
                            measure: str = "surface") -> ConvergenceReport:
    """Build a report from already-computed (h, err) columns (ingestion mode)."""
    hs = np.asarray(hs, dtype=float)
    if np.any(np.diff(hs) >= 0):
        raise NonPositiveInputError("mesh sizes must be strictly decreasing")
    names = list(errors_by_name)
    columns = {}
    for name in names:
        errs = np.asarray(errors_by_name[name], dtype=float)
        if errs.shape != hs.shape:
            raise DimensionMismatchError(f"error column {name!r} length mismatch")
        columns[name] = _eoc_with_guard(errs, hs)
    rows = []
    for i, h in enumerate(hs):
        count = None if element_counts is None else int(element_counts[i])
        rows.append(
            ConvergenceRow(
                mesh_id=i + 1,
                element_count=count,
                h=float(h),
                errors={n: float(errors_by_name[n][i]) for n in names},
                eoc={n: columns[n][i] for n in names},
            )
        )
    return ConvergenceReport(rows, names, reference_id=None, measure=measure)


def run_convergence_study(meshes, fields_by_name: dict, reference_id: int = -1,
                          measure: str = "surface", hs=None,
                          workers: int = 1) -> ConvergenceReport:
    """Project every field to the reference mesh and tabulate errors and EOC.

    `meshes` are ordered by decreasing mesh size with the reference (finest)
    among them; `fields_by_name` maps a column name to one per-vertex field
    per mesh. Near-zero errors are guarded (EOC flagged None, not NaN).
    """
    n = len(meshes)
    reference_id = reference_id % n
    ref_mesh = meshes[reference_id]
    if hs is None:
        hs = [
            m.mean_edge_length() if isinstance(m, SurfaceMesh) else mean_mesh_size(m)
            for m in meshes
        ]
    hs = list(map(float, hs))
    order = [i for i in range(n) if i != reference_id]
    if any(hs[order[i]] <= hs[order[i + 1]] for i in range(len(order) - 1)):
        raise NonPositiveInputError("meshes must be ordered by decreasing h")

    names = list(fields_by_name)
    errors = {name: [] for name in names}
    for i in order:
        for name in names:
            ref_field = np.asarray(fields_by_name[name][reference_id], dtype=float)
            projected = project_field(meshes[i], fields_by_name[name][i], ref_mesh,
                                      workers=workers)
            errors[name].append(
                weighted_l2_error(projected, ref_field, ref_mesh, measure)
            )
    row_hs = [hs[i] for i in order]
    columns = {name: _eoc_with_guard(errors[name], row_hs) for name in names}
    rows = []
    for pos, i in enumerate(order):
        mesh = meshes[i]
        count = mesh.n_triangles if isinstance(mesh, SurfaceMesh) else len(mesh.tets)
        rows.append(
            ConvergenceRow(
                mesh_id=i + 1,
                element_count=count,
                h=row_hs[pos],
                errors={n_: errors[n_][pos] for n_ in names},
                eoc={n_: columns[n_][pos] for n_ in names},
            )
        )
    return ConvergenceReport(rows, names, reference_id=reference_id + 1,
                             measure=measure)
