"""Longitudinal tangential fields on the vessel surface.

Three constructions: a deliberately mesh-dependent automatic local frame
(the baseline whose erratic behavior motivates the others), sign-corrected
"flipped" tangents, and centerline-projected tangents.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree

from .centerline import Centerline
from .errors import DegenerateVertexError, DimensionMismatchError, MissingRegionError
from .mesh import SurfaceMesh

DEGENERATE_PROJECTION = 1e-8

METHODS = ("automatic_t1", "automatic_t2", "flipped", "projected")


@dataclass
class TangentField:
    """Per-vertex unit tangents with a construction-method tag.

    Degenerate vertices (no well-defined tangent) carry a zero vector and a
    raised flag; downstream statistics exclude them instead of zero-filling.
    """

    vectors: np.ndarray
    method: str
    degenerate_mask: np.ndarray
    region_labels: np.ndarray | None = None

    def __post_init__(self):
        self.vectors = np.asarray(self.vectors, dtype=float)
        self.degenerate_mask = np.asarray(self.degenerate_mask, dtype=bool)

    @property
    def n_vertices(self) -> int:
        return len(self.vectors)


def automatic_tangent_basis(mesh: SurfaceMesh) -> tuple[TangentField, TangentField]:
    """Mesh-dependent orthonormal frame (t1, t2) in each tangent plane.

    t1 points to the lowest-indexed incident neighbor, projected into the
    tangent plane; t2 = n x t1. The frame intentionally depends on vertex
    indexing: it reproduces the erratic automatically-generated fields that
    make raw longitudinal WSS unreliable, as a baseline for comparison.
    """
    n_vert = mesh.n_vertices
    tris = mesh.triangles
    lowest = np.full(n_vert, np.iinfo(np.int64).max, dtype=np.int64)
    for a, b in ((0, 1), (1, 0), (1, 2), (2, 1), (2, 0), (0, 2)):
        np.minimum.at(lowest, tris[:, a], tris[:, b])
    isolated = lowest == np.iinfo(np.int64).max
    if isolated.any():
        raise DegenerateVertexError(
            f"vertex {np.flatnonzero(isolated)[0]} has no incident triangle"
        )
    e = mesh.vertices[lowest] - mesh.vertices
    e /= np.linalg.norm(e, axis=1)[:, None]
    n = mesh.vertex_normals
    t1 = e - np.einsum("ij,ij->i", e, n)[:, None] * n
    norm1 = np.linalg.norm(t1, axis=1)
    degenerate = norm1 < 1e-12
    t1 = np.where(degenerate[:, None], 0.0, t1 / np.where(degenerate, 1.0, norm1)[:, None])
    t2 = np.cross(n, t1)
    labels = mesh.region_labels
    return (
        TangentField(t1, "automatic_t1", degenerate.copy(), labels),
        TangentField(t2, "automatic_t2", degenerate.copy(), labels),
    )


def _region_map(flow_regions) -> dict[int, np.ndarray]:
    if isinstance(flow_regions, dict):
        items = flow_regions.items()
    else:
        items = flow_regions
    mapping = {}
    for label, vec in items:
        vec = np.asarray(vec, dtype=float)
        mapping[int(label)] = vec / np.linalg.norm(vec)
    return mapping


def flip_tangents(field: TangentField, flow_regions, labels=None) -> TangentField:
    """Sign-correct a tangent field against per-region overall flow vectors.

    Each vertex's tangent is kept or negated so it points within a quarter
    turn of its region's flow vector v: t_l = t sign(t . v). A tangent
    orthogonal to v (sign of exactly 0) is kept with sign +1 and flagged
    degenerate, so the operation is total.
    """
    mapping = _region_map(flow_regions)
    if labels is None:
        labels = field.region_labels
    if labels is None:
        if len(mapping) == 1:
            only = next(iter(mapping))
            labels = np.full(field.n_vertices, only, dtype=np.int64)
        else:
            raise MissingRegionError(
                "no vertex region labels available for multi-region flip"
            )
    labels = np.asarray(labels, dtype=np.int64)
    if labels.shape != (field.n_vertices,):
        raise DimensionMismatchError("labels must have one entry per vertex")
    missing = sorted(set(np.unique(labels)) - set(mapping))
    if missing:
        raise MissingRegionError(f"no flow vector assigned to region(s) {missing}")
    v = np.empty((field.n_vertices, 3))
    for label, vec in mapping.items():
        v[labels == label] = vec
    dot = np.einsum("ij,ij->i", field.vectors, v)
    sign = np.where(dot < 0.0, -1.0, 1.0)
    orthogonal = (dot == 0.0) & ~field.degenerate_mask
    return TangentField(
        field.vectors * sign[:, None],
        "flipped",
        field.degenerate_mask | orthogonal,
        labels,
    )


def project_centerline_tangents(
    mesh: SurfaceMesh,
    cl: Centerline,
    blend: bool = False,
    workers: int = 1,
) -> TangentField:
    """Carry centerline tangents to the surface and project them in-plane.

    Each surface vertex takes the tangent c of its nearest centerline point
    (optionally an inverse-distance blend over the 4 nearest points) and the
    branch label of that point, then removes the normal component:
    t_l = (c - (c.n) n) / ||c - (c.n) n||. Vertices where c is parallel to
    the surface normal are flagged degenerate and excluded downstream.
    """
    points, tangents, branch_ids = cl.stacked()
    tree = cKDTree(points)
    if blend:
        k = min(4, len(points))
        dist, idx = tree.query(mesh.vertices, k=k, workers=workers)
        dist = np.atleast_2d(dist)
        idx = np.atleast_2d(idx)
        w = 1.0 / np.maximum(dist, 1e-12)
        c = np.einsum("nk,nki->ni", w, tangents[idx]) / w.sum(axis=1)[:, None]
        norm_c = np.linalg.norm(c, axis=1)
        c = c / np.where(norm_c < 1e-300, 1.0, norm_c)[:, None]
        labels = branch_ids[idx[:, 0]]
    else:
        _, idx = tree.query(mesh.vertices, workers=workers)
        c = tangents[idx]
        labels = branch_ids[idx]
    n = mesh.vertex_normals
    t = c - np.einsum("ij,ij->i", c, n)[:, None] * n
    norm_t = np.linalg.norm(t, axis=1)
    degenerate = norm_t < DEGENERATE_PROJECTION
    t = np.where(degenerate[:, None], 0.0, t / np.where(degenerate, 1.0, norm_t)[:, None])
    return TangentField(t, "projected", degenerate, labels)


def mean_adjacent_misalignment(mesh: SurfaceMesh, field: TangentField) -> float:
    """Mean of (1 - t.t') over mesh edges with both endpoints non-degenerate.

    Low values mean a spatially uniform field; this quantifies the smoothness
    advantage of projected over flipped tangents.
    """
    edges = mesh.edges()
    ok = ~(field.degenerate_mask[edges[:, 0]] | field.degenerate_mask[edges[:, 1]])
    if not ok.any():
        raise DegenerateVertexError("no edge with two non-degenerate tangents")
    t0 = field.vectors[edges[ok, 0]]
    t1 = field.vectors[edges[ok, 1]]
    return float(np.mean(1.0 - np.einsum("ij,ij->i", t0, t1)))
