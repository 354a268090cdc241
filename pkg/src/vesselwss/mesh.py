"""Triangulated surface meshes: loading, validation, normals, size statistics.

Meshes are immutable after construction (arrays are locked), so all queries
are safe for concurrent use. Coordinates are millimetres throughout.
"""

from __future__ import annotations

import os
from collections import deque
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    DegenerateVertexError,
    EmptyMeshError,
    ParseError,
    TopologyError,
)

MIN_TRIANGLE_AREA = 1e-12  # mm^2


def _as_float_array(x, name: str) -> np.ndarray:
    arr = np.asarray(x, dtype=float)
    if arr.ndim != 2 or arr.shape[1] != 3:
        raise ParseError(f"{name} must have shape (n, 3), got {arr.shape}")
    return arr


def triangle_normals_areas(vertices: np.ndarray, triangles: np.ndarray):
    """Unit face normals and areas for each triangle."""
    p0 = vertices[triangles[:, 0]]
    p1 = vertices[triangles[:, 1]]
    p2 = vertices[triangles[:, 2]]
    cross = np.cross(p1 - p0, p2 - p0)
    double_area = np.linalg.norm(cross, axis=1)
    areas = 0.5 * double_area
    with np.errstate(invalid="ignore", divide="ignore"):
        normals = cross / double_area[:, None]
    return normals, areas


def triangle_areas(vertices: np.ndarray, triangles: np.ndarray) -> np.ndarray:
    return triangle_normals_areas(vertices, triangles)[1]


def vertex_normals(vertices: np.ndarray, triangles: np.ndarray) -> np.ndarray:
    """Area-weighted average of incident face normals, normalized per vertex.

    The cross product of two triangle edges already carries twice the face
    area, so accumulating raw cross products gives the area weighting.
    Raises DegenerateVertexError if a vertex has no incident face area.
    """
    p0 = vertices[triangles[:, 0]]
    p1 = vertices[triangles[:, 1]]
    p2 = vertices[triangles[:, 2]]
    cross = np.cross(p1 - p0, p2 - p0)
    acc = np.zeros_like(vertices)
    for k in range(3):
        np.add.at(acc, triangles[:, k], cross)
    norms = np.linalg.norm(acc, axis=1)
    bad = np.flatnonzero(norms < 1e-300)
    if bad.size:
        raise DegenerateVertexError(
            f"vertex {bad[0]} has no incident face area (isolated or degenerate)"
        )
    return acc / norms[:, None]


def signed_volume(vertices: np.ndarray, triangles: np.ndarray) -> float:
    """Signed enclosed volume; positive for outward-wound closed meshes."""
    p0 = vertices[triangles[:, 0]]
    p1 = vertices[triangles[:, 1]]
    p2 = vertices[triangles[:, 2]]
    return float(np.einsum("ij,ij->i", p0, np.cross(p1, p2)).sum() / 6.0)


def _edge_map(triangles: np.ndarray):
    """Map sorted undirected edge -> list of incident triangle indices."""
    edges: dict[tuple[int, int], list[int]] = {}
    for t, (a, b, c) in enumerate(triangles):
        for u, v in ((a, b), (b, c), (c, a)):
            key = (u, v) if u < v else (v, u)
            edges.setdefault(key, []).append(t)
    return edges


def orient_consistently(
    vertices: np.ndarray, triangles: np.ndarray, flip: bool = False
) -> np.ndarray:
    """Return triangles rewound so shared edges are traversed oppositely.

    Each connected component gets a consistent winding by breadth-first
    propagation. Closed components are flipped so their signed volume is
    positive (outward normals); open components keep the majority of their
    original windings, inverted when `flip` is set.
    Raises TopologyError for non-manifold edges or non-orientable sheets.
    """
    n_tri = len(triangles)
    tris = triangles.copy()
    edges = _edge_map(tris)
    for key, incident in edges.items():
        if len(incident) > 2:
            raise TopologyError(
                f"non-manifold edge {key} shared by {len(incident)} triangles"
            )

    neighbors: list[list[int]] = [[] for _ in range(n_tri)]
    for incident in edges.values():
        if len(incident) == 2:
            t0, t1 = incident
            neighbors[t0].append(t1)
            neighbors[t1].append(t0)

    def directed_edges(t: int) -> set[tuple[int, int]]:
        a, b, c = tris[t]
        if flipped[t]:
            a, c = c, a
        return {(a, b), (b, c), (c, a)}

    flipped = np.zeros(n_tri, dtype=bool)
    assigned = np.zeros(n_tri, dtype=bool)
    component = np.full(n_tri, -1, dtype=int)
    n_comp = 0
    for seed in range(n_tri):
        if assigned[seed]:
            continue
        comp_id = n_comp
        n_comp += 1
        assigned[seed] = True
        component[seed] = comp_id
        queue = deque([seed])
        while queue:
            t = queue.popleft()
            directed = directed_edges(t)
            for nb in neighbors[t]:
                # consistent winding traverses a shared edge in opposite
                # directions, i.e. no directed edge coincides
                conflict = bool(directed & directed_edges(nb))
                if not assigned[nb]:
                    assigned[nb] = True
                    component[nb] = comp_id
                    flipped[nb] = conflict
                    queue.append(nb)
                elif conflict:
                    raise TopologyError(
                        f"non-orientable surface near triangles {t}, {nb}"
                    )

    boundary_comps = set()
    for key, incident in edges.items():
        if len(incident) == 1:
            boundary_comps.add(component[incident[0]])

    for comp_id in range(n_comp):
        in_comp = component == comp_id
        comp_flip = flipped & in_comp
        if comp_id in boundary_comps:
            # open sheet: keep the majority winding, then honour `flip`
            invert = comp_flip.sum() * 2 > in_comp.sum()
            if flip:
                invert = not invert
        else:
            ids = np.flatnonzero(in_comp)
            trial = tris[ids].copy()
            swap = flipped[ids]
            trial[swap] = trial[swap][:, ::-1]
            invert = signed_volume(vertices, trial) < 0.0
        if invert:
            flipped[in_comp] = ~flipped[in_comp]

    tris[flipped] = tris[flipped][:, ::-1]
    return tris


@dataclass
class SurfaceMesh:
    """Triangulated vessel wall with outward unit vertex normals.

    vertices: (n, 3) positions in mm; triangles: (m, 3) vertex indices;
    vertex_normals: (n, 3) unit vectors; region_labels: optional (n,)
    integer branch identifiers.
    """

    vertices: np.ndarray
    triangles: np.ndarray
    vertex_normals: np.ndarray
    region_labels: np.ndarray | None = None

    @classmethod
    def build(
        cls,
        vertices,
        triangles,
        flip: bool = False,
        region_labels=None,
    ) -> "SurfaceMesh":
        """Validate, orient, and finish a raw vertex/triangle soup."""
        verts = _as_float_array(vertices, "vertices")
        tris = np.asarray(triangles, dtype=np.int64)
        if tris.ndim != 2 or tris.shape[1] != 3:
            raise ParseError(f"triangles must have shape (m, 3), got {tris.shape}")
        if len(tris) == 0:
            raise EmptyMeshError("mesh has no triangles")
        if tris.min() < 0 or tris.max() >= len(verts):
            raise ParseError(
                f"triangle index out of range: max {tris.max()} "
                f"for {len(verts)} vertices"
            )
        areas = triangle_areas(verts, tris)
        small = np.flatnonzero(areas <= MIN_TRIANGLE_AREA)
        if small.size:
            raise ParseError(
                f"degenerate triangle {small[0]} (area {areas[small[0]]:.3e} mm^2)"
            )
        tris = orient_consistently(verts, tris, flip=flip)
        normals = vertex_normals(verts, tris)
        labels = None
        if region_labels is not None:
            labels = np.asarray(region_labels, dtype=np.int64)
            if labels.shape != (len(verts),):
                raise ParseError("region_labels must have one entry per vertex")
        mesh = cls(verts, tris, normals, labels)
        mesh._freeze()
        return mesh

    def _freeze(self):
        self.vertices.flags.writeable = False
        self.triangles.flags.writeable = False
        self.vertex_normals.flags.writeable = False
        if self.region_labels is not None:
            self.region_labels.flags.writeable = False

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def n_triangles(self) -> int:
        return len(self.triangles)

    def triangle_areas(self) -> np.ndarray:
        return triangle_areas(self.vertices, self.triangles)

    def total_area(self) -> float:
        return float(self.triangle_areas().sum())

    def is_closed(self) -> bool:
        edges = _edge_map(self.triangles)
        return all(len(v) == 2 for v in edges.values())

    def mean_edge_length(self) -> float:
        """Average unique-edge length; the surface-mesh size measure."""
        edges = np.array(sorted(_edge_map(self.triangles).keys()))
        d = self.vertices[edges[:, 0]] - self.vertices[edges[:, 1]]
        return float(np.linalg.norm(d, axis=1).mean())

    def vertex_adjacency(self):
        """List of sorted neighbor-vertex arrays, one per vertex."""
        nbr: list[set[int]] = [set() for _ in range(self.n_vertices)]
        for a, b, c in self.triangles:
            nbr[a].update((b, c))
            nbr[b].update((a, c))
            nbr[c].update((a, b))
        return [np.array(sorted(s), dtype=np.int64) for s in nbr]

    def edges(self) -> np.ndarray:
        """(e, 2) array of unique undirected edges, lexicographically sorted."""
        return np.array(sorted(_edge_map(self.triangles).keys()), dtype=np.int64)

    def with_labels(self, labels) -> "SurfaceMesh":
        """Copy of this mesh carrying per-vertex region labels."""
        labels = np.asarray(labels, dtype=np.int64)
        if labels.shape != (self.n_vertices,):
            raise ParseError("region_labels must have one entry per vertex")
        mesh = SurfaceMesh(self.vertices, self.triangles, self.vertex_normals, labels)
        mesh._freeze()
        return mesh


@dataclass
class TetMesh:
    """Tetrahedral volume mesh, used for mesh-size statistics."""

    vertices: np.ndarray
    tets: np.ndarray = field(default_factory=lambda: np.zeros((0, 4), dtype=np.int64))

    @classmethod
    def build(cls, vertices, tets) -> "TetMesh":
        verts = _as_float_array(vertices, "vertices")
        t = np.asarray(tets, dtype=np.int64)
        if t.ndim != 2 or t.shape[1] != 4:
            raise ParseError(f"tets must have shape (m, 4), got {t.shape}")
        if len(t) and (t.min() < 0 or t.max() >= len(verts)):
            raise ParseError("tet index out of range")
        # orientation fix: swap two vertices where the signed volume is negative
        vol = _tet_signed_volumes(verts, t)
        flat = np.flatnonzero(np.abs(vol) < 1e-300)
        if flat.size:
            raise ParseError(f"degenerate tet {flat[0]} has zero volume")
        neg = vol < 0
        t = t.copy()
        t[neg] = t[neg][:, [0, 2, 1, 3]]
        return cls(verts, t)

    def volumes(self) -> np.ndarray:
        return _tet_signed_volumes(self.vertices, self.tets)


def _tet_signed_volumes(vertices: np.ndarray, tets: np.ndarray) -> np.ndarray:
    if len(tets) == 0:
        return np.zeros(0)
    a = vertices[tets[:, 0]]
    b = vertices[tets[:, 1]] - a
    c = vertices[tets[:, 2]] - a
    d = vertices[tets[:, 3]] - a
    return np.einsum("ij,ij->i", b, np.cross(c, d)) / 6.0


def mean_mesh_size(mesh: TetMesh) -> float:
    """Element-averaged insphere diameter 2 * (3 V_e / A_e)."""
    if len(mesh.tets) == 0:
        raise EmptyMeshError("tet mesh has no elements")
    v = mesh.vertices
    t = mesh.tets
    vol = np.abs(_tet_signed_volumes(v, t))
    faces = [t[:, [0, 1, 2]], t[:, [0, 1, 3]], t[:, [0, 2, 3]], t[:, [1, 2, 3]]]
    area = np.zeros(len(t))
    for f in faces:
        p0, p1, p2 = v[f[:, 0]], v[f[:, 1]], v[f[:, 2]]
        area += 0.5 * np.linalg.norm(np.cross(p1 - p0, p2 - p0), axis=1)
    return float(np.mean(6.0 * vol / area))


# ---------------------------------------------------------------------------
# file formats: ASCII OFF and OBJ (triangles only), OFF writer


def _tokens(path):
    """Yield whitespace tokens, skipping blank lines and # comments."""
    with open(path, "r") as fh:
        for line in fh:
            hash_pos = line.find("#")
            if hash_pos >= 0:
                line = line[:hash_pos]
            yield from line.split()


def _read_off(path: str):
    toks = _tokens(path)
    try:
        header = next(toks)
    except StopIteration:
        raise ParseError(f"{path}: empty file") from None
    if header != "OFF":
        raise ParseError(f"{path}: missing OFF header, got {header!r}")
    try:
        nv, nf = int(next(toks)), int(next(toks))
        next(toks)  # edge count, ignored
        verts = np.array([float(next(toks)) for _ in range(3 * nv)]).reshape(nv, 3)
        faces = []
        for _ in range(nf):
            arity = int(next(toks))
            if arity != 3:
                raise ParseError(f"{path}: only triangular faces supported, got {arity}")
            faces.append([int(next(toks)) for _ in range(3)])
    except StopIteration:
        raise ParseError(f"{path}: truncated OFF file") from None
    except ValueError as exc:
        raise ParseError(f"{path}: {exc}") from None
    return verts, np.array(faces, dtype=np.int64).reshape(-1, 3)


def _read_obj(path: str):
    verts = []
    faces = []
    with open(path, "r") as fh:
        for lineno, line in enumerate(fh, 1):
            parts = line.split("#")[0].split()
            if not parts:
                continue
            tag = parts[0]
            try:
                if tag == "v":
                    verts.append([float(x) for x in parts[1:4]])
                elif tag == "f":
                    idx = [int(p.split("/")[0]) for p in parts[1:]]
                    if len(idx) != 3:
                        raise ParseError(
                            f"{path}:{lineno}: only triangular faces supported"
                        )
                    faces.append([i - 1 if i > 0 else len(verts) + i for i in idx])
                # vn / vt / usemtl / o / g / s are ignored
            except (ValueError, IndexError) as exc:
                raise ParseError(f"{path}:{lineno}: {exc}") from None
    return np.array(verts, dtype=float).reshape(-1, 3), np.array(
        faces, dtype=np.int64
    ).reshape(-1, 3)


def load_surface_mesh(path: str, fmt: str | None = None, flip: bool = False,
                      scale: float = 1.0) -> SurfaceMesh:
    """Load and validate an ASCII OFF or OBJ surface mesh.

    `scale` converts file units to millimetres at load time (1.0 = file is
    already in mm). Normals are recomputed, winding is made consistent and
    outward for closed meshes; `flip` inverts open meshes.
    """
    if fmt is None:
        ext = os.path.splitext(path)[1].lower()
        fmt = {".off": "OFF", ".obj": "OBJ"}.get(ext)
        if fmt is None:
            raise ParseError(f"cannot infer mesh format from {path!r}")
    fmt = fmt.upper()
    if fmt == "OFF":
        verts, faces = _read_off(path)
    elif fmt == "OBJ":
        verts, faces = _read_obj(path)
    else:
        raise ParseError(f"unsupported mesh format {fmt!r}")
    if scale != 1.0:
        verts = verts * scale
    return SurfaceMesh.build(verts, faces, flip=flip)


def save_surface_mesh(path: str, mesh: SurfaceMesh) -> None:
    """Write ASCII OFF with round-trip-safe float formatting."""
    with open(path, "w") as fh:
        fh.write("OFF\n")
        fh.write(f"{mesh.n_vertices} {mesh.n_triangles} 0\n")
        for x, y, z in mesh.vertices:
            fh.write(f"{float(x)!r} {float(y)!r} {float(z)!r}\n")
        for a, b, c in mesh.triangles:
            fh.write(f"3 {a} {b} {c}\n")
