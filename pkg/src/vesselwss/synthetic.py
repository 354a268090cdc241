"""Analytic test geometries and traction series with closed-form WSS.

Every generated case has a known oracle (Poiseuille wall shear, exact OSI
targets from signed waveforms), so the whole indicator pipeline can be
certified without a flow solver.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree

from .errors import (
    BadResolutionError,
    GeometryMismatchError,
    SelfIntersectionError,
    WindowOutOfRangeError,
)
from .mesh import SurfaceMesh
from .wss import WallFieldSeries

ML_PER_S_TO_M3 = 1e-6
MM_TO_M = 1e-3


def poiseuille_wall_shear(flow_ml_s: float, viscosity_pa_s: float,
                          radius_mm: float) -> float:
    """Wall shear magnitude 4 mu Q / (pi R^3) of steady pipe flow, in N/m2."""
    q = flow_ml_s * ML_PER_S_TO_M3
    r = radius_mm * MM_TO_M
    return 4.0 * viscosity_pa_s * q / (np.pi * r**3)


def make_cylinder_mesh(radius: float, length: float, n_theta: int, n_z: int,
                       capped: bool = False) -> SurfaceMesh:
    """Lateral-surface triangulation of a z-aligned cylinder, base at z=0.

    Vertices are indexed column-major (axial runs fastest), which keeps the
    automatic tangent frame axial/circumferential on the lateral wall; end
    caps are center-vertex fans.
    """
    if n_theta < 8 or n_z < 2:
        raise BadResolutionError("cylinder needs n_theta >= 8 and n_z >= 2")
    n_rings = n_z + 1
    theta = 2.0 * np.pi * np.arange(n_theta) / n_theta
    z = length * np.arange(n_rings) / n_z
    # index(ring i, column j) = j * n_rings + i
    verts = np.empty((n_theta * n_rings, 3))
    for j in range(n_theta):
        base = j * n_rings
        verts[base : base + n_rings, 0] = radius * np.cos(theta[j])
        verts[base : base + n_rings, 1] = radius * np.sin(theta[j])
        verts[base : base + n_rings, 2] = z

    def vid(i, j):
        return (j % n_theta) * n_rings + i

    tris = []
    for j in range(n_theta):
        for i in range(n_z):
            if j < n_theta - 1:
                # diagonal from (i+1, j) to (i, j+1); wound outward
                tris.append((vid(i, j), vid(i, j + 1), vid(i + 1, j)))
                tris.append((vid(i + 1, j), vid(i, j + 1), vid(i + 1, j + 1)))
            else:
                # the seam quad uses the opposite diagonal so the seam
                # column's lowest-index neighbor stays circumferential
                tris.append((vid(i, j), vid(i, j + 1), vid(i + 1, j + 1)))
                tris.append((vid(i, j), vid(i + 1, j + 1), vid(i + 1, j)))
    if capped:
        bottom = len(verts)
        top = bottom + 1
        verts = np.vstack([verts, [[0.0, 0.0, 0.0], [0.0, 0.0, length]]])
        for j in range(n_theta):
            tris.append((bottom, vid(0, j + 1), vid(0, j)))
            tris.append((top, vid(n_z, j), vid(n_z, j + 1)))
    return SurfaceMesh.build(verts, np.array(tris, dtype=np.int64))


def poiseuille_traction(
    mesh: SurfaceMesh,
    axis=(0.0, 0.0, 1.0),
    flow_ml_s: float = 7.9,
    viscosity_pa_s: float = 0.00345,
    radius_mm: float = 3.0,
    times=(0.0, 1.0),
    pressure: float = 0.0,
    axis_point=(0.0, 0.0, 0.0),
) -> WallFieldSeries:
    """Steady wall traction of Poiseuille flow through a cylinder mesh.

    The traction is the stress the fluid exerts on the wall: a tangential
    part of magnitude 4 mu Q / (pi R^3) along the flow axis plus a constant
    pressure part along the outward radial direction. Raises
    GeometryMismatchError when the mesh is not a radius-R tube around
    `axis` (within 1%), e.g. when caps are present.
    """
    axis = np.asarray(axis, dtype=float)
    axis = axis / np.linalg.norm(axis)
    axis_point = np.asarray(axis_point, dtype=float)
    rel = mesh.vertices - axis_point
    axial = rel @ axis
    radial_vec = rel - axial[:, None] * axis
    radial = np.linalg.norm(radial_vec, axis=1)
    if np.any(np.abs(radial - radius_mm) > 0.01 * radius_mm):
        worst = float(np.abs(radial - radius_mm).max())
        raise GeometryMismatchError(
            f"vertex radius deviates {worst:.3g} mm from R={radius_mm} mm"
        )
    tau = poiseuille_wall_shear(flow_ml_s, viscosity_pa_s, radius_mm)
    r_hat = radial_vec / radial[:, None]
    traction = tau * axis[None, :] + pressure * r_hat
    times = np.asarray(times, dtype=float)
    samples = np.broadcast_to(traction, (len(times),) + traction.shape).copy()
    return WallFieldSeries(times, "traction_vector", samples)


def pulsatile_scale(
    series: WallFieldSeries,
    waveform,
    normals=None,
    mean_flow: float | None = None,
) -> WallFieldSeries:
    """Scale the tangential traction by a flow waveform q(t) / Q_mean.

    `waveform` is a sequence of (t, q) pairs, linearly interpolated at the
    series sample times; it must cover the series time range. When `normals`
    is given only the tangential part is scaled (the pressure part is a wall
    load, not a flow effect); otherwise whole samples are scaled. Signed
    waveforms produce reversing series with exact oscillation targets.
    """
    wf = np.asarray(waveform, dtype=float)
    if wf.ndim != 2 or wf.shape[1] != 2:
        raise ValueError("waveform must be a sequence of (t, q) pairs")
    if np.any(np.diff(wf[:, 0]) <= 0):
        raise ValueError("waveform times must be strictly increasing")
    if wf[0, 0] > series.times[0] or wf[-1, 0] < series.times[-1]:
        raise WindowOutOfRangeError(
            f"waveform [{wf[0, 0]}, {wf[-1, 0]}] does not cover series times "
            f"[{series.times[0]}, {series.times[-1]}]"
        )
    if mean_flow is None:
        span = wf[-1, 0] - wf[0, 0]
        mean_flow = float(np.trapezoid(wf[:, 1], x=wf[:, 0]) / span)
    if abs(mean_flow) < 1e-300:
        raise ValueError("mean flow of the waveform is zero; pass mean_flow")
    factor = np.interp(series.times, wf[:, 0], wf[:, 1]) / mean_flow
    if series.kind != "traction_vector":
        scaled = series.samples * factor.reshape((-1,) + (1,) * (series.samples.ndim - 1))
        return series.replace(series.kind, scaled)
    if normals is None:
        scaled = series.samples * factor[:, None, None]
        return series.replace(series.kind, scaled)
    normals = np.asarray(normals, dtype=float)
    tn = np.einsum("tni,ni->tn", series.samples, normals)
    normal_part = tn[..., None] * normals
    tangential = series.samples - normal_part
    return series.replace(
        "traction_vector", tangential * factor[:, None, None] + normal_part
    )


@dataclass
class SyntheticCase:
    """Mesh plus traction series plus the closed-form values they must hit.

    `oracle` maps indicator names (wss_amplitude, wss_longitudinal, osi,
    osi_longitudinal, tawss) to the expected value at every non-degenerate
    lateral vertex; `tolerance` is the relative (or, for exact-zero targets,
    absolute) acceptance bound.
    """

    name: str
    mesh: SurfaceMesh
    traction: WallFieldSeries
    oracle: dict = field(default_factory=dict)
    tolerance: float = 0.02


def steady_poiseuille_case(
    radius: float = 3.0,
    length: float = 40.0,
    n_theta: int = 64,
    n_z: int = 128,
    flow_ml_s: float = 7.9,
    viscosity_pa_s: float = 0.00345,
    pressure: float = 0.0,
    times=None,
) -> SyntheticCase:
    """Steady pipe flow: every indicator has a closed-form target.

    A nonzero pressure keeps the longitudinal targets intact but bleeds into
    the amplitude on the two open boundary rings, where area-weighted
    normals tilt slightly; the shipped oracle assumes the default 0.
    """
    if times is None:
        times = np.linspace(0.0, 0.9, 10)
    mesh = make_cylinder_mesh(radius, length, n_theta, n_z)
    traction = poiseuille_traction(
        mesh, flow_ml_s=flow_ml_s, viscosity_pa_s=viscosity_pa_s,
        radius_mm=radius, times=times, pressure=pressure,
    )
    tau = poiseuille_wall_shear(flow_ml_s, viscosity_pa_s, radius)
    oracle = {
        "wss_amplitude": tau,
        "wss_longitudinal": tau,
        "tawss": tau,
        "osi": 0.0,
        "osi_longitudinal": 0.0,
    }
    return SyntheticCase("steady_poiseuille", mesh, traction, oracle, 0.02)


def reversing_square_wave_case(
    radius: float = 3.0,
    length: float = 40.0,
    n_theta: int = 32,
    n_z: int = 24,
) -> SyntheticCase:
    """Balanced forward/backward flow: both oscillation indices hit 0.5.

    The sign change sits on a sample instant, so the trapezoidal integrals
    cancel exactly and the 0.5 targets hold to 1e-12.
    """
    times = np.linspace(0.0, 1.0, 5)
    mesh = make_cylinder_mesh(radius, length, n_theta, n_z)
    steady = poiseuille_traction(mesh, radius_mm=radius, times=times)
    waveform = [(0.0, 1.0), (0.25, 1.0), (0.5, 0.0), (0.75, -1.0), (1.0, -1.0)]
    traction = pulsatile_scale(steady, waveform, mean_flow=1.0)
    oracle = {"osi": 0.5, "osi_longitudinal": 0.5}
    return SyntheticCase("reversing_square_wave", mesh, traction, oracle, 1e-12)


# ---------------------------------------------------------------------------
# Y-junction: marching cubes over a smooth union of three capped cylinders


def _capped_cylinder_sdf(points, a, b, radius):
    """Exact signed distance to a flat-capped cylinder with axis a->b."""
    ba = b - a
    length = np.linalg.norm(ba)
    axis = ba / length
    pa = points - a
    t = pa @ axis
    radial = np.linalg.norm(pa - t[:, None] * axis, axis=1) - radius
    axial = np.abs(t - 0.5 * length) - 0.5 * length
    outside = np.sqrt(np.maximum(radial, 0.0) ** 2 + np.maximum(axial, 0.0) ** 2)
    inside = np.minimum(np.maximum(radial, axial), 0.0)
    return outside + inside


def _smooth_min(d1, d2, k):
    """Polynomial smooth minimum; symmetric in its arguments."""
    h = np.clip(0.5 + 0.5 * (d2 - d1) / k, 0.0, 1.0)
    return d2 * (1.0 - h) + d1 * h - k * h * (1.0 - h)


def make_y_junction_mesh(
    trunk_radius: float,
    branch_radius_a: float,
    branch_radius_b: float,
    angle_deg: float,
    pitch: float = 0.4,
    trunk_length: float = 15.0,
    branch_length: float = 12.0,
    blend: float | None = None,
) -> SurfaceMesh:
    """Watertight bifurcation of three blended cylinder segments.

    The trunk runs along +z from the origin; the branches leave the trunk
    end separated by `angle_deg` in the xz-plane. The surface is the zero
    level set of a smooth union of capped-cylinder distance fields on a
    symmetric grid of the given voxel pitch, so a symmetric parameter choice
    yields a mirror-symmetric mesh. Raises SelfIntersectionError if the
    triangulation intersects itself (never repaired).
    """
    from skimage.measure import marching_cubes

    if min(trunk_radius, branch_radius_a, branch_radius_b) <= 0:
        raise ValueError("radii must be positive")
    if not 10.0 <= angle_deg <= 120.0:
        raise ValueError("angle must be within [10, 120] degrees")
    if pitch <= 0 or pitch > 0.5 * min(trunk_radius, branch_radius_a, branch_radius_b):
        raise BadResolutionError(
            "pitch must be positive and below half the smallest radius"
        )
    if blend is None:
        blend = 0.25 * trunk_radius

    half = np.deg2rad(angle_deg) / 2.0
    split = np.array([0.0, 0.0, trunk_length])
    dir_a = np.array([np.sin(half), 0.0, np.cos(half)])
    dir_b = np.array([-np.sin(half), 0.0, np.cos(half)])
    end_a = split + branch_length * dir_a
    end_b = split + branch_length * dir_b

    r_max = max(trunk_radius, branch_radius_a, branch_radius_b)
    margin = r_max + 3.0 * pitch
    x_extent = max(abs(end_a[0]), abs(end_b[0])) + margin
    y_extent = r_max + 3.0 * pitch
    z_lo, z_hi = -margin, max(end_a[2], end_b[2]) + margin
    # symmetric integer grid in x and y so the field mirrors bit-exactly;
    # z planes sit at half-pitch offsets so the flat trunk cap at z=0 never
    # coincides with a grid plane (exact zero-level nodes would give
    # marching cubes degenerate triangles)
    nx = int(np.ceil(x_extent / pitch))
    ny = int(np.ceil(y_extent / pitch))
    xs = np.arange(-nx, nx + 1) * pitch
    ys = np.arange(-ny, ny + 1) * pitch
    zs = (np.arange(int(np.floor(z_lo / pitch)), int(np.ceil(z_hi / pitch)) + 1) + 0.5) * pitch

    grid = np.stack(np.meshgrid(xs, ys, zs, indexing="ij"), axis=-1)
    pts = grid.reshape(-1, 3)
    d_trunk = _capped_cylinder_sdf(pts, np.array([0.0, 0.0, 0.0]), split, trunk_radius)
    d_a = _capped_cylinder_sdf(pts, split, end_a, branch_radius_a)
    d_b = _capped_cylinder_sdf(pts, split, end_b, branch_radius_b)
    sdf = _smooth_min(d_trunk, _smooth_min(d_a, d_b, blend), blend)
    volume = sdf.reshape(grid.shape[:3])

    # tiny negative level keeps the isosurface clear of exact node values
    verts, faces, _, _ = marching_cubes(volume, level=-1e-7,
                                        spacing=(pitch, pitch, pitch))
    verts = verts + np.array([xs[0], ys[0], zs[0]])
    mesh = SurfaceMesh.build(verts, faces.astype(np.int64))
    bad = find_self_intersection(mesh)
    if bad is not None:
        raise SelfIntersectionError(
            f"triangles {bad[0]} and {bad[1]} intersect; adjust radii or angle"
        )
    return mesh


def find_self_intersection(mesh: SurfaceMesh, chunk: int = 200_000):
    """First pair of non-adjacent intersecting triangles, or None.

    Candidate pairs come from overlapping bounding spheres; pairs sharing a
    vertex are skipped. Coplanar overlaps are not detected (spot check, not
    a full arrangement).
    """
    v = mesh.vertices
    t = mesh.triangles
    corners = v[t]
    centroids = corners.mean(axis=1)
    radii = np.linalg.norm(corners - centroids[:, None, :], axis=2).max(axis=1)
    tree = cKDTree(centroids)
    pairs = tree.query_pairs(2.0 * radii.max(), output_type="ndarray")
    if len(pairs) == 0:
        return None
    close = (
        np.linalg.norm(centroids[pairs[:, 0]] - centroids[pairs[:, 1]], axis=1)
        < radii[pairs[:, 0]] + radii[pairs[:, 1]]
    )
    pairs = pairs[close]
    shares = np.zeros(len(pairs), dtype=bool)
    for i in range(3):
        for j in range(3):
            shares |= t[pairs[:, 0], i] == t[pairs[:, 1], j]
    pairs = pairs[~shares]
    for start in range(0, len(pairs), chunk):
        block = pairs[start : start + chunk]
        for a, b in ((0, 1), (1, 0)):
            tri = corners[block[:, b]]
            for e in range(3):
                p = corners[block[:, a], e]
                q = corners[block[:, a], (e + 1) % 3]
                hit = _segment_hits_triangle(p, q, tri)
                if hit.any():
                    k = int(np.flatnonzero(hit)[0])
                    return int(block[k, 0]), int(block[k, 1])
    return None


def _segment_hits_triangle(p, q, tri, eps=1e-12):
    """Vectorized Moller-Trumbore segment/triangle proper-intersection test."""
    v0, v1, v2 = tri[:, 0], tri[:, 1], tri[:, 2]
    d = q - p
    e1 = v1 - v0
    e2 = v2 - v0
    h = np.cross(d, e2)
    det = np.einsum("ij,ij->i", e1, h)
    scale = np.maximum(np.abs(det), 1e-300)
    parallel = np.abs(det) < eps * np.linalg.norm(e1, axis=1) * np.linalg.norm(e2, axis=1)
    s = p - v0
    u = np.einsum("ij,ij->i", s, h) / scale * np.sign(det)
    qv = np.cross(s, e1)
    w = np.einsum("ij,ij->i", d, qv) / scale * np.sign(det)
    t_par = np.einsum("ij,ij->i", e2, qv) / scale * np.sign(det)
    inside = (u > eps) & (w > eps) & (u + w < 1.0 - eps)
    within = (t_par > eps) & (t_par < 1.0 - eps)
    return inside & within & ~parallel
