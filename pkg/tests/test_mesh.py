import numpy as np
import pytest
from hypothesis import given, strategies as st

import vesselwss as vw
from vesselwss.errors import (
    DegenerateVertexError,
    EmptyMeshError,
    ParseError,
    TopologyError,
)
from vesselwss.mesh import orient_consistently, signed_volume

from shapes import (
    UNIT_CUBE_OFF,
    grid_patch,
    icosphere,
    random_rotation,
    regular_tet_mesh,
)

ONE_DEGREE = np.cos(np.deg2rad(1.0))


def write(tmp_path, name, text):
    path = tmp_path / name
    path.write_text(text)
    return str(path)


class TestLoadSurfaceMesh:
    def test_unit_cube_off(self, tmp_path):
        mesh = vw.load_surface_mesh(write(tmp_path, "cube.off", UNIT_CUBE_OFF))
        assert mesh.n_vertices == 8
        assert mesh.n_triangles == 12
        centroid = mesh.vertices.mean(axis=0)
        outward = np.einsum("ij,ij->i", mesh.vertex_normals,
                            mesh.vertices - centroid)
        assert np.all(outward > 0)
        assert signed_volume(mesh.vertices, mesh.triangles) == pytest.approx(1.0)

    def test_round_trip_bit_identical(self, tmp_path):
        mesh = vw.make_cylinder_mesh(3.0, 40.0, 16, 8)
        path = str(tmp_path / "cyl.off")
        vw.save_surface_mesh(path, mesh)
        again = vw.load_surface_mesh(path)
        assert np.array_equal(mesh.vertices, again.vertices)
        assert np.array_equal(mesh.triangles, again.triangles)

    def test_out_of_range_index(self, tmp_path):
        text = "OFF\n3 1 0\n0 0 0\n1 0 0\n0 1 0\n3 0 1 999\n"
        with pytest.raises(ParseError):
            vw.load_surface_mesh(write(tmp_path, "bad.off", text))

    def test_missing_header(self, tmp_path):
        with pytest.raises(ParseError):
            vw.load_surface_mesh(write(tmp_path, "x.off", "3 1 0\n"))

    def test_truncated(self, tmp_path):
        with pytest.raises(ParseError):
            vw.load_surface_mesh(write(tmp_path, "x.off", "OFF\n4 2 0\n0 0 0\n"))

    def test_quad_face_rejected(self, tmp_path):
        text = "OFF\n4 1 0\n0 0 0\n1 0 0\n1 1 0\n0 1 0\n4 0 1 2 3\n"
        with pytest.raises(ParseError):
            vw.load_surface_mesh(write(tmp_path, "quad.off", text))

    def test_obj(self, tmp_path):
        text = ("# comment\nv 0 0 0\nv 1 0 0\nv 0 1 0\nv 0 0 1\n"
                "f 1 2 3\nf 1 4 2\nf 2 4 3\nf 1 3 4\n")
        mesh = vw.load_surface_mesh(write(tmp_path, "tet.obj", text))
        assert mesh.n_vertices == 4
        assert mesh.n_triangles == 4
        assert mesh.is_closed()

    def test_obj_slash_indices(self, tmp_path):
        text = ("v 0 0 0\nv 1 0 0\nv 0 1 0\nvn 0 0 1\n"
                "f 1//1 2//1 3//1\n")
        mesh = vw.load_surface_mesh(write(tmp_path, "p.obj", text))
        assert mesh.n_triangles == 1

    def test_obj_quad_rejected(self, tmp_path):
        text = "v 0 0 0\nv 1 0 0\nv 1 1 0\nv 0 1 0\nf 1 2 3 4\n"
        with pytest.raises(ParseError):
            vw.load_surface_mesh(write(tmp_path, "q.obj", text))

    def test_scale_at_load(self, tmp_path):
        path = write(tmp_path, "cube.off", UNIT_CUBE_OFF)
        mesh = vw.load_surface_mesh(path, scale=10.0)
        assert mesh.vertices.max() == 10.0

    def test_degenerate_triangle_rejected(self):
        verts = [(0, 0, 0), (1, 0, 0), (2, 0, 0), (0, 1, 0)]
        with pytest.raises(ParseError):
            vw.SurfaceMesh.build(verts, [(0, 1, 2), (0, 1, 3)])

    def test_non_manifold_edge_rejected(self):
        verts = [(0, 0, 0), (1, 0, 0), (0, 1, 0), (0, 0, 1), (0, -1, 0)]
        tris = [(0, 1, 2), (0, 1, 3), (0, 1, 4)]
        with pytest.raises(TopologyError, match="non-manifold"):
            vw.SurfaceMesh.build(verts, tris)

    def test_isolated_vertex_rejected(self):
        verts = [(0, 0, 0), (1, 0, 0), (0, 1, 0), (5, 5, 5)]
        with pytest.raises(DegenerateVertexError):
            vw.SurfaceMesh.build(verts, [(0, 1, 2)])

    def test_mixed_winding_repaired(self, tmp_path):
        # same cube with one face reversed: build must rewind it outward
        lines = UNIT_CUBE_OFF.strip().splitlines()
        lines[10] = "3 1 2 0"  # first face, reversed
        mesh = vw.load_surface_mesh(write(tmp_path, "m.off", "\n".join(lines)))
        assert signed_volume(mesh.vertices, mesh.triangles) == pytest.approx(1.0)

    def test_flip_flag_on_open_mesh(self):
        patch = grid_patch(4)
        flipped = vw.SurfaceMesh.build(patch.vertices, patch.triangles, flip=True)
        assert np.allclose(flipped.vertex_normals, -patch.vertex_normals)


class TestVertexNormals:
    def test_flat_patch(self):
        mesh = grid_patch(6)
        assert np.allclose(mesh.vertex_normals, [0.0, 0.0, 1.0], atol=1e-12)

    def test_sphere_normals_match_analytic(self):
        mesh = icosphere(5)
        radial = mesh.vertices / np.linalg.norm(mesh.vertices, axis=1)[:, None]
        cosang = np.einsum("ij,ij->i", mesh.vertex_normals, radial)
        assert cosang.min() > ONE_DEGREE

    def test_cylinder_normals_match_analytic(self, cylinder):
        radial = cylinder.vertices.copy()
        radial[:, 2] = 0.0
        radial /= np.linalg.norm(radial, axis=1)[:, None]
        cosang = np.einsum("ij,ij->i", cylinder.vertex_normals, radial)
        assert cosang.min() > ONE_DEGREE

    def test_unit_norm(self, cylinder):
        norms = np.linalg.norm(cylinder.vertex_normals, axis=1)
        assert np.abs(norms - 1.0).max() < 1e-9

    @given(st.integers(0, 1000))
    def test_rotation_equivariance(self, seed):
        mesh = icosphere(1)
        rot = random_rotation(seed)
        rotated = vw.SurfaceMesh.build(mesh.vertices @ rot.T, mesh.triangles)
        assert np.abs(rotated.vertex_normals - mesh.vertex_normals @ rot.T).max() < 1e-9

    def test_closed_convex_outwardness(self):
        mesh = icosphere(2)
        centroid = mesh.vertices.mean(axis=0)
        assert np.all(
            np.einsum("ij,ij->i", mesh.vertex_normals, mesh.vertices - centroid) > 0
        )


class TestMeanMeshSize:
    def test_regular_tet_closed_form(self):
        # insphere radius of a regular tetrahedron is a / (2 sqrt 6)
        h = vw.mean_mesh_size(regular_tet_mesh(edge=1.0))
        assert h == pytest.approx(1.0 / np.sqrt(6.0), rel=1e-12)

    def test_scaling_homogeneity(self):
        base = regular_tet_mesh(edge=1.0)
        doubled = vw.TetMesh.build(2.0 * base.vertices, base.tets)
        assert vw.mean_mesh_size(doubled) == pytest.approx(
            2.0 * vw.mean_mesh_size(base), rel=1e-12
        )

    @given(st.floats(0.1, 50.0))
    def test_linear_under_uniform_scaling(self, scale):
        base = regular_tet_mesh(edge=1.0)
        scaled = vw.TetMesh.build(scale * base.vertices, base.tets)
        assert vw.mean_mesh_size(scaled) == pytest.approx(
            scale * vw.mean_mesh_size(base), rel=1e-9
        )

    def test_empty_mesh(self):
        mesh = vw.TetMesh.build(np.zeros((3, 3)), np.zeros((0, 4), dtype=int))
        with pytest.raises(EmptyMeshError):
            vw.mean_mesh_size(mesh)

    def test_tet_orientation_fix(self):
        verts = np.array([[0, 0, 0], [1, 0, 0], [0, 1, 0], [0, 0, 1.0]])
        mesh = vw.TetMesh.build(verts, [[0, 2, 1, 3]])  # negative volume order
        assert mesh.volumes()[0] > 0


class TestOrientation:
    def test_orient_noop_for_consistent(self):
        mesh = grid_patch(4)
        again = orient_consistently(mesh.vertices, mesh.triangles)
        assert np.array_equal(again, mesh.triangles)

    def test_immutability(self, cylinder):
        with pytest.raises(ValueError):
            cylinder.vertices[0, 0] = 99.0

    def test_mean_edge_length(self):
        patch = grid_patch(2)  # 0.5 spacing grid with 0.5*sqrt(2) diagonals
        edges = patch.edges()
        lengths = np.linalg.norm(
            patch.vertices[edges[:, 0]] - patch.vertices[edges[:, 1]], axis=1
        )
        assert patch.mean_edge_length() == pytest.approx(lengths.mean())
