"""Orientation-aware wall shear stress indicators on vessel surfaces.

Computes the WSS vector, its amplitude and signed longitudinal/transversal
components, oscillatory shear indices, and TAWSS on triangulated surfaces,
with centerline-projected tangent fields, analytic synthetic validation
cases, and a mesh-convergence harness.
"""

__version__ = "0.1.0"

from .centerline import (
    Centerline,
    centerline_tangents,
    extract_centerline,
    load_centerline,
    polyline_tangents,
    save_centerline,
)
from .convergence import (
    ConvergenceReport,
    ConvergenceRow,
    eoc,
    project_field,
    report_from_error_table,
    run_convergence_study,
    weighted_l2_error,
)
from .indicators import (
    IndicatorField,
    osi_longitudinal,
    osi_vector,
    tawss,
    temporal_mean,
)
from .mesh import (
    SurfaceMesh,
    TetMesh,
    load_surface_mesh,
    mean_mesh_size,
    save_surface_mesh,
    vertex_normals,
)
from .pipeline import PipelineConfig, load_config, run_pipeline
from .synthetic import (
    SyntheticCase,
    make_cylinder_mesh,
    make_y_junction_mesh,
    poiseuille_traction,
    poiseuille_wall_shear,
    pulsatile_scale,
    reversing_square_wave_case,
    steady_poiseuille_case,
)
from .tangents import (
    TangentField,
    automatic_tangent_basis,
    flip_tangents,
    mean_adjacent_misalignment,
    project_centerline_tangents,
)
from .wss import (
    WallFieldSeries,
    traction_from_stress,
    wss_amplitude,
    wss_longitudinal,
    wss_transversal,
    wss_vector,
)

__all__ = [
    "Centerline",
    "ConvergenceReport",
    "ConvergenceRow",
    "IndicatorField",
    "PipelineConfig",
    "SurfaceMesh",
    "SyntheticCase",
    "TangentField",
    "TetMesh",
    "WallFieldSeries",
    "automatic_tangent_basis",
    "centerline_tangents",
    "eoc",
    "extract_centerline",
    "flip_tangents",
    "load_centerline",
    "load_config",
    "load_surface_mesh",
    "make_cylinder_mesh",
    "make_y_junction_mesh",
    "mean_adjacent_misalignment",
    "mean_mesh_size",
    "osi_longitudinal",
    "osi_vector",
    "poiseuille_traction",
    "poiseuille_wall_shear",
    "polyline_tangents",
    "project_centerline_tangents",
    "project_field",
    "pulsatile_scale",
    "reversing_square_wave_case",
    "report_from_error_table",
    "run_convergence_study",
    "run_pipeline",
    "save_centerline",
    "save_surface_mesh",
    "steady_poiseuille_case",
    "tawss",
    "temporal_mean",
    "traction_from_stress",
    "vertex_normals",
    "weighted_l2_error",
    "wss_amplitude",
    "wss_longitudinal",
    "wss_transversal",
    "wss_vector",
]
