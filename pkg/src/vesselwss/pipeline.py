"""End-to-end indicator pipeline with reproducible, byte-stable outputs."""

from __future__ import annotations

import hashlib
import os
from dataclasses import dataclass, field, fields as dataclass_fields

import numpy as np
import scipy

from . import __version__
from .centerline import extract_centerline, load_centerline
from .errors import ParseError, PipelineError, VesselWSSError
from .indicators import osi_longitudinal, osi_vector, tawss, temporal_mean
from .io import (
    export_vtk,
    parse_keyvalue,
    save_indicator_csv,
    save_tangent_csv,
    load_series,
)
from .mesh import load_surface_mesh
from .tangents import (
    automatic_tangent_basis,
    flip_tangents,
    project_centerline_tangents,
)
from .wss import traction_from_stress, wss_longitudinal, wss_vector

THREADS_ENV_VAR = "VESSELWSS_THREADS"

INDICATOR_CHOICES = ("osi", "osil", "tawss", "meanwssl")
TANGENT_METHODS = ("projected", "flipped", "automatic_t1", "automatic_t2")


def thread_count() -> int:
    """Worker count for spatial-index queries, from the environment."""
    raw = os.environ.get(THREADS_ENV_VAR, "1")
    try:
        n = int(raw)
    except ValueError:
        raise ParseError(f"{THREADS_ENV_VAR} must be an integer, got {raw!r}")
    return n if n != 0 else 1


@dataclass
class PipelineConfig:
    """Inputs, method choices, and overrides for one pipeline run."""

    mesh: str = ""
    series: str = ""
    outdir: str = "out"
    centerline: str = ""
    tangent_method: str = "projected"
    flow_vectors: dict = field(default_factory=dict)
    window: tuple[float, float] | None = None
    indicators: tuple = INDICATOR_CHOICES
    source: tuple | None = None
    targets: tuple = ()
    spacing: float = 0.5
    blend: bool = False
    write_vtk: bool = True
    quadrature: str = "trapezoid"
    zero_integral_tolerance: float = 1e-14

    def validate(self):
        if not self.mesh:
            raise ParseError("config needs a mesh file")
        if not self.series:
            raise ParseError("config needs a series manifest")
        if self.tangent_method not in TANGENT_METHODS:
            raise ParseError(f"unknown tangent method {self.tangent_method!r}")
        for name in self.indicators:
            if name not in INDICATOR_CHOICES:
                raise ParseError(f"unknown indicator {name!r}")
        if self.quadrature != "trapezoid":
            raise ParseError("only trapezoid quadrature is supported")
        if self.zero_integral_tolerance <= 0 or self.spacing <= 0:
            raise ParseError("tolerances must be positive")
        if self.window is not None and not self.window[0] < self.window[1]:
            raise ParseError("window start must precede window end")

    def canonical_items(self) -> list[tuple[str, str]]:
        items = []
        for f in dataclass_fields(self):
            value = getattr(self, f.name)
            if isinstance(value, dict):
                value = " ".join(
                    f"{k}:{','.join(repr(float(c)) for c in v)}"
                    for k, v in sorted(value.items())
                )
            elif isinstance(value, (tuple, list)):
                value = " ".join(str(x) for x in value)
            elif value is None:
                value = ""
            items.append((f.name, str(value)))
        return items

    def hash(self) -> str:
        text = "\n".join(f"{k} = {v}" for k, v in self.canonical_items())
        return hashlib.sha256(text.encode()).hexdigest()


def _parse_vec(text: str) -> tuple[float, ...]:
    return tuple(float(x) for x in text.replace(",", " ").split())


def load_config(path: str) -> PipelineConfig:
    """Read a plain-text key = value config file."""
    kv = parse_keyvalue(path)
    cfg = PipelineConfig()
    apply_overrides(cfg, kv.items())
    return cfg


def apply_overrides(cfg: PipelineConfig, items) -> PipelineConfig:
    """Apply key=value overrides (CLI flags win over file values)."""
    for key, value in items:
        key = key.strip()
        if key in ("mesh", "series", "outdir", "centerline", "tangent_method",
                   "quadrature"):
            setattr(cfg, key, value)
        elif key == "flow_vectors":
            vectors = {}
            for part in value.split():
                label, vec = part.split(":")
                vectors[int(label)] = _parse_vec(vec)
            cfg.flow_vectors = vectors
        elif key == "window":
            a, b = _parse_vec(value.replace(":", " "))
            cfg.window = (a, b)
        elif key == "indicators":
            cfg.indicators = tuple(value.replace(",", " ").split())
        elif key == "source":
            cfg.source = _parse_vec(value)
        elif key == "targets":
            cfg.targets = tuple(_parse_vec(part) for part in value.split(";") if part)
        elif key == "spacing":
            cfg.spacing = float(value)
        elif key == "zero_integral_tolerance":
            cfg.zero_integral_tolerance = float(value)
        elif key == "blend":
            cfg.blend = value.lower() in ("1", "true", "yes")
        elif key == "write_vtk":
            cfg.write_vtk = value.lower() in ("1", "true", "yes")
        else:
            raise ParseError(f"unknown config key {key!r}")
    return cfg


def _stage(name):
    class _Guard:
        def __enter__(self):
            return None

        def __exit__(self, exc_type, exc, tb):
            if (
                exc is not None
                and isinstance(exc, (VesselWSSError, OSError))
                and not isinstance(exc, PipelineError)
            ):
                raise PipelineError(name, str(exc)) from exc
            return False

    return _Guard()


def run_pipeline(config: PipelineConfig) -> dict[str, str]:
    """Run mesh -> tangents -> WSS -> indicators and write all artifacts.

    Returns a name -> path map of everything written. Outputs are
    deterministic: identical config and inputs give identical bytes, and the
    run log carries versions, the config hash, and per-stage flag counts
    (never timestamps).
    """
    config.validate()
    workers = thread_count()
    os.makedirs(config.outdir, exist_ok=True)
    log_lines = [
        f"package = vesselwss {__version__}",
        f"numpy = {np.__version__}",
        f"scipy = {scipy.__version__}",
        f"config_hash = {config.hash()}",
    ]
    artifacts: dict[str, str] = {}

    with _stage("mesh"):
        mesh = load_surface_mesh(config.mesh)
    log_lines.append(f"mesh_vertices = {mesh.n_vertices}")
    log_lines.append(f"mesh_triangles = {mesh.n_triangles}")

    with _stage("series"):
        series, _ = load_series(config.series)
        if series.n_vertices != mesh.n_vertices:
            raise ParseError(
                f"series has {series.n_vertices} vertices, mesh has "
                f"{mesh.n_vertices}"
            )
        if series.kind == "stress_tensor":
            series = traction_from_stress(series, mesh.vertex_normals)
        if series.kind != "traction_vector":
            raise ParseError("pipeline needs a traction or stress series")
    log_lines.append(f"series_times = {series.n_times}")
    window = config.window or series.window
    log_lines.append(f"window = {window[0]!r} {window[1]!r}")

    centerline = None
    needs_centerline = config.tangent_method == "projected" or (
        config.tangent_method == "flipped" and len(config.flow_vectors) > 1
    )
    with _stage("centerline"):
        if config.centerline:
            centerline = load_centerline(config.centerline)
        elif needs_centerline:
            if config.source is None or not config.targets:
                raise ParseError(
                    "no centerline file; extraction needs source and targets"
                )
            centerline = extract_centerline(
                mesh, config.source, config.targets, spacing=config.spacing,
                workers=workers,
            )
    if centerline is not None:
        log_lines.append(f"centerline_branches = {centerline.n_branches}")

    with _stage("tangents"):
        if config.tangent_method == "projected":
            tangent_field = project_centerline_tangents(
                mesh, centerline, blend=config.blend, workers=workers
            )
        else:
            t1, t2 = automatic_tangent_basis(mesh)
            base = t1 if config.tangent_method == "automatic_t1" else t2
            if config.tangent_method == "flipped":
                if not config.flow_vectors:
                    raise ParseError("flipped tangents need flow_vectors")
                labels = None
                if centerline is not None:
                    labels = project_centerline_tangents(
                        mesh, centerline, workers=workers
                    ).region_labels
                elif len(config.flow_vectors) == 1:
                    only = next(iter(config.flow_vectors))
                    labels = np.full(mesh.n_vertices, only, dtype=np.int64)
                tangent_field = flip_tangents(t2, config.flow_vectors, labels)
            else:
                tangent_field = base
    n_degenerate = int(tangent_field.degenerate_mask.sum())
    log_lines.append(f"tangents_method = {tangent_field.method}")
    log_lines.append(f"tangents_degenerate = {n_degenerate}")

    with _stage("wss"):
        tau = wss_vector(series, mesh.vertex_normals)
        tau_long = wss_longitudinal(series, tangent_field)

    with _stage("indicators"):
        computed = {}
        zero_tol = config.zero_integral_tolerance
        if "osi" in config.indicators:
            computed["OSI"] = osi_vector(tau, window, zero_tol=zero_tol)
        if "osil" in config.indicators:
            computed["OSI_L"] = osi_longitudinal(tau_long, window, zero_tol=zero_tol)
        if "tawss" in config.indicators:
            computed["TAWSS"] = tawss(tau, window, zero_tol=zero_tol)
        if "meanwssl" in config.indicators:
            computed["MEAN_WSS_L"] = temporal_mean(tau_long, window)
    for name, ind in computed.items():
        log_lines.append(f"indicator_{name}_flagged = {int(ind.mask.sum())}")

    with _stage("outputs"):
        tangent_path = os.path.join(config.outdir, "tangents.csv")
        save_tangent_csv(tangent_path, tangent_field)
        artifacts["tangents"] = tangent_path
        for name, ind in computed.items():
            path = os.path.join(config.outdir, f"{name.lower()}.csv")
            save_indicator_csv(path, ind)
            artifacts[name] = path
        if config.write_vtk:
            vtk_path = os.path.join(config.outdir, "indicators.vtk")
            vtk_fields = {name: ind.values for name, ind in computed.items()}
            vtk_fields["tangent"] = tangent_field.vectors
            export_vtk(vtk_path, mesh, vtk_fields)
            artifacts["vtk"] = vtk_path
        log_lines.append(
            "outputs = " + " ".join(sorted(os.path.basename(p) for p in artifacts.values()))
        )
        log_path = os.path.join(config.outdir, "run_log.txt")
        with open(log_path, "w") as fh:
            fh.write("\n".join(log_lines) + "\n")
        artifacts["log"] = log_path
    return artifacts
