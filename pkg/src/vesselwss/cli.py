"""Command-line front end.

Exit codes: 0 success, 1 usage/config error, 2 data/validation error.
"""

from __future__ import annotations

import argparse
import csv
import os
import sys

import numpy as np

from .centerline import extract_centerline, load_centerline, save_centerline
from .convergence import report_from_error_table, run_convergence_study
from .errors import ParseError, VesselWSSError
from .indicators import osi_longitudinal, osi_vector, tawss, temporal_mean
from .io import (
    export_vtk,
    format_report,
    load_error_table_csv,
    load_indicator_csv,
    load_series,
    load_tangent_csv,
    save_indicator_csv,
    save_report_csv,
    save_series,
    save_tangent_csv,
)
from .mesh import load_surface_mesh, save_surface_mesh
from .pipeline import (
    PipelineConfig,
    apply_overrides,
    load_config,
    run_pipeline,
    thread_count,
)
from .synthetic import (
    make_cylinder_mesh,
    make_y_junction_mesh,
    poiseuille_traction,
    pulsatile_scale,
)
from .tangents import (
    automatic_tangent_basis,
    flip_tangents,
    project_centerline_tangents,
)
from .wss import (
    traction_from_stress,
    wss_amplitude,
    wss_longitudinal,
    wss_transversal,
    wss_vector,
)


class UsageError(Exception):
    pass


class Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _vec(text: str):
    parts = [float(x) for x in text.split(",")]
    if len(parts) != 3:
        raise UsageError(f"expected x,y,z, got {text!r}")
    return tuple(parts)


def _window(text: str):
    a, b = text.split(":")
    return float(a), float(b)


def _times(text: str):
    start, stop, count = text.split(":")
    return np.linspace(float(start), float(stop), int(count))


def _flow_vector(text: str):
    label, vec = text.split(":")
    return int(label), _vec(vec)


def _load_waveform(path: str) -> np.ndarray:
    rows = []
    with open(path, newline="") as fh:
        for row in csv.reader(fh):
            if not row:
                continue
            try:
                rows.append((float(row[0]), float(row[1])))
            except ValueError:
                continue  # header line
    if not rows:
        raise ParseError(f"{path}: no (t, q) samples found")
    return np.array(rows)


def build_parser() -> Parser:
    parser = Parser(prog="vesselwss", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    synth = sub.add_parser("synth", help="generate analytic meshes and series")
    synth_sub = synth.add_subparsers(dest="what", required=True)

    cyl = synth_sub.add_parser("cylinder")
    cyl.add_argument("--radius", type=float, default=3.0)
    cyl.add_argument("--length", type=float, default=40.0)
    cyl.add_argument("--n-theta", type=int, default=64)
    cyl.add_argument("--n-z", type=int, default=128)
    cyl.add_argument("--capped", action="store_true")
    cyl.add_argument("--out", required=True)

    yj = synth_sub.add_parser("yjunction")
    yj.add_argument("--trunk-radius", type=float, default=3.0)
    yj.add_argument("--branch-radius-a", type=float, default=2.2)
    yj.add_argument("--branch-radius-b", type=float, default=2.2)
    yj.add_argument("--angle", type=float, default=50.0)
    yj.add_argument("--pitch", type=float, default=0.4)
    yj.add_argument("--trunk-length", type=float, default=15.0)
    yj.add_argument("--branch-length", type=float, default=12.0)
    yj.add_argument("--out", required=True)

    poi = synth_sub.add_parser("poiseuille")
    poi.add_argument("--mesh", required=True)
    poi.add_argument("--axis", type=_vec, default=(0.0, 0.0, 1.0))
    poi.add_argument("--flow", type=float, default=7.9, help="ml/s")
    poi.add_argument("--viscosity", type=float, default=0.00345, help="Pa.s")
    poi.add_argument("--radius", type=float, default=3.0, help="mm")
    poi.add_argument("--pressure", type=float, default=0.0, help="N/m2")
    poi.add_argument("--times", type=_times, default=np.linspace(0.0, 0.9, 10),
                     help="start:stop:count")
    poi.add_argument("--storage", choices=("csv", "binary"), default="csv")
    poi.add_argument("--out", required=True, help="manifest path")

    pulse = synth_sub.add_parser("pulse")
    pulse.add_argument("--series", required=True)
    pulse.add_argument("--waveform", required=True, help="CSV of t,q pairs")
    pulse.add_argument("--mean-flow", type=float, default=None)
    pulse.add_argument("--mesh", default=None,
                       help="scale only the tangential part against this mesh")
    pulse.add_argument("--storage", choices=("csv", "binary"), default="csv")
    pulse.add_argument("--out", required=True, help="manifest path")

    cl = sub.add_parser("centerline", help="centerline operations")
    cl_sub = cl.add_subparsers(dest="what", required=True)
    cle = cl_sub.add_parser("extract")
    cle.add_argument("--mesh", required=True)
    cle.add_argument("--source", type=_vec, required=True)
    cle.add_argument("--target", type=_vec, action="append", required=True)
    cle.add_argument("--spacing", type=float, default=0.5)
    cle.add_argument("--out", required=True)

    tan = sub.add_parser("tangents", help="construct tangential fields")
    tan.add_argument("method", choices=("auto", "flip", "project"))
    tan.add_argument("--mesh", required=True)
    tan.add_argument("--centerline", default=None)
    tan.add_argument("--flow-vector", type=_flow_vector, action="append",
                     default=None, metavar="LABEL:X,Y,Z")
    tan.add_argument("--blend", action="store_true")
    tan.add_argument("--out", required=True)
    tan.add_argument("--vtk", default=None)

    wss_cmd = sub.add_parser("wss", help="WSS vector and scalar components")
    wss_cmd.add_argument("--mesh", required=True)
    wss_cmd.add_argument("--series", required=True)
    wss_cmd.add_argument("--tangents", default=None)
    wss_cmd.add_argument("--which", default="vector,amplitude",
                         help="vector,amplitude,longitudinal,transversal")
    wss_cmd.add_argument("--storage", choices=("csv", "binary"), default="csv")
    wss_cmd.add_argument("--out-dir", required=True)

    ind = sub.add_parser("indicators", help="windowed temporal indicators")
    ind.add_argument("--mesh", required=True)
    ind.add_argument("--series", required=True)
    ind.add_argument("--tangents", default=None)
    ind.add_argument("--window", type=_window, default=None, metavar="A:B")
    ind.add_argument("--which", default="osi,osil,tawss")
    ind.add_argument("--out-dir", required=True)
    ind.add_argument("--vtk", default=None)

    conv = sub.add_parser("convergence", help="mesh refinement study")
    conv.add_argument("--table", default=None, help="CSV of h + error columns")
    conv.add_argument("--meshes", nargs="+", default=None)
    conv.add_argument("--fields", nargs="+", default=None,
                      help="one indicator CSV per mesh")
    conv.add_argument("--reference", type=int, default=-1)
    conv.add_argument("--measure", choices=("surface", "volume"), default="surface")
    conv.add_argument("--out", default=None, help="report CSV path")

    exp = sub.add_parser("export", help="VTK export of mesh plus fields")
    exp.add_argument("--mesh", required=True)
    exp.add_argument("--scalar", action="append", default=[],
                     metavar="NAME=INDICATOR_CSV")
    exp.add_argument("--vector", action="append", default=[],
                     metavar="NAME=TANGENT_CSV")
    exp.add_argument("--series", default=None,
                     help="also export one time slice of this series")
    exp.add_argument("--time-index", type=int, default=0)
    exp.add_argument("--out", required=True)

    pipe = sub.add_parser("pipeline", help="end-to-end indicator pipeline")
    pipe.add_argument("--config", default=None)
    pipe.add_argument("--set", action="append", default=[], metavar="KEY=VALUE")

    return parser


def _cmd_synth(args) -> int:
    if args.what == "cylinder":
        mesh = make_cylinder_mesh(args.radius, args.length, args.n_theta,
                                  args.n_z, capped=args.capped)
        save_surface_mesh(args.out, mesh)
    elif args.what == "yjunction":
        mesh = make_y_junction_mesh(
            args.trunk_radius, args.branch_radius_a, args.branch_radius_b,
            args.angle, pitch=args.pitch, trunk_length=args.trunk_length,
            branch_length=args.branch_length,
        )
        save_surface_mesh(args.out, mesh)
    elif args.what == "poiseuille":
        mesh = load_surface_mesh(args.mesh)
        series = poiseuille_traction(
            mesh, axis=args.axis, flow_ml_s=args.flow,
            viscosity_pa_s=args.viscosity, radius_mm=args.radius,
            times=args.times, pressure=args.pressure,
        )
        save_series(args.out, series, mesh_file=os.path.basename(args.mesh),
                    storage=args.storage)
    elif args.what == "pulse":
        series, mesh_file = load_series(args.series)
        normals = None
        if args.mesh:
            normals = load_surface_mesh(args.mesh).vertex_normals
        scaled = pulsatile_scale(series, _load_waveform(args.waveform),
                                 normals=normals, mean_flow=args.mean_flow)
        save_series(args.out, scaled, mesh_file=mesh_file, storage=args.storage)
    return 0


def _cmd_centerline(args) -> int:
    mesh = load_surface_mesh(args.mesh)
    cl = extract_centerline(mesh, args.source, args.target,
                            spacing=args.spacing, workers=thread_count())
    save_centerline(args.out, cl)
    print(f"extracted {cl.n_branches} branch(es) -> {args.out}")
    return 0


def _cmd_tangents(args) -> int:
    if args.method == "project" and not args.centerline:
        raise UsageError("tangents project needs --centerline")
    if args.method == "flip" and not args.flow_vector:
        raise UsageError("tangents flip needs at least one --flow-vector")
    mesh = load_surface_mesh(args.mesh)
    workers = thread_count()
    if args.method == "auto":
        _, field = automatic_tangent_basis(mesh)
    elif args.method == "project":
        field = project_centerline_tangents(
            mesh, load_centerline(args.centerline), blend=args.blend,
            workers=workers,
        )
    else:
        _, t2 = automatic_tangent_basis(mesh)
        labels = None
        if args.centerline:
            labels = project_centerline_tangents(
                mesh, load_centerline(args.centerline), workers=workers
            ).region_labels
        field = flip_tangents(t2, dict(args.flow_vector), labels)
    save_tangent_csv(args.out, field)
    if args.vtk:
        export_vtk(args.vtk, mesh, {"tangent": field.vectors})
    print(f"{field.method}: {int(field.degenerate_mask.sum())} degenerate vertices")
    return 0


def _cmd_wss(args) -> int:
    which = args.which.split(",")
    bad = set(which) - {"vector", "amplitude", "longitudinal", "transversal"}
    if bad:
        raise UsageError(f"unknown wss component(s) {sorted(bad)}")
    mesh = load_surface_mesh(args.mesh)
    series, _ = load_series(args.series)
    if series.kind == "stress_tensor":
        series = traction_from_stress(series, mesh.vertex_normals)
    os.makedirs(args.out_dir, exist_ok=True)
    tau = wss_vector(series, mesh.vertex_normals)
    outputs = {}
    if "vector" in which:
        outputs["wss_vector"] = tau
    if "amplitude" in which:
        outputs["wss_amplitude"] = wss_amplitude(tau)
    if "longitudinal" in which or "transversal" in which:
        if not args.tangents:
            raise UsageError("longitudinal/transversal WSS needs --tangents")
        tf = load_tangent_csv(args.tangents)
        if "longitudinal" in which:
            outputs["wss_longitudinal"] = wss_longitudinal(series, tf)
        if "transversal" in which:
            outputs["wss_transversal"] = wss_transversal(series, tf,
                                                         mesh.vertex_normals)
    for name, out_series in outputs.items():
        manifest = os.path.join(args.out_dir, f"{name}.series")
        save_series(manifest, out_series, mesh_file=os.path.basename(args.mesh),
                    storage=args.storage)
        print(f"wrote {manifest}")
    return 0


def _cmd_indicators(args) -> int:
    which = args.which.split(",")
    bad = set(which) - {"osi", "osil", "tawss", "meanwssl"}
    if bad:
        raise UsageError(f"unknown indicator(s) {sorted(bad)}")
    mesh = load_surface_mesh(args.mesh)
    series, _ = load_series(args.series)
    if series.kind == "stress_tensor":
        series = traction_from_stress(series, mesh.vertex_normals)
    os.makedirs(args.out_dir, exist_ok=True)
    results = {}
    needs_scalar = [w for w in which if w in ("osil", "meanwssl")]
    scalar = series if series.kind == "scalar" else None
    if needs_scalar and scalar is None:
        if not args.tangents:
            raise UsageError(f"{needs_scalar[0]} needs --tangents or a scalar series")
        scalar = wss_longitudinal(series, load_tangent_csv(args.tangents))
    if series.kind == "traction_vector":
        tau = wss_vector(series, mesh.vertex_normals)
    else:
        tau = None
    for w in which:
        if w == "osi":
            if tau is None:
                raise UsageError("osi needs a vector series")
            results["OSI"] = osi_vector(tau, args.window)
        elif w == "osil":
            results["OSI_L"] = osi_longitudinal(scalar, args.window)
        elif w == "tawss":
            if tau is None:
                raise UsageError("tawss needs a vector series")
            results["TAWSS"] = tawss(tau, args.window)
        elif w == "meanwssl":
            results["MEAN_WSS_L"] = temporal_mean(scalar, args.window)
        else:
            raise UsageError(f"unknown indicator {w!r}")
    for name, ind in results.items():
        path = os.path.join(args.out_dir, f"{name.lower()}.csv")
        save_indicator_csv(path, ind)
        print(f"wrote {path}")
    if args.vtk:
        export_vtk(args.vtk, mesh, {n: r.values for n, r in results.items()})
    return 0


def _cmd_convergence(args) -> int:
    if args.table:
        hs, errors, counts = load_error_table_csv(args.table)
        report = report_from_error_table(hs, errors, counts)
    else:
        if not args.meshes or not args.fields:
            raise UsageError("need --table or both --meshes and --fields")
        if len(args.meshes) != len(args.fields):
            raise UsageError("--meshes and --fields must pair up")
        meshes = [load_surface_mesh(p) for p in args.meshes]
        fields = [load_indicator_csv(p)[0] for p in args.fields]
        report = run_convergence_study(
            meshes, {"field": fields}, reference_id=args.reference,
            measure=args.measure, workers=thread_count(),
        )
    sys.stdout.write(format_report(report))
    if args.out:
        save_report_csv(args.out, report)
    return 0


def _cmd_export(args) -> int:
    mesh = load_surface_mesh(args.mesh)
    fields = {}
    for item in args.scalar:
        name, path = item.split("=", 1)
        fields[name] = load_indicator_csv(path)[0]
    for item in args.vector:
        name, path = item.split("=", 1)
        fields[name] = load_tangent_csv(path).vectors
    if args.series:
        series, _ = load_series(args.series)
        if not 0 <= args.time_index < series.n_times:
            raise UsageError(
                f"time index {args.time_index} outside 0..{series.n_times - 1}"
            )
        if series.kind == "stress_tensor":
            raise UsageError("export a traction or scalar series, not tensors")
        fields[f"t{args.time_index}"] = series.samples[args.time_index]
    export_vtk(args.out, mesh, fields)
    return 0


def _cmd_pipeline(args) -> int:
    cfg = load_config(args.config) if args.config else PipelineConfig()
    overrides = []
    for item in args.set:
        if "=" not in item:
            raise UsageError(f"--set expects KEY=VALUE, got {item!r}")
        overrides.append(item.split("=", 1))
    apply_overrides(cfg, overrides)
    artifacts = run_pipeline(cfg)
    for name in sorted(artifacts):
        print(f"{name}: {artifacts[name]}")
    return 0


_COMMANDS = {
    "synth": _cmd_synth,
    "centerline": _cmd_centerline,
    "tangents": _cmd_tangents,
    "wss": _cmd_wss,
    "indicators": _cmd_indicators,
    "convergence": _cmd_convergence,
    "export": _cmd_export,
    "pipeline": _cmd_pipeline,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return _COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    except (VesselWSSError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
