"""On-disk formats: series manifests, field CSVs, VTK legacy, reports.

Every float written by this module is either round-trip safe (repr) or, for
VTK, fixed at 9 significant digits, so identical data always produces
identical bytes.
"""

from __future__ import annotations

import csv
import os

import numpy as np

from .errors import LengthMismatchError, ParseError
from .indicators import IndicatorField
from .mesh import SurfaceMesh
from .tangents import TangentField
from .wss import KIND_SHAPES, WallFieldSeries

_COMPONENTS = {"traction_vector": 3, "stress_tensor": 9, "scalar": 1}


def parse_keyvalue(path: str) -> dict[str, str]:
    """Parse `key = value` lines; later duplicate keys win; # comments."""
    out: dict[str, str] = {}
    with open(path, "r") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.split("#")[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ParseError(f"{path}:{lineno}: expected 'key = value'")
            key, value = line.split("=", 1)
            out[key.strip()] = value.strip()
    return out


def write_keyvalue(path: str, items) -> None:
    with open(path, "w") as fh:
        for key, value in items:
            fh.write(f"{key} = {value}\n")


# ---------------------------------------------------------------------------
# per-time sample files


def _write_samples_csv(path: str, values: np.ndarray) -> None:
    flat = values.reshape(len(values), -1)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["vertex_id"] + [f"c{k}" for k in range(flat.shape[1])])
        for i, row in enumerate(flat):
            writer.writerow([i] + [repr(float(x)) for x in row])


def _read_samples_csv(path: str, n_components: int) -> np.ndarray:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or header[0] != "vertex_id":
            raise ParseError(f"{path}: missing vertex_id header")
        if len(header) - 1 != n_components:
            raise ParseError(
                f"{path}: expected {n_components} components, got {len(header) - 1}"
            )
        rows = []
        for row in reader:
            if not row:
                continue
            rows.append([float(x) for x in row[1:]])
    return np.array(rows, dtype=float)


def _write_samples_binary(path: str, values: np.ndarray) -> None:
    with open(path, "wb") as fh:
        fh.write(np.ascontiguousarray(values, dtype="<f8").tobytes())


def _read_samples_binary(path: str, n_vertices: int, n_components: int) -> np.ndarray:
    data = np.fromfile(path, dtype="<f8")
    if data.size != n_vertices * n_components:
        raise ParseError(
            f"{path}: expected {n_vertices * n_components} doubles, got {data.size}"
        )
    return data.reshape(n_vertices, n_components)


def save_series(manifest_path: str, series: WallFieldSeries, mesh_file: str = "",
                storage: str = "csv", units: str = "N/m2") -> None:
    """Write a series manifest plus one data file per time sample.

    storage: 'csv' (vertex_id + components) or 'binary' (packed little-endian
    float64 in vertex order). Data files sit next to the manifest.
    """
    if storage not in ("csv", "binary"):
        raise ParseError(f"unknown storage {storage!r}")
    directory = os.path.dirname(os.path.abspath(manifest_path))
    os.makedirs(directory, exist_ok=True)
    stem = os.path.splitext(os.path.basename(manifest_path))[0]
    ext = "csv" if storage == "csv" else "bin"
    items = [
        ("mesh", mesh_file),
        ("kind", series.kind),
        ("units", units),
        ("storage", storage),
        ("nvertices", str(series.n_vertices)),
        ("window", f"{series.window[0]!r} {series.window[1]!r}"),
    ]
    if series.mask is not None and series.mask.any():
        items.append(("masked", " ".join(map(str, np.flatnonzero(series.mask)))))
    for i, t in enumerate(series.times):
        name = f"{stem}_t{i:04d}.{ext}"
        data = series.samples[i].reshape(series.n_vertices, -1)
        if storage == "csv":
            _write_samples_csv(os.path.join(directory, name), data)
        else:
            _write_samples_binary(os.path.join(directory, name), data)
        items.append((f"time {i}", f"{float(t)!r} {name}"))
    write_keyvalue(manifest_path, items)


def load_series(manifest_path: str) -> tuple[WallFieldSeries, str]:
    """Read a series manifest; returns (series, mesh file name)."""
    kv = parse_keyvalue(manifest_path)
    directory = os.path.dirname(os.path.abspath(manifest_path))
    for key in ("kind", "storage", "nvertices"):
        if key not in kv:
            raise ParseError(f"{manifest_path}: missing key {key!r}")
    kind = kv["kind"]
    if kind not in KIND_SHAPES:
        raise ParseError(f"{manifest_path}: unknown kind {kind!r}")
    storage = kv["storage"]
    n_vertices = int(kv["nvertices"])
    n_comp = _COMPONENTS[kind]
    entries = []
    for key, value in kv.items():
        if key.startswith("time "):
            idx = int(key[5:])
            t_str, name = value.split(None, 1)
            entries.append((idx, float(t_str), name))
    if not entries:
        raise ParseError(f"{manifest_path}: no time entries")
    entries.sort()
    times, samples = [], []
    for _, t, name in entries:
        path = os.path.join(directory, name)
        if storage == "csv":
            data = _read_samples_csv(path, n_comp)
        else:
            data = _read_samples_binary(path, n_vertices, n_comp)
        if len(data) != n_vertices:
            raise ParseError(f"{path}: expected {n_vertices} vertices")
        times.append(t)
        samples.append(data)
    samples = np.array(samples)
    if kind == "scalar":
        samples = samples[:, :, 0]
    elif kind == "stress_tensor":
        samples = samples.reshape(len(times), n_vertices, 3, 3)
    window = None
    if "window" in kv:
        a, b = kv["window"].split()
        window = (float(a), float(b))
    mask = None
    if "masked" in kv and kv["masked"]:
        mask = np.zeros(n_vertices, dtype=bool)
        mask[[int(x) for x in kv["masked"].split()]] = True
    series = WallFieldSeries(np.array(times), kind, samples, window, mask)
    return series, kv.get("mesh", "")


# ---------------------------------------------------------------------------
# indicator and tangent field CSVs


def save_indicator_csv(path: str, indicator: IndicatorField) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["vertex_id", "value", "flagged"])
        for i, (v, m) in enumerate(zip(indicator.values, indicator.mask)):
            writer.writerow([i, repr(float(v)), int(m)])


def load_indicator_csv(path: str):
    """Returns (values, flagged) arrays from an indicator CSV."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != ["vertex_id", "value", "flagged"]:
            raise ParseError(f"{path}: not an indicator CSV")
        values, flags = [], []
        for row in reader:
            if not row:
                continue
            values.append(float(row[1]))
            flags.append(bool(int(row[2])))
    return np.array(values), np.array(flags, dtype=bool)


def save_tangent_csv(path: str, tf: TangentField) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["vertex_id", "tx", "ty", "tz", "method", "degenerate"])
        for i in range(tf.n_vertices):
            x, y, z = tf.vectors[i]
            writer.writerow(
                [i, repr(float(x)), repr(float(y)), repr(float(z)), tf.method,
                 int(tf.degenerate_mask[i])]
            )


def load_tangent_csv(path: str) -> TangentField:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != ["vertex_id", "tx", "ty", "tz", "method", "degenerate"]:
            raise ParseError(f"{path}: not a tangent field CSV")
        vectors, methods, degenerate = [], set(), []
        for row in reader:
            if not row:
                continue
            vectors.append([float(row[1]), float(row[2]), float(row[3])])
            methods.add(row[4])
            degenerate.append(bool(int(row[5])))
    if len(methods) != 1:
        raise ParseError(f"{path}: mixed or missing methods {sorted(methods)}")
    return TangentField(np.array(vectors), methods.pop(),
                        np.array(degenerate, dtype=bool))


# ---------------------------------------------------------------------------
# VTK legacy ASCII POLYDATA


def _fmt9(x: float) -> str:
    return format(float(x), ".9g")


def export_vtk(path: str, mesh: SurfaceMesh, fields: dict | None = None,
               title: str = "vesselwss output") -> None:
    """Write mesh plus named point-data fields as VTK legacy ASCII POLYDATA.

    Fields of shape (n,) become SCALARS blocks, (n, 3) VECTORS blocks, in
    the given order, with 9 significant digits.
    """
    fields = fields or {}
    for name, values in fields.items():
        if len(values) != mesh.n_vertices:
            raise LengthMismatchError(
                f"field {name!r} has {len(values)} values for "
                f"{mesh.n_vertices} vertices"
            )
    with open(path, "w") as fh:
        fh.write("# vtk DataFile Version 3.0\n")
        fh.write(f"{title}\n")
        fh.write("ASCII\n")
        fh.write("DATASET POLYDATA\n")
        fh.write(f"POINTS {mesh.n_vertices} double\n")
        for x, y, z in mesh.vertices:
            fh.write(f"{_fmt9(x)} {_fmt9(y)} {_fmt9(z)}\n")
        fh.write(f"POLYGONS {mesh.n_triangles} {4 * mesh.n_triangles}\n")
        for a, b, c in mesh.triangles:
            fh.write(f"3 {a} {b} {c}\n")
        if fields:
            fh.write(f"POINT_DATA {mesh.n_vertices}\n")
            for name, values in fields.items():
                values = np.asarray(values, dtype=float)
                if values.ndim == 1:
                    fh.write(f"SCALARS {name} double 1\n")
                    fh.write("LOOKUP_TABLE default\n")
                    for v in values:
                        fh.write(f"{_fmt9(v)}\n")
                elif values.ndim == 2 and values.shape[1] == 3:
                    fh.write(f"VECTORS {name} double\n")
                    for x, y, z in values:
                        fh.write(f"{_fmt9(x)} {_fmt9(y)} {_fmt9(z)}\n")
                else:
                    raise LengthMismatchError(
                        f"field {name!r} must be (n,) or (n, 3), got {values.shape}"
                    )


def read_vtk_polydata(path: str):
    """Read back a legacy ASCII POLYDATA file written by export_vtk.

    Returns (vertices, triangles, fields dict). Supports only the blocks the
    writer emits.
    """
    with open(path, "r") as fh:
        lines = [ln.strip() for ln in fh]
    i = 0

    def next_line():
        nonlocal i
        while i < len(lines) and not lines[i]:
            i += 1
        if i >= len(lines):
            raise ParseError(f"{path}: truncated VTK file")
        i += 1
        return lines[i - 1]

    if not next_line().startswith("# vtk"):
        raise ParseError(f"{path}: missing VTK header")
    next_line()  # title
    if next_line() != "ASCII":
        raise ParseError(f"{path}: only ASCII supported")
    if next_line() != "DATASET POLYDATA":
        raise ParseError(f"{path}: only POLYDATA supported")
    tok = next_line().split()
    if tok[0] != "POINTS":
        raise ParseError(f"{path}: expected POINTS")
    n = int(tok[1])
    verts = np.array([[float(x) for x in next_line().split()] for _ in range(n)])
    tok = next_line().split()
    if tok[0] != "POLYGONS":
        raise ParseError(f"{path}: expected POLYGONS")
    m = int(tok[1])
    tris = []
    for _ in range(m):
        row = next_line().split()
        if row[0] != "3":
            raise ParseError(f"{path}: only triangles supported")
        tris.append([int(x) for x in row[1:4]])
    fields: dict[str, np.ndarray] = {}
    while i < len(lines):
        if not lines[i]:
            i += 1
            continue
        tok = next_line().split()
        if tok[0] == "POINT_DATA":
            continue
        if tok[0] == "SCALARS":
            next_line()  # LOOKUP_TABLE
            fields[tok[1]] = np.array([float(next_line()) for _ in range(n)])
        elif tok[0] == "VECTORS":
            fields[tok[1]] = np.array(
                [[float(x) for x in next_line().split()] for _ in range(n)]
            )
        else:
            raise ParseError(f"{path}: unsupported block {tok[0]!r}")
    return verts, np.array(tris, dtype=np.int64), fields


# ---------------------------------------------------------------------------
# convergence report output


def format_report(report) -> str:
    """Aligned-column text table of a ConvergenceReport."""
    names = report.field_names
    header = ["mesh", "elements", "h"]
    for n in names:
        header += [f"err({n})", f"EOC({n})"]
    rows = [header]
    for r in report.rows:
        row = [str(r.mesh_id),
               "-" if r.element_count is None else f"{r.element_count:.3E}"
               if r.element_count >= 1000 else str(r.element_count),
               f"{r.h:.4g}"]
        for n in names:
            row.append(f"{r.errors[n]:.3E}")
            row.append("-" if r.eoc[n] is None else f"{r.eoc[n]:.3f}")
        rows.append(row)
    widths = [max(len(row[c]) for row in rows) for c in range(len(header))]
    out = []
    for row in rows:
        out.append("  ".join(cell.rjust(w) for cell, w in zip(row, widths)))
    return "\n".join(out) + "\n"


def save_report_csv(path: str, report) -> None:
    names = report.field_names
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        header = ["mesh", "elements", "h"]
        for n in names:
            header += [f"err_{n}", f"eoc_{n}"]
        writer.writerow(header)
        for r in report.rows:
            row = [r.mesh_id,
                   "" if r.element_count is None else r.element_count,
                   repr(r.h)]
            for n in names:
                row.append(repr(r.errors[n]))
                row.append("" if r.eoc[n] is None else repr(r.eoc[n]))
            writer.writerow(row)


def load_error_table_csv(path: str):
    """Read an ingestion table: columns h, then one error column per field.

    Accepts an optional leading `elements` column; returns
    (hs, errors_by_name, element_counts or None).
    """
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise ParseError(f"{path}: empty table")
        header = [h.strip() for h in header]
        rows = [row for row in reader if row]
    cols = {name: [row[k] for row in rows] for k, name in enumerate(header)}
    if "h" not in cols:
        raise ParseError(f"{path}: table needs an 'h' column")
    hs = np.array([float(x) for x in cols["h"]])
    counts = None
    if "elements" in cols:
        counts = [int(float(x)) for x in cols["elements"]]
    errors = {}
    for name in header:
        if name in ("h", "elements"):
            continue
        errors[name] = np.array([float(x) for x in cols[name]])
    if not errors:
        raise ParseError(f"{path}: table needs at least one error column")
    return hs, errors, counts
