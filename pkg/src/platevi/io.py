"""Legacy-VTK and CSV writers.

All floats are written with 17 significant digits so files round-trip
doubles exactly and are byte-identical across repeated runs.
"""
import math

import numpy as np

VTK_TRIANGLE = 5
CSV_HEADER = "h,ndof,err_energy,err_h1,err_linf,pdas_iters,solve_seconds"


def fmt(x):
    x = float(x)
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return f"{x:.17g}"


def vtk_text(mesh, point_data=None, title="plate-vi"):
    """Legacy ASCII unstructured-grid document for a triangle mesh.

    ``point_data`` maps field names to arrays with one value per vertex; they
    are written as SCALARS blocks in insertion order.
    """
    v = mesh.vertices
    t = mesh.triangles
    out = ["# vtk DataFile Version 3.0", title.replace("\n", " ")[:255], "ASCII",
           "DATASET UNSTRUCTURED_GRID", f"POINTS {len(v)} double"]
    out += [f"{fmt(x)} {fmt(y)} 0" for x, y in v]
    out.append(f"CELLS {len(t)} {4 * len(t)}")
    out += [f"3 {a} {b} {c}" for a, b, c in t]
    out.append(f"CELL_TYPES {len(t)}")
    out += [str(VTK_TRIANGLE)] * len(t)
    if point_data:
        out.append(f"POINT_DATA {len(v)}")
        for name, values in point_data.items():
            values = np.asarray(values, dtype=float)
            if values.shape != (len(v),):
                raise ValueError(f"point field {name!r} has shape {values.shape}, expected ({len(v)},)")
            out.append(f"SCALARS {name} double 1")
            out.append("LOOKUP_TABLE default")
            out += [fmt(x) for x in values]
    return "\n".join(out) + "\n"


def write_vtk(path, mesh, point_data=None, title="plate-vi"):
    with open(path, "w", newline="\n") as fh:
        fh.write(vtk_text(mesh, point_data, title))


def read_vtk_points(path):
    """Minimal reader for files written by :func:`write_vtk`; returns
    ``(points, triangles, point_data)``."""
    with open(path) as fh:
        lines = fh.read().split("\n")
    i = lines.index(next(line for line in lines if line.startswith("POINTS")))
    nv = int(lines[i].split()[1])
    pts = np.array([[float(a) for a in lines[i + 1 + k].split()[:2]] for k in range(nv)])
    i += 1 + nv
    nt = int(lines[i].split()[1])
    tris = np.array([[int(a) for a in lines[i + 1 + k].split()[1:]] for k in range(nt)])
    i += 1 + nt
    i += 1 + nt  # CELL_TYPES block
    data = {}
    if i < len(lines) and lines[i].startswith("POINT_DATA"):
        i += 1
        while i < len(lines) and lines[i].startswith("SCALARS"):
            name = lines[i].split()[1]
            data[name] = np.array([float(x) for x in lines[i + 2: i + 2 + nv]])
            i += 2 + nv
    return pts, tris, data


def study_csv(study):
    """CSV text of a StudyResult with the fitted rates on a trailing comment."""
    lines = [CSV_HEADER]
    for r in study.rows:
        lines.append(",".join([fmt(r.h), str(int(r.ndof)), fmt(r.err_energy), fmt(r.err_h1),
                               fmt(r.err_linf), str(int(r.pdas_iters)), fmt(r.solve_seconds)]))
    rates = study.rates
    lines.append(f"# rate_energy={fmt(rates['energy'])},rate_h1={fmt(rates['h1'])},"
                 f"rate_linf={fmt(rates['linf'])}")
    return "\n".join(lines) + "\n"


def write_study_csv(path, study):
    with open(path, "w", newline="\n") as fh:
        fh.write(study_csv(study))


def read_study_csv(path):
    """Parse a study CSV back into ``(rows, rates)``; rows are dicts."""
    rows, rates = [], {}
    with open(path) as fh:
        header = fh.readline().strip().split(",")
        for line in fh:
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                for item in line[1:].strip().split(","):
                    k, v = item.split("=")
                    rates[k.removeprefix("rate_")] = float(v)
                continue
            rows.append(dict(zip(header, (float(x) for x in line.split(",")))))
    return rows, rates
