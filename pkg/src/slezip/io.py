"""CSV and JSON serialisation for paths, traces, measures and reports.

CSV files start with ``#`` comment lines. The first may carry a JSON header
(``# {"kappa": 2.0, ...}``); the next non-comment line names the columns.
Floats are written with ``repr`` so that reading back is exact.
"""

import csv
import dataclasses
import io as _io
import json
from pathlib import Path

import numpy as np

from .chaos import AtomicMeasure
from .loewner import DrivingPath, TraceSample


def _fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def to_jsonable(obj):
    """Plain Python structure for numpy arrays, dataclasses, complex numbers and tuples."""
    if dataclasses.is_dataclass(obj) and not isinstance(obj, type):
        if hasattr(obj, "to_dict"):
            return to_jsonable(obj.to_dict())
        return {f.name: to_jsonable(getattr(obj, f.name)) for f in dataclasses.fields(obj)}
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return to_jsonable(obj.tolist())
    if isinstance(obj, (complex, np.complexfloating)):
        return [float(obj.real), float(obj.imag)]
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    return obj


def dumps(obj):
    """Deterministic JSON text (sorted keys, NaN written as null)."""
    def clean(o):
        if isinstance(o, float) and o != o:
            return None
        if isinstance(o, dict):
            return {k: clean(v) for k, v in o.items()}
        if isinstance(o, list):
            return [clean(v) for v in o]
        return o
    return json.dumps(clean(to_jsonable(obj)), sort_keys=True, indent=2) + "\n"


def write_json(path, obj):
    Path(path).write_text(dumps(obj))


def csv_text(columns, rows, header=None, comments=()):
    """CSV text with optional JSON header and extra comment lines."""
    buf = _io.StringIO()
    if header is not None:
        buf.write("# " + json.dumps(to_jsonable(header), sort_keys=True) + "\n")
    for c in comments:
        buf.write(f"# {c}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        w.writerow([_fmt(v) for v in r])
    return buf.getvalue()


def write_csv(path, columns, rows, header=None, comments=()):
    Path(path).write_text(csv_text(columns, rows, header, comments))


def read_csv(path):
    """Return ``(header_dict_or_None, columns, float array of rows)``."""
    header = None
    lines = Path(path).read_text().splitlines()
    body = []
    for ln in lines:
        if ln.startswith("#"):
            txt = ln[1:].strip()
            if header is None and txt.startswith("{"):
                header = json.loads(txt)
            continue
        body.append(ln)
    reader = csv.reader(body)
    columns = next(reader)
    data = np.array([[float(v) for v in r] for r in reader], dtype=float)
    return header, columns, data.reshape(-1, len(columns))


# -- domain objects ----------------------------------------------------------

def path_to_csv(path_obj, filename):
    t = path_obj.times
    write_csv(filename, ["t", "value"], zip(t, path_obj.values),
              header={"dt": path_obj.dt, "kappa": path_obj.kappa})


def path_from_csv(filename):
    header, _, data = read_csv(filename)
    return DrivingPath(float(header["dt"]), data[:, 1].copy(), header.get("kappa"))


def trace_to_csv(trace, filename, header=None):
    rows = zip(trace.times, trace.points.real, trace.points.imag)
    write_csv(filename, ["t", "re", "im"], rows, header=header or {})


def trace_from_csv(filename):
    _, _, data = read_csv(filename)
    pts = data[:, 1] + 1j * data[:, 2]
    return TraceSample(data[:, 0].copy(), pts, ~np.isfinite(pts))


def measure_to_csv(measure, filename, header=None):
    """Atoms as ``(re, im, weight, scale, tag)``; the JSON header records provenance."""
    pos = np.asarray(measure.positions, complex)
    tags = np.full(pos.size, np.nan) if measure.tags is None else np.real(measure.tags)
    scale = np.nan if measure.scale is None else measure.scale
    meta = {"d": measure.d, "support": measure.support, **(header or {})}
    rows = ((p.real, p.imag, w, scale, tg) for p, w, tg in zip(pos, measure.weights, tags))
    write_csv(filename, ["re", "im", "weight", "scale", "tag"], rows, header=meta)


def measure_from_csv(filename):
    header, _, data = read_csv(filename)
    support = header.get("support", "boundary")
    pos = data[:, 0] if support == "boundary" else data[:, 0] + 1j * data[:, 1]
    tags = None if np.all(np.isnan(data[:, 4])) else data[:, 4].copy()
    scale = None if data.size == 0 or np.isnan(data[0, 3]) else float(data[0, 3])
    return AtomicMeasure(pos, data[:, 2].copy(), d=float(header.get("d", 1.0)),
                         support=support, scale=scale, tags=tags), header


def plot_text(columns, rows, comments=()):
    """Whitespace-separated columns under a ``#`` header naming them."""
    out = [f"# {c}" for c in comments]
    out.append("# " + " ".join(columns))
    out.extend(" ".join(_fmt(v) for v in r) for r in rows)
    return "\n".join(out) + "\n"


def read_plot(path):
    cols = None
    rows = []
    for ln in Path(path).read_text().splitlines():
        if ln.startswith("#"):
            cols = ln[1:].split()
            continue
        rows.append([float(v) for v in ln.split()])
    return cols, np.array(rows, dtype=float)
