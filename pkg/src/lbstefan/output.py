"""CSV outputs.

Every file starts with ``#``-prefixed ``key: value`` metadata lines, then a
one-line header, then rows. Schemas:

* trace: ``time,position,exact_position,error,relative_error``
* profile (1D): ``x,theta,exact_theta``
* diagonal (2D): ``s,theta_t=<time>...`` one column per snapshot
* isolines: ``level,polyline_id,x,y``
* field (2D): ``x,y,theta``
* comparison: ``time,<label>_position...,<label>_error...,exact_position``
* bench: ``method,lattice,N,steps,seconds,seconds_per_step``
"""

from __future__ import annotations

import csv
import io
from pathlib import Path

import numpy as np

from lbstefan.analytic import exact_theta
from lbstefan.diagnostics import InterfaceTrace, extract_isolines_2d, sample_diagonal

__all__ = [
    "metadata",
    "write_csv",
    "read_csv",
    "write_trace",
    "read_trace",
    "write_outputs",
    "compare_runs",
]


def metadata(report) -> dict:
    spec = report.spec
    meta = {
        "case": spec.name,
        "case_hash": spec.digest(),
        "method": spec.method,
        "lattice": spec.lattice,
        "N": spec.N,
        "dx": spec.dx,
        "dt": report.dt,
        "tau": spec.relaxation,
        "Ste": spec.Ste,
        "t_final": report.t_final,
        "steps": report.steps,
        "wall_seconds": f"{report.wall_seconds:.3f}",
    }
    if spec.method == "IREBM":
        meta["delta"] = spec.delta
    return meta


def write_csv(path, header, rows, meta=None) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        for key, value in (meta or {}).items():
            fh.write(f"# {key}: {value}\n")
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in row])
    return path


def read_csv(path):
    """Return ``(meta, header, rows)`` with rows as a float array where possible."""
    meta, lines = {}, []
    with Path(path).open() as fh:
        for line in fh:
            if line.startswith("#"):
                key, _, value = line[1:].partition(":")
                meta[key.strip()] = value.strip()
            elif line.strip():
                lines.append(line)
    reader = csv.reader(io.StringIO("".join(lines)))
    header = next(reader)
    rows = [r for r in reader]
    try:
        data = np.array(rows, dtype=np.float64).reshape(len(rows), len(header))
    except ValueError:
        data = rows
    return meta, header, data


def write_trace(path, trace: InterfaceTrace, meta=None) -> Path:
    rel = trace.errors / np.where(trace.exact_positions > 0, trace.exact_positions, np.nan)
    rows = zip(trace.times, trace.positions, trace.exact_positions, trace.errors, rel)
    return write_csv(path, ["time", "position", "exact_position", "error", "relative_error"], rows, meta)


def read_trace(path):
    meta, header, data = read_csv(path)
    col = {name: i for i, name in enumerate(header)}
    missing = {"time", "position", "exact_position", "error"} - set(col)
    if missing:
        raise ValueError(f"{path}: not an interface trace, missing columns {sorted(missing)}")
    trace = InterfaceTrace(
        data[:, col["time"]], data[:, col["position"]], data[:, col["exact_position"]], data[:, col["error"]]
    )
    return meta, trace


def write_outputs(report) -> list[Path]:
    spec = report.spec
    meta = metadata(report)
    stem = Path(spec.output_dir) / f"{spec.name}_{spec.method}_N{spec.N}"
    written = []
    if "trace" in spec.outputs and report.trace is not None:
        written.append(write_trace(f"{stem}_trace.csv", report.trace, meta))
    if "profile" in spec.outputs and spec.dimension == 1:
        x = spec.dx * np.arange(spec.N)
        oracle = spec.oracle()
        exact = exact_theta(oracle, x, report.t_final) if oracle is not None else np.full_like(x, np.nan)
        written.append(write_csv(f"{stem}_profile.csv", ["x", "theta", "exact_theta"], zip(x, report.theta, exact), meta))
    if spec.dimension == 2:
        fields = dict(sorted(report.snapshots.items()))
        fields[report.t_final] = report.theta
        if "diagonal" in spec.outputs:
            cols, header = [], ["s"]
            for t, theta in fields.items():
                s, prof = sample_diagonal(theta, spec.dx)
                cols.append(prof)
                header.append(f"theta_t={t:.6g}")
            written.append(write_csv(f"{stem}_diagonal.csv", header, zip(s, *cols), meta))
        if "isolines" in spec.outputs:
            iso = extract_isolines_2d(report.theta, spec.isoline_levels, spec.dx)
            rows = []
            for level in iso.levels:
                for pid, line in enumerate(iso.polylines[level]):
                    rows.extend((level, pid, x, y) for x, y in line)
            written.append(write_csv(f"{stem}_isolines.csv", ["level", "polyline_id", "x", "y"], rows, meta))
        if "field" in spec.outputs:
            n = spec.N
            xs, ys = np.meshgrid(spec.dx * np.arange(n), spec.dx * np.arange(n), indexing="ij")
            written.append(
                write_csv(f"{stem}_field.csv", ["x", "y", "theta"], zip(xs.ravel(), ys.ravel(), report.theta.ravel()), meta)
            )
    return written


def compare_runs(traces, labels=None):
    """Tabulate several interface traces on the time grid of the first.

    ``traces`` holds :class:`InterfaceTrace` objects (or run reports with a
    ``trace``). Returns ``(header, rows)``. Other traces are resampled by
    linear interpolation when their grids differ.
    """
    traces = [getattr(t, "trace", t) for t in traces]
    if not traces:
        raise ValueError("compare_runs needs at least one trace")
    if labels is None:
        labels = [f"run{i}" for i in range(len(traces))]
    ref = traces[0]
    t = ref.times
    pos, err = [], []
    for tr in traces:
        if len(tr.times) == len(t) and np.array_equal(tr.times, t):
            p = tr.positions
        else:
            p = np.interp(t, tr.times, tr.positions)
        pos.append(p)
        err.append(np.abs(p - ref.exact_positions))
    header = ["time"] + [f"{l}_position" for l in labels] + [f"{l}_error" for l in labels] + ["exact_position"]
    rows = np.column_stack([t, *pos, *err, ref.exact_positions])
    return header, rows
