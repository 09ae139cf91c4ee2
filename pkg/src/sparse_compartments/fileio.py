"""On-disk formats: trajectory CSV, model/manifest JSON, metrics tables."""

from __future__ import annotations

import csv
import hashlib
import io
import json
import os
import tempfile
from pathlib import Path

import numpy as np

from .metrics import CSV_HEADER, MetricsReport
from .simulate import ModelSpec, Trajectory


def fmt(x: float) -> str:
    """Full precision: 17 significant digits, round-trips exactly."""
    return "%.17g" % x


def write_atomic(path, text: str) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return path


def sha256_file(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def trajectory_csv(traj: Trajectory) -> str:
    m = traj.num_vars
    lines = [",".join(["t"] + [f"x{i + 1}" for i in range(m)])]
    for t, row in zip(traj.times, traj.states):
        lines.append(",".join([fmt(t)] + [fmt(v) for v in row]))
    return "\n".join(lines) + "\n"


def write_trajectory(path, traj: Trajectory) -> Path:
    return write_atomic(path, trajectory_csv(traj))


def read_trajectory(path) -> Trajectory:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or rows[0][0] != "t":
        raise ValueError(f"{path}: expected a header starting with 't'")
    data = np.array([[float(v) for v in r] for r in rows[1:] if r], dtype=float)
    if data.ndim != 2 or data.shape[0] < 2 or data.shape[1] < 2:
        raise ValueError(f"{path}: need at least two samples and one state column")
    times = data[:, 0]
    dt = (times[-1] - times[0]) / (times.shape[0] - 1)
    return Trajectory(times, data[:, 1:], dt)


def derivative_csv(values) -> str:
    values = np.atleast_2d(values)
    lines = [",".join(f"x{i + 1}" for i in range(values.shape[1]))]
    lines.extend(",".join(fmt(v) for v in row) for row in values)
    return "\n".join(lines) + "\n"


def dumps(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True, default=_json_default) + "\n"


def _json_default(o):
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, Path):
        return str(o)
    raise TypeError(f"cannot serialize {type(o).__name__}")


def write_json(path, obj) -> Path:
    return write_atomic(path, dumps(obj))


def read_json(path) -> dict:
    with open(path) as fh:
        return json.load(fh)


def write_model(path, model: ModelSpec) -> Path:
    return write_json(path, model.to_json())


def read_model(path) -> ModelSpec:
    return ModelSpec.from_json(read_json(path))


def metrics_csv(rows: list[tuple[str, MetricsReport]], full_precision: bool = False) -> str:
    """Table-style metrics: 2 significant digits (``1.7E-14``) or full precision."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_HEADER)
    for method, rep in rows:
        cells = [fmt(v) if full_precision else "%.1E" % v for v in rep.row()]
        w.writerow([method] + cells)
    return buf.getvalue()


def tidy_csv(runs: list[tuple[str, Trajectory, Trajectory]], names) -> str:
    """Long format ``run,t,compartment,value,source`` for plotting."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["run", "t", "compartment", "value", "source"])
    for run, true, est in runs:
        for source, traj in (("true", true), ("estimated", est)):
            for t, row in zip(traj.times, traj.states):
                for name, v in zip(names, row):
                    w.writerow([run, fmt(t), name, fmt(v), source])
    return buf.getvalue()
