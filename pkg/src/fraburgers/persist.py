"""CSV and manifest persistence.

CSV files are UTF-8 with a header row; floats are written with 17
significant digits so that a re-run is byte-identical.
"""
from __future__ import annotations

import csv
import json
import os
import threading
from dataclasses import fields, is_dataclass
from pathlib import Path

import numpy as np

from .errors import ContractViolation


def fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        return format(float(v), ".17g")
    if v is None:
        return "n/a"
    return str(v)


def write_rows_csv(rows, path, row_type=None):
    """Write dataclass rows, one named column per field."""
    rows = list(rows)
    row_type = row_type or (type(rows[0]) if rows else None)
    if row_type is None or not is_dataclass(row_type):
        raise ContractViolation("cannot infer a CSV schema for these rows")
    names = [f.name for f in fields(row_type)]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(names)
        for r in rows:
            w.writerow([fmt(getattr(r, n)) for n in names])


def write_table_csv(header, rows, path):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([fmt(v) for v in r])


def write_trajectory_csv(traj, path):
    header = ["t"] + [f"u_{j}" for j in range(traj.grid.n_modes)]
    write_table_csv(header, ([t, *v] for t, v in zip(traj.times, traj.values)), path)


def write_xy(xs, ys, path):
    """Two-column whitespace file for gnuplot."""
    with open(path, "w", encoding="utf-8") as fh:
        for x, y in zip(xs, ys):
            fh.write(f"{fmt(x)} {fmt(y)}\n")


def read_csv(path) -> list[dict[str, str]]:
    with open(path, newline="", encoding="utf-8") as fh:
        return list(csv.DictReader(fh))


class RunWriter:
    """Single funnel for every file written into one run directory."""

    def __init__(self, root):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)
        self._lock = threading.Lock()
        self.written: list[str] = []

    def path(self, name: str) -> Path:
        return self.root / name

    def _record(self, name):
        if name not in self.written:
            self.written.append(name)

    def rows(self, name, rows, row_type=None):
        with self._lock:
            write_rows_csv(rows, self.path(name), row_type)
            self._record(name)

    def table(self, name, header, rows):
        with self._lock:
            write_table_csv(header, rows, self.path(name))
            self._record(name)

    def trajectory(self, name, traj):
        with self._lock:
            write_trajectory_csv(traj, self.path(name))
            self._record(name)

    def xy(self, name, xs, ys):
        with self._lock:
            write_xy(xs, ys, self.path(name))
            self._record(name)

    def json(self, name, payload):
        with self._lock:
            tmp = self.path(name + ".tmp")
            tmp.write_text(json.dumps(payload, indent=2) + "\n", encoding="utf-8")
            os.replace(tmp, self.path(name))
