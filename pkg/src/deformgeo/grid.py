"""Sampled tensor components over a chart grid, with byte-stable JSON/CSV output."""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field
from itertools import product
from pathlib import Path

import numpy as np


def component_names(symbol: str, shape) -> list[str]:
    """Lexicographic component labels, e.g. R[0][1][0][1]."""
    return [symbol + "".join(f"[{i}]" for i in idx) for idx in product(*map(range, shape))]


def _fmt(v: float) -> str:
    return format(float(v), ".17g")


@dataclass
class TensorGrid:
    name: str
    coords: list
    shape: list  # grid shape (points per axis)
    index_labels: list  # e.g. ["mu", "rho", "pi", "nu"]
    components: list
    points: np.ndarray  # (npoints, ncoords), row-major over the grid
    values: np.ndarray  # (npoints, ncomponents)
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        self.points = np.asarray(self.points, dtype=float).reshape(-1, len(self.coords))
        self.values = np.asarray(self.values, dtype=float).reshape(len(self.points), -1)
        if self.values.shape[1] != len(self.components):
            raise ValueError("value count does not match grid size times component count")
        if int(np.prod(self.shape)) != len(self.points):
            raise ValueError("grid shape does not match the number of points")
        if not (np.all(np.isfinite(self.values)) and np.all(np.isfinite(self.points))):
            raise ValueError("tensor grids hold finite values only")

    def column(self, component: str) -> np.ndarray:
        return self.values[:, self.components.index(component)]

    # serialization -------------------------------------------------------------
    def to_json(self) -> str:
        def arr(rows):
            return "[" + ",\n  ".join("[" + ",".join(_fmt(v) for v in r) + "]" for r in rows) + "]"

        head = {
            "name": self.name,
            "coords": list(self.coords),
            "shape": [int(s) for s in self.shape],
            "index_labels": list(self.index_labels),
            "components": list(self.components),
            "metadata": {k: self.metadata[k] for k in sorted(self.metadata)},
        }
        body = json.dumps(head, indent=1, sort_keys=False)[:-2]
        return body + ',\n "points": ' + arr(self.points) + ',\n "values": ' + arr(self.values) + "\n}\n"

    def to_csv(self) -> str:
        buf = io.StringIO()
        for k in sorted(self.metadata):
            buf.write(f"# {k}: {self.metadata[k]}\n")
        buf.write(f"# name: {self.name}\n")
        buf.write(f"# shape: {' '.join(str(int(s)) for s in self.shape)}\n")
        buf.write(f"# index_labels: {' '.join(self.index_labels)}\n")
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(list(self.coords) + list(self.components))
        for p, v in zip(self.points, self.values):
            w.writerow([_fmt(a) for a in p] + [_fmt(a) for a in v])
        return buf.getvalue()

    @classmethod
    def from_json(cls, text: str) -> "TensorGrid":
        d = json.loads(text)
        return cls(d["name"], d["coords"], d["shape"], d["index_labels"], d["components"],
                   d["points"], d["values"], d["metadata"])

    @classmethod
    def from_csv(cls, text: str) -> "TensorGrid":
        meta, rows = {}, []
        lines = text.split("\n")
        body = []
        for line in lines:
            if line.startswith("# "):
                k, _, v = line[2:].partition(": ")
                meta[k] = v
            elif line:
                body.append(line)
        rows = list(csv.reader(body))
        header, data = rows[0], np.array(rows[1:], dtype=float)
        name = meta.pop("name")
        shape = [int(s) for s in meta.pop("shape").split()]
        labels = meta.pop("index_labels").split()
        n = len(shape)
        return cls(name, header[:n], shape, labels, header[n:], data[:, :n], data[:, n:], meta)


def emit(grid: TensorGrid, fmt: str, path) -> Path:
    """Write the grid as ``json`` or ``csv`` with LF line endings; returns the path."""
    if fmt == "json":
        text = grid.to_json()
    elif fmt == "csv":
        text = grid.to_csv()
    else:
        raise ValueError(f"unknown format {fmt!r}")
    p = Path(path)
    with open(p, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)
    return p


def read(path) -> TensorGrid:
    p = Path(path)
    text = p.read_text(encoding="utf-8")
    return TensorGrid.from_json(text) if p.suffix == ".json" else TensorGrid.from_csv(text)
