"""CSV persistence for rasters, metric series, datasets, and checkpoints.

All writers emit a header row and format floats with repr, so identical
numbers always serialize to identical bytes; rerunning an experiment with
the same config and seed reproduces its files exactly.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DataError, StructureError
from .network import check_raster, flatten_params, unflatten_params


def _fmt(value) -> str:
    value = float(value)
    if value == int(value) and abs(value) < 1e15:
        return str(int(value))
    return repr(value)


def save_raster(path, bits):
    """Write a (n, steps) 0/1 raster as time-major CSV rows."""
    bits = check_raster(bits, name="raster")
    header = "t," + ",".join(f"n{i}" for i in range(bits.shape[0]))
    lines = [header]
    for t in range(bits.shape[1]):
        lines.append(f"{t}," + ",".join(str(int(b)) for b in bits[:, t]))
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def _read_lines(path):
    try:
        with open(path) as fh:
            return [line.strip() for line in fh if line.strip()]
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from exc


def _load_spike_table(path) -> np.ndarray:
    lines = _read_lines(path)
    if not lines or not lines[0].startswith("t,"):
        raise DataError(f"{path}: missing raster header 't,n0,...'")
    n = len(lines[0].split(",")) - 1
    rows = []
    for t, line in enumerate(lines[1:]):
        cells = line.split(",")
        if len(cells) != n + 1:
            raise DataError(f"{path}: row {t} has {len(cells) - 1} cells, expected {n}")
        try:
            if int(cells[0]) != t:
                raise DataError(f"{path}: time index {cells[0]} at row {t}")
            rows.append([int(c) for c in cells[1:]])
        except ValueError as exc:
            raise DataError(f"{path}: non-integer cell in row {t}") from exc
    return np.array(rows, dtype=np.int8).T.reshape(n, -1)


def load_raster(path) -> np.ndarray:
    """Read a raster CSV back to its (n, steps) 0/1 array."""
    return check_raster(_load_spike_table(path), name=str(path))


def load_plan(path) -> np.ndarray:
    """Read a clamp plan: the raster format extended with -1 for free cells."""
    plan = _load_spike_table(path)
    if plan.size and not np.isin(plan, (-1, 0, 1)).all():
        raise DataError(f"{path}: clamp plan cells must be -1, 0, or 1")
    return plan


@dataclass
class MetricSeries:
    """Named real-valued series over one shared, strictly increasing index."""

    index_name: str
    index: np.ndarray
    columns: dict = field(default_factory=dict)

    def __post_init__(self):
        self.index = np.asarray(self.index)
        if self.index.ndim != 1:
            raise StructureError("metric index must be 1-d")
        if self.index.size > 1 and not np.all(np.diff(self.index) > 0):
            raise StructureError("metric index must be strictly increasing")
        for name, values in self.columns.items():
            values = np.asarray(values, dtype=float)
            if values.shape != self.index.shape:
                raise StructureError(f"column {name!r} length differs from index")
            if not np.all(np.isfinite(values)):
                raise StructureError(f"column {name!r} contains non-finite values")
            self.columns[name] = values

    def column(self, name) -> np.ndarray:
        return self.columns[name]

    def save(self, path, columns=None):
        """Write "index,col1,col2,..." rows; columns picks and orders a subset."""
        names = list(self.columns) if columns is None else list(columns)
        lines = [",".join([self.index_name] + names)]
        for row, idx in enumerate(self.index):
            cells = [_fmt(idx)] + [_fmt(self.columns[name][row]) for name in names]
            lines.append(",".join(cells))
        with open(path, "w") as fh:
            fh.write("\n".join(lines) + "\n")


def load_metrics(path) -> MetricSeries:
    lines = _read_lines(path)
    if not lines:
        raise DataError(f"{path}: empty metrics file")
    names = lines[0].split(",")
    if len(names) < 2:
        raise DataError(f"{path}: metrics need an index and at least one column")
    table = []
    for line in lines[1:]:
        cells = line.split(",")
        if len(cells) != len(names):
            raise DataError(f"{path}: ragged metrics row {line!r}")
        table.append([float(c) for c in cells])
    data = np.array(table, dtype=float).reshape(len(table), len(names))
    columns = {name: data[:, j] for j, name in enumerate(names[1:], start=1)}
    return MetricSeries(names[0], data[:, 0], columns)


def save_checkpoint(path, topology, params):
    """One parameter per line in the documented flat order, after a header."""
    theta = flatten_params(topology, params)
    with open(path, "w") as fh:
        fh.write("theta\n")
        fh.write("\n".join(repr(float(v)) for v in theta) + "\n")


def load_checkpoint(path, topology, ff_size, fb_size):
    lines = _read_lines(path)
    if not lines or lines[0] != "theta":
        raise DataError(f"{path}: missing checkpoint header 'theta'")
    try:
        theta = np.array([float(v) for v in lines[1:]], dtype=float)
    except ValueError as exc:
        raise DataError(f"{path}: non-numeric checkpoint entry") from exc
    return unflatten_params(topology, theta, ff_size, fb_size)


def save_image_dataset(path, images, labels):
    """One row per image: the flattened pixel floats then the integer label."""
    images = np.asarray(images, dtype=float)
    labels = np.asarray(labels)
    if images.ndim != 2 or images.shape[0] != labels.shape[0]:
        raise StructureError("need (count, pixels) images and matching labels")
    lines = []
    for row, label in zip(images, labels):
        lines.append(",".join(repr(float(p)) for p in row) + f",{int(label)}")
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def load_image_dataset(path, n_pixels=256):
    """Read "p0,...,p255,label" rows -> (images (count, n_pixels), labels)."""
    lines = _read_lines(path)
    images, labels = [], []
    for row, line in enumerate(lines):
        cells = line.split(",")
        if len(cells) != n_pixels + 1:
            raise DataError(
                f"{path}: row {row} has {len(cells)} cells, expected {n_pixels + 1}")
        try:
            pixels = [float(c) for c in cells[:-1]]
            label = int(cells[-1])
        except ValueError as exc:
            raise DataError(f"{path}: malformed row {row}") from exc
        images.append(pixels)
        labels.append(label)
    if not images:
        raise DataError(f"{path}: empty dataset")
    return np.asarray(images, dtype=float), np.asarray(labels, dtype=np.intp)
