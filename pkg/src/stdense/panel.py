"""Temporal-spatial panel container and its columnar text format.

Observations are stored flat, ordered by time index and then by position
within the time index.  ``group_sizes[i]`` is the number of measurements
``m_i`` taken at time ``i``; :attr:`PanelDataset.offsets` gives the slice of
each time index in the flat arrays.

Text format (``stdense.panel/1``)::

    # stdense.panel/1
    # n=<n> d=<d>
    # group_sizes=<m_1>,<m_2>,...
    # columns=i,j,x1,...,xd,y[,f_true]
    <i>,<j>,<x1>,...,<xd>,<y>[,<f_true>]

``i`` is the time label (0-based unless the panel carries other labels),
``j`` the 0-based position within the time index.  Floats are written with
``repr`` so values survive a round trip bit for bit.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import InputShapeError, ParameterError, ParseError

PANEL_FORMAT = "stdense.panel/1"


@dataclass
class PanelDataset:
    group_sizes: np.ndarray
    x: np.ndarray
    y: np.ndarray
    f_true: np.ndarray | None = None
    time_labels: np.ndarray | None = None
    obs_ids: np.ndarray | None = None

    def __post_init__(self):
        self.group_sizes = np.asarray(self.group_sizes, dtype=np.int64)
        self.x = np.asarray(self.x, dtype=np.float64)
        self.y = np.asarray(self.y, dtype=np.float64).ravel()
        if self.x.ndim != 2:
            raise InputShapeError(f"x must be a 2-D array, got shape {self.x.shape}")
        if np.any(self.group_sizes < 1):
            raise ParameterError("group sizes must be positive")
        total = int(self.group_sizes.sum())
        if self.x.shape[0] != total or self.y.shape[0] != total:
            raise InputShapeError(
                f"group sizes sum to {total} but x has {self.x.shape[0]} rows and y {self.y.shape[0]}"
            )
        if self.f_true is not None:
            self.f_true = np.asarray(self.f_true, dtype=np.float64).ravel()
            if self.f_true.shape[0] != total:
                raise InputShapeError("f_true does not match group sizes")
        if self.time_labels is None:
            self.time_labels = np.arange(self.n, dtype=np.int64)
        self.time_labels = np.asarray(self.time_labels, dtype=np.int64)
        if self.time_labels.shape != (self.n,):
            raise InputShapeError("time_labels must have one entry per time index")
        if self.obs_ids is None:
            self.obs_ids = np.arange(total, dtype=np.int64)
        self.obs_ids = np.asarray(self.obs_ids, dtype=np.int64)
        if self.x.size and (self.x.min() < 0.0 or self.x.max() > 1.0):
            raise ParameterError("design points must lie in [0, 1]^d")

    @property
    def n(self):
        return len(self.group_sizes)

    @property
    def d(self):
        return self.x.shape[1]

    @property
    def size(self):
        return self.x.shape[0]

    @property
    def offsets(self):
        return np.concatenate([[0], np.cumsum(self.group_sizes)])

    @property
    def time_index(self):
        """Time index (0..n-1) of every flat observation."""
        return np.repeat(np.arange(self.n), self.group_sizes)

    def rows(self, i):
        """``(x, y)`` for time index ``i``."""
        lo, hi = self.offsets[i], self.offsets[i + 1]
        return self.x[lo:hi], self.y[lo:hi]

    def ragged(self, values=None):
        """Split a flat per-observation array (default ``y``) into per-time arrays."""
        values = self.y if values is None else np.asarray(values)
        return np.split(values, self.offsets[1:-1])

    def select_times(self, indices):
        """Panel restricted to the given time indices (kept in the order given)."""
        indices = np.asarray(indices, dtype=np.int64)
        off = self.offsets
        obs = np.concatenate([np.arange(off[i], off[i + 1]) for i in indices]) if len(indices) else np.array([], int)
        return PanelDataset(
            self.group_sizes[indices],
            self.x[obs],
            self.y[obs],
            None if self.f_true is None else self.f_true[obs],
            self.time_labels[indices],
            self.obs_ids[obs],
        )

    def select_observations(self, mask):
        """Panel keeping only flagged observations; emptied time indices are dropped."""
        mask = np.asarray(mask, dtype=bool)
        if mask.shape != (self.size,):
            raise InputShapeError("mask must have one entry per observation")
        counts = np.add.reduceat(mask.astype(np.int64), self.offsets[:-1]) if self.size else np.zeros(0, int)
        keep = counts > 0
        return PanelDataset(
            counts[keep],
            self.x[mask],
            self.y[mask],
            None if self.f_true is None else self.f_true[mask],
            self.time_labels[keep],
            self.obs_ids[mask],
        )

    def equals(self, other):
        """Value equality on everything except ``obs_ids``."""
        same_f = (self.f_true is None) == (other.f_true is None)
        if same_f and self.f_true is not None:
            same_f = np.array_equal(self.f_true, other.f_true)
        return (
            same_f
            and np.array_equal(self.group_sizes, other.group_sizes)
            and np.array_equal(self.time_labels, other.time_labels)
            and np.array_equal(self.x, other.x)
            and np.array_equal(self.y, other.y)
        )


def merge_panels(a, b):
    """Inverse of an observation-level split: reunite two panels and restore
    the original order using ``obs_ids``."""
    if a.d != b.d:
        raise InputShapeError("panels have different dimensions")
    ids = np.concatenate([a.obs_ids, b.obs_ids])
    labels = np.concatenate([np.repeat(a.time_labels, a.group_sizes), np.repeat(b.time_labels, b.group_sizes)])
    order = np.argsort(ids, kind="stable")
    x = np.vstack([a.x, b.x])[order]
    y = np.concatenate([a.y, b.y])[order]
    f = None
    if a.f_true is not None and b.f_true is not None:
        f = np.concatenate([a.f_true, b.f_true])[order]
    labels = labels[order]
    change = np.flatnonzero(np.diff(labels)) + 1
    starts = np.concatenate([[0], change])
    sizes = np.diff(np.concatenate([starts, [len(labels)]]))
    return PanelDataset(sizes, x, y, f, labels[starts], ids[order])


def save_panel(panel, path):
    path = Path(path)
    has_f = panel.f_true is not None
    cols = ["i", "j"] + [f"x{k + 1}" for k in range(panel.d)] + ["y"] + (["f_true"] if has_f else [])
    labels = np.repeat(panel.time_labels, panel.group_sizes)
    within = np.arange(panel.size) - np.repeat(panel.offsets[:-1], panel.group_sizes)
    with path.open("w", newline="") as fh:
        fh.write(f"# {PANEL_FORMAT}\n")
        fh.write(f"# n={panel.n} d={panel.d}\n")
        fh.write("# group_sizes=" + ",".join(str(int(m)) for m in panel.group_sizes) + "\n")
        fh.write("# columns=" + ",".join(cols) + "\n")
        writer = csv.writer(fh)
        for k in range(panel.size):
            row = [int(labels[k]), int(within[k])] + [repr(float(v)) for v in panel.x[k]] + [repr(float(panel.y[k]))]
            if has_f:
                row.append(repr(float(panel.f_true[k])))
            writer.writerow(row)


def load_panel(path):
    path = Path(path)
    header = {}
    rows = []
    with path.open(newline="") as fh:
        for lineno, line in enumerate(fh, start=1):
            if line.startswith("#"):
                body = line[1:].strip()
                if lineno == 1:
                    if body != PANEL_FORMAT:
                        raise ParseError(f"unsupported panel format {body!r}", line=lineno)
                    continue
                for token in body.split():
                    key, _, value = token.partition("=")
                    header[key] = value
                continue
            if not line.strip():
                continue
            rows.append((lineno, next(csv.reader([line]))))
    try:
        n, d = int(header["n"]), int(header["d"])
        sizes = [int(v) for v in header["group_sizes"].split(",")]
        cols = header["columns"].split(",")
    except (KeyError, ValueError) as exc:
        raise ParseError(f"bad panel header: {exc}") from exc
    if len(sizes) != n:
        raise ParseError(f"header says n={n} but lists {len(sizes)} group sizes")
    has_f = cols[-1] == "f_true"
    width = 2 + d + 1 + int(has_f)
    data = np.empty((len(rows), width))
    for k, (lineno, row) in enumerate(rows):
        if len(row) != width:
            raise ParseError(f"expected {width} fields, got {len(row)}", line=lineno)
        try:
            data[k] = [float(v) for v in row]
        except ValueError as exc:
            raise ParseError(str(exc), line=lineno) from exc
    sizes = np.asarray(sizes)
    starts = np.concatenate([[0], np.cumsum(sizes)[:-1]])
    labels = data[starts, 0].astype(np.int64) if len(data) else np.zeros(0, np.int64)
    return PanelDataset(
        sizes,
        data[:, 2 : 2 + d],
        data[:, 2 + d],
        data[:, 3 + d] if has_f else None,
        labels,
    )
