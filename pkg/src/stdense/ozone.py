"""Ingestion of EPA-style daily ozone station records into a panel.

Expected CSV header (case and spacing insensitive)::

    State Code, County Code, Site Number, Latitude, Longitude,
    Date, Ozone, AQI, Wind, Temperature

``Date`` may be replaced by three columns ``Year, Month, Day``.  Dates
accept ``YYYY-MM-DD`` or ``MM/DD/YYYY``.

Each calendar date becomes one time index; the stations reporting that day
are its measurements.  Features are latitude, longitude, wind and
temperature min-max scaled to [0, 1], followed (optionally) by a one-hot
encoding of the state code.  The response is the raw ozone value (ppm).
"""
from __future__ import annotations

import csv
import datetime as dt
import json
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from .errors import FieldError, ParameterError, ParseError
from .panel import PanelDataset

NUMERIC_FEATURES = ("latitude", "longitude", "wind", "temperature")
REQUIRED = ("state_code", "county_code", "site_number", "latitude", "longitude", "ozone", "aqi", "wind", "temperature")


@dataclass(frozen=True)
class OzoneRecord:
    state_code: str
    county_code: str
    site_number: str
    latitude: float
    longitude: float
    date: dt.date
    ozone: float
    aqi: float
    wind: float
    temperature: float


@dataclass
class MinMaxScaling:
    """Per-column ``(v - lo) / (hi - lo)``; a zero-range column maps to 0."""

    columns: list
    lo: list
    hi: list
    states: list

    def transform(self, values):
        values = np.asarray(values, dtype=np.float64)
        lo, hi = np.asarray(self.lo), np.asarray(self.hi)
        span = hi - lo
        out = np.zeros_like(values)
        ok = span > 0
        out[:, ok] = (values[:, ok] - lo[ok]) / span[ok]
        return np.clip(out, 0.0, 1.0)

    def inverse(self, scaled):
        scaled = np.asarray(scaled, dtype=np.float64)
        return scaled * (np.asarray(self.hi) - np.asarray(self.lo)) + np.asarray(self.lo)

    def save(self, path):
        Path(path).write_text(json.dumps(asdict(self), indent=2))

    @classmethod
    def load(cls, path):
        return cls(**json.loads(Path(path).read_text()))


def _norm(name):
    return "_".join(name.strip().lower().split())


def _parse_date(text, lineno):
    text = text.strip()
    for fmt in ("%Y-%m-%d", "%m/%d/%Y"):
        try:
            return dt.datetime.strptime(text, fmt).date()
        except ValueError:
            pass
    raise FieldError(f"unparseable date {text!r}", line=lineno)


def read_ozone_records(path):
    path = Path(path)
    records = []
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = [_norm(h) for h in next(reader)]
        except StopIteration:
            raise ParseError("empty file; a header row is required", line=1) from None
        missing = [c for c in REQUIRED if c not in header]
        split_date = "date" not in header
        if split_date:
            missing += [c for c in ("year", "month", "day") if c not in header]
        if missing:
            raise ParseError(f"header is missing columns: {', '.join(missing)}", line=1)
        col = {name: k for k, name in enumerate(header)}
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not v.strip() for v in row):
                continue
            if len(row) != len(header):
                raise ParseError(f"expected {len(header)} fields, got {len(row)}", line=lineno)
            if split_date:
                try:
                    date = dt.date(*(int(row[col[c]]) for c in ("year", "month", "day")))
                except ValueError as exc:
                    raise FieldError(f"invalid date: {exc}", line=lineno) from None
            else:
                date = _parse_date(row[col["date"]], lineno)
            try:
                nums = {c: float(row[col[c]]) for c in ("latitude", "longitude", "ozone", "aqi", "wind", "temperature")}
            except ValueError as exc:
                raise ParseError(f"non-numeric field: {exc}", line=lineno) from None
            if not -90 <= nums["latitude"] <= 90:
                raise FieldError(f"latitude {nums['latitude']} out of range", line=lineno)
            if not -180 <= nums["longitude"] <= 180:
                raise FieldError(f"longitude {nums['longitude']} out of range", line=lineno)
            records.append(
                OzoneRecord(
                    row[col["state_code"]].strip(),
                    row[col["county_code"]].strip(),
                    row[col["site_number"]].strip(),
                    date=date,
                    **nums,
                )
            )
    return records


def write_ozone_records(records, path):
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["State Code", "County Code", "Site Number", "Latitude", "Longitude", "Date", "Ozone", "AQI", "Wind", "Temperature"])
        for r in records:
            w.writerow([
                r.state_code, r.county_code, r.site_number, repr(r.latitude), repr(r.longitude),
                r.date.isoformat(), repr(r.ozone), repr(r.aqi), repr(r.wind), repr(r.temperature),
            ])


def records_to_panel(records, include_state=True):
    """Group records by date and build the scaled panel.  Returns ``(panel, scaling)``."""
    if not records:
        raise ParameterError("no ozone records to ingest")
    order = sorted(range(len(records)), key=lambda k: records[k].date)
    recs = [records[k] for k in order]
    raw = np.array([[getattr(r, c) for c in NUMERIC_FEATURES] for r in recs], dtype=np.float64)
    states = sorted({r.state_code for r in recs}) if include_state else []
    scaling = MinMaxScaling(list(NUMERIC_FEATURES), raw.min(axis=0).tolist(), raw.max(axis=0).tolist(), states)
    x = scaling.transform(raw)
    if states:
        index = {s: k for k, s in enumerate(states)}
        onehot = np.zeros((len(recs), len(states)))
        onehot[np.arange(len(recs)), [index[r.state_code] for r in recs]] = 1.0
        x = np.hstack([x, onehot])
    days = np.array([r.date.toordinal() for r in recs])
    labels, sizes = np.unique(days, return_counts=True)
    y = np.array([r.ozone for r in recs])
    return PanelDataset(sizes, x, y, None, labels), scaling


def load_ozone(path, include_state=True):
    """``(panel, scaling)`` from an ozone CSV file."""
    return records_to_panel(read_ozone_records(path), include_state)


def ingest_ozone_csv(path, include_state=True):
    return load_ozone(path, include_state)[0]


def train_test_split(dataset, fraction=0.75, seed=0):
    """Random observation-level split; ``fraction`` of observations go to training.

    Time indices left without observations are dropped from that side.
    """
    if not 0 < fraction < 1:
        raise ParameterError(f"fraction must lie in (0, 1), got {fraction}")
    N = dataset.size
    n_train = int(np.floor(fraction * N + 0.5))
    mask = np.zeros(N, dtype=bool)
    mask[np.random.default_rng(seed).permutation(N)[:n_train]] = True
    return dataset.select_observations(mask), dataset.select_observations(~mask)
