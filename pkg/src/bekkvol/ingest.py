"""CSV loading, return construction and date alignment.

Returns are held in percent units unless a caller asks otherwise.
"""
import csv
import logging
import math
from dataclasses import dataclass, field
from datetime import date
from pathlib import Path

import numpy as np

logger = logging.getLogger(__name__)

_SCALE = {"percent": 100.0, "decimal": 1.0}


class IngestError(ValueError):
    """Raised for malformed or inconsistent input data."""


@dataclass
class IngestSettings:
    """How a CSV file is read and turned into returns.

    ``kinds`` maps column name to ``"price"`` or ``"return"``; columns not
    listed take ``default_kind``. ``return_units`` is the unit of columns that
    already hold returns.
    """

    date_column: str = "date"
    default_kind: str = "price"
    kinds: dict = field(default_factory=dict)
    return_units: str = "percent"
    skip_bad_rows: bool = False
    method: str = "log"
    scale: str = "percent"
    align: str = "intersect"

    def __post_init__(self):
        if self.default_kind not in ("price", "return"):
            raise ValueError(f"unknown column kind {self.default_kind!r}")
        for col, kind in self.kinds.items():
            if kind not in ("price", "return"):
                raise ValueError(f"unknown kind {kind!r} for column {col!r}")
        if self.return_units not in _SCALE or self.scale not in _SCALE:
            raise ValueError("scale must be 'percent' or 'decimal'")
        if self.method not in ("log", "simple"):
            raise ValueError(f"unknown return method {self.method!r}")
        if self.align not in ("intersect", "strict"):
            raise ValueError(f"unknown align policy {self.align!r}")


@dataclass(frozen=True)
class RawTable:
    dates: np.ndarray
    columns: dict
    kinds: dict
    units: dict
    skipped: int = 0
    source: str = ""

    def __post_init__(self):
        n = len(self.dates)
        for name, col in self.columns.items():
            if len(col) != n:
                raise IngestError(f"column {name!r} has {len(col)} rows, expected {n}")
            if not np.all(np.isfinite(col)):
                raise IngestError(f"column {name!r} contains non-finite values")
        if n > 1 and not np.all(np.diff(self.dates) > np.timedelta64(0, "D")):
            raise IngestError("non-monotone dates")

    @property
    def T(self):
        return len(self.dates)


@dataclass(frozen=True)
class ReturnSeries:
    name: str
    dates: np.ndarray
    values: np.ndarray
    units: str = "percent"

    def __post_init__(self):
        if len(self.values) < 2:
            raise IngestError(f"series {self.name!r} needs at least 2 observations")
        if len(self.dates) != len(self.values):
            raise IngestError(f"series {self.name!r}: dates and values differ in length")
        if not np.all(np.isfinite(self.values)):
            raise IngestError(f"series {self.name!r} contains non-finite values")
        if not np.all(np.diff(self.dates) > np.timedelta64(0, "D")):
            raise IngestError(f"series {self.name!r}: non-monotone dates")

    @property
    def T(self):
        return len(self.values)

    def rescale(self, units):
        """Same series expressed in ``units`` ("percent" or "decimal")."""
        factor = _SCALE[units] / _SCALE[self.units]
        return ReturnSeries(self.name, self.dates, self.values * factor, units)


@dataclass(frozen=True)
class AlignedPanel:
    """Two or more return series on a common date vector."""

    names: tuple
    dates: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        if self.values.ndim != 2 or self.values.shape[1] != len(self.names):
            raise IngestError("panel values must be T x k with one column per name")
        if len(self.dates) != self.values.shape[0]:
            raise IngestError("panel dates and values differ in length")
        if len(set(self.names)) != len(self.names):
            raise IngestError("duplicate series names in panel")

    @property
    def T(self):
        return self.values.shape[0]

    def column(self, name):
        return self.values[:, self.names.index(name)]

    def series(self, name):
        return ReturnSeries(name, self.dates, self.column(name).copy())

    def select(self, names):
        idx = [self.names.index(n) for n in names]
        return AlignedPanel(tuple(names), self.dates, self.values[:, idx].copy())

    @classmethod
    def from_array(cls, values, names=("y1", "y2"), start="2000-01-03"):
        """Panel with synthetic business-day dates, mostly for tests."""
        values = np.asarray(values, dtype=float)
        dates = business_days(start, values.shape[0])
        return cls(tuple(names), dates, values)


def business_days(start, n):
    """``n`` consecutive business days beginning at or after ``start``."""
    first = np.busday_offset(np.datetime64(start, "D"), 0, roll="forward")
    return np.busday_offset(first, np.arange(n), roll="forward")


def _parse_date(text, where):
    try:
        return date.fromisoformat(text.strip())
    except ValueError:
        raise IngestError(f"{where}: unparseable date {text!r} (expected YYYY-MM-DD)") from None


def _parse_value(text):
    text = text.strip()
    if not text:
        return None
    try:
        v = float(text)
    except ValueError:
        return None
    return v if math.isfinite(v) else None


def load_csv(path, config=None):
    """Read a dated CSV into a :class:`RawTable`.

    Rows holding an empty or non-numeric cell raise unless
    ``config.skip_bad_rows`` is set, in which case they are dropped and
    counted in ``RawTable.skipped``.
    """
    config = config or IngestSettings()
    path = Path(path)
    if not path.is_file():
        raise IngestError(f"{path}: no such file")

    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise IngestError(f"{path}: empty file") from None
        if not header or header[0] != config.date_column:
            raise IngestError(f"{path}: malformed header, first column must be "
                              f"{config.date_column!r}")
        names = header[1:]
        if not names or any(not n for n in names) or len(set(names)) != len(names):
            raise IngestError(f"{path}: malformed header, need distinct named value columns")

        dates, rows, skipped = [], [], 0
        for lineno, rec in enumerate(reader, start=2):
            if not rec or all(not c.strip() for c in rec):
                continue
            if len(rec) != len(header):
                raise IngestError(f"{path}:{lineno}: expected {len(header)} fields, got {len(rec)}")
            d = _parse_date(rec[0], f"{path}:{lineno}")
            vals = [_parse_value(c) for c in rec[1:]]
            if any(v is None for v in vals):
                if config.skip_bad_rows:
                    skipped += 1
                    continue
                bad = names[[v is None for v in vals].index(True)]
                raise IngestError(f"{path}:{lineno}: non-numeric value in column {bad!r}")
            if dates and d <= dates[-1]:
                raise IngestError(f"{path}:{lineno}: non-monotone dates ({d} after {dates[-1]})")
            dates.append(d)
            rows.append(vals)

    if skipped:
        logger.warning("%s: skipped %d row(s) with missing or non-numeric values", path, skipped)
    data = np.array(rows, dtype=float).reshape(len(rows), len(names))
    kinds = {n: config.kinds.get(n, config.default_kind) for n in names}
    units = {n: config.return_units for n in names if kinds[n] == "return"}
    return RawTable(
        dates=np.array(dates, dtype="datetime64[D]"),
        columns={n: data[:, i] for i, n in enumerate(names)},
        kinds=kinds,
        units=units,
        skipped=skipped,
        source=str(path),
    )


def price_to_returns(prices, method="log", scale="percent"):
    prices = np.asarray(prices, dtype=float)
    if method == "log":
        if np.any(prices <= 0):
            raise IngestError("non-positive price under log returns")
        r = np.diff(np.log(prices))
    elif method == "simple":
        r = prices[1:] / prices[:-1] - 1.0
    else:
        raise ValueError(f"unknown return method {method!r}")
    return r * _SCALE[scale]


def to_returns(table, method="log", scale="percent"):
    """Convert each column of ``table`` into a :class:`ReturnSeries`.

    Price columns lose their first observation; return columns are only
    unit-converted.
    """
    out = []
    for name, col in table.columns.items():
        if table.kinds[name] == "price":
            try:
                values = price_to_returns(col, method, scale)
            except IngestError as exc:
                raise IngestError(f"column {name!r}: {exc}") from None
            out.append(ReturnSeries(name, table.dates[1:], values, scale))
        else:
            factor = _SCALE[scale] / _SCALE[table.units[name]]
            out.append(ReturnSeries(name, table.dates, col * factor, scale))
    return out


def align(series, policy="intersect"):
    """Put several return series on their common dates."""
    series = list(series)
    if len(series) < 2:
        raise IngestError("align needs at least two series")
    units = {s.units for s in series}
    if len(units) != 1:
        raise IngestError(f"mixed units in panel: {sorted(units)}")
    if policy == "strict":
        ref = series[0].dates
        for s in series[1:]:
            if len(s.dates) != len(ref) or not np.array_equal(s.dates, ref):
                raise IngestError(f"date mismatch between {series[0].name!r} and {s.name!r}")
        common = ref
    elif policy == "intersect":
        common = series[0].dates
        for s in series[1:]:
            common = np.intersect1d(common, s.dates)
        if len(common) == 0:
            raise IngestError("empty date intersection")
    else:
        raise ValueError(f"unknown align policy {policy!r}")

    cols = []
    for s in series:
        idx = np.searchsorted(s.dates, common)
        cols.append(s.values[idx])
    panel = AlignedPanel(tuple(s.name for s in series), common.copy(), np.column_stack(cols))
    logger.info("aligned %d series on T=%d common dates", len(series), panel.T)
    return panel


def write_csv(path, panel, fmt="%.10g"):
    """Write a panel in the format :func:`load_csv` reads."""
    path = Path(path)
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["date", *panel.names])
        for d, row in zip(panel.dates, panel.values):
            w.writerow([str(d), *(fmt % float(v) for v in row)])
