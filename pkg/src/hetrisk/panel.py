"""Returns, prices and industry classification: types, validation and CSV I/O.

Date axes are stored most-recent-first throughout (column 0 is the latest
observation), matching the layout of the input files.
"""

from __future__ import annotations

import csv
import math
import os
from dataclasses import InitVar, dataclass, field
from typing import Sequence

import numpy as np

from .config import FLOAT_DIGITS
from .errors import (
    DegenerateReturnError,
    DomainError,
    FormatError,
    MissingDataError,
    NestingError,
)


def _frozen(a, dtype=float) -> np.ndarray:
    out = np.array(a, dtype=dtype, copy=True)
    out.setflags(write=False)
    return out


def fmt(x: float, digits: int = FLOAT_DIGITS) -> str:
    return format(float(x), f".{digits}g")


def _open_input(path):
    if not os.path.exists(path):
        raise FormatError(f"no such file: {path}", exit_code=2)
    return open(path, newline="")


@dataclass(frozen=True)
class ReturnsPanel:
    tickers: tuple
    dates: tuple
    values: np.ndarray
    check: InitVar[bool] = True

    def __post_init__(self, check):
        values = _frozen(self.values)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "tickers", tuple(self.tickers))
        object.__setattr__(self, "dates", tuple(self.dates))
        if values.ndim != 2 or values.shape != (len(self.tickers), len(self.dates)):
            raise FormatError(
                f"values shape {values.shape} does not match "
                f"{len(self.tickers)} tickers x {len(self.dates)} dates")
        n, d = values.shape
        if not check:
            return
        if n < 2 or d < 2:
            raise FormatError(f"need N >= 2 and M >= 1, got N={n}, M+1={d}")
        bad = ~np.isfinite(values)
        if bad.any():
            i, s = np.argwhere(bad)[0]
            raise MissingDataError(
                f"missing return for {self.tickers[i]} on {self.dates[s]}")
        var = values.var(axis=1, ddof=1)
        if (var <= 0).any():
            i = int(np.flatnonzero(var <= 0)[0])
            raise DegenerateReturnError(f"zero sample variance for {self.tickers[i]}")

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def m(self) -> int:
        """Number of observations minus one."""
        return self.values.shape[1] - 1

    def subset(self, rows) -> ReturnsPanel:
        rows = np.asarray(rows)
        if rows.dtype == bool:
            rows = np.flatnonzero(rows)
        return ReturnsPanel(tuple(self.tickers[i] for i in rows), self.dates,
                            self.values[rows])


@dataclass(frozen=True)
class PricePanel:
    """Daily price/volume tape; every matrix is N x d with column 0 the latest day."""

    tickers: tuple
    dates: tuple
    open: np.ndarray
    close: np.ndarray
    high: np.ndarray
    low: np.ndarray
    open_adj: np.ndarray
    close_adj: np.ndarray
    volume: np.ndarray

    FIELDS = ("open", "close", "high", "low", "open_adj", "close_adj", "volume")

    def __post_init__(self):
        object.__setattr__(self, "tickers", tuple(self.tickers))
        object.__setattr__(self, "dates", tuple(self.dates))
        shape = (len(self.tickers), len(self.dates))
        for name in self.FIELDS:
            arr = _frozen(getattr(self, name))
            if arr.shape != shape:
                raise FormatError(f"{name} has shape {arr.shape}, expected {shape}")
            if not np.isfinite(arr).all():
                raise MissingDataError(f"non-finite entries in {name}")
            object.__setattr__(self, name, arr)
        for name in ("open", "close", "high", "low", "open_adj", "close_adj"):
            if (getattr(self, name) <= 0).any():
                raise DomainError(f"nonpositive price in {name}")
        if (self.high < self.low).any():
            raise DomainError("high < low")
        if (self.volume < 0).any():
            raise DomainError("negative volume")

    @property
    def n(self) -> int:
        return len(self.tickers)

    @property
    def days(self) -> int:
        return len(self.dates)

    def take(self, rows=None, cols=None) -> PricePanel:
        """Sub-panel by ticker rows and/or date columns (indices or slices)."""
        rows = slice(None) if rows is None else rows
        cols = slice(None) if cols is None else cols
        tick = np.asarray(self.tickers, dtype=object)[rows]
        dates = np.asarray(self.dates, dtype=object)[cols]
        kw = {name: getattr(self, name)[rows][:, cols] for name in self.FIELDS}
        return PricePanel(tuple(tick), tuple(dates), **kw)

    def chronological(self, name: str) -> np.ndarray:
        """Field as an N x d array ordered oldest-to-newest."""
        return getattr(self, name)[:, ::-1]


@dataclass(frozen=True)
class IndustryHierarchy:
    """Binary membership matrices, most granular level first."""

    tickers: tuple
    levels: tuple
    labels: tuple = field(default=())

    def __post_init__(self):
        object.__setattr__(self, "tickers", tuple(self.tickers))
        levels = tuple(_frozen(lvl) for lvl in self.levels)
        object.__setattr__(self, "levels", levels)
        if not self.labels:
            labels = tuple(tuple(f"c{j}" for j in range(l.shape[1])) for l in levels)
        else:
            labels = tuple(tuple(lab) for lab in self.labels)
        object.__setattr__(self, "labels", labels)
        if not levels:
            raise FormatError("hierarchy needs at least one level")
        n = len(self.tickers)
        for k, lvl in enumerate(levels):
            if lvl.ndim != 2 or lvl.shape[0] != n:
                raise FormatError(f"level {k} has shape {lvl.shape}, expected ({n}, *)")
            if len(labels[k]) != lvl.shape[1]:
                raise FormatError(f"level {k}: {len(labels[k])} labels for {lvl.shape[1]} columns")
            if not np.isin(lvl, (0.0, 1.0)).all():
                raise FormatError(f"level {k} is not binary")
            if not (lvl.sum(axis=1) == 1).all():
                raise FormatError(f"level {k}: every ticker must belong to exactly one cluster")
            if (lvl.sum(axis=0) == 0).any():
                raise FormatError(f"level {k} has an empty cluster")
        for k in range(1, len(levels)):
            check_nesting(levels[k - 1], levels[k], level=k)

    @property
    def depth(self) -> int:
        return len(self.levels)

    def assignments(self, level: int) -> np.ndarray:
        """Cluster index of every ticker at ``level``."""
        return self.levels[level].argmax(axis=1)

    def subset(self, rows) -> IndustryHierarchy:
        """Restrict to ``rows``; clusters left empty are dropped."""
        rows = np.asarray(rows)
        if rows.dtype == bool:
            rows = np.flatnonzero(rows)
        levels, labels = [], []
        for lvl, lab in zip(self.levels, self.labels):
            sub = lvl[rows]
            keep = sub.sum(axis=0) > 0
            levels.append(sub[:, keep])
            labels.append(tuple(l for l, k in zip(lab, keep) if k))
        return IndustryHierarchy(tuple(self.tickers[i] for i in rows), tuple(levels),
                                 tuple(labels))

    def slice_levels(self, start: int, stop: int | None = None) -> IndustryHierarchy:
        return IndustryHierarchy(self.tickers, self.levels[start:stop], self.labels[start:stop])

    def reorder(self, tickers: Sequence[str]) -> IndustryHierarchy:
        """Rows rearranged to follow ``tickers`` (which must all be present)."""
        index = {t: i for i, t in enumerate(self.tickers)}
        missing = [t for t in tickers if t not in index]
        if missing:
            raise FormatError(f"tickers missing from hierarchy: {missing[:5]}")
        return self.subset([index[t] for t in tickers])


def check_nesting(finer: np.ndarray, coarser: np.ndarray, level: int | None = None) -> np.ndarray:
    """Map from finer to coarser clusters as a 0/1 matrix; raise if not a function."""
    counts = finer.T @ coarser
    hits = (counts > 0).sum(axis=1)
    if (hits != 1).any():
        a = int(np.flatnonzero(hits != 1)[0])
        where = "" if level is None else f" (level {level})"
        raise NestingError(f"finer cluster {a} spans {int(hits[a])} coarser clusters{where}")
    return (counts > 0).astype(float)


# ---------------------------------------------------------------- returns CSV

def load_returns(path) -> ReturnsPanel:
    with _open_input(path) as fh:
        rows = list(csv.reader(fh))
    if not rows or len(rows[0]) < 2:
        raise FormatError(f"{path}: empty or header-less returns file")
    header = rows[0]
    dates = header[1:]
    tickers, values = [], []
    for k, row in enumerate(rows[1:], start=2):
        if not row:
            continue
        if len(row) != len(header):
            raise FormatError(f"{path}:{k}: expected {len(header)} cells, found {len(row)}")
        tickers.append(row[0])
        cells = []
        for date, cell in zip(dates, row[1:]):
            cell = cell.strip()
            if cell == "" or cell.upper() in ("NA", "NAN"):
                raise MissingDataError(f"missing return for {row[0]} on {date}")
            try:
                cells.append(float(cell))
            except ValueError:
                raise FormatError(f"{path}:{k}: cannot parse {cell!r}") from None
        values.append(cells)
    return ReturnsPanel(tuple(tickers), tuple(dates), np.array(values, dtype=float))


def write_returns(panel: ReturnsPanel, path, digits: int = FLOAT_DIGITS) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["ticker", *panel.dates])
        for t, row in zip(panel.tickers, panel.values):
            w.writerow([t, *(fmt(x, digits) for x in row)])


# -------------------------------------------------------------- hierarchy CSV

def hierarchy_from_labels(tickers: Sequence[str], columns: Sequence[Sequence[str]]) -> IndustryHierarchy:
    """Build membership matrices from per-level label columns (first-appearance order)."""
    n = len(tickers)
    levels, labels = [], []
    for col in columns:
        if len(col) != n:
            raise FormatError("label column length does not match ticker count")
        order = list(dict.fromkeys(col))
        pos = {lab: j for j, lab in enumerate(order)}
        mat = np.zeros((n, len(order)))
        mat[np.arange(n), [pos[c] for c in col]] = 1.0
        levels.append(mat)
        labels.append(tuple(order))
    return IndustryHierarchy(tuple(tickers), tuple(levels), tuple(labels))


def load_hierarchy(path) -> IndustryHierarchy:
    with _open_input(path) as fh:
        rows = [r for r in csv.reader(fh) if r]
    if not rows or len(rows[0]) < 2:
        raise FormatError(f"{path}: hierarchy needs a ticker column and at least one level")
    width = len(rows[0])
    tickers, cols = [], [[] for _ in range(width - 1)]
    for k, row in enumerate(rows[1:], start=2):
        if len(row) != width or any(c.strip() == "" for c in row):
            raise FormatError(f"{path}:{k}: ticker {row[0] if row else '?'} is missing a level")
        tickers.append(row[0])
        for j, c in enumerate(row[1:]):
            cols[j].append(c)
    return hierarchy_from_labels(tickers, cols)


def write_hierarchy(hier: IndustryHierarchy, path, names: Sequence[str] | None = None) -> None:
    if names is None:
        default = ["sub_industry", "industry", "sector"]
        names = [default[k] if k < 3 else f"level{k}" for k in range(hier.depth)]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["ticker", *names])
        idx = [hier.assignments(k) for k in range(hier.depth)]
        for i, t in enumerate(hier.tickers):
            w.writerow([t, *(hier.labels[k][idx[k][i]] for k in range(hier.depth))])


# ----------------------------------------------------------------- prices CSV

PRICE_COLUMNS = ("ticker", "date", "open", "close", "high", "low", "open_adj", "close_adj", "volume")


def load_prices(path) -> PricePanel:
    """Long-format prices; dates are sorted descending (ISO labels assumed)."""
    with _open_input(path) as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or tuple(h.strip() for h in header) != PRICE_COLUMNS:
            raise FormatError(f"{path}: header must be {','.join(PRICE_COLUMNS)}")
        records = {}
        tickers, dates = {}, set()
        for k, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(PRICE_COLUMNS):
                raise FormatError(f"{path}:{k}: expected {len(PRICE_COLUMNS)} cells")
            t, d = row[0], row[1]
            try:
                vals = [float(c) if c.strip() not in ("", "NA") else math.nan for c in row[2:]]
            except ValueError:
                raise FormatError(f"{path}:{k}: unparseable number") from None
            tickers.setdefault(t, len(tickers))
            dates.add(d)
            records[(t, d)] = vals
    date_list = sorted(dates, reverse=True)
    dpos = {d: j for j, d in enumerate(date_list)}
    arr = np.full((len(PRICE_COLUMNS) - 2, len(tickers), len(date_list)), math.nan)
    for (t, d), vals in records.items():
        arr[:, tickers[t], dpos[d]] = vals
    if np.isnan(arr).any():
        f, i, j = np.argwhere(np.isnan(arr))[0]
        raise MissingDataError(f"missing {PRICE_COLUMNS[f + 2]} for {list(tickers)[i]} on {date_list[j]}")
    return PricePanel(tuple(tickers), tuple(date_list), *arr)


def write_prices(prices: PricePanel, path, digits: int = FLOAT_DIGITS) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(PRICE_COLUMNS)
        for j in range(prices.days - 1, -1, -1):
            for i, t in enumerate(prices.tickers):
                w.writerow([t, prices.dates[j],
                            *(fmt(getattr(prices, f)[i, j], digits) for f in PricePanel.FIELDS)])


def returns_from_prices(prices: PricePanel, kind: str = "close-to-close") -> ReturnsPanel:
    """Log returns from adjusted prices; the output has one fewer date column.

    ``overnight`` is previous-close-to-open, ``close-to-close`` the usual daily return.
    """
    if prices.days < 2:
        raise FormatError("need at least two days of prices")
    prev_close = prices.close_adj[:, 1:]
    if kind == "close-to-close":
        num = prices.close_adj[:, :-1]
    elif kind == "overnight":
        num = prices.open_adj[:, :-1]
    else:
        raise ValueError(f"unknown return kind {kind!r}")
    if (num <= 0).any() or (prev_close <= 0).any():
        raise DomainError("nonpositive price")
    # constant-price tapes legitimately give zero returns, so no variance check here
    return ReturnsPanel(prices.tickers, prices.dates[:-1], np.log(num / prev_close), check=False)
