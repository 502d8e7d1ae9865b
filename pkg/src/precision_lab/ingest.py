"""Panel loading, log-returns, horizon aggregation and rolling windows.

Input files are delimited text, UTF-8, header ``date,TICKER1,TICKER2,...``
with ISO-8601 dates and dot decimal separators.  Rows containing any
missing or non-numeric cell are dropped with a logged count: covariance
estimators need complete cases, and per-cell imputation would distort the
correlation structure.
"""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass

import numpy as np

from .core import ReturnsMatrix
from .errors import (
    DimensionMismatch,
    EmptyPanel,
    HorizonTooLarge,
    NonPositivePrice,
    ParseError,
)

log = logging.getLogger(__name__)

HORIZON_PERIODS = {"daily": 1, "weekly": 5, "monthly": 20}
DEFAULT_WINDOW_LENGTH = {"daily": 150, "weekly": 100, "monthly": 50}


@dataclass
class PricePanel:
    """T x p panel of strictly positive prices with a date index."""

    values: np.ndarray
    dates: list[str]
    tickers: list[str]

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.ndim != 2:
            raise DimensionMismatch("prices must be a 2-d array")
        if np.any(~np.isfinite(self.values)) or np.any(self.values <= 0):
            raise NonPositivePrice("prices must be strictly positive and finite")
        if any(a >= b for a, b in zip(self.dates, self.dates[1:])):
            raise DimensionMismatch("dates must be strictly increasing")

    @property
    def n_periods(self) -> int:
        return self.values.shape[0]


@dataclass
class RollingWindowPlan:
    """Rolling estimation plan: window and step counted in horizon periods.

    ``window_length`` training periods at the given horizon (a weekly
    period spans five daily rows), advancing by ``step`` periods.  The
    out-of-sample slice is always the next ``period_rows`` daily rows.
    """

    window_length: int
    step: int = 1
    horizon: str = "daily"

    def __post_init__(self):
        if self.horizon not in HORIZON_PERIODS:
            raise DimensionMismatch(f"unknown horizon {self.horizon!r}")
        if self.window_length <= 1:
            raise DimensionMismatch("window_length must exceed 1")
        if self.step < 1:
            raise DimensionMismatch("step must be >= 1")

    @property
    def period_rows(self) -> int:
        """Daily rows per horizon period (1, 5 or 20)."""
        return HORIZON_PERIODS[self.horizon]

    @property
    def window_rows(self) -> int:
        """Daily rows spanned by one training window."""
        return self.window_length * self.period_rows

    @property
    def step_rows(self) -> int:
        return self.step * self.period_rows


def load_panel(path, schema: str = "prices"):
    """Load a delimited panel file as prices or pre-computed returns.

    Rows with missing or non-numeric cells are dropped (count logged).
    Column order is preserved.

    Parameters
    ----------
    path : str or Path
        Delimited text file, first column the date.
    schema : {'prices', 'returns'}
        Interpretation of the numeric columns.

    Returns
    -------
    PricePanel or ReturnsMatrix
    """
    if schema not in ("prices", "returns"):
        raise ParseError(f"unknown schema {schema!r}")
    try:
        with open(path, "r", encoding="utf-8", newline="") as fh:
            reader = csv.reader(fh)
            try:
                header = next(reader)
            except StopIteration:
                raise ParseError(f"{path}: empty file") from None
            if len(header) < 3 or header[0].strip().lower() != "date":
                raise ParseError(f"{path}: header must be 'date,TICKER1,TICKER2,...'")
            tickers = [h.strip() for h in header[1:]]
            dates, rows, dropped = [], [], 0
            for lineno, rec in enumerate(reader, start=2):
                if not rec or all(not c.strip() for c in rec):
                    continue
                if len(rec) != len(header):
                    raise ParseError(f"{path}:{lineno}: expected {len(header)} columns")
                try:
                    vals = [float(c) for c in rec[1:]]
                except ValueError:
                    dropped += 1
                    continue
                if not all(np.isfinite(v) for v in vals):
                    dropped += 1
                    continue
                dates.append(rec[0].strip())
                rows.append(vals)
    except OSError as exc:
        raise ParseError(f"{path}: {exc}") from exc
    if dropped:
        log.warning("%s: dropped %d incomplete row(s)", path, dropped)
    if len(rows) < 2:
        raise EmptyPanel(f"{path}: fewer than 2 usable rows")
    values = np.asarray(rows, dtype=float)
    if schema == "prices":
        return PricePanel(values, dates, tickers)
    return ReturnsMatrix(values, dates, tickers)


def write_panel(panel, path) -> None:
    """Write a panel back to delimited text at full double precision."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["date"] + list(panel.tickers))
        for date, row in zip(panel.dates, panel.values):
            writer.writerow([date] + [repr(float(v)) for v in row])


def log_returns(prices: PricePanel) -> ReturnsMatrix:
    """Per-period log-returns: entry (t, j) = ln(P[t+1, j] / P[t, j])."""
    if prices.n_periods < 2:
        raise EmptyPanel("need at least 2 price rows")
    if np.any(prices.values <= 0):
        raise NonPositivePrice("prices must be strictly positive")
    rets = np.diff(np.log(prices.values), axis=0)
    return ReturnsMatrix(rets, prices.dates[1:], prices.tickers)


def aggregate_horizon(r: ReturnsMatrix, h: int) -> ReturnsMatrix:
    """Sum non-overlapping blocks of ``h`` consecutive rows column-wise.

    Output has floor(T / h) rows; trailing remainder rows are dropped.
    Blocks are anchored at the panel start; each aggregated row carries
    the date of the last row in its block.
    """
    if h < 1:
        raise HorizonTooLarge("h must be >= 1")
    t = r.n_periods
    if t < h:
        raise HorizonTooLarge(f"h={h} exceeds T={t}")
    if h == 1:
        return r
    n_blocks = t // h
    kept = r.values[: n_blocks * h]
    agg = kept.reshape(n_blocks, h, r.n_assets).sum(axis=1)
    dates = [r.dates[(k + 1) * h - 1] for k in range(n_blocks)]
    return ReturnsMatrix(agg, dates, r.tickers)


def rolling_windows(r: ReturnsMatrix, plan: RollingWindowPlan):
    """Enumerate (train_rows, test_rows) range pairs over the daily panel.

    Window ``k`` trains on daily rows ``[k*s, k*s + W)`` and tests on the
    next ``h`` daily rows, where ``W = plan.window_rows``,
    ``s = plan.step_rows`` and ``h = plan.period_rows``.  Test rows never
    overlap their own training rows.
    """
    t = r.n_periods
    w = plan.window_rows
    h = plan.period_rows
    if w + h > t:
        raise HorizonTooLarge(f"window ({w}) + test ({h}) rows exceed T={t}")
    out = []
    start = 0
    while start + w + h <= t:
        out.append((range(start, start + w), range(start + w, start + w + h)))
        start += plan.step_rows
    return out
