"""Backtesting CPPI / CPPI-GMEE strategies on historical price series.

The backtester evolves one or more strategy configurations over an observed
price series with a constant risk-free rate, using the actual calendar gaps
between observations (ACT/365) as step sizes.  It reports the per-date
portfolio value, floor present value and equity exposure of every strategy,
plus summary statistics including the cash-in date of a standard CPPI.
"""

import csv
import json
import math
from dataclasses import dataclass
from datetime import date
from pathlib import Path

import numpy as np

from .errors import NonMonotoneDates, NonPositivePrice, ParseError
from .strategy import evolve

DAYS_PER_YEAR = 365.0


@dataclass
class PriceSeries:
    """An ordered (date, price) series for one risky asset."""

    dates: list
    prices: np.ndarray
    name: str = ""

    def __len__(self):
        return len(self.dates)


def load_series(source, name=None):
    """Parse a ``date,price`` CSV (ISO-8601 dates, decimal-point numbers).

    ``source`` may be a path or an open text stream.  Raises ParseError with
    the offending 1-based line number, NonMonotoneDates on out-of-order or
    duplicate dates, and NonPositivePrice on prices <= 0.
    """
    if isinstance(source, (str, Path)):
        with open(source, newline="") as f:
            return load_series(f, name=name or Path(source).stem)

    reader = csv.reader(source)
    try:
        header = next(reader)
    except StopIteration:
        raise ParseError("empty input, expected a 'date,price' header") from None
    if [h.strip() for h in header] != ["date", "price"]:
        raise ParseError(f"expected header 'date,price', got {','.join(header)!r}", line=1)

    dates, prices = [], []
    for lineno, row in enumerate(reader, start=2):
        if not row:
            continue
        if len(row) != 2:
            raise ParseError(f"expected 2 fields, got {len(row)}", line=lineno)
        try:
            d = date.fromisoformat(row[0].strip())
        except ValueError:
            raise ParseError(f"bad date {row[0]!r}", line=lineno) from None
        try:
            p = float(row[1])
        except ValueError:
            raise ParseError(f"bad price {row[1]!r}", line=lineno) from None
        if not math.isfinite(p):
            raise ParseError(f"price {row[1]!r} is not finite", line=lineno)
        if dates and d <= dates[-1]:
            raise NonMonotoneDates(
                f"date {d.isoformat()} not after {dates[-1].isoformat()}", line=lineno
            )
        if p <= 0:
            raise NonPositivePrice(f"price must be > 0, got {p}", line=lineno)
        dates.append(d)
        prices.append(p)
    if not dates:
        raise ParseError("no data rows")
    return PriceSeries(dates, np.array(prices), name=name or "")


def year_fractions(dates):
    """ACT/365 year fractions between consecutive dates."""
    return np.array(
        [(b - a).days / DAYS_PER_YEAR for a, b in zip(dates[:-1], dates[1:])]
    )


@dataclass
class StrategyBacktest:
    """One strategy's trajectory and summary over the series."""

    label: str
    config: object
    values: np.ndarray
    floor_pv: np.ndarray
    exposure: np.ndarray
    cash_in_index: int

    @property
    def final_value(self):
        return float(self.values[-1])

    @property
    def min_exposure(self):
        return float(self.exposure.min())

    @property
    def max_drawdown(self):
        peaks = np.maximum.accumulate(self.values)
        return float(np.max(1.0 - self.values / peaks))


@dataclass
class BacktestReport:
    """Per-date trajectories and summaries for all configured strategies."""

    series_name: str
    dates: list
    r_const: float
    horizon: float
    strategies: list

    def summary(self):
        rows = []
        for s in self.strategies:
            cash_in = None
            if s.cash_in_index >= 0:
                cash_in = self.dates[s.cash_in_index].isoformat()
            rows.append(
                {
                    "label": s.label,
                    "multiplier": s.config.multiplier,
                    "l_max": s.config.l_max,
                    "alpha_min": s.config.alpha_min,
                    "protection_level": s.config.protection_level,
                    "final_value": s.final_value,
                    "final_return": s.final_value / s.config.v0_portfolio - 1.0,
                    "min_exposure": s.min_exposure,
                    "max_drawdown": s.max_drawdown,
                    "cash_in_date": cash_in,
                }
            )
        return {
            "series": self.series_name,
            "start": self.dates[0].isoformat(),
            "end": self.dates[-1].isoformat(),
            "horizon_years": self.horizon,
            "r_const": self.r_const,
            "strategies": rows,
        }

    def write_csv(self, f):
        """Rows per date: value and exposure per strategy plus the floor PV.

        A single ``floor_pv`` column is written when every strategy shares
        the same floor (the usual CPPI-vs-GMEE comparison); otherwise one
        ``floor_pv_<label>`` column per strategy.
        """
        shared_floor = all(
            np.array_equal(s.floor_pv, self.strategies[0].floor_pv)
            for s in self.strategies
        )
        header = ["date"]
        header += [f"value_{s.label}" for s in self.strategies]
        if shared_floor:
            header.append("floor_pv")
        else:
            header += [f"floor_pv_{s.label}" for s in self.strategies]
        header += [f"exposure_{s.label}" for s in self.strategies]
        f.write(",".join(header) + "\n")
        for i, d in enumerate(self.dates):
            row = [d.isoformat()]
            row += [repr(float(s.values[i])) for s in self.strategies]
            if shared_floor:
                row.append(repr(float(self.strategies[0].floor_pv[i])))
            else:
                row += [repr(float(s.floor_pv[i])) for s in self.strategies]
            row += [repr(float(s.exposure[i])) for s in self.strategies]
            f.write(",".join(row) + "\n")

    def write_json(self, f):
        json.dump(self.summary(), f, indent=2)
        f.write("\n")


def strategy_labels(configs):
    """cppi/gmee labels from alpha_min, suffixed on collision."""
    base = ["cppi" if c.alpha_min == 0.0 else "gmee" for c in configs]
    labels, seen = [], {}
    for b in base:
        seen[b] = seen.get(b, 0) + 1
        labels.append(b if seen[b] == 1 else f"{b}{seen[b]}")
    return labels


def run_backtest(series, configs, r_const):
    """Evolve the configured strategies over the series at a constant rate.

    The rebalance grid is the observation grid; step sizes are the ACT/365
    gaps between dates.  Floors accrue per each config's floor_accrual mode
    (a fixed-mode floor with no explicit rate uses ``r_const``), so the
    default report's floor PV is the discounted guarantee at every date.
    """
    if len(series) < 2:
        raise ValueError("series must contain at least two observations")
    if not configs:
        raise ValueError("at least one strategy config is required")
    dt_steps = year_fractions(series.dates)
    m = len(series)
    S = series.prices.reshape(1, m)
    r = np.full((1, m), float(r_const))
    horizon = float(dt_steps.sum())

    strategies = []
    for label, config in zip(strategy_labels(configs), configs):
        V, F, C, alpha, cash_in, cash_in_index = evolve(S, r, dt_steps, config)
        strategies.append(
            StrategyBacktest(
                label=label,
                config=config,
                values=V[0],
                floor_pv=F[0],
                exposure=alpha[0],
                cash_in_index=int(cash_in_index[0]),
            )
        )
    return BacktestReport(
        series_name=series.name,
        dates=list(series.dates),
        r_const=float(r_const),
        horizon=horizon,
        strategies=strategies,
    )
