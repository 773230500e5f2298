"""Discounted Monte Carlo pricing of European options whose underlying is the
asset itself, a standard CPPI portfolio, or a CPPI-GMEE portfolio.

Strategy-underlying options are struck on the portfolio value V, never on the
asset: the same simulated market paths drive both the strategy evolution and
the discounting.  All pricing is common-random-number friendly: a given
(model, grid, n_paths, seed) always produces the same paths, so estimates for
different underlyings or strategy settings are directly comparable path by
path.

Paths are processed in fixed blocks (see :mod:`.market`) and reduced into a
preallocated per-path array, which keeps memory flat in the horizon and makes
results bit-identical for any worker count.
"""

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from .errors import InsufficientPaths
from .market import TimeGrid, path_blocks, simulate_block, worker_count
from .strategy import evolve

OPTION_KINDS = ("call", "put")
UNDERLYINGS = ("asset", "cppi", "gmee")

DEFAULT_N_PATHS = 200_000
DEFAULT_SEED = 42
DEFAULT_STEPS_PER_YEAR = 252


@dataclass(frozen=True)
class OptionSpec:
    """A European option.  ``strike=None`` means at the money: the strike
    resolves to the initial asset level for ``asset`` underlyings and to the
    initial portfolio value for ``cppi``/``gmee`` underlyings."""

    kind: str
    underlying: str
    maturity: float
    strike: float | None = None

    def __post_init__(self):
        if self.kind not in OPTION_KINDS:
            raise ValueError(f"kind must be one of {OPTION_KINDS}, got {self.kind!r}")
        if self.underlying not in UNDERLYINGS:
            raise ValueError(
                f"underlying must be one of {UNDERLYINGS}, got {self.underlying!r}"
            )
        if self.maturity <= 0:
            raise ValueError(f"maturity must be > 0, got {self.maturity}")
        if self.strike is not None and self.strike <= 0:
            raise ValueError(f"strike must be > 0, got {self.strike}")


@dataclass(frozen=True)
class PriceEstimate:
    price: float
    std_error: float
    ci_low: float
    ci_high: float
    n_paths: int
    seed: int

    def as_dict(self):
        return {
            "price": self.price,
            "std_error": self.std_error,
            "ci_low": self.ci_low,
            "ci_high": self.ci_high,
            "n_paths": self.n_paths,
            "seed": self.seed,
        }


def resolve_strike(spec, model, strategy=None):
    if spec.strike is not None:
        return spec.strike
    if spec.underlying == "asset":
        return model.s0
    return strategy.v0_portfolio


def terminal_payoff(spec, terminal_level, strike):
    """Payoff at expiry: max(level - K, 0) for calls, max(K - level, 0) for puts."""
    level = np.asarray(terminal_level, dtype=float)
    if np.any(level < 0):
        raise ValueError("terminal level must be >= 0")
    if spec.kind == "call":
        out = np.maximum(level - strike, 0.0)
    else:
        out = np.maximum(strike - level, 0.0)
    return float(out) if out.ndim == 0 else out


def terminal_levels(model, grid, n_paths, seed, strategy=None, n_workers=None):
    """Terminal underlying levels and discount factors on common paths.

    With ``strategy=None`` the level is the terminal asset price S_T; with a
    :class:`StrategyConfig` it is the terminal portfolio value V_T of the
    strategy run on the same paths.  Returns ``(levels, df)`` arrays of shape
    (n_paths,).  Simulation streams over path blocks, so memory stays modest
    even for long horizons and large batches.
    """
    if n_paths < 1:
        raise ValueError(f"n_paths must be >= 1, got {n_paths}")
    n_workers = worker_count(n_workers)
    levels = np.empty(n_paths)
    df_T = np.empty(n_paths)
    dt_steps = np.full(grid.n_steps, grid.dt)

    def fill(block):
        b, lo, hi = block
        S, v, r, df = simulate_block(model, grid, seed, b, hi - lo)
        if strategy is None:
            levels[lo:hi] = S[:, -1]
        else:
            V = evolve(S, r, dt_steps, strategy)[0]
            levels[lo:hi] = V[:, -1]
        df_T[lo:hi] = df[:, -1]

    blocks = path_blocks(n_paths)
    if n_workers == 1 or len(blocks) == 1:
        for block in blocks:
            fill(block)
    else:
        with ThreadPoolExecutor(max_workers=n_workers) as pool:
            list(pool.map(fill, blocks))
    return levels, df_T


def estimate_from_samples(discounted_payoffs, seed):
    """Monte Carlo mean with standard error and 95% confidence interval."""
    n = discounted_payoffs.size
    if n < 2:
        raise InsufficientPaths(f"need at least 2 paths, got {n}")
    price = float(np.mean(discounted_payoffs))
    std_error = float(np.std(discounted_payoffs, ddof=1) / math.sqrt(n))
    return PriceEstimate(
        price=price,
        std_error=std_error,
        ci_low=price - 1.96 * std_error,
        ci_high=price + 1.96 * std_error,
        n_paths=n,
        seed=seed,
    )


def effective_strategy(spec, strategy):
    """The strategy actually evolved for a spec: ``cppi`` forces alpha_min = 0,
    which is exactly the standard CPPI; ``gmee`` uses the config as given."""
    if spec.underlying == "asset":
        return None
    if strategy is None:
        raise ValueError(
            f"a StrategyConfig is required for underlying {spec.underlying!r}"
        )
    if spec.underlying == "cppi" and strategy.alpha_min != 0.0:
        return replace(strategy, alpha_min=0.0)
    return strategy


def price_option(model, spec, strategy=None, *, n_paths=DEFAULT_N_PATHS,
                 seed=DEFAULT_SEED, steps_per_year=DEFAULT_STEPS_PER_YEAR,
                 n_workers=None):
    """Price a European option by discounted Monte Carlo expectation.

    The estimate is ``mean(DF_T * payoff)`` over the simulated paths with
    ``std_error = sample_std / sqrt(n_paths)``.  Identical inputs and seed
    give an identical estimate regardless of ``n_workers``.
    """
    if spec.underlying == "asset" and strategy is not None:
        raise ValueError("strategy config must be absent for the asset underlying")
    if n_paths < 2:
        raise InsufficientPaths(f"need at least 2 paths, got {n_paths}")
    cfg = effective_strategy(spec, strategy)
    grid = TimeGrid.daily(spec.maturity, steps_per_year)
    levels, df_T = terminal_levels(
        model, grid, n_paths, seed, strategy=cfg, n_workers=n_workers
    )
    strike = resolve_strike(spec, model, strategy)
    return estimate_from_samples(df_T * terminal_payoff(spec, levels, strike), seed)


@dataclass
class SweepTable:
    """Per-value price estimates along one sweep axis."""

    axis: str
    values: list
    estimates: list

    def rows(self):
        for value, est in zip(self.values, self.estimates):
            yield {self.axis: value, **est.as_dict()}

    def write_csv(self, f):
        f.write(f"{self.axis},price,std_error,ci_low,ci_high\n")
        for value, est in zip(self.values, self.estimates):
            f.write(
                f"{value!r},{est.price!r},{est.std_error!r},"
                f"{est.ci_low!r},{est.ci_high!r}\n"
            )

    def to_json(self):
        return {"axis": self.axis, "rows": list(self.rows())}


def sweep_maturity(model, spec, strategy=None, maturities=(), **kw):
    """Price one option per maturity, sharing the seed across rows."""
    estimates = [
        price_option(model, replace(spec, maturity=float(T)), strategy, **kw)
        for T in maturities
    ]
    return SweepTable("maturity", [float(T) for T in maturities], estimates)


def sweep_alpha_min(model, spec, strategy, alphas=(), **kw):
    """Price a GMEE-underlying option per minimum-exposure level.

    Common random numbers across rows make the curve smooth in alpha_min; the
    alpha_min = 0 row coincides with the standard CPPI underlying, and with
    l_max = 1 the alpha_min = 1 row coincides with the pure asset.
    """
    if spec.underlying != "gmee":
        raise ValueError("alpha_min sweeps require the gmee underlying")
    for a in alphas:
        if not 0.0 <= float(a) <= 1.0:
            raise ValueError(f"alpha_min values must lie in [0, 1], got {a}")
    estimates = [
        price_option(model, spec, replace(strategy, alpha_min=float(a)), **kw)
        for a in alphas
    ]
    return SweepTable("alpha_min", [float(a) for a in alphas], estimates)


def sweep_protection_level(model, spec, strategy, pls=(), **kw):
    """Price a strategy-underlying option per protection level."""
    if spec.underlying == "asset":
        raise ValueError("protection-level sweeps require a strategy underlying")
    for pl in pls:
        if not 0.0 <= float(pl) <= 1.0:
            raise ValueError(f"protection levels must lie in [0, 1], got {pl}")
    estimates = [
        price_option(model, spec, replace(strategy, protection_level=float(pl)), **kw)
        for pl in pls
    ]
    return SweepTable("protection_level", [float(pl) for pl in pls], estimates)
