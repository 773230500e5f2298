"""CPPI allocation with optional guaranteed minimum equity exposure (GMEE).

The portfolio insures a fraction (the protection level) of initial wealth at
maturity.  The floor is the discounted guarantee; the cushion is the excess
of portfolio value over the floor; the equity weight at each rebalance date
is

    alpha = max(min(l_max, multiplier * cushion / value), alpha_min)

so with alpha_min = 0 this is a standard leverage-capped CPPI, and with
alpha_min > 0 the strategy never de-risks below the GMEE threshold.  The
weight computed at t_{i-1} is held over (t_{i-1}, t_i]: the equity leg buys
alpha * V / S units of the asset, the cash leg accrues continuously at the
prevailing short rate.

A standard CPPI (alpha_min = 0) whose cushion hits zero is cash locked: the
equity weight stays at zero for the rest of the horizon even if later floor
accrual would reopen a positive cushion.

The static option-based variant (OBPI) needs no path logic at all, only the
terminal payout :func:`obpi_terminal`.
"""

import math
from dataclasses import dataclass

import numpy as np

from .errors import InfeasibleGuarantee, ZeroPortfolio
from .market import TimeGrid

FLOOR_ACCRUALS = ("fixed", "realized")


@dataclass(frozen=True)
class StrategyConfig:
    """Controls of a CPPI / CPPI-GMEE strategy.

    ``floor_accrual="fixed"`` grows the floor at a deterministic rate
    (``floor_rate``, defaulting to the market's initial short rate) so the
    floor ends exactly at the guaranteed amount.  ``"realized"`` accrues the
    floor at the simulated short rate instead; the terminal guarantee is then
    met only approximately.
    """

    multiplier: float
    v0_portfolio: float = 100.0
    l_max: float = 1.0
    alpha_min: float = 0.0
    protection_level: float = 1.0
    floor_accrual: str = "fixed"
    floor_rate: float | None = None

    def __post_init__(self):
        if self.multiplier <= 0:
            raise ValueError(f"multiplier must be > 0, got {self.multiplier}")
        if self.v0_portfolio <= 0:
            raise ValueError(f"v0_portfolio must be > 0, got {self.v0_portfolio}")
        if self.l_max <= 0:
            raise ValueError(f"l_max must be > 0, got {self.l_max}")
        if not 0.0 <= self.alpha_min <= 1.0:
            raise ValueError(f"alpha_min must be in [0, 1], got {self.alpha_min}")
        if self.alpha_min > self.l_max:
            raise ValueError(
                f"alpha_min ({self.alpha_min}) must not exceed l_max ({self.l_max})"
            )
        if not 0.0 <= self.protection_level <= 1.0:
            raise ValueError(
                f"protection_level must be in [0, 1], got {self.protection_level}"
            )
        if self.floor_accrual not in FLOOR_ACCRUALS:
            raise ValueError(
                f"floor_accrual must be one of {FLOOR_ACCRUALS}, got {self.floor_accrual!r}"
            )


@dataclass
class StrategyPath:
    """Trajectory of one strategy run on one market path."""

    grid: TimeGrid
    V: np.ndarray        # portfolio value
    F: np.ndarray        # floor
    C: np.ndarray        # cushion max(0, V - F)
    alpha: np.ndarray    # equity weight applied from each grid point
    cash_in: bool        # cushion hit zero with alpha_min = 0
    cash_in_index: int   # grid index of the cash-in event, -1 if none


@dataclass
class StrategyPaths:
    """Batch of strategy trajectories, one row per market path."""

    grid: TimeGrid
    V: np.ndarray
    F: np.ndarray
    C: np.ndarray
    alpha: np.ndarray
    cash_in: np.ndarray
    cash_in_index: np.ndarray

    @property
    def n_paths(self):
        return self.V.shape[0]

    def __len__(self):
        return self.n_paths

    def path(self, i):
        return StrategyPath(
            self.grid, self.V[i], self.F[i], self.C[i], self.alpha[i],
            bool(self.cash_in[i]), int(self.cash_in_index[i]),
        )

    def __getitem__(self, i):
        return self.path(i)


def initial_floor(config, r_ref, horizon):
    """Discounted guarantee PL * V0 * exp(-r_ref * horizon).

    Raises InfeasibleGuarantee when the floor starts at or above initial
    wealth, which leaves no risk budget at all.
    """
    if horizon <= 0:
        raise ValueError(f"horizon must be > 0, got {horizon}")
    floor = config.protection_level * config.v0_portfolio * math.exp(-r_ref * horizon)
    if floor >= config.v0_portfolio:
        raise InfeasibleGuarantee(
            f"discounted guarantee {floor:.6g} >= initial wealth "
            f"{config.v0_portfolio:.6g}; the guaranteed return must be below "
            f"the reference rate {r_ref:.6g}"
        )
    return floor


def target_alpha(cushion, value, config):
    """Equity weight max(min(l_max, M * cushion / value), alpha_min).

    Accepts scalars or arrays; ``value`` must be strictly positive.
    """
    value = np.asarray(value, dtype=float)
    if np.any(value <= 0.0):
        raise ZeroPortfolio("portfolio value must be > 0 to compute a weight")
    a = np.maximum(
        np.minimum(config.l_max, config.multiplier * np.asarray(cushion, dtype=float) / value),
        config.alpha_min,
    )
    return float(a) if a.ndim == 0 else a


def step_portfolio(v_prev, alpha, s_ratio, r_prev, dt):
    """One self-financing step: v * (alpha * s_ratio + (1 - alpha) * e^(r dt))."""
    if v_prev <= 0:
        raise ValueError(f"v_prev must be > 0, got {v_prev}")
    if s_ratio <= 0:
        raise ValueError(f"s_ratio must be > 0, got {s_ratio}")
    return v_prev * (alpha * s_ratio + (1.0 - alpha) * math.exp(r_prev * dt))


def obpi_terminal(q, p, strike, s_terminal):
    """Terminal value q * K + p * max(S_T - K, 0) of the static bond+call mix."""
    if q < 0 or p < 0:
        raise ValueError("q and p must be >= 0")
    return q * strike + p * max(s_terminal - strike, 0.0)


def evolve(S, r, dt_steps, config):
    """Evolve the strategy over arbitrary (possibly non-uniform) steps.

    Parameters
    ----------
    S : ndarray, shape (n, m)
        Asset levels at the m grid points, one row per path.
    r : ndarray, shape (n, m)
        Short rate at each grid point (annualized).
    dt_steps : ndarray, shape (m - 1,)
        Year fractions of each step.
    config : StrategyConfig

    Returns
    -------
    (V, F, C, alpha, cash_in, cash_in_index)
        Arrays of shape (n, m) except the last two of shape (n,).
    """
    # Time-major working layout (one contiguous row per grid point); the
    # returned arrays are (n, m) views with paths as rows.
    St = np.ascontiguousarray(np.asarray(S, dtype=float).T)
    rt = np.ascontiguousarray(np.asarray(r, dtype=float).T)
    dt_steps = np.asarray(dt_steps, dtype=float)
    m, n = St.shape
    if m < 2:
        raise ValueError("need at least two grid points")

    # Remaining time to maturity at each grid point; exactly 0.0 at the end so
    # the fixed-accrual floor finishes exactly at the guaranteed amount.
    remaining = np.concatenate([np.cumsum(dt_steps[::-1])[::-1], [0.0]])
    horizon = float(remaining[0])
    guarantee = config.protection_level * config.v0_portfolio

    fixed = config.floor_accrual == "fixed"
    r_ref = config.floor_rate if (fixed and config.floor_rate is not None) \
        else float(rt[0, 0])
    initial_floor(config, r_ref, horizon)   # raises if infeasible

    F = np.empty((m, n))
    if fixed:
        F[:] = (guarantee * np.exp(-r_ref * remaining))[:, None]
    else:
        F[0] = guarantee * np.exp(-rt[0] * horizon)
        for i in range(m - 1):
            F[i + 1] = F[i] * np.exp(rt[i] * dt_steps[i])

    V = np.empty((m, n))
    C = np.empty((m, n))
    alpha = np.empty((m, n))
    V[0] = config.v0_portfolio
    locked = np.zeros(n, dtype=bool)
    cash_in_index = np.full(n, -1)
    lockable = config.alpha_min == 0.0

    for i in range(m):
        v_i = V[i]
        if np.any(v_i <= 0.0):
            raise ZeroPortfolio(
                f"portfolio value hit zero at grid index {i}; leverage above 1 "
                "can bankrupt the strategy on extreme single-step losses"
            )
        c_i = np.maximum(v_i - F[i], 0.0)
        a = np.maximum(
            np.minimum(config.l_max, config.multiplier * c_i / v_i),
            config.alpha_min,
        )
        if lockable:
            newly = (c_i <= 0.0) & ~locked
            cash_in_index[newly] = i
            locked |= newly
            a = np.where(locked, 0.0, a)
        C[i] = c_i
        alpha[i] = a
        if i < m - 1:
            growth = np.exp(rt[i] * dt_steps[i])
            V[i + 1] = (a * (v_i / St[i])) * St[i + 1] + ((1.0 - a) * v_i) * growth

    return V.T, F.T, C.T, alpha.T, locked, cash_in_index


def run_strategy(market, config):
    """Run the strategy on a simulated market path or batch.

    The equity weight is recomputed from the portfolio state at each grid
    point and applied over the following step; the cash leg accrues at the
    simulated short rate.  Accepts a single :class:`MarketPath` (returns a
    :class:`StrategyPath`) or a :class:`MarketPaths` batch (returns a
    :class:`StrategyPaths`).
    """
    single = np.asarray(market.S).ndim == 1
    S = np.atleast_2d(market.S)
    r = np.atleast_2d(market.r)
    dt_steps = np.full(market.grid.n_steps, market.grid.dt)
    V, F, C, alpha, cash_in, cash_in_index = evolve(S, r, dt_steps, config)
    if single:
        return StrategyPath(
            market.grid, V[0], F[0], C[0], alpha[0],
            bool(cash_in[0]), int(cash_in_index[0]),
        )
    return StrategyPaths(market.grid, V, F, C, alpha, cash_in, cash_in_index)
