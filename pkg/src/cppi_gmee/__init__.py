"""Monte Carlo pricing of European options on CPPI and CPPI-GMEE portfolio
strategies under a correlated Heston-Vasicek market model, plus a historical
backtester for the strategies themselves."""

from .backtest import BacktestReport, PriceSeries, load_series, run_backtest
from .black_scholes import bs_price
from .errors import (
    InfeasibleGuarantee,
    InsufficientPaths,
    NonMonotoneDates,
    NonPositivePrice,
    NonPSDCorrelation,
    ParseError,
    ZeroPortfolio,
)
from .market import (
    BLOCK_SIZE,
    MarketPath,
    MarketPaths,
    ModelParams,
    TimeGrid,
    correlation_factor,
    pathwise_discount,
    simulate_paths,
)
from .pricing import (
    DEFAULT_N_PATHS,
    DEFAULT_SEED,
    DEFAULT_STEPS_PER_YEAR,
    OptionSpec,
    PriceEstimate,
    SweepTable,
    price_option,
    sweep_alpha_min,
    sweep_maturity,
    sweep_protection_level,
    terminal_levels,
    terminal_payoff,
)
from .strategy import (
    StrategyConfig,
    StrategyPath,
    StrategyPaths,
    initial_floor,
    obpi_terminal,
    run_strategy,
    step_portfolio,
    target_alpha,
)

__version__ = "0.1.0"

__all__ = [
    "BLOCK_SIZE",
    "BacktestReport",
    "DEFAULT_N_PATHS",
    "DEFAULT_SEED",
    "DEFAULT_STEPS_PER_YEAR",
    "InfeasibleGuarantee",
    "InsufficientPaths",
    "MarketPath",
    "MarketPaths",
    "ModelParams",
    "NonMonotoneDates",
    "NonPSDCorrelation",
    "NonPositivePrice",
    "OptionSpec",
    "ParseError",
    "PriceEstimate",
    "PriceSeries",
    "StrategyConfig",
    "StrategyPath",
    "StrategyPaths",
    "SweepTable",
    "TimeGrid",
    "ZeroPortfolio",
    "bs_price",
    "correlation_factor",
    "initial_floor",
    "load_series",
    "obpi_terminal",
    "pathwise_discount",
    "price_option",
    "run_backtest",
    "run_strategy",
    "simulate_paths",
    "step_portfolio",
    "sweep_alpha_min",
    "sweep_maturity",
    "sweep_protection_level",
    "target_alpha",
    "terminal_levels",
    "terminal_payoff",
]
