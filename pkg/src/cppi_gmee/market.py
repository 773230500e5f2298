"""Correlated Heston-Vasicek market simulation under the risk-neutral measure.

The joint dynamics of the asset price S, its variance v and the short rate r
are (all parameters annualized):

    dS = r S dt + sqrt(v) S dZ_S
    dv = k (theta - v) dt + sigma_v sqrt(v) dZ_v
    dr = nu (beta - r) dt + sigma_r v**gamma dZ_r

with corr(dZ_S, dZ_v) = rho_sv, corr(dZ_S, dZ_r) = rho_sr and the cross
correlation fixed to the product corr(dZ_v, dZ_r) = rho_sv * rho_sr.  Note
that the short-rate diffusion is driven by the variance process v, not r.

Discretization on a uniform grid with step dt:

* variance: full-truncation Euler.  The signed state may go negative; drift
  and diffusion are evaluated at v+ = max(v, 0) and the stored path holds v+.
* asset: exact log-Euler, S' = S * exp((r - v+/2) dt + sqrt(v+ dt) e_S),
  which keeps S strictly positive and makes the discounted asset an exact
  martingale step by step.
* rate: plain Euler with diffusion sigma_r * (v+)**gamma * sqrt(dt) * e_r.
* discounting: the cumulative factor DF_i = exp(-sum_{j<i} r_j dt) uses the
  left endpoint of each step, matching the Euler timing above.

Randomness is counter based: paths are grouped into fixed blocks of
``BLOCK_SIZE`` and block b draws from ``Philox(key=seed, counter=b << 192)``.
A path's random numbers are therefore a pure function of (seed, path index),
and neither the number of worker threads nor the scheduling order can change
the output.
"""

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .errors import NonPSDCorrelation

# Paths per RNG substream.  Fixed so that the block decomposition, and hence
# every drawn number, depends only on (seed, n_paths).
BLOCK_SIZE = 4096


def worker_count(n_workers=None):
    """Resolve a worker count: explicit argument, else CPPI_THREADS, else 1."""
    if n_workers is None:
        n_workers = int(os.environ.get("CPPI_THREADS", "1"))
    if n_workers < 1:
        raise ValueError(f"n_workers must be >= 1, got {n_workers}")
    return n_workers


@dataclass(frozen=True)
class ModelParams:
    """Heston-Vasicek model coefficients.

    ``v0`` and ``theta`` are variances (the 20% volatility of the baseline
    calibration enters as 0.04).  The variance/rate correlation is never a
    free parameter: it is the product ``rho_sv * rho_sr``.
    """

    s0: float = 100.0       # initial asset level
    v0: float = 0.04        # initial variance
    k: float = 1.25         # variance mean-reversion speed
    theta: float = 0.04     # long-run variance
    sigma_v: float = 0.2    # vol of vol
    r0: float = 0.05        # initial short rate
    nu: float = 1.25        # rate mean-reversion speed
    beta: float = 0.05      # long-run short rate
    sigma_r: float = 0.025  # rate volatility
    gamma: float = 0.5      # exponent on the variance in the rate diffusion
    rho_sv: float = -0.5    # asset-variance correlation
    rho_sr: float = -0.2    # asset-rate correlation

    def __post_init__(self):
        if self.s0 <= 0:
            raise ValueError(f"s0 must be > 0, got {self.s0}")
        if self.v0 < 0:
            raise ValueError(f"v0 must be >= 0, got {self.v0}")
        for name in ("k", "theta", "nu"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be > 0, got {getattr(self, name)}")
        # sigma_v = sigma_r = 0 is allowed: it is the degenerate model used to
        # cross-check Monte Carlo prices against the Black-Scholes closed form.
        for name in ("sigma_v", "sigma_r"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0, got {getattr(self, name)}")
        if not 0.0 <= self.gamma <= 1.0:
            raise ValueError(f"gamma must be in [0, 1], got {self.gamma}")
        for name in ("rho_sv", "rho_sr"):
            if abs(getattr(self, name)) > 1.0:
                raise ValueError(f"|{name}| must be <= 1, got {getattr(self, name)}")
        # Validates positive semi-definiteness even though the product
        # structure guarantees it for |rho| <= 1.
        correlation_factor(self.rho_sv, self.rho_sr)

    @property
    def rho_vr(self):
        return self.rho_sv * self.rho_sr

    def correlation_matrix(self):
        """The implied 3x3 correlation matrix in (S, v, r) order."""
        return np.array(
            [
                [1.0, self.rho_sv, self.rho_sr],
                [self.rho_sv, 1.0, self.rho_vr],
                [self.rho_sr, self.rho_vr, 1.0],
            ]
        )


def correlation_factor(rho_sv, rho_sr):
    """Lower-triangular factor L with L @ L.T equal to the correlation matrix.

    The product structure rho_vr = rho_sv * rho_sr makes the factor closed
    form, valid up to and including the |rho| = 1 boundaries:

        L = [[1,      0,              0            ],
             [rho_sv, sqrt(1-rho_sv^2), 0          ],
             [rho_sr, 0,              sqrt(1-rho_sr^2)]]
    """
    if abs(rho_sv) > 1.0 or abs(rho_sr) > 1.0:
        raise NonPSDCorrelation(
            f"correlations must lie in [-1, 1], got rho_sv={rho_sv}, rho_sr={rho_sr}"
        )
    L = np.array(
        [
            [1.0, 0.0, 0.0],
            [rho_sv, np.sqrt(1.0 - rho_sv * rho_sv), 0.0],
            [rho_sr, 0.0, np.sqrt(1.0 - rho_sr * rho_sr)],
        ]
    )
    target = np.array(
        [
            [1.0, rho_sv, rho_sr],
            [rho_sv, 1.0, rho_sv * rho_sr],
            [rho_sr, rho_sv * rho_sr, 1.0],
        ]
    )
    if not np.allclose(L @ L.T, target, rtol=0.0, atol=1e-12):
        raise NonPSDCorrelation(
            f"no valid factor for rho_sv={rho_sv}, rho_sr={rho_sr}"
        )
    return L


@dataclass(frozen=True)
class TimeGrid:
    """Uniform time grid 0 = t_0 < t_1 < ... < t_n = maturity."""

    maturity: float
    n_steps: int

    def __post_init__(self):
        if self.maturity <= 0:
            raise ValueError(f"maturity must be > 0, got {self.maturity}")
        if self.n_steps < 1:
            raise ValueError(f"n_steps must be >= 1, got {self.n_steps}")

    @classmethod
    def daily(cls, maturity, steps_per_year=252):
        """Grid with ``steps_per_year`` rebalance dates per year (at least 1)."""
        return cls(maturity, max(1, round(maturity * steps_per_year)))

    @property
    def dt(self):
        return self.maturity / self.n_steps

    def times(self):
        return np.linspace(0.0, self.maturity, self.n_steps + 1)


@dataclass
class MarketPath:
    """A single simulated trajectory of (S, v, r) plus cumulative discounting."""

    grid: TimeGrid
    S: np.ndarray
    v: np.ndarray
    r: np.ndarray
    df: np.ndarray


@dataclass
class MarketPaths:
    """A batch of simulated trajectories, one row per path."""

    grid: TimeGrid
    S: np.ndarray
    v: np.ndarray
    r: np.ndarray
    df: np.ndarray
    seed: int = 0

    @property
    def n_paths(self):
        return self.S.shape[0]

    def __len__(self):
        return self.n_paths

    def path(self, i):
        """Read-only style view of path ``i`` (shares memory with the batch)."""
        return MarketPath(self.grid, self.S[i], self.v[i], self.r[i], self.df[i])

    def __getitem__(self, i):
        return self.path(i)


def path_blocks(n_paths):
    """The fixed (block_index, start, stop) decomposition of a batch."""
    return [
        (b, b * BLOCK_SIZE, min((b + 1) * BLOCK_SIZE, n_paths))
        for b in range((n_paths + BLOCK_SIZE - 1) // BLOCK_SIZE)
    ]


def block_generator(seed, block_index):
    """The RNG substream of a path block: Philox keyed by seed, counter by block."""
    bitgen = np.random.Philox(key=seed, counter=[0, 0, 0, block_index])
    return np.random.Generator(bitgen)


def simulate_block(params, grid, seed, block_index, n):
    """Simulate ``n`` paths of block ``block_index``.

    Returns arrays (S, v, r, df), each of shape (n, n_steps + 1).  The rows
    are bit-identical to the corresponding rows of :func:`simulate_paths`
    for any batch containing this block.
    """
    if not 1 <= n <= BLOCK_SIZE:
        raise ValueError(f"block size must be in [1, {BLOCK_SIZE}], got {n}")
    rng = block_generator(seed, block_index)
    L = correlation_factor(params.rho_sv, params.rho_sr)
    m = grid.n_steps
    dt = grid.dt
    sqrt_dt = np.sqrt(dt)

    # Time-major layout: each step writes one contiguous row.  The returned
    # views are (n, m + 1) with paths as rows.
    S = np.empty((m + 1, n))
    v = np.empty((m + 1, n))
    r = np.empty((m + 1, n))
    df = np.empty((m + 1, n))
    S[0] = params.s0
    v[0] = params.v0
    r[0] = params.r0
    df[0] = 1.0

    v_state = np.full(n, params.v0)   # signed full-truncation state
    # Draw a full block of normals per step even when the block is partial:
    # path lane i then consumes the same numbers in every batch size, so a
    # path's stream is a pure function of (seed, path index).
    z = np.empty((3, BLOCK_SIZE))
    for i in range(m):
        rng.standard_normal(out=z)
        eps = L @ z[:, :n]
        vp = np.maximum(v_state, 0.0)
        r_i = r[i]
        sv_dt = np.sqrt(vp * dt)
        S[i + 1] = S[i] * np.exp((r_i - 0.5 * vp) * dt + sv_dt * eps[0])
        v_state = v_state + params.k * (params.theta - vp) * dt \
            + params.sigma_v * sv_dt * eps[1]
        r[i + 1] = r_i + params.nu * (params.beta - r_i) * dt \
            + params.sigma_r * vp ** params.gamma * sqrt_dt * eps[2]
        df[i + 1] = df[i] * np.exp(-r_i * dt)
        v[i + 1] = np.maximum(v_state, 0.0)
    return S.T, v.T, r.T, df.T


def simulate_paths(params, grid, n_paths, seed, n_workers=None):
    """Simulate a batch of joint (S, v, r) paths under the pricing measure.

    Parameters
    ----------
    params : ModelParams
    grid : TimeGrid
    n_paths : int
        Number of paths, >= 1.
    seed : int
        Non-negative seed.  Identical (params, grid, n_paths, seed) give a
        bit-identical batch for any ``n_workers``.
    n_workers : int, optional
        Worker threads across path blocks.  Defaults to the CPPI_THREADS
        environment variable, else 1.  Affects speed only, never values.

    Returns
    -------
    MarketPaths
        Arrays of shape (n_paths, n_steps + 1).  Memory is roughly
        ``4 * 8 * n_paths * (n_steps + 1)`` bytes; for very large batches
        prefer streaming over :func:`simulate_block` results.
    """
    if n_paths < 1:
        raise ValueError(f"n_paths must be >= 1, got {n_paths}")
    if seed < 0:
        raise ValueError(f"seed must be >= 0, got {seed}")
    n_workers = worker_count(n_workers)

    # Column-major so that block rows land in the same memory order the
    # simulation kernel produces them in (time-major).
    m = grid.n_steps
    S = np.empty((n_paths, m + 1), order="F")
    v = np.empty((n_paths, m + 1), order="F")
    r = np.empty((n_paths, m + 1), order="F")
    df = np.empty((n_paths, m + 1), order="F")

    def fill(block):
        b, lo, hi = block
        S[lo:hi], v[lo:hi], r[lo:hi], df[lo:hi] = \
            simulate_block(params, grid, seed, b, hi - lo)

    blocks = path_blocks(n_paths)
    if n_workers == 1 or len(blocks) == 1:
        for block in blocks:
            fill(block)
    else:
        with ThreadPoolExecutor(max_workers=n_workers) as pool:
            list(pool.map(fill, blocks))
    return MarketPaths(grid, S, v, r, df, seed=seed)


def pathwise_discount(path):
    """Terminal discount factor exp(-sum_i r_{t_i} dt), left-endpoint rule."""
    r = np.asarray(path.r)
    return float(np.exp(-r[:-1].sum() * path.grid.dt))
