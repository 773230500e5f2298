"""Stochastic engine: correlation factor, path simulation, discounting."""

import math

import numpy as np
import pytest

from cppi_gmee import (
    MarketPath,
    ModelParams,
    NonPSDCorrelation,
    TimeGrid,
    correlation_factor,
    pathwise_discount,
    simulate_paths,
)
from cppi_gmee.market import BLOCK_SIZE, path_blocks, simulate_block


# ---------------------------------------------------------------------------
# correlation_factor


def test_uncorrelated_factor_is_identity():
    assert np.array_equal(correlation_factor(0.0, 0.0), np.eye(3))


def test_factor_reconstructs_target_matrix():
    rho_sv, rho_sr = -0.5, -0.2
    L = correlation_factor(rho_sv, rho_sr)
    target = np.array(
        [
            [1.0, rho_sv, rho_sr],
            [rho_sv, 1.0, rho_sv * rho_sr],
            [rho_sr, rho_sv * rho_sr, 1.0],
        ]
    )
    assert np.tril(L, -1).shape == (3, 3)
    assert np.allclose(np.triu(L, 1), 0.0)  # lower triangular
    assert np.abs(L @ L.T - target).max() < 1e-12


@pytest.mark.parametrize("rho_sv,rho_sr", [(0.3, 0.7), (-0.9, 0.4), (1.0, -1.0)])
def test_factor_reconstruction_random_points(rho_sv, rho_sr):
    L = correlation_factor(rho_sv, rho_sr)
    target = np.array(
        [
            [1.0, rho_sv, rho_sr],
            [rho_sv, 1.0, rho_sv * rho_sr],
            [rho_sr, rho_sv * rho_sr, 1.0],
        ]
    )
    assert np.abs(L @ L.T - target).max() < 1e-12


def test_perfect_correlation_boundary_has_factor():
    L = correlation_factor(1.0, 0.0)
    # second driver fully determined by the first
    assert L[1, 0] == 1.0 and L[1, 1] == 0.0 and L[1, 2] == 0.0


def test_out_of_range_correlation_rejected():
    with pytest.raises(NonPSDCorrelation):
        correlation_factor(1.5, 0.0)


# ---------------------------------------------------------------------------
# parameter and grid validation


def test_model_params_defaults_are_valid():
    p = ModelParams()
    assert p.theta == 0.04 and p.beta == 0.05
    assert p.rho_vr == pytest.approx(0.1)


@pytest.mark.parametrize(
    "kw",
    [
        {"s0": 0.0},
        {"v0": -0.01},
        {"k": 0.0},
        {"theta": -1.0},
        {"nu": 0.0},
        {"sigma_v": -0.1},
        {"sigma_r": -0.1},
        {"gamma": 1.5},
        {"rho_sv": -1.2},
        {"rho_sr": 2.0},
    ],
)
def test_model_params_validation(kw):
    with pytest.raises(ValueError):
        ModelParams(**kw)


def test_zero_sigmas_allowed_for_degenerate_model():
    ModelParams(sigma_v=0.0, sigma_r=0.0)


def test_time_grid():
    g = TimeGrid.daily(1.0)
    assert g.n_steps == 252
    assert g.dt == pytest.approx(1.0 / 252)
    t = g.times()
    assert t[0] == 0.0 and t[-1] == 1.0 and np.all(np.diff(t) > 0)
    assert TimeGrid.daily(10.0).n_steps == 2520
    with pytest.raises(ValueError):
        TimeGrid(1.0, 0)
    with pytest.raises(ValueError):
        TimeGrid(-1.0, 10)


# ---------------------------------------------------------------------------
# simulation


def test_degenerate_diffusions_reduce_to_gbm():
    # sigma_v = sigma_r = 0 with v0 = theta, r0 = beta: v and r are constant
    # and log S_T is exactly Gaussian with mean log s0 + (r0 - v0/2) T and
    # variance v0 T.
    p = ModelParams(sigma_v=0.0, sigma_r=0.0)
    g = TimeGrid.daily(1.0)
    n = 50_000
    paths = simulate_paths(p, g, n, seed=123)
    assert np.all(paths.v == p.v0)
    assert np.all(paths.r == p.r0)
    log_st = np.log(paths.S[:, -1])
    mean_target = math.log(p.s0) + (p.r0 - p.v0 / 2)
    se = log_st.std(ddof=1) / math.sqrt(n)
    assert abs(log_st.mean() - mean_target) <= 3 * se
    assert abs(log_st.var(ddof=1) - p.v0) <= 0.05 * p.v0


def test_positivity_under_stressed_variance():
    # Feller condition badly violated: truncation must keep v >= 0, S > 0.
    p = ModelParams(v0=0.01, theta=0.01, sigma_v=0.6)
    paths = simulate_paths(p, TimeGrid.daily(1.0), 20_000, seed=5)
    assert np.all(paths.v >= 0.0)
    assert np.all(paths.S > 0.0)
    assert np.any(paths.v == 0.0)  # truncation actually engaged


def test_martingale_property_of_discounted_asset():
    p = ModelParams()
    n = 50_000
    for T in (1.0, 5.0):
        paths = simulate_paths(p, TimeGrid.daily(T), n, seed=77)
        m = paths.df[:, -1] * paths.S[:, -1]
        se = m.std(ddof=1) / math.sqrt(n)
        assert abs(m.mean() - p.s0) <= 3 * se


def test_increment_correlation_matches_rho_sv():
    p = ModelParams()
    paths = simulate_paths(p, TimeGrid.daily(1.0), 100_000, seed=9)
    dls = np.diff(np.log(paths.S), axis=1).ravel()
    dv = np.diff(paths.v, axis=1).ravel()
    corr = np.corrcoef(dls, dv)[0, 1]
    assert abs(corr - p.rho_sv) <= 0.05


def test_discount_factor_invariants():
    p = ModelParams()
    paths = simulate_paths(p, TimeGrid.daily(1.0), 2_000, seed=3)
    assert np.all(paths.df[:, 0] == 1.0)
    assert np.all(paths.df > 0.0)
    positive_rates = np.all(paths.r[:, :-1] > 0, axis=1)
    decreasing = np.all(np.diff(paths.df, axis=1) < 0, axis=1)
    assert np.all(decreasing[positive_rates])


def test_same_seed_is_bit_identical_and_worker_independent():
    p = ModelParams()
    g = TimeGrid.daily(0.5)
    a = simulate_paths(p, g, 10_000, seed=42, n_workers=1)
    b = simulate_paths(p, g, 10_000, seed=42, n_workers=4)
    for x, y in ((a.S, b.S), (a.v, b.v), (a.r, b.r), (a.df, b.df)):
        assert np.array_equal(x, y)
    c = simulate_paths(p, g, 10_000, seed=43)
    assert not np.array_equal(a.S, c.S)


def test_blocks_are_independent_of_batch_size():
    # the rows of a block must not depend on how many other paths are drawn
    p = ModelParams()
    g = TimeGrid(1.0, 10)
    small = simulate_paths(p, g, 100, seed=1)
    big = simulate_paths(p, g, BLOCK_SIZE + 100, seed=1)
    assert np.array_equal(small.S, big.S[:100])
    S, v, r, df = simulate_block(p, g, 1, 1, 100)
    assert np.array_equal(S, big.S[BLOCK_SIZE:])


def test_path_blocks_decomposition():
    assert path_blocks(1) == [(0, 0, 1)]
    assert path_blocks(BLOCK_SIZE) == [(0, 0, BLOCK_SIZE)]
    blocks = path_blocks(2 * BLOCK_SIZE + 7)
    assert blocks[-1] == (2, 2 * BLOCK_SIZE, 2 * BLOCK_SIZE + 7)


def test_simulate_paths_argument_validation():
    p = ModelParams()
    g = TimeGrid.daily(1.0)
    with pytest.raises(ValueError):
        simulate_paths(p, g, 0, seed=1)
    with pytest.raises(ValueError):
        simulate_paths(p, g, 10, seed=-1)
    with pytest.raises(ValueError):
        simulate_paths(p, g, 10, seed=1, n_workers=0)


# ---------------------------------------------------------------------------
# pathwise_discount


def _constant_rate_path(rate, maturity, n_steps=252):
    grid = TimeGrid(maturity, n_steps)
    m = n_steps + 1
    r = np.full(m, rate)
    df = np.exp(-rate * grid.dt * np.arange(m))
    return MarketPath(grid, np.full(m, 100.0), np.zeros(m), r, df)


def test_pathwise_discount_constant_rate_one_year():
    path = _constant_rate_path(0.05, 1.0)
    assert pathwise_discount(path) == pytest.approx(math.exp(-0.05), rel=1e-12)


def test_pathwise_discount_zero_rate():
    path = _constant_rate_path(0.0, 1.0)
    assert pathwise_discount(path) == 1.0


def test_pathwise_discount_ten_years():
    path = _constant_rate_path(0.05, 10.0, n_steps=2520)
    assert pathwise_discount(path) == pytest.approx(math.exp(-0.5), rel=1e-12)


def test_pathwise_discount_matches_stored_terminal_df():
    p = ModelParams()
    paths = simulate_paths(p, TimeGrid.daily(1.0), 50, seed=8)
    for i in range(0, 50, 7):
        path = paths.path(i)
        assert pathwise_discount(path) == pytest.approx(path.df[-1], rel=1e-12)
