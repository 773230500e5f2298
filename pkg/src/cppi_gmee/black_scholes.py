"""Black-Scholes closed forms, used as an independent check on the Monte Carlo
engine when both diffusions are switched off (sigma_v = sigma_r = 0)."""

import numpy as np
from scipy.stats import norm


def bs_price(s0, strike, rate, vol, maturity, kind="call"):
    """European call/put price under constant rate and volatility."""
    if vol <= 0 or maturity <= 0:
        raise ValueError("vol and maturity must be > 0")
    sqrt_t = np.sqrt(maturity)
    d1 = (np.log(s0 / strike) + (rate + 0.5 * vol * vol) * maturity) / (vol * sqrt_t)
    d2 = d1 - vol * sqrt_t
    disc = np.exp(-rate * maturity)
    if kind == "call":
        return float(s0 * norm.cdf(d1) - strike * disc * norm.cdf(d2))
    if kind == "put":
        return float(strike * disc * norm.cdf(-d2) - s0 * norm.cdf(-d1))
    raise ValueError(f"kind must be 'call' or 'put', got {kind!r}")
