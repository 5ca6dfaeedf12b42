"""Demand-side primitives of a dual-channel ad impression market.

A publisher owns a fixed inventory of ``supply_S`` impressions that will be
shown during a future delivery period. Before that period there is a selling
window of length ``horizon_T``, discretized into ``steps_N`` posting steps, in
which advertisers can buy guaranteed contracts at posted prices. Whatever is
left unsold (or undelivered) is cleared on the delivery day through
second-price auctions.

This module holds everything about the buyers: how many arrive at each step,
the fraction of waiting buyers that accepts a posted price, how unfulfilled
demand backlogs over the window, how much buyers value certainty over the
auction lottery, and the resulting ceiling on the posted price.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "MarketConfig",
    "TimeGrid",
    "expected_arrivals",
    "purchase_ratio",
    "backlog_demand",
    "risk_preference",
    "censored_bound",
    "reference_config",
]


@dataclass(frozen=True)
class MarketConfig:
    """Exogenous scalars describing one slot's market.

    Attributes
    ----------
    supply_S : int
        Impressions available in the delivery period.
    demand_Q : int
        Advertisers with unit demand for this slot. Must exceed ``supply_S``;
        excess demand is what keeps the delivery-day auction competitive.
    horizon_T : float
        Length of the posted-price selling window.
    steps_N : int
        Number of posting steps; step width is ``horizon_T / steps_N``.
    arrival_rate_lambda : float
        Expected advertiser arrivals per unit time during the window.
    initial_arrival_mass : float
        Fraction of ``demand_Q`` already present at the first step.
    price_effect_alpha : float
        Price sensitivity of the purchase ratio (larger = fewer buyers).
    time_effect_beta : float
        Early-window reluctance: scales price sensitivity by the time still
        remaining until delivery.
    risk_level_zeta : float
        Scale of buyer risk aversion toward the auction lottery.
    risk_decay_v : float
        Exponential decay rate of risk aversion over the window.
    miss_prob_omega : float
        Probability a sold impression is not delivered.
    penalty_size_varpi : float
        Penalty paid on a miss, as a multiple of the contract price.
    max_value_pi : float
        Expected maximum value a single impression can fetch; posted prices
        above it cannot clear and are censored.
    reserve_price_r0 : float
        Auction reserve; also the payment fallback when fewer than two
        bidders show up.
    """

    supply_S: int
    demand_Q: int
    horizon_T: float
    steps_N: int
    arrival_rate_lambda: float
    initial_arrival_mass: float = 0.2
    price_effect_alpha: float = 1.0
    time_effect_beta: float = 0.0
    risk_level_zeta: float = 0.0
    risk_decay_v: float = 0.0
    miss_prob_omega: float = 0.0
    penalty_size_varpi: float = 0.0
    max_value_pi: float = 1.0
    reserve_price_r0: float = 0.0

    def __post_init__(self) -> None:
        if not isinstance(self.supply_S, (int, np.integer)) or self.supply_S <= 0:
            raise ValueError("supply_S must be a positive integer")
        if not isinstance(self.demand_Q, (int, np.integer)) or self.demand_Q <= self.supply_S:
            raise ValueError("demand_Q must be an integer exceeding supply_S")
        if self.horizon_T <= 0:
            raise ValueError("horizon_T must be positive")
        if not isinstance(self.steps_N, (int, np.integer)) or self.steps_N < 1:
            raise ValueError("steps_N must be a positive integer")
        if self.arrival_rate_lambda < 0:
            raise ValueError("arrival_rate_lambda must be non-negative")
        if self.arrival_rate_lambda > self.demand_Q / self.horizon_T:
            raise ValueError(
                "arrival_rate_lambda too large: cumulative arrivals would "
                "exceed total demand"
            )
        if not 0.0 <= self.initial_arrival_mass <= 1.0:
            raise ValueError("initial_arrival_mass must lie in [0, 1]")
        if self.price_effect_alpha <= 0:
            raise ValueError("price_effect_alpha must be positive")
        if self.time_effect_beta < 0:
            raise ValueError("time_effect_beta must be non-negative")
        if self.risk_level_zeta < 0:
            raise ValueError("risk_level_zeta must be non-negative")
        if self.risk_decay_v < 0:
            raise ValueError("risk_decay_v must be non-negative")
        if not 0.0 <= self.miss_prob_omega <= 1.0:
            raise ValueError("miss_prob_omega must lie in [0, 1]")
        if self.penalty_size_varpi < 0:
            raise ValueError("penalty_size_varpi must be non-negative")
        if self.miss_prob_omega * self.penalty_size_varpi > 1.0:
            raise ValueError(
                "miss_prob_omega * penalty_size_varpi must not exceed 1 "
                "(selling would be worse than free disposal)"
            )
        if self.max_value_pi <= 0:
            raise ValueError("max_value_pi must be positive")
        if self.reserve_price_r0 < 0:
            raise ValueError("reserve_price_r0 must be non-negative")

    @property
    def delta_t(self) -> float:
        return self.horizon_T / self.steps_N


@dataclass(frozen=True, eq=False)
class TimeGrid:
    """Uniform posting times t_0 = 0 < t_1 < ... < t_N = horizon_T."""

    points: np.ndarray

    def __post_init__(self) -> None:
        pts = np.asarray(self.points, dtype=float)
        if pts.ndim != 1 or pts.size < 2:
            raise ValueError("grid needs at least two time points")
        if pts[0] != 0.0:
            raise ValueError("grid must start at t = 0")
        steps = np.diff(pts)
        if np.any(steps <= 0):
            raise ValueError("grid points must be strictly increasing")
        if not np.allclose(steps, steps[0], rtol=1e-9, atol=0.0):
            raise ValueError("grid must be uniform")
        object.__setattr__(self, "points", pts)

    @classmethod
    def from_config(cls, cfg: MarketConfig) -> "TimeGrid":
        return cls(np.linspace(0.0, cfg.horizon_T, cfg.steps_N + 1))

    @property
    def n_steps(self) -> int:
        return self.points.size - 1

    @property
    def delta_t(self) -> float:
        return float(self.points[1] - self.points[0])


def _check_step(n: int, last: int) -> None:
    if not isinstance(n, (int, np.integer)) or not 0 <= n <= last:
        raise IndexError(f"step {n} outside 0..{last}")


def expected_arrivals(n: int, cfg: MarketConfig) -> float:
    """Expected new advertiser arrivals at step ``n``.

    Every step contributes the rate mass ``lambda * dt``; the first step
    additionally carries the advertisers already waiting when the window
    opens, ``initial_arrival_mass * demand_Q``.
    """
    _check_step(n, cfg.steps_N)
    base = cfg.arrival_rate_lambda * cfg.delta_t
    if n == 0:
        return cfg.initial_arrival_mass * cfg.demand_Q + base
    return base


def purchase_ratio(n: int, price: float, cfg: MarketConfig, grid: TimeGrid) -> float:
    """Fraction of waiting advertisers that buys at ``price`` posted at step ``n``.

    Exponential in the price, with sensitivity inflated early in the window:
    ``exp(-alpha * price * (1 + beta * (t_N - t_n)))``. Decreasing in price,
    increasing in time (for beta > 0), equal to 1 at price 0.
    """
    _check_step(n, grid.n_steps)
    if price < 0:
        raise ValueError("price must be non-negative")
    remaining = grid.points[-1] - grid.points[n]
    return math.exp(
        -cfg.price_effect_alpha * price * (1.0 + cfg.time_effect_beta * remaining)
    )


def backlog_demand(n, prior_prices, cfg: MarketConfig, grid: TimeGrid) -> float:
    """Expected advertisers waiting at step ``n`` given posted price history.

    Arrivals at earlier steps survive into step ``n`` with probability
    ``prod (1 - theta)`` over the prices they declined; arrivals at ``n``
    itself are all present. ``prior_prices`` must have length ``n``.
    """
    _check_step(n, grid.n_steps)
    prior_prices = list(prior_prices)
    if len(prior_prices) != n:
        raise ValueError(f"expected {n} prior prices, got {len(prior_prices)}")
    total = expected_arrivals(n, cfg)
    survive = 1.0
    for i in range(n - 1, -1, -1):
        survive *= 1.0 - purchase_ratio(i, prior_prices[i], cfg, grid)
        total += expected_arrivals(i, cfg) * survive
    return total


def risk_preference(n: int, cfg: MarketConfig, grid: TimeGrid) -> float:
    """Risk-aversion weight ``zeta * exp(-v * t_n)`` at step ``n``.

    Buyers far from the delivery day pay a certainty premium over the
    auction's expected payment; the premium decays as delivery approaches.
    """
    _check_step(n, grid.n_steps)
    return cfg.risk_level_zeta * math.exp(-cfg.risk_decay_v * grid.points[n])


def censored_bound(n: int, xi: float, cfg: MarketConfig, grid: TimeGrid, model) -> float:
    """Upper bound on the posted price at step ``n`` under competition ``xi``.

    The bound is the auction's expected payment plus the step's risk premium
    on its spread, censored at the expected maximum impression value:
    ``min(payment_mean + delta * payment_std, max_value_pi)``. With fewer
    than two expected bidders there is no second price and the bound falls
    back to the reserve.

    ``model`` is anything exposing ``payment_mean(xi, reserve=...)`` and
    ``payment_std(xi)`` -- a bid distribution or a pair of fitted curves.
    """
    _check_step(n, grid.n_steps)
    if xi <= 1.0:
        return cfg.reserve_price_r0
    mean = model.payment_mean(xi, reserve=cfg.reserve_price_r0)
    spread = model.payment_std(xi)
    return min(mean + risk_preference(n, cfg, grid) * spread, cfg.max_value_pi)


def reference_config() -> MarketConfig:
    """Reference synthetic slot used by the demos and the validation suite.

    A mid-size slot with fourfold excess demand, a 31-day posting window
    (t_0 plus 30 daily steps), 20% of demand waiting at the window open and
    another 20% trickling in over the window. Bids are uniform on [0, 1]
    CPM in the companion demos/tests, so prices are on that scale and the
    value ceiling sits at the all-auction expected payment, 0.6 CPM.

    The constants are tuned so the slot is well-behaved end to end: the
    optimizer sells just over half the supply forward (leaving enough slack
    that simulated sales never pile into the supply cap), both channels
    contribute comparably to revenue, and the risk-preference sweeps in the
    validation suite respond flat because the value ceiling censors the
    risk premium across the swept range.
    """
    return MarketConfig(
        supply_S=100,
        demand_Q=400,
        horizon_T=30.0,
        steps_N=30,
        arrival_rate_lambda=0.2 * 400 / 30.0,
        initial_arrival_mass=0.2,
        price_effect_alpha=2.0,
        time_effect_beta=0.05,
        risk_level_zeta=10.0,
        risk_decay_v=0.1,
        miss_prob_omega=0.02,
        penalty_size_varpi=0.5,
        max_value_pi=0.6,
        reserve_price_r0=0.0,
    )
