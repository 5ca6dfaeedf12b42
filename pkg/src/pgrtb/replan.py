"""Rolling-horizon replanning under demand uncertainty.

Total demand is only a forecast. The replanner walks the posting window one
step at a time: solve the remaining horizon, commit the first step's price
and sales, shock the remaining demand by a relative noise term, and repeat.
Each shock redraws the tail solve's competition levels and price bounds;
everything else (arrivals, time grid, bid distribution) stays fixed.

With ``epsilon = 0`` the committed path reproduces the static plan's floats
bit for bit: every tail solve shares the static solve's precomputed tables,
prefix-revenue shifts cannot reorder tail comparisons except on ties closer
than one ulp of the accumulated revenue, and the tie-break rules coincide.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .market import MarketConfig, TimeGrid
from .solver import PricePlan, optimal_plan

__all__ = ["UncertaintySpec", "ReplanStep", "update_demand", "replan"]

_NOISE_KINDS = ("gaussian", "rademacher")


@dataclass(frozen=True)
class UncertaintySpec:
    """Relative demand noise: one draw per step, reproducible per seed.

    ``epsilon`` scales the draw; ``gaussian`` draws a standard normal,
    ``rademacher`` a fair +/-1 coin. Each step's draw comes from its own
    seed sequence keyed ``(noise_seed, step)``, so step k's shock does not
    depend on how many draws earlier steps consumed.
    """

    epsilon: float
    noise_seed: int = 0
    noise_kind: str = "gaussian"

    def __post_init__(self):
        if not (np.isfinite(self.epsilon) and self.epsilon >= 0):
            raise ValueError("epsilon must be finite and non-negative")
        if self.noise_seed < 0:
            raise ValueError("noise_seed must be non-negative")
        if self.noise_kind not in _NOISE_KINDS:
            raise ValueError(f"noise_kind must be one of {_NOISE_KINDS}")

    def draw(self, step):
        rng = np.random.default_rng(
            np.random.SeedSequence((int(self.noise_seed), int(step))))
        if self.noise_kind == "gaussian":
            return float(rng.standard_normal())
        return 1.0 if rng.random() < 0.5 else -1.0


def update_demand(demand, spec: UncertaintySpec, step, remaining_supply):
    """One multiplicative shock to the remaining demand forecast.

    Rounds to the nearest integer and floors at ``remaining_supply + 1`` so
    demand keeps exceeding supply (the market model needs more contenders
    than impressions).
    """
    if demand <= 0:
        raise ValueError("demand must be positive")
    if remaining_supply < 0:
        raise ValueError("remaining_supply must be non-negative")
    shocked = demand * (1.0 + spec.epsilon * spec.draw(step))
    return max(int(round(shocked)), int(remaining_supply) + 1)


@dataclass
class ReplanStep:
    """What one replanning round committed and what it believed afterwards."""

    step: int
    sell_now: int
    price: float
    demand_before: int
    demand_after: int
    remaining_supply: int
    forecast_revenue: float


def replan(cfg: MarketConfig, grid: TimeGrid, model, spec: UncertaintySpec):
    """Walk the horizon committing one step per tail solve.

    Returns ``(PricePlan, trace)``: the realized schedule with its revenue
    split (contract revenue folded over the committed steps; the auction
    term from the final tail solve), and one ReplanStep per round.
    ``forecast_revenue`` in the trace is that round's view of the revenue
    still to come, so it excludes revenue already committed.
    """
    N = cfg.steps_N
    S = cfg.supply_S
    coef = 1.0 - cfg.miss_prob_omega * cfg.penalty_size_varpi
    presold = 0
    demand_abs = cfg.demand_Q
    prices = np.empty(N + 1)
    sales = np.empty(N + 1, dtype=int)
    bnds = np.empty(N + 1)
    pg = 0.0
    trace = []
    tail = None
    for n in range(N + 1):
        demand_before = demand_abs - presold
        tail, _ = optimal_plan(cfg, grid, model, start_step=n, presold=presold,
                               demand_total=demand_abs)
        z_now = int(tail.sales[0])
        p_now = float(tail.prices[0])
        prices[n] = p_now
        sales[n] = z_now
        bnds[n] = float(tail.bounds[0])
        if z_now > 0:
            pg = pg + (coef * p_now) * z_now
        presold += z_now
        if n < N:
            shocked = update_demand(demand_abs - presold, spec, n, S - presold)
            demand_abs = presold + shocked
        trace.append(ReplanStep(
            step=n,
            sell_now=z_now,
            price=p_now,
            demand_before=demand_before,
            demand_after=demand_abs - presold,
            remaining_supply=S - presold,
            forecast_revenue=float(tail.revenue_total),
        ))
    realized = PricePlan(
        prices=prices, sales=sales, bounds=bnds,
        gamma=presold / S,
        revenue_pg=pg,
        revenue_rtb=float(tail.revenue_rtb),
        revenue_total=pg + float(tail.revenue_rtb),
        xi_terminal=float(tail.xi_terminal) if math.isfinite(tail.xi_terminal)
        else math.inf,
        start_step=0,
        presold=0,
    )
    return realized, trace
