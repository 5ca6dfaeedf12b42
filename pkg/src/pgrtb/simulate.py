"""Synthetic market: sampled arrivals, posted-price purchases, delivery-day
auctions, and auction-log generation.

The simulator is the plan's reality check. Arrivals are Poisson draws around
the expected schedule, purchases are binomial thinning of the waiting pool at
the posted price, sold contracts fail independently at delivery (costing the
penalty), and the leftover impressions run second-price auctions against the
leftover demand. Every randomized piece takes an explicit seed and spawns
child streams, so a root seed pins the whole experiment.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from datetime import datetime, timedelta, timezone

import numpy as np

from .logs import AuctionLogRecord
from .market import MarketConfig, TimeGrid, purchase_ratio
from .solver import PricePlan

__all__ = [
    "SimOutcome",
    "generate_arrivals",
    "simulate_purchases",
    "simulate_rtb",
    "run_market_once",
    "evaluate_plan",
    "generate_log",
]

_EPOCH = datetime(2024, 1, 1, tzinfo=timezone.utc)


def _seed_sequence(seed):
    if isinstance(seed, np.random.SeedSequence):
        return seed
    return np.random.SeedSequence(seed)


def generate_arrivals(cfg: MarketConfig, grid: TimeGrid, seed):
    """Sampled contender arrivals per step.

    Poisson(lambda * dt) at every step, plus the deterministic opening block
    floor(mass * Q) at step 0.
    """
    rng = np.random.default_rng(_seed_sequence(seed))
    lam = cfg.arrival_rate_lambda * grid.delta_t
    arrivals = rng.poisson(lam, grid.n_steps + 1)
    arrivals[0] += int(math.floor(cfg.initial_arrival_mass * cfg.demand_Q))
    return arrivals


def simulate_purchases(plan: PricePlan, cfg: MarketConfig, grid: TimeGrid, seed):
    """Posted-price sales for one arrival realization.

    Contenders accumulate in a waiting pool. At each step the plan leaves
    open, every waiting contender buys independently with the purchase ratio
    at the posted price; sales are capped by remaining supply. Steps the plan
    closes sell nothing. Returns ``(sold per step, gross contract revenue)``.
    """
    if plan.start_step != 0:
        raise ValueError("simulation needs a full-horizon plan")
    arrivals_seed, buy_seed = _seed_sequence(seed).spawn(2)
    arrivals = generate_arrivals(cfg, grid, arrivals_seed)
    rng = np.random.default_rng(buy_seed)
    remaining = cfg.supply_S - plan.presold
    pool = 0
    sold = np.zeros(grid.n_steps + 1, dtype=int)
    revenue = 0.0
    for n in range(grid.n_steps + 1):
        pool += int(arrivals[n])
        if plan.sales[n] == 0 or remaining == 0 or pool == 0:
            continue
        theta = purchase_ratio(n, float(plan.prices[n]), cfg, grid)
        want = int(rng.binomial(pool, theta))
        take = min(want, remaining)
        sold[n] = take
        pool -= take
        remaining -= take
        revenue += float(plan.prices[n]) * take
    return sold, revenue


def simulate_rtb(remaining_supply, remaining_demand, bid_model, seed, *,
                 reserve=0.0, slot_id="slot-0", start_time=None,
                 collect_log=False):
    """Delivery-day second-price auctions over the leftover inventory.

    Each remaining contender lands on a uniformly random impression and bids
    a fresh draw from ``bid_model``. An impression with two or more bidders
    pays its second-highest bid, otherwise the reserve. Returns
    ``(revenue, records)``; ``records`` is a bid log (one row per bid, with
    timestamps spread over a day) when ``collect_log`` is set, else empty.
    """
    supply = int(remaining_supply)
    demand = int(remaining_demand)
    if supply < 0 or demand < 0:
        raise ValueError("supply and demand must be non-negative")
    if supply == 0:
        return 0.0, []
    rng = np.random.default_rng(_seed_sequence(seed))
    start = _EPOCH if start_time is None else start_time
    if demand == 0:
        return float(reserve) * supply, []
    placement = rng.integers(0, supply, size=demand)
    bids = bid_model.sample_bids(rng, demand)
    order = np.argsort(placement, kind="stable")
    sorted_bids = bids[order]
    counts = np.bincount(placement, minlength=supply)
    offsets = np.concatenate(([0], np.cumsum(counts)))
    revenue = 0.0
    records = []
    for i in range(supply):
        seg = sorted_bids[offsets[i]:offsets[i + 1]]
        if seg.size >= 2:
            revenue += float(np.partition(seg, seg.size - 2)[seg.size - 2])
        else:
            revenue += float(reserve)
        if collect_log and seg.size:
            ts = start + timedelta(hours=24.0 * i / supply)
            auction_id = f"{slot_id}-rtb-{i:06d}"
            records.extend(
                AuctionLogRecord(slot_id, auction_id, ts, float(b)) for b in seg)
    return revenue, records


@dataclass
class SimOutcome:
    """One market realization: sales path, net revenues, delivery rate."""

    pg_sold: np.ndarray
    pg_revenue: float
    rtb_revenue: float
    delivered_fraction: float
    seed: object

    @property
    def total_revenue(self) -> float:
        return self.pg_revenue + self.rtb_revenue


def run_market_once(plan: PricePlan, cfg: MarketConfig, grid: TimeGrid,
                    bid_model, seed):
    """One full market realization against a plan.

    Purchases first; then each sold contract independently fails to deliver
    with probability omega, costing ``varpi * price`` and releasing the
    impression; the leftover supply then runs auctions against the leftover
    demand (failed buyers rejoin the demand side).
    """
    purchase_seed, failure_seed, rtb_seed = _seed_sequence(seed).spawn(3)
    sold, gross = simulate_purchases(plan, cfg, grid, purchase_seed)
    rng = np.random.default_rng(failure_seed)
    failures = rng.binomial(sold, cfg.miss_prob_omega)
    penalty = cfg.penalty_size_varpi * float(np.sum(np.asarray(plan.prices) * failures))
    delivered = int(sold.sum() - failures.sum())
    rtb_revenue, _ = simulate_rtb(
        cfg.supply_S - delivered, cfg.demand_Q - delivered, bid_model, rtb_seed,
        reserve=cfg.reserve_price_r0)
    total_sold = int(sold.sum())
    return SimOutcome(
        pg_sold=sold,
        pg_revenue=gross - penalty,
        rtb_revenue=rtb_revenue,
        delivered_fraction=delivered / total_sold if total_sold else 1.0,
        seed=seed,
    )


def evaluate_plan(plan: PricePlan, cfg: MarketConfig, grid: TimeGrid, bid_model,
                  n_runs, seed, *, workers=1):
    """Monte Carlo summary of a plan over ``n_runs`` independent markets.

    Deterministic for a given seed, and independent of ``workers``: run k
    always uses the k-th spawned child stream.
    """
    if n_runs < 1:
        raise ValueError("n_runs must be at least 1")
    if workers < 1:
        raise ValueError("workers must be at least 1")
    children = _seed_sequence(seed).spawn(n_runs)

    def one(child):
        return run_market_once(plan, cfg, grid, bid_model, child)

    if workers == 1:
        outcomes = [one(c) for c in children]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            outcomes = list(pool.map(one, children))

    totals = np.array([o.total_revenue for o in outcomes])
    pg = np.array([o.pg_revenue for o in outcomes])
    rtb = np.array([o.rtb_revenue for o in outcomes])
    sold = np.vstack([o.pg_sold for o in outcomes])
    delivered = np.array([o.delivered_fraction for o in outcomes])
    qlevels = (0.05, 0.25, 0.5, 0.75, 0.95)
    qvals = np.quantile(totals, qlevels)
    summary = {
        "n_runs": int(n_runs),
        "plan_revenue": float(plan.revenue_total),
        "mean_total": float(totals.mean()),
        "std_total": float(totals.std(ddof=0)),
        "se_total": float(totals.std(ddof=0) / math.sqrt(n_runs)),
        "mean_pg": float(pg.mean()),
        "mean_rtb": float(rtb.mean()),
        "mean_delivered_fraction": float(delivered.mean()),
        "quantiles": {f"q{int(100 * q):02d}": float(v)
                      for q, v in zip(qlevels, qvals)},
        "mean_sold_per_step": [float(v) for v in sold.mean(axis=0)],
        "se_sold_per_step": [float(v) for v in
                             sold.std(axis=0, ddof=0) / math.sqrt(n_runs)],
    }
    return summary, outcomes


def generate_log(bid_model, *, hours, auctions_per_hour, bidders_per_hour,
                 seed, slot_id="slot-0", start_time=None):
    """Synthetic auction log with a planted hourly competition pattern.

    Hour ``h`` runs ``auctions_per_hour`` auctions, each with
    ``bidders_per_hour[h mod len]`` independent bids from ``bid_model``.
    Returns ``(records, truth)`` where ``truth`` records everything needed
    to check an estimator against the generator.
    """
    if hours < 1 or auctions_per_hour < 1:
        raise ValueError("hours and auctions_per_hour must be positive")
    bidders = [int(b) for b in bidders_per_hour]
    if not bidders or any(b < 0 for b in bidders):
        raise ValueError("bidders_per_hour must be non-empty, non-negative ints")
    rng = np.random.default_rng(_seed_sequence(seed))
    start = _EPOCH if start_time is None else start_time
    records = []
    for h in range(hours):
        k = bidders[h % len(bidders)]
        hour_start = start + timedelta(hours=h)
        for a in range(auctions_per_hour):
            ts = hour_start + timedelta(seconds=3600.0 * a / auctions_per_hour)
            auction_id = f"{slot_id}-h{h:04d}-a{a:05d}"
            bids = bid_model.sample_bids(rng, k)
            records.extend(
                AuctionLogRecord(slot_id, auction_id, ts, float(b)) for b in bids)
    truth = {
        "slot_id": slot_id,
        "hours": int(hours),
        "auctions_per_hour": int(auctions_per_hour),
        "bidders_per_hour": bidders,
        "seed": int(seed) if np.isscalar(seed) else None,
        "bid_model": bid_model.to_dict(),
        "start_time": (start.isoformat()),
    }
    return records, truth
