"""Bid-landscape segmentation: split a mixed slot into homogeneous groups
and optimize each separately.

A slot whose auctions mix two bidder populations (say, retargeting campaigns
against run-of-network filler) has a bimodal bid landscape; a single fitted
payment curve splits the difference and misprices both. Clustering the
observed bids into two groups, splitting supply and demand proportionally,
and solving each group on its own fitted curves recovers a coherent plan per
group.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, replace

import numpy as np

from .auction import BidModel, RevenueCurves, estimate_max_value, fit_payment_curves
from .market import MarketConfig, TimeGrid, censored_bound
from .solver import PricePlan, competition_level, optimal_plan

__all__ = [
    "Segment",
    "SegmentPlan",
    "SegmentedMarket",
    "kmeans_1d",
    "segment_and_optimize",
]


@dataclass
class Segment:
    """One cluster of observations: indices into the input, plus summary stats."""

    label: str
    members: list
    centroid: float
    stats: dict


def kmeans_1d(values, k=2, seed=0, max_iters=100):
    """Seeded k-means on scalars: k-means++ start, Lloyd iterations.

    Deterministic for a given seed. Clusters that empty out are refilled
    with the point farthest from its current centroid. Raises ValueError
    when the data cannot support k clusters (fewer than k distinct values).
    Segments come back ordered by descending centroid, labelled
    ``group1_high``/``group2_low`` for k = 2 and ``group<i>`` otherwise.
    """
    vals = np.asarray(values, dtype=float).ravel()
    if vals.size == 0:
        raise ValueError("no values to cluster")
    if k < 1:
        raise ValueError("k must be positive")
    if np.unique(vals).size < k:
        raise ValueError(f"need at least {k} distinct values to form {k} clusters")
    rng = np.random.default_rng(seed)

    centroids = [float(vals[rng.integers(vals.size)])]
    while len(centroids) < k:
        d2 = np.min(np.abs(vals[:, None] - np.array(centroids)[None, :]), axis=1) ** 2
        centroids.append(float(vals[rng.choice(vals.size, p=d2 / d2.sum())]))
    centroids = np.array(centroids)

    assign = None
    for _ in range(max_iters):
        dist = np.abs(vals[:, None] - centroids[None, :])
        new_assign = np.argmin(dist, axis=1)
        for j in range(k):
            if not np.any(new_assign == j):
                spread = np.abs(vals - centroids[new_assign])
                new_assign[int(np.argmax(spread))] = j
        if assign is not None and np.array_equal(new_assign, assign):
            break
        assign = new_assign
        for j in range(k):
            centroids[j] = vals[assign == j].mean()

    order = np.argsort(-centroids, kind="stable")
    segments = []
    for rank, j in enumerate(order):
        members = np.nonzero(assign == j)[0]
        group = vals[members]
        if k == 2:
            label = "group1_high" if rank == 0 else "group2_low"
        else:
            label = f"group{rank + 1}"
        segments.append(Segment(
            label=label,
            members=[int(i) for i in members],
            centroid=float(centroids[j]),
            stats={
                "count": int(members.size),
                "mean": float(group.mean()),
                "std": float(group.std(ddof=0)),
                "min": float(group.min()),
                "max": float(group.max()),
            },
        ))
    return segments


@dataclass
class SegmentPlan:
    """One segment's market slice and its optimal plan."""

    label: str
    auction_count: int
    supply: int
    demand: int
    mean_competition: float
    max_value: float
    curves: RevenueCurves
    bid_model: BidModel
    plan: PricePlan
    rtb_only: bool


@dataclass
class SegmentedMarket:
    """Per-segment plans plus the combined expected revenue."""

    segments: list
    combined_revenue: float
    fallback: bool


def _auction_groups(summaries, feature, seed):
    """Cluster auctions into two groups by the chosen bid feature.

    Returns ``(groups, fallback)`` where groups is a list of
    ``(label, indices)`` ordered high bids first.
    """
    if feature == "winning_bid":
        values = np.array([s.winning_bid for s in summaries])
        try:
            segs = kmeans_1d(values, k=2, seed=seed)
        except ValueError:
            return [("all", list(range(len(summaries))))], True
        return [(s.label, s.members) for s in segs], False
    if feature == "all_bids":
        flat = np.concatenate([s.bids for s in summaries])
        try:
            segs = kmeans_1d(flat, k=2, seed=seed)
        except ValueError:
            return [("all", list(range(len(summaries))))], True
        centroids = np.array([s.centroid for s in segs])
        groups = [(s.label, []) for s in segs]
        for i, s in enumerate(summaries):
            j = int(np.argmin(np.abs(centroids - s.winning_bid)))
            groups[j][1].append(i)
        groups = [(label, members) for label, members in groups if members]
        if len(groups) < 2:
            return [("all", list(range(len(summaries))))], True
        return groups, False
    raise ValueError(f"unknown feature {feature!r}; use winning_bid or all_bids")


def segment_and_optimize(summaries, cfg: MarketConfig, *, feature="winning_bid",
                         seed=0, lowess_fraction=0.3, lowess_iterations=3,
                         poly_degree=2, hourly=None):
    """Split auctions into two bid-level groups and solve each market slice.

    Supply, demand, and arrival rate are split proportionally to each
    group's auction share (demand floored at supply + 1 to keep every slice
    oversubscribed); each group gets its own fitted payment curves and value
    ceiling. A group whose mean observed competition is below 2 gets no
    guaranteed sales (its payment curves are censored there) and is priced
    as auction-only inventory.

    When the bids carry no usable structure (a single distinct level), the
    clusterer cannot split them; a warning is issued and the whole market is
    solved as one segment.
    """
    summaries = list(summaries)
    if not summaries:
        raise ValueError("no auctions to segment")
    groups, fallback = _auction_groups(summaries, feature, seed)
    if fallback:
        warnings.warn("bid values cannot support two clusters; keeping one group",
                      RuntimeWarning, stacklevel=2)

    grid = TimeGrid.from_config(cfg)
    total = len(summaries)
    plans = []
    combined = 0.0
    for label, members in groups:
        subs = [summaries[i] for i in members]
        share = len(subs) / total
        if len(groups) == 1:
            supply, demand = cfg.supply_S, cfg.demand_Q
        else:
            supply = max(1, int(round(cfg.supply_S * share)))
            demand = max(int(round(cfg.demand_Q * share)), supply + 1)
        lam = cfg.arrival_rate_lambda * (demand / cfg.demand_Q)
        ceiling = estimate_max_value(subs)
        sub_cfg = replace(cfg, supply_S=supply, demand_Q=demand,
                          arrival_rate_lambda=lam, max_value_pi=ceiling)
        bids = np.concatenate([s.bids for s in subs])
        bid_model = BidModel.empirical(bids)
        mean_xi = float(np.mean([s.xi_observed for s in subs]))
        eligible = [s for s in subs if s.xi_observed >= 2]
        if eligible:
            mean_curve, std_curve = fit_payment_curves(
                eligible, lowess_fraction=lowess_fraction,
                lowess_iterations=lowess_iterations, poly_degree=poly_degree,
                hourly=hourly)
            curves = RevenueCurves(mean_curve, std_curve)
        else:
            curves = None
        if mean_xi < 2.0 or curves is None:
            plan = _rtb_only_plan(sub_cfg, grid, curves, bid_model)
            rtb_only = True
        else:
            plan, _ = optimal_plan(sub_cfg, grid, curves)
            rtb_only = False
        plans.append(SegmentPlan(
            label=label,
            auction_count=len(subs),
            supply=supply,
            demand=demand,
            mean_competition=mean_xi,
            max_value=ceiling,
            curves=curves,
            bid_model=bid_model,
            plan=plan,
            rtb_only=rtb_only,
        ))
        combined += plan.revenue_total
    return SegmentedMarket(segments=plans, combined_revenue=combined,
                           fallback=fallback)


def _rtb_only_plan(cfg, grid, curves, bid_model):
    """All supply to the delivery-day auction; posted steps stay closed.

    Used when observed competition is too thin to certify guaranteed prices.
    The auction revenue still needs a payment estimate: the fitted curve
    where one exists, otherwise the empirical bid model itself.
    """
    model = curves if curves is not None else bid_model
    xi0 = competition_level(cfg.demand_Q, cfg.supply_S, 0)
    revenue = cfg.supply_S * model.payment_mean(xi0, reserve=cfg.reserve_price_r0)
    bounds = np.array([censored_bound(n, xi0, cfg, grid, model)
                       for n in range(grid.n_steps + 1)])
    return PricePlan(
        prices=bounds.copy(),
        sales=np.zeros(grid.n_steps + 1, dtype=int),
        bounds=bounds,
        gamma=0.0,
        revenue_pg=0.0,
        revenue_rtb=float(revenue),
        revenue_total=float(revenue),
        xi_terminal=float(xi0),
    )
