"""Command-line driver: generate data, fit, optimize, simulate, replan, segment.

Every command reads one JSON run config (sections: market, bid_model, fit,
seeds, uncertainty, segmentation, synthetic, simulate, output) plus a few
flag overrides, writes machine-readable outputs into the output directory,
and prints a one-line human summary. Exit codes: 0 success, 2 bad input or
unusable config, 1 unexpected failure.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import math
import os
import sys
import traceback
from dataclasses import dataclass
from datetime import datetime

from .auction import BidModel, RevenueCurves, estimate_max_value, fit_payment_curves
from .logs import read_log_csv, summarize_auctions, write_log_csv
from .market import MarketConfig, TimeGrid
from .replan import UncertaintySpec, replan as run_replan
from .segmentation import segment_and_optimize
from .simulate import evaluate_plan, generate_log
from .solver import PricePlan, optimal_plan

SCHEMA_VERSION = 1


class UsageError(Exception):
    """Bad flags, bad config, or unusable input data (exit code 2)."""


_TOP_KEYS = {"schema_version", "market", "bid_model", "fit", "seeds",
             "uncertainty", "segmentation", "synthetic", "simulate", "output"}
_MARKET_KEYS = {f.name for f in dataclasses.fields(MarketConfig)}
_BID_KEYS = {"kind", "low", "high", "mu", "sigma", "bids"}
_FIT_KEYS = {"lowess_fraction", "lowess_iterations", "poly_degree", "hourly"}
_SEED_KEYS = {"root"}
_UNC_KEYS = {"epsilon", "noise_seed", "noise_kind"}
_SEG_KEYS = {"feature"}
_SYN_KEYS = {"hours", "auctions_per_hour", "bidders_per_hour", "slot_id",
             "start_time"}
_SIM_KEYS = {"n_runs", "workers"}
_OUT_KEYS = {"dir"}


def _check_keys(section, allowed, where):
    if not isinstance(section, dict):
        raise UsageError(f"config section {where!r} must be a JSON object")
    unknown = sorted(set(section) - allowed)
    if unknown:
        raise UsageError(f"unknown key(s) in {where}: {', '.join(unknown)}")


def _bid_model_from_section(section):
    _check_keys(section, _BID_KEYS, "bid_model")
    kind = section.get("kind")
    try:
        if kind == "uniform":
            return BidModel.uniform(section["low"], section["high"])
        if kind == "lognormal":
            return BidModel.lognormal(section["mu"], section["sigma"])
        if kind == "empirical":
            return BidModel.empirical(section["bids"])
    except KeyError as exc:
        raise UsageError(f"bid_model {kind!r} is missing {exc}") from exc
    except (TypeError, ValueError) as exc:
        raise UsageError(f"bad bid_model: {exc}") from exc
    raise UsageError("bid_model.kind must be uniform, lognormal, or empirical")


@dataclass
class RunConfig:
    """Parsed run configuration shared by all commands."""

    market: MarketConfig | None = None
    bid_model: BidModel | None = None
    fit_options: dict = dataclasses.field(default_factory=dict)
    root_seed: int = 0
    uncertainty: UncertaintySpec | None = None
    feature: str = "winning_bid"
    synthetic: dict | None = None
    n_runs: int = 200
    workers: int = 1
    out_dir: str = "."

    @classmethod
    def load(cls, path):
        try:
            with open(path) as fh:
                raw = json.load(fh)
        except OSError as exc:
            raise UsageError(f"cannot read config {path}: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise UsageError(f"config {path} is not valid JSON: {exc}") from exc
        _check_keys(raw, _TOP_KEYS, "top level")
        version = raw.get("schema_version", SCHEMA_VERSION)
        if version != SCHEMA_VERSION:
            raise UsageError(f"unsupported schema_version {version!r}")
        rc = cls()
        if "market" in raw:
            _check_keys(raw["market"], _MARKET_KEYS, "market")
            try:
                rc.market = MarketConfig(**raw["market"])
            except (TypeError, ValueError) as exc:
                raise UsageError(f"bad market section: {exc}") from exc
        if "bid_model" in raw:
            rc.bid_model = _bid_model_from_section(raw["bid_model"])
        if "fit" in raw:
            _check_keys(raw["fit"], _FIT_KEYS, "fit")
            rc.fit_options = dict(raw["fit"])
        if "seeds" in raw:
            _check_keys(raw["seeds"], _SEED_KEYS, "seeds")
            rc.root_seed = int(raw["seeds"].get("root", 0))
        if "uncertainty" in raw:
            _check_keys(raw["uncertainty"], _UNC_KEYS, "uncertainty")
            try:
                rc.uncertainty = UncertaintySpec(**raw["uncertainty"])
            except (TypeError, ValueError) as exc:
                raise UsageError(f"bad uncertainty section: {exc}") from exc
        if "segmentation" in raw:
            _check_keys(raw["segmentation"], _SEG_KEYS, "segmentation")
            rc.feature = raw["segmentation"].get("feature", "winning_bid")
            if rc.feature not in ("winning_bid", "all_bids"):
                raise UsageError("segmentation.feature must be winning_bid or all_bids")
        if "synthetic" in raw:
            _check_keys(raw["synthetic"], _SYN_KEYS, "synthetic")
            rc.synthetic = dict(raw["synthetic"])
        if "simulate" in raw:
            _check_keys(raw["simulate"], _SIM_KEYS, "simulate")
            rc.n_runs = int(raw["simulate"].get("n_runs", rc.n_runs))
            rc.workers = int(raw["simulate"].get("workers", rc.workers))
        if "output" in raw:
            _check_keys(raw["output"], _OUT_KEYS, "output")
            rc.out_dir = str(raw["output"].get("dir", rc.out_dir))
        return rc

    def require_market(self):
        if self.market is None:
            raise UsageError("this command needs a market section in the config")
        return self.market


def _clean(value):
    """Make a payload json-serializable: non-finite floats become null."""
    if isinstance(value, dict):
        return {k: _clean(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_clean(v) for v in value]
    if isinstance(value, float) and not math.isfinite(value):
        return None
    return value


def _write_json(path, payload):
    with open(path, "w") as fh:
        json.dump(_clean(payload), fh, indent=2, sort_keys=True)
        fh.write("\n")


def _out_path(rc, args, name):
    out_dir = args.out if args.out is not None else rc.out_dir
    os.makedirs(out_dir, exist_ok=True)
    return os.path.join(out_dir, name)


def _load_fitted(path):
    """Read a fitted-model file: (curves, bid model or None, value ceiling)."""
    try:
        with open(path) as fh:
            payload = json.load(fh)
    except OSError as exc:
        raise UsageError(f"cannot read model {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise UsageError(f"model {path} is not valid JSON: {exc}") from exc
    try:
        curves = RevenueCurves.from_dict(payload)
        ceiling = float(payload["max_value"])
        bid_model = (BidModel.from_dict(payload["bid_model"])
                     if "bid_model" in payload else None)
    except (KeyError, TypeError, ValueError) as exc:
        raise UsageError(f"model {path} is malformed: {exc}") from exc
    return curves, bid_model, ceiling


# -- commands ---------------------------------------------------------------


def cmd_gen_data(rc: RunConfig, args):
    if rc.synthetic is None:
        raise UsageError("gen-data needs a synthetic section in the config")
    if rc.bid_model is None:
        raise UsageError("gen-data needs a bid_model section in the config")
    syn = dict(rc.synthetic)
    start = syn.pop("start_time", None)
    if start is not None:
        try:
            start = datetime.fromisoformat(start)
        except ValueError as exc:
            raise UsageError(f"bad synthetic.start_time: {exc}") from exc
    seed = args.seed if args.seed is not None else rc.root_seed
    try:
        records, truth = generate_log(rc.bid_model, seed=seed, start_time=start,
                                      **syn)
    except (TypeError, ValueError) as exc:
        raise UsageError(f"bad synthetic section: {exc}") from exc
    log_path = _out_path(rc, args, "auction_log.csv")
    truth_path = _out_path(rc, args, "ground_truth.json")
    write_log_csv(records, log_path)
    _write_json(truth_path, truth)
    n_auctions = len({r.auction_id for r in records})
    print(f"wrote {n_auctions} auctions ({len(records)} bid rows) to {log_path}")
    return 0


def _read_summaries(rc, log_path):
    records = read_log_csv(log_path)
    if not records:
        raise UsageError(f"auction log {log_path} has no bid rows")
    reserve = rc.market.reserve_price_r0 if rc.market is not None else 0.0
    return summarize_auctions(records, reserve=reserve)


def cmd_fit(rc: RunConfig, args):
    summaries = _read_summaries(rc, args.log)
    eligible = [s for s in summaries if s.xi_observed >= 2]
    if not eligible:
        raise UsageError("no auction in the log has two or more bids")
    mean_curve, std_curve = fit_payment_curves(eligible, **rc.fit_options)
    ceiling = estimate_max_value(summaries)
    bids = [float(b) for s in summaries for b in s.bids]
    payload = {
        "schema_version": SCHEMA_VERSION,
        "n_auctions": len(summaries),
        "n_used": len(eligible),
        "max_value": ceiling,
        "payment_mean_curve": mean_curve.to_dict(),
        "payment_std_curve": std_curve.to_dict(),
        "bid_model": {"kind": "empirical", "bids": bids},
    }
    path = _out_path(rc, args, "fitted_model.json")
    _write_json(path, payload)
    print(f"fitted {len(eligible)}/{len(summaries)} auctions: "
          f"mean curve {mean_curve.method} (rmse {mean_curve.rmse:.4f}), "
          f"spread curve {std_curve.method} (rmse {std_curve.rmse:.4f}), "
          f"value ceiling {ceiling:.4f} -> {path}")
    return 0


def _optimizer_model(rc, args):
    """The model the optimizer runs on, honoring --model; returns (cfg, model)."""
    cfg = rc.require_market()
    if getattr(args, "model", None):
        curves, _, ceiling = _load_fitted(args.model)
        cfg = dataclasses.replace(cfg, max_value_pi=ceiling)
        return cfg, curves
    if rc.bid_model is None:
        raise UsageError("need either --model or a bid_model section")
    return cfg, rc.bid_model


def cmd_optimize(rc: RunConfig, args):
    cfg, model = _optimizer_model(rc, args)
    grid = TimeGrid.from_config(cfg)
    plan, _ = optimal_plan(cfg, grid, model)
    plan_path = _out_path(rc, args, "plan.json")
    payload = {"schema_version": SCHEMA_VERSION, "plan": plan.to_dict()}
    _write_json(plan_path, payload)
    curve_path = _out_path(rc, args, "plan_curves.csv")
    demand = cfg.demand_Q
    supply = cfg.supply_S
    with open(curve_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["step", "time", "price", "bound", "sell_now",
                         "cumulative_sold", "competition_after"])
        sold = 0
        for n in range(grid.n_steps + 1):
            sold += int(plan.sales[n])
            xi = math.inf if sold == supply else (demand - sold) / (supply - sold)
            writer.writerow([n, repr(float(grid.points[n])),
                             repr(float(plan.prices[n])),
                             repr(float(plan.bounds[n])), int(plan.sales[n]),
                             sold, repr(float(xi))])
    print(f"optimal revenue {plan.revenue_total:.4f} "
          f"(guaranteed {plan.revenue_pg:.4f}, auction {plan.revenue_rtb:.4f}), "
          f"supply share sold forward {plan.gamma:.3f} -> {plan_path}")
    return 0


def cmd_simulate(rc: RunConfig, args):
    cfg = rc.require_market()
    try:
        with open(args.plan) as fh:
            payload = json.load(fh)
        plan = PricePlan.from_dict(payload.get("plan", payload))
    except OSError as exc:
        raise UsageError(f"cannot read plan {args.plan}: {exc}") from exc
    except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
        raise UsageError(f"plan {args.plan} is malformed: {exc}") from exc
    if getattr(args, "model", None):
        _, bid_model, _ = _load_fitted(args.model)
        if bid_model is None:
            raise UsageError(f"model {args.model} carries no bid sample")
    elif rc.bid_model is not None:
        bid_model = rc.bid_model
    else:
        raise UsageError("need either --model or a bid_model section")
    n_runs = args.runs if args.runs is not None else rc.n_runs
    workers = args.threads if args.threads is not None else rc.workers
    seed = args.seed if args.seed is not None else rc.root_seed
    grid = TimeGrid.from_config(cfg)
    summary, _ = evaluate_plan(plan, cfg, grid, bid_model, n_runs, seed,
                               workers=workers)
    path = _out_path(rc, args, "simulation_summary.json")
    _write_json(path, {"schema_version": SCHEMA_VERSION, **summary})
    print(f"simulated {n_runs} markets: revenue {summary['mean_total']:.4f} "
          f"+/- {summary['se_total']:.4f} (plan said {summary['plan_revenue']:.4f})"
          f" -> {path}")
    return 0


def cmd_replan(rc: RunConfig, args):
    cfg, model = _optimizer_model(rc, args)
    spec = rc.uncertainty
    if args.seed is not None:
        base = spec if spec is not None else UncertaintySpec(epsilon=0.1)
        spec = dataclasses.replace(base, noise_seed=args.seed)
    elif spec is None:
        spec = UncertaintySpec(epsilon=0.1, noise_seed=rc.root_seed)
    grid = TimeGrid.from_config(cfg)
    plan, trace = run_replan(cfg, grid, model, spec)
    plan_path = _out_path(rc, args, "replan_plan.json")
    _write_json(plan_path, {"schema_version": SCHEMA_VERSION,
                            "epsilon": spec.epsilon,
                            "noise_kind": spec.noise_kind,
                            "noise_seed": spec.noise_seed,
                            "plan": plan.to_dict()})
    trace_path = _out_path(rc, args, "replan_trace.csv")
    with open(trace_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["step", "sell_now", "price", "demand_before",
                         "demand_after", "remaining_supply", "forecast_revenue"])
        for row in trace:
            writer.writerow([row.step, row.sell_now, repr(float(row.price)),
                             row.demand_before, row.demand_after,
                             row.remaining_supply,
                             repr(float(row.forecast_revenue))])
    print(f"replanned under epsilon={spec.epsilon:g} {spec.noise_kind} noise: "
          f"revenue {plan.revenue_total:.4f}, sold forward {plan.total_sold} "
          f"-> {plan_path}")
    return 0


def cmd_segment(rc: RunConfig, args):
    cfg = rc.require_market()
    summaries = _read_summaries(rc, args.log)
    seed = args.seed if args.seed is not None else rc.root_seed
    result = segment_and_optimize(summaries, cfg, feature=rc.feature, seed=seed,
                                  **rc.fit_options)
    payload = {
        "schema_version": SCHEMA_VERSION,
        "feature": rc.feature,
        "fallback_single_group": result.fallback,
        "combined_revenue": result.combined_revenue,
        "segments": [{
            "label": seg.label,
            "auction_count": seg.auction_count,
            "supply": seg.supply,
            "demand": seg.demand,
            "mean_competition": seg.mean_competition,
            "max_value": seg.max_value,
            "rtb_only": seg.rtb_only,
            "revenue": seg.plan.revenue_total,
            "curves": seg.curves.to_dict() if seg.curves is not None else None,
            "plan": seg.plan.to_dict(),
        } for seg in result.segments],
    }
    path = _out_path(rc, args, "segment_report.json")
    _write_json(path, payload)
    parts = ", ".join(f"{seg.label}: {seg.auction_count} auctions, "
                      f"revenue {seg.plan.revenue_total:.4f}"
                      for seg in result.segments)
    print(f"segmented into {len(result.segments)} group(s) ({parts}); "
          f"combined revenue {result.combined_revenue:.4f} -> {path}")
    return 0


# -- argument plumbing ------------------------------------------------------


def _build_parser():
    parser = argparse.ArgumentParser(
        prog="pgrtb",
        description="Price guaranteed ad contracts jointly with auction inventory.")
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, help_text):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", required=True, help="run config JSON")
        p.add_argument("--out", default=None, help="output directory override")
        p.add_argument("--seed", type=int, default=None, help="seed override")
        return p

    p = add("gen-data", "write a synthetic auction log with known ground truth")
    p = add("fit", "estimate payment curves and value ceiling from a log")
    p.add_argument("--log", required=True, help="auction log CSV")
    p = add("optimize", "compute the revenue-optimal price schedule")
    p.add_argument("--model", default=None, help="fitted model JSON")
    p = add("simulate", "Monte Carlo a plan against the synthetic market")
    p.add_argument("--plan", required=True, help="plan JSON from optimize")
    p.add_argument("--model", default=None, help="fitted model JSON")
    p.add_argument("--runs", type=int, default=None, help="number of runs")
    p.add_argument("--threads", type=int, default=None, help="worker threads")
    p = add("replan", "roll the horizon forward under demand noise")
    p.add_argument("--model", default=None, help="fitted model JSON")
    p = add("segment", "cluster the bid landscape and optimize per group")
    p.add_argument("--log", required=True, help="auction log CSV")
    return parser


_COMMANDS = {
    "gen-data": cmd_gen_data,
    "fit": cmd_fit,
    "optimize": cmd_optimize,
    "simulate": cmd_simulate,
    "replan": cmd_replan,
    "segment": cmd_segment,
}


def main(argv=None):
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        rc = RunConfig.load(args.config)
        return _COMMANDS[args.command](rc, args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (ValueError, OSError, KeyError, TypeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except Exception:
        traceback.print_exc()
        return 1


if __name__ == "__main__":
    sys.exit(main())
