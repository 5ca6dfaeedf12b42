"""Auction-log records and CSV round-trips.

A log is one row per bid: ``slot_id, auction_id, timestamp, bid_cpm``.
Grouping rows by ``auction_id`` yields per-auction summaries with the
observed competition (number of bids), the winning bid, and the
second-price payment.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from datetime import datetime

import numpy as np

__all__ = [
    "LOG_HEADER",
    "AuctionLogRecord",
    "AuctionSummary",
    "read_log_csv",
    "write_log_csv",
    "summarize_auctions",
]

LOG_HEADER = ("slot_id", "auction_id", "timestamp", "bid_cpm")


@dataclass(frozen=True)
class AuctionLogRecord:
    """One bid row. ``timestamp`` may be None when the source has no clock."""

    slot_id: str
    auction_id: str
    timestamp: datetime | None
    bid_cpm: float


@dataclass
class AuctionSummary:
    """One auction: its bids (descending) and derived second-price facts."""

    auction_id: str
    slot_id: str
    timestamp: datetime | None
    bids: np.ndarray
    xi_observed: int
    winning_bid: float
    payment: float


def write_log_csv(records, path):
    """Write bid rows to ``path``; a None timestamp becomes an empty field."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(LOG_HEADER)
        for r in records:
            ts = "" if r.timestamp is None else r.timestamp.isoformat()
            writer.writerow([r.slot_id, r.auction_id, ts, repr(float(r.bid_cpm))])


def _parse_timestamp(text):
    if not text:
        return None
    # datetime.fromisoformat on 3.10 rejects a trailing Z
    if text.endswith("Z"):
        text = text[:-1] + "+00:00"
    return datetime.fromisoformat(text)


def read_log_csv(path):
    """Read bid rows from ``path``; validates the header and every field."""
    records = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or tuple(h.strip() for h in header) != LOG_HEADER:
            raise ValueError(
                f"{path}: expected header {','.join(LOG_HEADER)}, got {header}")
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(LOG_HEADER):
                raise ValueError(f"{path}:{lineno}: expected {len(LOG_HEADER)} fields")
            slot_id, auction_id, ts_text, bid_text = (field.strip() for field in row)
            if not slot_id or not auction_id:
                raise ValueError(f"{path}:{lineno}: empty slot or auction id")
            try:
                ts = _parse_timestamp(ts_text)
            except ValueError as exc:
                raise ValueError(f"{path}:{lineno}: bad timestamp {ts_text!r}") from exc
            try:
                bid = float(bid_text)
            except ValueError as exc:
                raise ValueError(f"{path}:{lineno}: bad bid {bid_text!r}") from exc
            if not np.isfinite(bid) or bid < 0:
                raise ValueError(f"{path}:{lineno}: bid must be finite and non-negative")
            records.append(AuctionLogRecord(slot_id, auction_id, ts, bid))
    return records


def summarize_auctions(records, reserve=0.0):
    """Group bid rows into per-auction summaries, in first-seen order.

    An auction's timestamp is the earliest of its rows (None if none carry
    one). Single-bid auctions pay the reserve.
    """
    grouped = {}
    for r in records:
        grouped.setdefault(r.auction_id, []).append(r)
    summaries = []
    for auction_id, rows in grouped.items():
        bids = np.sort(np.array([r.bid_cpm for r in rows], dtype=float))[::-1]
        stamps = [r.timestamp for r in rows if r.timestamp is not None]
        summaries.append(AuctionSummary(
            auction_id=auction_id,
            slot_id=rows[0].slot_id,
            timestamp=min(stamps) if stamps else None,
            bids=bids,
            xi_observed=len(bids),
            winning_bid=float(bids[0]),
            payment=float(bids[1]) if len(bids) >= 2 else float(reserve),
        ))
    return summaries
