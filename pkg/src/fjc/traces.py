"""Reshare traces: ingestion, replay ordering, and per-node reshare rates.

A trace is a time-ordered list of (timestamp, post, node) reshare events.
Per-node reshare probabilities are the fraction of posts a node passed on
out of those it saw arrive from its followees.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from datetime import datetime

import numpy as np

from .cascades import ReshareModel
from .errors import GraphFormatError
from .graphs import SocialGraph


@dataclass(frozen=True)
class ReshareTrace:
    """Normalized event sequence: sorted by time, one event per (node, post).

    Ties keep input order; repeat shares by the same node of the same post
    collapse to the earliest, since a node has one reshare opportunity.
    """

    events: tuple[tuple[float, str, int], ...]

    @classmethod
    def from_events(cls, events, node_count: int | None = None) -> "ReshareTrace":
        ordered = sorted(
            ((float(t), str(p), int(n)) for t, p, n in events),
            key=lambda e: e[0],
        )
        seen_pairs: set[tuple[str, int]] = set()
        kept = []
        for t, p, n in ordered:
            if node_count is not None and not (0 <= n < node_count):
                raise GraphFormatError(
                    f"trace event ({t}, {p!r}, {n}) references an unknown node"
                )
            if (p, n) in seen_pairs:
                continue
            seen_pairs.add((p, n))
            kept.append((t, p, n))
        return cls(events=tuple(kept))

    def __len__(self) -> int:
        return len(self.events)

    def post_ids(self) -> list[str]:
        """Distinct posts in first-event order."""
        out, seen = [], set()
        for _, p, _ in self.events:
            if p not in seen:
                seen.add(p)
                out.append(p)
        return out

    def sources(self) -> dict[str, int]:
        """Earliest event of each post defines its source node."""
        src: dict[str, int] = {}
        for _, p, n in self.events:
            if p not in src:
                src[p] = n
        return src


def _parse_timestamp(raw: str, lineno: int) -> float:
    raw = raw.strip()
    try:
        return float(raw)
    except ValueError:
        pass
    try:
        return datetime.fromisoformat(raw).timestamp() * 1000.0
    except ValueError:
        raise GraphFormatError(
            f"line {lineno}: timestamp {raw!r} is neither numeric nor ISO-8601"
        ) from None


def load_trace_csv(path, node_count: int | None = None) -> ReshareTrace:
    """Read a "timestamp,post_id,node_id" CSV; timestamps may be integer
    milliseconds or ISO-8601 strings (auto-detected)."""
    events = []
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        for lineno, row in enumerate(reader, start=1):
            if not row or row[0].startswith("#"):
                continue
            if lineno == 1 and row[0].strip().lower() == "timestamp":
                continue
            if len(row) != 3:
                raise GraphFormatError(f"line {lineno}: expected 3 columns, got {len(row)}")
            t = _parse_timestamp(row[0], lineno)
            try:
                node = int(row[2])
            except ValueError:
                raise GraphFormatError(f"line {lineno}: bad node id {row[2]!r}") from None
            events.append((t, row[1].strip(), node))
    return ReshareTrace.from_events(events, node_count=node_count)


def save_trace_csv(trace: ReshareTrace, path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write("timestamp,post_id,node_id\n")
        for t, p, n in trace.events:
            fh.write(f"{t:.17g},{p},{n}\n")


def estimate_theta(trace: ReshareTrace, g: SocialGraph,
                   fallback: float = 0.0) -> ReshareModel:
    """Per-node reshare probability: posts passed on / posts seen.

    A node saw a post when some followee shared it strictly before any of
    the node's own events for it; the post counts as reshared when the node
    then shared it itself.  Post sources are skipped for their own posts.
    Nodes that saw nothing get the fallback value and are flagged
    unavailable.
    """
    v = g.node_count
    seen = np.zeros(v, dtype=np.int64)
    reshared = np.zeros(v, dtype=np.int64)

    by_post: dict[str, list[tuple[float, int]]] = {}
    for t, p, n in trace.events:
        if n >= v or n < 0:
            raise GraphFormatError(f"trace references node {n} outside the graph")
        by_post.setdefault(p, []).append((t, n))

    followee_sets = [set(g.followees(i).tolist()) for i in range(v)]

    for p, ev in by_post.items():
        source = ev[0][1]
        emit_time = {n: t for t, n in ev}
        participants = set(emit_time)
        # Non-emitting nodes can still have seen the post from a followee.
        watchers = {
            int(f)
            for _, n in ev
            for f in g.followers(n).tolist()
            if int(f) not in participants
        }
        for n, t_own in emit_time.items():
            if n == source:
                continue
            exposed = any(
                emit_time.get(j, np.inf) < t_own for j in followee_sets[n]
            )
            if exposed:
                seen[n] += 1
                reshared[n] += 1
        for n in watchers:
            if n == source:
                continue
            seen[n] += 1

    available = seen > 0
    thetas = np.where(available, reshared / np.maximum(seen, 1), fallback)
    return ReshareModel(mode="per_node", thetas=thetas, fallback=fallback,
                        available=available, seen=seen, reshared=reshared)


def theta_summary(model: ReshareModel) -> dict[str, float]:
    """Distribution summary of the available estimates, NA counted apart."""
    if model.mode != "per_node":
        raise ValueError("summary needs a per-node model")
    avail = model.available if model.available is not None else np.ones(
        len(model.thetas), dtype=bool)
    vals = np.asarray(model.thetas, dtype=float)[avail]
    if vals.size == 0:
        stats = {k: float("nan") for k in ("min", "q1", "median", "q3", "max", "mean")}
    else:
        q1, med, q3 = np.percentile(vals, [25, 50, 75])
        stats = {
            "min": float(vals.min()),
            "q1": float(q1),
            "median": float(med),
            "q3": float(q3),
            "max": float(vals.max()),
            "mean": float(vals.mean()),
        }
    stats["na_count"] = int((~avail).sum())
    return stats


def save_theta_report(model: ReshareModel, path) -> None:
    """Per-node estimate table: node,seen,reshared,theta,available."""
    if model.mode != "per_node":
        raise ValueError("report needs a per-node model")
    thetas = np.asarray(model.thetas, dtype=float)
    v = len(thetas)
    seen = model.seen if model.seen is not None else np.zeros(v, dtype=np.int64)
    reshared = model.reshared if model.reshared is not None else np.zeros(v, dtype=np.int64)
    avail = model.available if model.available is not None else np.ones(v, dtype=bool)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("node,seen,reshared,theta,available\n")
        for i in range(v):
            fh.write(
                f"{i},{int(seen[i])},{int(reshared[i])},"
                f"{float(thetas[i]):.17g},{int(bool(avail[i]))}\n"
            )
