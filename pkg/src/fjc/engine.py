"""Cascade-driven opinion updates: synthetic runs and trace replay.

Opinions move only when a cascade exposes a node to reshared content.  An
exposed node averages the pairwise pulls of its resharing followees; the
run engine processes posts one at a time, layer by layer, while the replay
engine applies one singleton exposure per recorded reshare event.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass

import numpy as np
from scipy import sparse

from .cascades import CascadeRealization, ReshareModel, sample_cascade
from .dynamics import GossipParameters, gossip_parameters, validate_susceptibility
from .graphs import LayerDecomposition, SocialGraph, follower_layers, gossip_degrees
from .traces import ReshareTrace

logger = logging.getLogger(__name__)

EQ_MODES = ("convex", "literal")


@dataclass(frozen=True)
class SeedSchedule:
    """Ordered post sources; repeats allowed."""

    roots: tuple[int, ...]

    def __post_init__(self):
        if any(r < 0 for r in self.roots):
            raise ValueError("seed ids must be non-negative")

    def __len__(self) -> int:
        return len(self.roots)


@dataclass
class CascadeRecord:
    index: int
    root: int
    size: int
    depth: int
    opinions_before: np.ndarray | None = None
    opinions_after: np.ndarray | None = None


@dataclass
class FjcRunRecord:
    """Everything a single run produced: per-cascade summaries and the
    initial/final opinion vectors (shift = final - initial)."""

    initial: np.ndarray
    final: np.ndarray
    cascades: list[CascadeRecord]
    realizations: list[CascadeRealization] | None = None
    updates: list[dict] | None = None

    @property
    def shift(self) -> np.ndarray:
        return self.final - self.initial


@dataclass(frozen=True, eq=False)
class FjcParameters:
    """Precomputed update weights shared by all runs on one instance."""

    h: np.ndarray
    gamma_rows: list[dict[int, float]]
    gossip: GossipParameters


def prepare_fjc(g: SocialGraph, w: sparse.spmatrix, lambdas: np.ndarray
                ) -> FjcParameters:
    """Build the per-node pairwise weights once for reuse across runs."""
    lam = validate_susceptibility(lambdas)
    params = gossip_parameters(w, lam, gossip_degrees(g))
    gamma = params.gamma
    rows: list[dict[int, float]] = []
    for i in range(g.node_count):
        lo, hi = gamma.indptr[i], gamma.indptr[i + 1]
        row = {
            int(j): float(val)
            for j, val in zip(gamma.indices[lo:hi], gamma.data[lo:hi])
            if j != i
        }
        rows.append(row)
    return FjcParameters(h=params.h, gamma_rows=rows, gossip=params)


def fjc_update(i: int, x: np.ndarray, u: np.ndarray, preds,
               h_i: float, gamma_row: dict[int, float],
               mode: str = "convex") -> float:
    """New opinion of node i after simultaneous exposure to its predecessors.

    convex: the anchoring term rides along in every pairwise pull, so the
    result is a convex combination of x_i, the predecessors' opinions, and
    u_i (weights sum to one and the opinion domain is preserved).
    literal: the anchoring term enters once and is averaged down with the
    rest; with several predecessors the coefficients sum below one and
    values shrink toward zero.  Both agree when there is one predecessor.
    """
    preds = list(preds)
    if not preds:
        raise ValueError(f"node {i} has no predecessors to average over")
    if mode not in EQ_MODES:
        raise ValueError(f"unknown update mode {mode!r}")
    xi = float(x[i])
    h = float(h_i)
    pull = 0.0
    for j in preds:
        gamma = gamma_row[j]
        pull += h * ((1.0 - gamma) * xi + gamma * float(x[j]))
    anchor = (1.0 - h) * float(u[i])
    if mode == "convex":
        value = pull / len(preds) + anchor
    else:
        value = (pull + anchor) / len(preds)
    # Guard against float drift past the domain edge; the convex weights
    # make the exact value lie inside [-1, 1] already.
    return min(1.0, max(-1.0, value))


def run_fjc(g: SocialGraph, w: sparse.spmatrix, lambdas: np.ndarray,
            u: np.ndarray, schedule: SeedSchedule, model: ReshareModel,
            rng: np.random.Generator, mode: str = "convex",
            params: FjcParameters | None = None,
            layer_cache: dict[int, LayerDecomposition] | None = None,
            keep_realizations: bool = True,
            keep_cascade_opinions: bool = True,
            log_updates: bool = False) -> FjcRunRecord:
    """Spread the scheduled posts one at a time and update exposed opinions.

    Each post samples a cascade; the exposed layers are processed in order
    and every node in a layer reads the opinions as they stood when the
    previous layer finished, so within-layer order cannot matter.  Nodes
    outside the cascade keep their opinions, and each post starts from the
    opinions the previous post left behind.
    """
    if mode not in EQ_MODES:
        raise ValueError(f"unknown update mode {mode!r}")
    u = np.asarray(u, dtype=float)
    if params is None:
        params = prepare_fjc(g, w, lambdas)
    if layer_cache is None:
        layer_cache = {}
    x = u.copy()
    records: list[CascadeRecord] = []
    realizations: list[CascadeRealization] | None = [] if keep_realizations else None
    updates: list[dict] | None = [] if log_updates else None
    h = params.h
    gamma_rows = params.gamma_rows
    for index, root in enumerate(schedule.roots):
        if root not in layer_cache:
            layer_cache[root] = follower_layers(g, root)
        decomp = layer_cache[root]
        realization = sample_cascade(g, root, model, rng, decomposition=decomp)
        if realization.size == 1:
            logger.info("post %d: seed %d has no followers, nothing to update",
                        index, root)
        before = x.copy() if keep_cascade_opinions else None
        for depth in range(1, realization.depth + 1):
            layer = realization.layers[depth]
            staged = []
            for i in layer.tolist():
                new_val = fjc_update(i, x, u, realization.predecessors[i],
                                     h[i], gamma_rows[i], mode=mode)
                staged.append((i, new_val))
            for i, new_val in staged:
                if updates is not None:
                    updates.append({
                        "cascade": index, "layer": depth, "node": i,
                        "old": float(x[i]), "new": float(new_val),
                    })
                x[i] = new_val
        records.append(CascadeRecord(
            index=index, root=root, size=realization.size,
            depth=realization.depth,
            opinions_before=before,
            opinions_after=x.copy() if keep_cascade_opinions else None,
        ))
        if realizations is not None:
            realizations.append(realization)
    return FjcRunRecord(initial=u.copy(), final=x, cascades=records,
                        realizations=realizations, updates=updates)


def replay_trace(g: SocialGraph, w: sparse.spmatrix, lambdas: np.ndarray,
                 u: np.ndarray, trace: ReshareTrace,
                 params: FjcParameters | None = None,
                 log_updates: bool = False) -> FjcRunRecord:
    """Drive opinions with recorded reshare events instead of sampled trees.

    Every event is one expression of opinion: each follower of the sharing
    node updates immediately with that node as its only predecessor (the
    two update modes coincide for singleton exposure).  Nodes may be
    updated repeatedly across events; no tree or one-post-at-a-time
    structure is assumed.
    """
    u = np.asarray(u, dtype=float)
    if params is None:
        params = prepare_fjc(g, w, lambdas)
    x = u.copy()
    updates: list[dict] | None = [] if log_updates else None
    h = params.h
    gamma_rows = params.gamma_rows
    post_index: dict[str, int] = {}
    post_sharers: dict[str, set[int]] = {}
    for k, (t, p, n) in enumerate(trace.events):
        if not (0 <= n < g.node_count):
            raise ValueError(f"event {k}: unknown node id {n}")
        if p not in post_index:
            post_index[p] = len(post_index)
            post_sharers[p] = set()
        post_sharers[p].add(n)
        for f in g.followers(n).tolist():
            new_val = fjc_update(f, x, u, (n,), h[f], gamma_rows[f],
                                 mode="convex")
            if updates is not None:
                updates.append({
                    "cascade": post_index[p], "layer": -1, "node": f,
                    "old": float(x[f]), "new": float(new_val),
                })
            x[f] = new_val
    records = [
        CascadeRecord(index=post_index[p], root=src, size=len(post_sharers[p]),
                      depth=-1)
        for p, src in trace.sources().items()
    ]
    return FjcRunRecord(initial=u.copy(), final=x, cascades=records,
                        realizations=None, updates=updates)


def save_node_shifts(record: FjcRunRecord, path) -> None:
    """Per-node outcome table: node,u,x_final,shift."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("node,u,x_final,shift\n")
        for i in range(len(record.initial)):
            fh.write(
                f"{i},{record.initial[i]:.17g},{record.final[i]:.17g},"
                f"{record.shift[i]:.17g}\n"
            )


def save_cascade_summaries(record: FjcRunRecord, path) -> None:
    """Per-cascade table: index,root,size,depth."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("index,root,size,depth\n")
        for c in record.cascades:
            fh.write(f"{c.index},{c.root},{c.size},{c.depth}\n")


def save_update_log(record: FjcRunRecord, path) -> None:
    """JSON-lines audit log, one line per opinion update."""
    if record.updates is None:
        raise ValueError("run was not executed with log_updates=True")
    with open(path, "w", encoding="utf-8") as fh:
        for entry in record.updates:
            fh.write(json.dumps(entry, sort_keys=True) + "\n")
