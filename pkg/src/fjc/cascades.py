"""Stochastic reshare cascades over follower layers.

A post seeded at r always reaches r's direct followers; every exposed node
draws a single reshare decision, and resharers push the post one layer
further.  Exposure is constrained to the root's layer decomposition, so a
node joins the cascade at its first-exposure distance or not at all.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .graphs import LayerDecomposition, SocialGraph, follower_layers


@dataclass(frozen=True)
class ReshareModel:
    """Reshare probabilities: a single global value or one per node.

    Nodes without a per-node estimate fall back to `fallback`.
    """

    mode: str  # "global" | "per_node"
    theta: float = 0.0
    thetas: np.ndarray | None = None
    fallback: float = 0.0
    available: np.ndarray | None = None
    seen: np.ndarray | None = None
    reshared: np.ndarray | None = None

    def __post_init__(self):
        if self.mode not in ("global", "per_node"):
            raise ValueError(f"unknown reshare mode {self.mode!r}")
        if not (0.0 <= self.fallback <= 1.0):
            raise ValueError("fallback probability must lie in [0, 1]")
        if self.mode == "global":
            if not (0.0 <= self.theta <= 1.0):
                raise ValueError(f"theta must lie in [0, 1], got {self.theta}")
        else:
            if self.thetas is None:
                raise ValueError("per_node mode needs a thetas vector")
            t = np.asarray(self.thetas, dtype=float)
            if np.any(t < 0) or np.any(t > 1):
                raise ValueError("all per-node probabilities must lie in [0, 1]")

    @classmethod
    def global_theta(cls, theta: float) -> "ReshareModel":
        return cls(mode="global", theta=float(theta))

    def theta_array(self, node_count: int) -> np.ndarray:
        """Effective reshare probability per node."""
        if self.mode == "global":
            return np.full(node_count, self.theta)
        t = np.asarray(self.thetas, dtype=float)
        if len(t) != node_count:
            raise ValueError(f"model covers {len(t)} nodes, graph has {node_count}")
        if self.available is not None:
            t = np.where(self.available, t, self.fallback)
        return t


@dataclass(frozen=True, eq=False)
class CascadeRealization:
    """One sampled spread of a single post.

    layers[0] == [root]; reshared[i] is the node's one-shot decision;
    predecessors[i] lists the resharing followees that exposed i.
    """

    root: int
    layers: list[np.ndarray]
    reshared: dict[int, bool]
    predecessors: dict[int, tuple[int, ...]] = field(repr=False)

    @property
    def depth(self) -> int:
        return len(self.layers) - 1

    @property
    def size(self) -> int:
        return sum(len(layer) for layer in self.layers)

    def nodes(self) -> np.ndarray:
        return np.concatenate(self.layers)


def sample_cascade(g: SocialGraph, root: int, model: ReshareModel,
                   rng: np.random.Generator,
                   decomposition: LayerDecomposition | None = None
                   ) -> CascadeRealization:
    """Draw one cascade realization for a post seeded at root.

    Direct followers are always exposed; deeper nodes are exposed exactly
    when some followee in the previous layer reshared, and only at their
    first-exposure layer.  `decomposition` may be passed in when many
    samples share a root.
    """
    if decomposition is None:
        decomposition = follower_layers(g, root)
    elif decomposition.root != root:
        raise ValueError("decomposition root does not match cascade root")
    theta = model.theta_array(g.node_count)
    layers = [np.array([root], dtype=np.int64)]
    reshared: dict[int, bool] = {root: True}
    predecessors: dict[int, tuple[int, ...]] = {}
    sharers = [root]
    for depth in range(1, decomposition.eccentricity + 1):
        eligible = decomposition.layers[depth]
        sharer_set = set(sharers)
        exposed: list[int] = []
        for i in eligible.tolist():
            preds = [j for j in g.followees(i).tolist() if j in sharer_set]
            if preds:
                exposed.append(i)
                predecessors[i] = tuple(preds)
        if not exposed:
            break
        draws = rng.random(len(exposed))
        sharers = []
        for pos, i in enumerate(exposed):
            s = bool(draws[pos] < theta[i])
            reshared[i] = s
            if s:
                sharers.append(i)
        layers.append(np.array(exposed, dtype=np.int64))
        if not sharers:
            break
    return CascadeRealization(root=root, layers=layers, reshared=reshared,
                              predecessors=predecessors)


def predecessors(cascade: CascadeRealization, i: int) -> set[int]:
    """Resharing followees in the previous layer that exposed node i."""
    if i not in cascade.predecessors:
        raise KeyError(f"node {i} is not in an exposed layer of this cascade")
    return set(cascade.predecessors[i])


def expected_cascade_size_bruteforce(g: SocialGraph, root: int,
                                     theta: float, max_branch_nodes: int = 20
                                     ) -> float:
    """Exact expected cascade size by enumerating reshare outcomes.

    Branches on every node whose decision can matter (layers 1..depth-1 of
    the decomposition); 2^m combinations, so m is capped.  Kept free of the
    sampling code on purpose: this is the check the sampler is held to.
    """
    if not (0.0 <= theta <= 1.0):
        raise ValueError("theta must lie in [0, 1]")
    decomp = follower_layers(g, root)
    ecc = decomp.eccentricity
    branch_nodes = {
        int(i)
        for depth in range(1, ecc)
        for i in decomp.layers[depth]
    }
    if len(branch_nodes) > max_branch_nodes:
        raise ValueError(
            f"{len(branch_nodes)} branching nodes exceed the enumeration "
            f"cap of {max_branch_nodes}"
        )
    layer_index = decomp.layer_of

    def walk(depth: int, exposed_prev: list[int], assign: dict[int, bool],
             prob: float, count_so_far: int) -> float:
        share_now = [i for i in exposed_prev if assign.get(i, True)]
        if depth > ecc or not share_now:
            return prob * count_so_far
        nxt = sorted({
            int(f)
            for j in share_now
            for f in g.followers(j).tolist()
            if layer_index.get(int(f)) == depth
        })
        if not nxt:
            return prob * count_so_far
        undecided = [i for i in nxt if i in branch_nodes]
        total = 0.0
        for mask in range(1 << len(undecided)):
            sub_prob = prob
            sub_assign = dict(assign)
            for pos, node in enumerate(undecided):
                share = bool(mask >> pos & 1)
                sub_assign[node] = share
                sub_prob *= theta if share else 1.0 - theta
            if sub_prob == 0.0:
                continue
            total += walk(depth + 1, nxt, sub_assign, sub_prob,
                          count_so_far + len(nxt))
        return total

    return walk(1, [root], {root: True}, 1.0, 1)
