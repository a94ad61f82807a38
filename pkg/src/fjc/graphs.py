"""Directed follow graphs: construction, matrices, centrality, layers.

Edge (i, j) means "i follows j": j's activity lands in i's feed, so j
influences i and content posted by j spreads to j's followers N-(j).
"""

from __future__ import annotations

import io
from dataclasses import dataclass, field

import numpy as np
from scipy import sparse
from scipy.sparse.csgraph import connected_components

from .errors import ConvergenceError, GraphFormatError


@dataclass(frozen=True, eq=False)
class SocialGraph:
    """Immutable directed graph over nodes 0..node_count-1.

    out_adj[i, j] = 1 iff i follows j.  in_adj is the exact transpose,
    kept in CSR form so follower lookups are O(deg).
    """

    node_count: int
    out_adj: sparse.csr_matrix
    in_adj: sparse.csr_matrix

    @property
    def edge_count(self) -> int:
        return int(self.out_adj.nnz)

    def followees(self, i: int) -> np.ndarray:
        """N+(i): nodes that i follows (the nodes influencing i)."""
        return self.out_adj.indices[self.out_adj.indptr[i]:self.out_adj.indptr[i + 1]]

    def followers(self, i: int) -> np.ndarray:
        """N-(i): nodes following i (the nodes i's posts reach)."""
        return self.in_adj.indices[self.in_adj.indptr[i]:self.in_adj.indptr[i + 1]]

    def out_degrees(self) -> np.ndarray:
        """Followee counts per node."""
        return np.diff(self.out_adj.indptr)

    def in_degrees(self) -> np.ndarray:
        return np.diff(self.in_adj.indptr)

    def edge_arrays(self) -> tuple[np.ndarray, np.ndarray]:
        """All edges as (followers, followees) arrays in row-major order."""
        coo = self.out_adj.tocoo()
        return coo.row, coo.col


def from_edges(node_count: int, edges) -> SocialGraph:
    """Build a graph from an iterable of (i, j) follow pairs.

    Rejects self-loops; duplicate pairs collapse to one edge.
    """
    if node_count <= 0:
        raise GraphFormatError("empty graph")
    pairs = sorted(set((int(i), int(j)) for i, j in edges))
    for i, j in pairs:
        if i == j:
            raise GraphFormatError(f"self-loop on node {i} is not allowed")
        if not (0 <= i < node_count and 0 <= j < node_count):
            raise GraphFormatError(f"edge ({i}, {j}) outside node range 0..{node_count - 1}")
    if pairs:
        rows = np.fromiter((p[0] for p in pairs), dtype=np.int64, count=len(pairs))
        cols = np.fromiter((p[1] for p in pairs), dtype=np.int64, count=len(pairs))
        data = np.ones(len(pairs))
    else:
        rows = np.empty(0, dtype=np.int64)
        cols = np.empty(0, dtype=np.int64)
        data = np.empty(0)
    out_adj = sparse.csr_matrix((data, (rows, cols)), shape=(node_count, node_count))
    out_adj.sort_indices()
    in_adj = out_adj.T.tocsr()
    in_adj.sort_indices()
    return SocialGraph(node_count=node_count, out_adj=out_adj, in_adj=in_adj)


def load_edge_list(source, directed: bool = True) -> tuple[SocialGraph, dict[int, int]]:
    """Read whitespace-separated "i j" lines; '#' lines are comments.

    Input ids are remapped to 0..v-1 (sorted order); the original->new map
    is returned alongside.  With directed=False every line contributes both
    follow directions.
    """
    if hasattr(source, "read"):
        text = source.read()
        if isinstance(text, bytes):
            text = text.decode("utf-8")
        lines = io.StringIO(text)
    else:
        lines = open(source, "r", encoding="utf-8")
    raw_edges = []
    try:
        for lineno, line in enumerate(lines, start=1):
            stripped = line.strip()
            if not stripped or stripped.startswith("#"):
                continue
            parts = stripped.split()
            if len(parts) != 2:
                raise GraphFormatError(f"line {lineno}: expected 'i j', got {stripped!r}")
            try:
                i, j = int(parts[0]), int(parts[1])
            except ValueError:
                raise GraphFormatError(f"line {lineno}: non-integer node id in {stripped!r}") from None
            if i < 0 or j < 0:
                raise GraphFormatError(f"line {lineno}: negative node id in {stripped!r}")
            if i == j:
                raise GraphFormatError(f"line {lineno}: self-loop on node {i}")
            raw_edges.append((i, j))
    finally:
        if not hasattr(source, "read"):
            lines.close()
    if not raw_edges:
        raise GraphFormatError("empty graph")
    ids = sorted({i for e in raw_edges for i in e})
    mapping = {orig: new for new, orig in enumerate(ids)}
    edges = [(mapping[i], mapping[j]) for i, j in raw_edges]
    if not directed:
        edges.extend((j, i) for i, j in list(edges))
    return from_edges(len(ids), edges), mapping


def save_edge_list(g: SocialGraph, path) -> None:
    """Write the graph back in the same "i j" text format."""
    rows, cols = g.edge_arrays()
    with open(path, "w", encoding="utf-8") as fh:
        for i, j in zip(rows.tolist(), cols.tolist()):
            fh.write(f"{i} {j}\n")


def save_node_mapping(mapping: dict[int, int], path) -> None:
    """Write an original->new id remap table as CSV."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("original,new\n")
        for orig in sorted(mapping):
            fh.write(f"{orig},{mapping[orig]}\n")


def social_matrix(g: SocialGraph) -> sparse.csr_matrix:
    """0/1 adjacency weights aligned with the follow edges."""
    return g.out_adj.copy()


def row_normalize(w_hat: sparse.spmatrix) -> sparse.csr_matrix:
    """Influence matrix: each row of the social matrix divided by its sum.

    Every node must have at least one positive out-entry, otherwise it has
    no opinion sources and the averaging dynamics are undefined for it.
    """
    w_hat = sparse.csr_matrix(w_hat, dtype=float)
    row_sums = np.asarray(w_hat.sum(axis=1)).ravel()
    zero_rows = np.flatnonzero(row_sums <= 0)
    if zero_rows.size:
        raise ValueError(
            f"node {int(zero_rows[0])} has no followees (zero row); "
            "row-normalization is undefined for it"
        )
    inv = sparse.diags(1.0 / row_sums)
    w = (inv @ w_hat).tocsr()
    w.sort_indices()
    return w


def influence_matrix(g: SocialGraph) -> sparse.csr_matrix:
    """Row-normalized adjacency of the follow graph."""
    return row_normalize(social_matrix(g))


def pagerank(g: SocialGraph, damping: float = 0.85, tol: float = 1e-10,
             max_iter: int = 1000) -> np.ndarray:
    """Power-iteration PageRank on the influence direction.

    The random surfer at i moves along follow edges to a uniformly chosen
    followee; dangling mass (nodes without followees) is spread uniformly.
    Converged when the L1 change of the iterate drops below tol.
    """
    if not (0.0 < damping < 1.0):
        raise ValueError(f"damping must be in (0,1), got {damping}")
    v = g.node_count
    if v == 0:
        raise ValueError("empty graph")
    out_deg = g.out_degrees().astype(float)
    dangling = out_deg == 0
    safe_deg = np.where(dangling, 1.0, out_deg)
    transition = g.out_adj.multiply(1.0 / safe_deg[:, None]).tocsc()
    p = np.full(v, 1.0 / v)
    teleport = (1.0 - damping) / v
    for _ in range(max_iter):
        dangling_mass = p[dangling].sum()
        p_next = damping * (transition.T @ p + dangling_mass / v) + teleport
        if np.abs(p_next - p).sum() < tol:
            return p_next
        p = p_next
    raise ConvergenceError(
        f"pagerank did not converge within {max_iter} iterations",
        last_iterate=p,
    )


def largest_strongly_connected_component(g: SocialGraph) -> tuple[SocialGraph, dict[int, int]]:
    """Induced subgraph on the largest SCC, ids re-compacted.

    Size ties break toward the component containing the smallest original
    node id, so extraction is deterministic across platforms.
    """
    n_comp, labels = connected_components(g.out_adj, directed=True, connection="strong")
    sizes = np.bincount(labels, minlength=n_comp)
    best = max(range(n_comp), key=lambda c: (sizes[c], -int(np.flatnonzero(labels == c)[0])))
    members = np.flatnonzero(labels == best)
    mapping = {int(old): new for new, old in enumerate(members.tolist())}
    sub = g.out_adj[members][:, members].tocsr()
    sub.sort_indices()
    in_sub = sub.T.tocsr()
    in_sub.sort_indices()
    return SocialGraph(node_count=len(members), out_adj=sub, in_adj=in_sub), mapping


@dataclass(frozen=True)
class LayerDecomposition:
    """BFS layers over reversed follow edges: who a post from root can reach.

    layers[0] == [root]; layers[l] holds the nodes first reached after l
    resharing hops.  Unreachable nodes appear in no layer.
    """

    root: int
    layers: list[np.ndarray]
    layer_of: dict[int, int] = field(repr=False)

    @property
    def eccentricity(self) -> int:
        return len(self.layers) - 1

    def nodes(self) -> np.ndarray:
        return np.concatenate(self.layers) if self.layers else np.empty(0, dtype=np.int64)


def follower_layers(g: SocialGraph, root: int) -> LayerDecomposition:
    """Layer decomposition from root across followers, first exposure wins."""
    if not (0 <= root < g.node_count):
        raise ValueError(f"root {root} outside node range")
    seen = np.zeros(g.node_count, dtype=bool)
    seen[root] = True
    layers = [np.array([root], dtype=np.int64)]
    layer_of = {int(root): 0}
    frontier = [root]
    depth = 0
    while frontier:
        nxt: set[int] = set()
        for node in frontier:
            for f in g.followers(node).tolist():
                if not seen[f]:
                    seen[f] = True
                    nxt.add(f)
        if not nxt:
            break
        depth += 1
        layer = np.array(sorted(nxt), dtype=np.int64)
        layers.append(layer)
        for node in layer.tolist():
            layer_of[node] = depth
        frontier = layer.tolist()
    return LayerDecomposition(root=root, layers=layers, layer_of=layer_of)


def generate_barabasi_albert(n: int, k: int, rng: np.random.Generator) -> SocialGraph:
    """Undirected preferential-attachment graph as symmetric directed edges.

    Seeded with a complete graph on k nodes, then each of the remaining
    n-k nodes attaches to k distinct existing nodes with probability
    proportional to degree.  Deterministic given the generator state.
    """
    if k < 1 or n <= k:
        raise ValueError(f"need n > k >= 1, got n={n}, k={k}")
    edges: list[tuple[int, int]] = []
    repeated: list[int] = []
    for i in range(k):
        for j in range(i + 1, k):
            edges.append((i, j))
            repeated.extend((i, j))
    for source in range(k, n):
        targets: set[int] = set()
        while len(targets) < k:
            targets.add(repeated[int(rng.integers(len(repeated)))])
        for t in sorted(targets):
            edges.append((source, t))
            repeated.extend((source, t))
    directed = [(i, j) for i, j in edges] + [(j, i) for i, j in edges]
    return from_edges(n, directed)


def degree_for_gossip(g: SocialGraph, i: int) -> int:
    """Followee count of i, the denominator of the pairwise update weights."""
    d = int(g.out_degrees()[i])
    if d == 0:
        raise ValueError(f"node {i} has no followees; its update weight is undefined")
    return d


def gossip_degrees(g: SocialGraph) -> np.ndarray:
    """Followee counts for all nodes, rejecting nodes with none."""
    degrees = g.out_degrees()
    zero = np.flatnonzero(degrees == 0)
    if zero.size:
        raise ValueError(f"node {int(zero[0])} has no followees; its update weight is undefined")
    return degrees.astype(np.int64)
