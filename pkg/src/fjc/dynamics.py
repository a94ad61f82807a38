"""Friedkin-Johnsen averaging dynamics in three forms.

Synchronous iteration, the closed-form fixed point, and the randomized
pairwise (gossip) version whose time averages converge to the same fixed
point.  Also builds the dense map taking initial opinions to final ones.
"""

from __future__ import annotations

import logging
import struct
from dataclasses import dataclass

import numpy as np
from scipy import sparse
from scipy.sparse.linalg import splu, spsolve, bicgstab

from .errors import ConvergenceError
from .graphs import SocialGraph, gossip_degrees

logger = logging.getLogger(__name__)

DIRECT_SOLVE_MAX_NODES = 20_000


def validate_susceptibility(lambdas: np.ndarray) -> np.ndarray:
    """Check susceptibilities lie in [0,1] with at least one node anchored."""
    lam = np.asarray(lambdas, dtype=float)
    if lam.ndim != 1:
        raise ValueError("susceptibility must be a 1-d vector")
    if np.any(lam < 0) or np.any(lam > 1):
        raise ValueError("susceptibilities must lie in [0, 1]")
    if np.all(lam == 1.0):
        raise ValueError(
            "all nodes fully susceptible: the dynamics degenerate to pure "
            "averaging and the anchored fixed point does not exist"
        )
    return lam


def fj_step(x: np.ndarray, w: sparse.spmatrix, lambdas: np.ndarray,
            u: np.ndarray) -> np.ndarray:
    """One synchronous update: blend neighbour average with the prejudice."""
    x = np.asarray(x, dtype=float)
    u = np.asarray(u, dtype=float)
    lam = np.asarray(lambdas, dtype=float)
    if not (x.shape == u.shape == lam.shape == (w.shape[0],)):
        raise ValueError(
            f"shape mismatch: x{x.shape}, u{u.shape}, lambda{lam.shape}, W{w.shape}"
        )
    return lam * (w @ x) + (1.0 - lam) * u


def _anchored_system(w: sparse.spmatrix, lambdas: np.ndarray):
    lam = np.asarray(lambdas, dtype=float)
    v = w.shape[0]
    return (sparse.identity(v, format="csr") - sparse.diags(lam) @ w).tocsr()


def fj_fixed_point(w: sparse.spmatrix, lambdas: np.ndarray, u: np.ndarray,
                   residual_tol: float = 1e-10) -> np.ndarray:
    """Stable opinion vector of the anchored averaging dynamics.

    Solves the sparse linear system directly up to DIRECT_SOLVE_MAX_NODES
    nodes, iteratively above that.  Requires at least one anchored node on
    a strongly connected influence structure.
    """
    lam = validate_susceptibility(lambdas)
    u = np.asarray(u, dtype=float)
    a = _anchored_system(w, lam)
    rhs = (1.0 - lam) * u
    v = w.shape[0]
    if v <= DIRECT_SOLVE_MAX_NODES:
        z = spsolve(a, rhs)
    else:
        z, info = bicgstab(a, rhs, rtol=1e-12, maxiter=100_000)
        if info != 0:
            raise ConvergenceError(
                f"iterative solve failed (info={info})", last_iterate=z
            )
    residual = np.max(np.abs(a @ z - rhs)) if v else 0.0
    if not np.isfinite(z).all() or residual > residual_tol:
        raise ConvergenceError(
            "fixed-point solve left residual "
            f"{residual:.3e} > {residual_tol:.0e}; the influence structure "
            "is likely not strongly connected or is fully susceptible",
            last_iterate=z,
            residual=residual,
        )
    return z


def fj_iterate_until(w: sparse.spmatrix, lambdas: np.ndarray, u: np.ndarray,
                     tol: float = 1e-10, max_iter: int = 100_000) -> np.ndarray:
    """Iterate the synchronous update from x(0)=u to a sup-norm fixed point."""
    lam = validate_susceptibility(lambdas)
    u = np.asarray(u, dtype=float)
    x = u.copy()
    for _ in range(max_iter):
        x_next = fj_step(x, w, lam, u)
        if np.max(np.abs(x_next - x)) < tol:
            return x_next
        x = x_next
    residual = float(np.max(np.abs(fj_step(x, w, lam, u) - x)))
    raise ConvergenceError(
        f"no fixed point within {max_iter} iterations (last step {residual:.3e})",
        last_iterate=x,
        residual=residual,
    )


@dataclass(frozen=True, eq=False)
class GossipParameters:
    """Per-node mixing weight h and pairwise coefficients for random updates.

    gamma keeps the sparsity of the influence matrix plus an explicit
    diagonal; only the off-diagonal entries drive updates, the diagonal is
    retained for auditability.
    """

    h: np.ndarray
    gamma: sparse.csr_matrix


def gossip_parameters(w: sparse.spmatrix, lambdas: np.ndarray,
                      degrees: np.ndarray) -> GossipParameters:
    """Derive the pairwise-update weights from susceptibility and influence.

    h_i = 1 - (1 - lambda_i) / d_i;  off-diagonal gamma_ij = lambda_i w_ij / h_i.
    A node with h_i = 0 (fully anchored, single followee) never moves; its
    gamma row is zeroed with a logged warning.
    """
    lam = np.asarray(lambdas, dtype=float)
    d = np.asarray(degrees, dtype=float)
    if np.any(d < 1):
        raise ValueError("every node needs at least one followee (d_i >= 1)")
    h = 1.0 - (1.0 - lam) / d
    w = sparse.csr_matrix(w, dtype=float)
    frozen = h == 0.0
    if np.any(frozen):
        logger.warning(
            "%d node(s) have h_i = 0 (fully anchored, single followee); "
            "their pairwise coefficients are zeroed and they never move",
            int(frozen.sum()),
        )
    safe_h = np.where(frozen, 1.0, h)
    off_diag = (sparse.diags(np.where(frozen, 0.0, lam / safe_h)) @ w).tocsr()
    w_diag = w.diagonal()
    diag = (d * (1.0 - h) + h - (1.0 - lam * w_diag)) / safe_h
    diag = np.where(frozen, 0.0, diag)
    gamma = (off_diag + sparse.diags(diag)).tocsr()
    gamma.sort_indices()
    return GossipParameters(h=h, gamma=gamma)


def fj_async_run(g: SocialGraph, w: sparse.spmatrix, lambdas: np.ndarray,
                 u: np.ndarray, steps: int, rng: np.random.Generator
                 ) -> tuple[np.ndarray, np.ndarray]:
    """Randomized pairwise dynamics: one follower update per step.

    Each step draws a follow edge (i, j) uniformly and moves i (the
    follower) toward j's opinion with the pairwise weights.  Returns the
    final state and the running time average, whose sup-distance to the
    synchronous fixed point shrinks as steps grow.
    """
    if steps < 0:
        raise ValueError("steps must be >= 0")
    lam = validate_susceptibility(lambdas)
    u = np.asarray(u, dtype=float)
    params = gossip_parameters(w, lam, gossip_degrees(g))
    if steps == 0:
        return u.copy(), u.copy()
    src, dst = g.edge_arrays()
    # Per-edge constants, pulled into flat lists: the sequential inner loop
    # dominates runtime and plain-float arithmetic keeps it cheap.
    gamma_edge = np.asarray(params.gamma[src, dst]).ravel()
    h_edge = params.h[src]
    coef_self = (h_edge * (1.0 - gamma_edge)).tolist()
    coef_other = (h_edge * gamma_edge).tolist()
    anchor = ((1.0 - h_edge) * u[src]).tolist()
    src_l = src.tolist()
    dst_l = dst.tolist()
    draws = rng.integers(0, len(src_l), size=steps).tolist()
    x = u.astype(float).tolist()
    acc = [0.0] * len(x)
    last = [0] * len(x)
    for t, e in enumerate(draws, start=1):
        i = src_l[e]
        acc[i] += x[i] * (t - last[i])
        last[i] = t
        x[i] = coef_self[e] * x[i] + coef_other[e] * x[dst_l[e]] + anchor[e]
    total = steps + 1
    for i in range(len(x)):
        acc[i] += x[i] * (total - last[i])
    return np.asarray(x), np.asarray(acc) / total


def influence_map(w: sparse.spmatrix, lambdas: np.ndarray,
                  max_nodes: int = 4096) -> np.ndarray:
    """Dense matrix taking prejudices to final opinions, one solve per column.

    The result is v x v and dense; beyond max_nodes the memory cost is
    prohibitive and the call is rejected with sizing guidance.
    """
    lam = validate_susceptibility(lambdas)
    v = w.shape[0]
    if v > max_nodes:
        raise MemoryError(
            f"influence map is dense {v}x{v} "
            f"({v * v * 8 / 1e9:.1f} GB); raise max_nodes explicitly or "
            "work on a subgraph"
        )
    a = _anchored_system(w, lam).tocsc()
    lu = splu(a)
    h_map = lu.solve(np.eye(v))
    h_map *= (1.0 - lam)[None, :]
    return h_map


def save_opinions(x: np.ndarray, path, header_comment: str | None = None) -> None:
    """Write an opinion vector as "node,opinion" CSV."""
    with open(path, "w", encoding="utf-8") as fh:
        if header_comment:
            fh.write(f"# {header_comment}\n")
        fh.write("node,opinion\n")
        for i, val in enumerate(np.asarray(x, dtype=float).tolist()):
            fh.write(f"{i},{val:.17g}\n")


def load_opinions(path) -> np.ndarray:
    """Read a "node,opinion" CSV back into a dense vector."""
    entries = {}
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line or line.startswith("#") or line.startswith("node"):
                continue
            node_s, val_s = line.split(",")
            entries[int(node_s)] = float(val_s)
    if not entries:
        raise ValueError(f"no opinions found in {path}")
    x = np.zeros(max(entries) + 1)
    for node, val in entries.items():
        x[node] = val
    return x


def save_influence_map(h_map: np.ndarray, path) -> None:
    """Dump the dense map: u64-LE node count, then row-major f64-LE entries."""
    h_map = np.ascontiguousarray(h_map, dtype="<f8")
    v = h_map.shape[0]
    if h_map.shape != (v, v):
        raise ValueError("influence map must be square")
    with open(path, "wb") as fh:
        fh.write(struct.pack("<Q", v))
        fh.write(h_map.tobytes())


def load_influence_map(path) -> np.ndarray:
    with open(path, "rb") as fh:
        (v,) = struct.unpack("<Q", fh.read(8))
        data = np.frombuffer(fh.read(8 * v * v), dtype="<f8")
    return data.reshape(v, v).copy()
