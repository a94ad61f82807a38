"""Polarization indices and extremal initial-opinion constructions.

Polarization is distance from the neutral opinion 0: mean square (p2),
total square (p3), or total absolute value (p4).  The construction
functions build initial vectors that push the averaging dynamics toward
maximal polarization, using the spectral structure of the dense
prejudice-to-final-opinion map.
"""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass

import numpy as np

logger = logging.getLogger(__name__)

METRICS = ("P2", "P3", "P4")


def _check_domain(x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.size == 0:
        raise ValueError("empty opinion vector")
    if np.any(np.abs(x) > 1.0 + 1e-12):
        warnings.warn("opinion values outside [-1, 1]", stacklevel=3)
    return x


def p2(x) -> float:
    """Mean squared distance from neutrality."""
    x = _check_domain(x)
    return float(np.dot(x, x) / x.size)


def p3(x) -> float:
    """Total squared distance from neutrality."""
    x = _check_domain(x)
    return float(np.dot(x, x))


def p4(x) -> float:
    """Total absolute distance from neutrality."""
    x = _check_domain(x)
    return float(np.abs(x).sum())


_METRIC_FNS = {"P2": p2, "P3": p3, "P4": p4}


def metric_fn(metric: str):
    try:
        return _METRIC_FNS[metric.upper()]
    except KeyError:
        raise ValueError(f"unknown metric {metric!r}; pick one of {METRICS}") from None


def polarization_value(metric: str, u: np.ndarray, z: np.ndarray) -> float:
    """Final minus initial polarization; positive means the dynamic polarized."""
    u = np.asarray(u, dtype=float)
    z = np.asarray(z, dtype=float)
    if u.shape != z.shape:
        raise ValueError(f"shape mismatch: {u.shape} vs {z.shape}")
    fn = metric_fn(metric)
    return fn(z) - fn(u)


@dataclass(frozen=True)
class PolarizationReport:
    metric: str
    initial: float
    final: float

    @property
    def delta(self) -> float:
        return self.final - self.initial


def polarization_report(metric: str, u: np.ndarray, z: np.ndarray) -> PolarizationReport:
    fn = metric_fn(metric)
    return PolarizationReport(metric=metric.upper(), initial=fn(u), final=fn(z))


def polarizing_b1(h_map: np.ndarray) -> np.ndarray:
    """Unit-L1 vector maximizing the final total absolute polarization.

    The objective is convex, so the optimum over the L1 ball sits at a
    signed basis vector; the best column by L1 norm wins, first index on
    ties, positive sign by convention.
    """
    h_map = np.asarray(h_map, dtype=float)
    col_norms = np.abs(h_map).sum(axis=0)
    j = int(np.argmax(col_norms))
    u = np.zeros(h_map.shape[1])
    u[j] = 1.0
    return u


def top_right_singular_vector(h_map: np.ndarray, rel_tol: float = 1e-10,
                              max_iter: int = 10_000) -> np.ndarray:
    """Dominant right singular vector via power iteration on the Gram matrix.

    Deterministic start; sign normalized so the largest-magnitude entry is
    positive.  A degenerate top pair stalls the iteration, in which case
    the last iterate is returned with a warning.
    """
    h_map = np.asarray(h_map, dtype=float)
    v = h_map.shape[1]
    gram = h_map.T @ h_map
    # Fixed non-uniform start so symmetric instances still break ties the
    # same way on every platform.
    vec = 1.0 + np.arange(v) / (10.0 * max(v, 1))
    vec /= np.linalg.norm(vec)
    for _ in range(max_iter):
        nxt = gram @ vec
        norm = np.linalg.norm(nxt)
        if norm == 0.0:
            logger.warning("singular-vector iteration hit the null space; "
                           "returning the current iterate")
            break
        nxt /= norm
        if np.linalg.norm(nxt - vec) < rel_tol:
            vec = nxt
            break
        vec = nxt
    else:
        logger.warning("singular-vector iteration did not reach %g after %d "
                       "steps (near-degenerate top pair); using last iterate",
                       rel_tol, max_iter)
    top = int(np.argmax(np.abs(vec)))
    if vec[top] < 0:
        vec = -vec
    return vec


def polarizing_b2(h_map: np.ndarray, radius: float = 1.0) -> np.ndarray:
    """L2-ball extremal vector: radius times the top right singular vector."""
    if radius <= 0:
        raise ValueError("radius must be positive")
    return radius * top_right_singular_vector(h_map)


def default_boxed_radius(h_map: np.ndarray) -> float:
    """Largest L2 radius whose extremal vector still fits the opinion box."""
    v1 = top_right_singular_vector(h_map)
    return float(1.0 / np.max(np.abs(v1)))


def polarizing_heuristic(h_map: np.ndarray, alpha: float = 0.1) -> np.ndarray:
    """Extreme opinions on the spectrally dominant nodes, neutral elsewhere.

    Thresholds the top singular vector: entries within alpha of the peak
    magnitude become +/-1, the rest 0.  Larger alpha concentrates the
    extremes on fewer, more central nodes.
    """
    if not (0.0 < alpha <= 1.0):
        raise ValueError("alpha must lie in (0, 1]")
    v1 = top_right_singular_vector(h_map)
    mask = np.abs(v1) >= alpha * np.max(np.abs(v1))
    u = np.where(mask, np.sign(v1), 0.0)
    if not np.any(u):
        logger.warning("threshold zeroed every entry; falling back to the "
                       "single peak-magnitude node")
        j = int(np.argmax(np.abs(v1)))
        u[j] = np.sign(v1[j]) or 1.0
    return u


@dataclass(frozen=True)
class PolarizingVectorSet:
    """The four extremal initial conditions plus their build parameters."""

    b1: np.ndarray
    b2_unit: np.ndarray
    b2_boxed: np.ndarray
    heuristic: np.ndarray
    boxed_radius: float
    alpha: float


def build_polarizing_set(h_map: np.ndarray, boxed_radius: float | None = None,
                         alpha: float = 0.1) -> PolarizingVectorSet:
    if boxed_radius is None:
        boxed_radius = default_boxed_radius(h_map)
    return PolarizingVectorSet(
        b1=polarizing_b1(h_map),
        b2_unit=polarizing_b2(h_map, radius=1.0),
        b2_boxed=polarizing_b2(h_map, radius=boxed_radius),
        heuristic=polarizing_heuristic(h_map, alpha=alpha),
        boxed_radius=float(boxed_radius),
        alpha=float(alpha),
    )
