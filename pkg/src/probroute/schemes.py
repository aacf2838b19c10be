"""Constant-factor constructions: densest-cell k-TSP and the density sweep.

Cells are identified by the flat key ``ix * m + iy``; every tie between
cells is broken by the smaller key.
"""

from __future__ import annotations

import math
from typing import Literal, Sequence

import numpy as np
from numpy.typing import ArrayLike, NDArray

from .density import Density
from .objectives import Tour
from .sampling import as_points, cell_of
from .solvers import InfeasibleError, exact_tsp_path, heuristic_tsp_path

EXACT_INNER_K = 10


class ConfigurationError(ValueError):
    pass


def ktsp_partition_resolution(n: int, k: int, a: float = 1.0) -> int:
    """Grid side ``floor(sqrt(n**(1 + 1/(k-1)) / (k-1)) / a)``, at least 1."""
    if a <= 0:
        raise ValueError(f"scale a must be positive, got {a}")
    if k < 2 or n < k:
        raise ValueError(f"need 2 <= k <= n, got k={k}, n={n}")
    raw = math.sqrt(n ** (1 + 1 / (k - 1)) / (k - 1)) / a
    # guard exact integers against a one-ulp undershoot
    return max(1, math.floor(raw * (1 + 1e-12)))


def _cell_keys(pts, m: int) -> NDArray[np.int64]:
    ix, iy = cell_of(pts, m)
    return ix.astype(np.int64) * m + iy


def densest_cell(pts, m: int) -> tuple[int, int]:
    """Key and count of the most populated cell (smallest key on ties)."""
    keys, counts = np.unique(_cell_keys(pts, m), return_counts=True)
    best = int(np.argmax(counts))  # unique() sorts keys, argmax takes the first
    return int(keys[best]), int(counts[best])


def ktsp_densest_cell(s, k: int, a: float = 1.0) -> Tour:
    """Solve a TSP path on ``k`` points of the most crowded grid cell.

    The grid starts at ``ktsp_partition_resolution(n, k, a)`` and is halved
    until some cell holds ``k`` points. Inside the chosen cell the ``k``
    points nearest its centre are kept.
    """
    pts = as_points(s)
    n = len(pts)
    if k < 2:
        raise ValueError(f"k must be >= 2, got {k}")
    if k > n:
        raise InfeasibleError(f"k={k} exceeds the number of points n={n}")
    m = ktsp_partition_resolution(n, k, a)
    while True:
        key, count = densest_cell(pts, m)
        if count >= k or m == 1:
            break
        m = max(1, m // 2)
    members = np.flatnonzero(_cell_keys(pts, m) == key)
    ix, iy = divmod(key, m)
    centre = np.array([(ix + 0.5) / m, (iy + 0.5) / m])
    dist = np.hypot(*(pts[members] - centre).T)
    chosen = np.sort(members[np.lexsort((members, dist))[:k]])
    if k <= EXACT_INNER_K:
        local = exact_tsp_path(pts[chosen])
        return Tour(chosen[list(local.order)])
    return heuristic_tsp_path(pts, chosen)


def block_objective(travel: ArrayLike, order: Sequence[int], alpha: float, weights: ArrayLike | None = None) -> float:
    """``sum_i w[order[i]] * (sum_{j<i} travel[order[j]]) ** alpha``; unit weights by default."""
    travel = np.asarray(travel, dtype=np.float64)
    order = np.asarray(order, dtype=np.intp)
    prefix = np.concatenate(([0.0], np.cumsum(travel[order])[:-1]))
    w = np.ones(len(order)) if weights is None else np.asarray(weights, dtype=np.float64)[order]
    return float(np.sum(w * prefix**alpha))


def optimal_block_order(weights: ArrayLike, alpha: float = 1.0) -> list[int]:
    """Block permutation minimizing the power-latency of unit blocks with travel ``1/sqrt(w)``.

    The optimum visits blocks by decreasing weight (stable on ties) for every
    ``alpha``, since it minimizes each prefix sum simultaneously.
    """
    w = np.asarray(weights, dtype=np.float64)
    if np.any(~(w > 0)):
        raise ValueError("block weights must be positive")
    if not alpha >= 1:
        raise ValueError(f"alpha must be >= 1, got {alpha}")
    return [int(i) for i in np.argsort(-w, kind="stable")]


def block_order_objective(weights: ArrayLike, order: Sequence[int], alpha: float) -> float:
    return block_objective(1.0 / np.sqrt(np.asarray(weights, dtype=np.float64)), order, alpha)


OrderSource = Literal["empirical"] | Density


def sweep_cell_order(s, m: int, order_source: OrderSource = "empirical") -> list[int]:
    """Keys of the nonempty cells in visiting order."""
    pts = as_points(s)
    keys, counts = np.unique(_cell_keys(pts, m), return_counts=True)
    if isinstance(order_source, Density):
        if order_source.m != m:
            raise ConfigurationError(f"density resolution {order_source.m} != sweep resolution {m}")
        rank = order_source.flat[keys]
    elif order_source == "empirical":
        rank = counts.astype(np.float64)
    else:
        raise ConfigurationError(f"unknown order source {order_source!r}")
    return [int(k) for k in keys[np.lexsort((keys, -rank))]]


def psitrp_sweep(s, m: int, order_source: OrderSource = "empirical") -> Tour:
    """Visit grid cells by decreasing density, a heuristic TSP path inside each.

    ``order_source`` is ``"empirical"`` (rank cells by point count) or a
    :class:`Density` of resolution ``m`` (rank by its cell values). Each cell
    path starts at the point nearest the previous cell's last point.
    """
    if m < 1:
        raise ConfigurationError("m must be >= 1")
    pts = as_points(s)
    if len(pts) == 0:
        raise ValueError("cannot route an empty sample set")
    keys = _cell_keys(pts, m)
    order: list[int] = []
    for key in sweep_cell_order(pts, m, order_source):
        members = np.flatnonzero(keys == key)
        if not order:
            part = heuristic_tsp_path(pts, members)
        else:
            gap = np.hypot(*(pts[members] - pts[order[-1]]).T)
            start = int(members[np.argmin(gap)])  # argmin keeps the lowest index on ties
            part = heuristic_tsp_path(pts, members, start=start)
        order.extend(part.order)
    return Tour(order)


def ktsp_sweep(s, k: int, m: int, order_source: OrderSource = "empirical") -> Tour:
    """Sweep tour truncated after ``k`` points (non-local k-TSP variant for ``k`` of order ``n``)."""
    pts = as_points(s)
    if k > len(pts):
        raise InfeasibleError(f"k={k} exceeds the number of points n={len(pts)}")
    return Tour(psitrp_sweep(pts, m, order_source).order[:k])
