"""Exact oracles for small instances and the nearest-neighbour + 2-opt heuristic.

All exact solvers break ties lexicographically on the visit order: among
orders whose objective is within a relative ``1e-9`` of the optimum, the
lexicographically smallest is returned. Floating-point sums of the same
path taken in different directions differ in the last bits, so exact
equality would make the tie rule depend on summation order.
"""

from __future__ import annotations

import itertools
from functools import lru_cache
from typing import Sequence

import numpy as np
from numba import njit
from numpy.typing import NDArray

from .objectives import Tour
from .sampling import as_points

MAX_EXACT_PATH = 12
MAX_EXACT_PSI = 10
TIE_RTOL = 1e-9
TWO_OPT_PASSES_PER_POINT = 50


class BudgetExceededError(ValueError):
    """Instance too large for an exhaustive oracle."""


class InfeasibleError(ValueError):
    """Requested subset size cannot be met by the instance."""


def distance_matrix(pts: NDArray[np.float64]) -> NDArray[np.float64]:
    diff = pts[:, None, :] - pts[None, :, :]
    return np.hypot(diff[..., 0], diff[..., 1])


def _tol(opt: float) -> float:
    return TIE_RTOL * max(1.0, abs(opt))


@lru_cache(maxsize=None)
def _masks_by_size(n: int) -> tuple[NDArray[np.int64], ...]:
    masks = np.arange(1 << n, dtype=np.int64)
    pc = np.zeros(1 << n, dtype=np.int64)
    for v in range(n):
        pc += (masks >> v) & 1
    return tuple(masks[pc == s] for s in range(n + 1))


def _subset_dp(D: NDArray[np.float64], max_size: int) -> NDArray[np.float64]:
    """``G[S, v]``: shortest open path visiting exactly the set ``S``, starting at ``v``."""
    n = len(D)
    G = np.full((1 << n, n), np.inf)
    for v in range(n):
        G[1 << v, v] = 0.0
    by_size = _masks_by_size(n)
    for size in range(2, max_size + 1):
        masks = by_size[size]
        for v in range(n):
            sel = masks[(masks >> v) & 1 == 1]
            G[sel, v] = np.min(G[sel ^ (1 << v)] + D[v], axis=1)
    return G


def _lex_reconstruct(G, D, opt: float, candidates: NDArray[np.int64]) -> list[int]:
    """Lexicographically smallest order, over the candidate vertex sets, within tolerance of ``opt``."""
    n = len(D)
    bound = opt + _tol(opt)
    start_ok = G[candidates] <= bound
    first = int(np.flatnonzero(start_ok.any(axis=0))[0])
    states = {int(S) ^ (1 << first) for S in candidates[start_ok[:, first]]}
    order, cur, prefix = [first], first, 0.0
    while states and next(iter(states)) != 0:
        best_u, keep = None, set()
        for u in range(n):
            for R in states:
                if (R >> u) & 1 and prefix + D[cur, u] + G[R, u] <= bound:
                    keep.add(R ^ (1 << u))
            if keep:
                best_u = u
                break
        assert best_u is not None
        prefix += D[cur, best_u]
        order.append(best_u)
        cur, states = best_u, keep
    return order


def exact_tsp_path(s) -> Tour:
    """Minimum-length open path through all points (Held-Karp over subsets)."""
    pts = as_points(s)
    n = len(pts)
    if n > MAX_EXACT_PATH:
        raise BudgetExceededError(f"exact TSP path limited to n <= {MAX_EXACT_PATH}, got {n}")
    if n < 2:
        return Tour(range(n))
    D = distance_matrix(pts)
    G = _subset_dp(D, n)
    full = np.array([(1 << n) - 1], dtype=np.int64)
    opt = float(G[full[0]].min())
    return Tour(_lex_reconstruct(G, D, opt, full))


def exact_k_tsp(s, k: int) -> Tour:
    """Minimum-length open path visiting exactly ``k`` of the points."""
    pts = as_points(s)
    n = len(pts)
    if k < 2:
        raise ValueError(f"k must be >= 2, got {k}")
    if k > n:
        raise InfeasibleError(f"k={k} exceeds the number of points n={n}")
    if n > MAX_EXACT_PATH:
        raise BudgetExceededError(f"exact k-TSP limited to n <= {MAX_EXACT_PATH}, got {n}")
    D = distance_matrix(pts)
    G = _subset_dp(D, k)
    cands = _masks_by_size(n)[k]
    opt = float(G[cands].min())
    return Tour(_lex_reconstruct(G, D, opt, cands))


_TAIL = 8


@lru_cache(maxsize=None)
def _tail_perms(t: int) -> NDArray[np.intp]:
    return np.array(list(itertools.permutations(range(t))), dtype=np.intp).reshape(-1, t)


def _order_chunks(n: int):
    """All permutations of ``range(n)`` in lexicographic order, in blocks sharing a prefix."""
    t = min(n, _TAIL)
    tails = _tail_perms(t)
    for head in itertools.permutations(range(n), n - t):
        rest = np.array(sorted(set(range(n)) - set(head)), dtype=np.intp)
        block = np.empty((len(tails), n), dtype=np.intp)
        block[:, : n - t] = head
        block[:, n - t :] = rest[tails]
        yield block


def _psi_values(pts, orders: NDArray[np.intp], alpha: float) -> NDArray[np.float64]:
    seq = pts[orders]
    step = np.hypot(*np.moveaxis(np.diff(seq, axis=1), -1, 0))
    lat = np.cumsum(step, axis=1)
    if alpha == 1:
        return lat.sum(axis=1)
    return (lat**alpha).sum(axis=1)


def exact_psi_trp(s, alpha: float) -> Tour:
    """Minimizer of the sum of ``latency ** alpha`` by full order enumeration.

    Subset DP is unsound here: the cost of the remaining suffix depends on the
    (continuous) prefix length whenever ``alpha > 1``.
    """
    if not alpha >= 1:
        raise ValueError(f"alpha must be >= 1, got {alpha}")
    pts = as_points(s)
    n = len(pts)
    if n > MAX_EXACT_PSI:
        raise BudgetExceededError(f"exact psi-TRP limited to n <= {MAX_EXACT_PSI}, got {n}")
    if n < 2:
        return Tour(range(n))
    chunk_min = [float(_psi_values(pts, block, alpha).min()) for block in _order_chunks(n)]
    opt = min(chunk_min)
    bound = opt + _tol(opt)
    for cmin, block in zip(chunk_min, _order_chunks(n)):
        if cmin <= bound:
            vals = _psi_values(pts, block, alpha)
            return Tour(block[int(np.flatnonzero(vals <= bound)[0])])
    raise AssertionError("unreachable")


@njit(cache=True)
def _dist(xy, a, b):
    dx = xy[a, 0] - xy[b, 0]
    dy = xy[a, 1] - xy[b, 1]
    return np.sqrt(dx * dx + dy * dy)


@njit(cache=True)
def _nearest_neighbour(xy, start):
    n = xy.shape[0]
    route = np.empty(n, dtype=np.int64)
    used = np.zeros(n, dtype=np.bool_)
    route[0] = start
    used[start] = True
    cur = start
    for step in range(1, n):
        best, best_d = -1, np.inf
        for j in range(n):
            if not used[j]:
                d = _dist(xy, cur, j)
                if d < best_d:
                    best, best_d = j, d
        route[step] = best
        used[best] = True
        cur = best
    return route


@njit(cache=True)
def _two_opt(xy, route, fixed_start, max_passes):
    n = route.shape[0]
    first = 1 if fixed_start else 0
    for _ in range(max_passes):
        improved = False
        for i in range(first, n - 1):
            for j in range(i + 1, n):
                if i == 0 and j == n - 1:
                    continue
                a = route[i]
                b = route[j]
                delta = 0.0
                if i > 0:
                    p = route[i - 1]
                    delta += _dist(xy, p, b) - _dist(xy, p, a)
                if j < n - 1:
                    q = route[j + 1]
                    delta += _dist(xy, a, q) - _dist(xy, b, q)
                if delta < -1e-12:
                    lo, hi = i, j
                    while lo < hi:
                        route[lo], route[hi] = route[hi], route[lo]
                        lo += 1
                        hi -= 1
                    improved = True
        if not improved:
            break
    return route


def heuristic_tsp_path(s, subset: Sequence[int] | None = None, start: int | None = None) -> Tour:
    """Nearest-neighbour path improved by first-improvement 2-opt.

    The construction starts at ``start`` if given (which then stays first)
    or else at the lowest index of ``subset``, in which case 2-opt may also
    move the starting point.
    """
    pts = as_points(s)
    idx = np.arange(len(pts)) if subset is None else np.sort(np.asarray(subset, dtype=np.int64))
    if idx.size == 0:
        raise ValueError("subset must be nonempty")
    if idx.size == 1:
        return Tour([int(idx[0])])
    xy = np.ascontiguousarray(pts[idx])
    if start is None:
        local_start, fixed = 0, False
    else:
        hits = np.flatnonzero(idx == start)
        if hits.size == 0:
            raise ValueError(f"start {start} not in subset")
        local_start, fixed = int(hits[0]), True
    route = _nearest_neighbour(xy, local_start)
    route = _two_opt(xy, route, fixed, TWO_OPT_PASSES_PER_POINT * len(idx))
    return Tour(idx[route])
