"""Open-path objectives: length, total latency and power-latency sums.

There is no depot and no closing edge. The first visited point has
latency 0 and latency ``l_i`` is the distance travelled before reaching the
``i``-th point.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np
from numpy.typing import NDArray

from .sampling import as_points


class InvalidTourError(ValueError):
    pass


@dataclass(frozen=True, init=False)
class Tour:
    """Ordered visit sequence of distinct point indices."""

    order: tuple[int, ...]

    def __init__(self, order: Iterable[int]):
        object.__setattr__(self, "order", tuple(int(i) for i in order))

    def __len__(self) -> int:
        return len(self.order)

    def __iter__(self):
        return iter(self.order)

    def reversed(self) -> "Tour":
        return Tour(self.order[::-1])

    def to_json(self) -> list[int]:
        return list(self.order)


@dataclass(frozen=True)
class ObjectiveValue:
    kind: str  # "path_length" | "latency" | "psi"
    value: float
    alpha: float | None = None


def _validated(s, t: Tour | Sequence[int]) -> tuple[NDArray[np.float64], NDArray[np.intp]]:
    pts = as_points(s)
    order = np.asarray(t.order if isinstance(t, Tour) else list(t), dtype=np.intp)
    if order.size == 0:
        raise InvalidTourError("tour must visit at least one point")
    if order.min() < 0 or order.max() >= len(pts):
        raise InvalidTourError("tour index out of range")
    if np.unique(order).size != order.size:
        raise InvalidTourError("tour visits a point twice")
    return pts, order


def edge_lengths(s, t: Tour | Sequence[int]) -> NDArray[np.float64]:
    pts, order = _validated(s, t)
    seq = pts[order]
    return np.hypot(*np.diff(seq, axis=0).T)


def latencies(s, t: Tour | Sequence[int]) -> NDArray[np.float64]:
    d = edge_lengths(s, t)
    return np.concatenate(([0.0], np.cumsum(d)))


def path_length(s, t: Tour | Sequence[int]) -> float:
    return float(edge_lengths(s, t).sum())


def total_latency(s, t: Tour | Sequence[int]) -> float:
    lat = latencies(s, t)
    value = float(lat.sum())
    if __debug__:
        d = np.diff(lat)
        n = len(lat)
        weighted = float(np.dot(n - np.arange(1, n), d))
        assert math.isclose(value, weighted, rel_tol=1e-9, abs_tol=1e-12), (value, weighted)
    return value


def _check_alpha(alpha: float) -> None:
    if not alpha >= 1:
        raise ValueError(f"alpha must be >= 1, got {alpha}")


def psi_objective(s, t: Tour | Sequence[int], alpha: float) -> float:
    """Sum of ``l_i ** alpha`` over the visited points."""
    _check_alpha(alpha)
    lat = latencies(s, t)
    if alpha == 1:
        return float(lat.sum())
    return float(np.sum(lat**alpha))


def evaluate(s, t: Tour | Sequence[int], alpha: float = 1.0) -> dict[str, float]:
    """All three objectives for one tour, as reported by the CLI."""
    return {
        "path_length": path_length(s, t),
        "latency": total_latency(s, t),
        "psi": psi_objective(s, t, alpha),
        "alpha": float(alpha),
    }
