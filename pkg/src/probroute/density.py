"""Piecewise-constant densities on the unit square and their rate functionals.

A density is stored as an ``(m, m)`` array indexed ``[ix, iy]``: cell
``(ix, iy)`` covers ``[ix/m, (ix+1)/m) x [iy/m, (iy+1)/m)``. The flat cell
index is ``k = ix * m + iy`` (row-major), so flat order coincides with
lexicographic order on ``(ix, iy)``.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from numpy.typing import ArrayLike, NDArray


class InvalidDensityError(ValueError):
    """Raised for negative, all-zero or mis-shaped density input."""


class InvalidFunctionError(ValueError):
    """Raised when a sampled density function returns a negative or non-finite value."""


@dataclass(frozen=True, eq=False)
class Density:
    """Normalized piecewise-constant density on an ``m x m`` grid.

    Attributes:
        m: grid resolution.
        values: ``(m, m)`` cell densities ``f_k`` indexed ``[ix, iy]``;
            ``values.sum() / m**2 == 1``.
    """

    m: int
    values: NDArray[np.float64]

    @property
    def cell_area(self) -> float:
        return 1.0 / (self.m * self.m)

    @property
    def flat(self) -> NDArray[np.float64]:
        return self.values.reshape(-1)

    @property
    def max_value(self) -> float:
        """Sup norm of the (smoothed) density, the largest cell value."""
        return float(self.values.max())

    @property
    def min_positive(self) -> float:
        """Smallest positive cell value ``f_*``."""
        flat = self.flat
        return float(flat[flat > 0].min())

    @property
    def support_area(self) -> float:
        return np.count_nonzero(self.flat > 0) * self.cell_area

    @property
    def cell_probabilities(self) -> NDArray[np.float64]:
        """Point-law mass of every cell, flat order."""
        return self.flat * self.cell_area

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Density):
            return NotImplemented
        return self.m == other.m and np.array_equal(self.values, other.values)

    def __hash__(self) -> int:
        return hash((self.m, self.values.tobytes()))

    def digest(self) -> str:
        """Stable content hash, used to tag sample sets."""
        h = hashlib.sha256()
        h.update(str(self.m).encode())
        h.update(np.ascontiguousarray(self.values, dtype="<f8").tobytes())
        return h.hexdigest()[:16]

    def to_json(self) -> dict:
        return {"schema": 1, "m": self.m, "values": self.flat.tolist()}

    @classmethod
    def from_json(cls, obj: dict) -> "Density":
        try:
            m = int(obj["m"])
            values = obj["values"]
        except (KeyError, TypeError, ValueError) as exc:
            raise InvalidDensityError(f"malformed density document: {exc}") from exc
        return make_density(values, m)

    def dump(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_json(), fh)

    @classmethod
    def load(cls, path) -> "Density":
        with open(path) as fh:
            return cls.from_json(json.load(fh))


@dataclass(frozen=True)
class LevelDecomposition:
    """Positive density levels with their areas and below-level integrals.

    ``levels[s]`` are the distinct positive cell values in increasing order,
    ``areas[s]`` the Lebesgue measure of ``{f == levels[s]}``,
    ``below_mass[s]`` the integral of ``sqrt(f)`` over ``{f < levels[s]}`` and
    ``below_prob[s]`` the integral of ``f`` over the same set.
    """

    levels: NDArray[np.float64]
    areas: NDArray[np.float64]
    below_mass: NDArray[np.float64]
    below_prob: NDArray[np.float64]

    @property
    def level_mass(self) -> NDArray[np.float64]:
        """Integral of ``sqrt(f)`` over each level set."""
        return np.sqrt(self.levels) * self.areas

    @property
    def level_prob(self) -> NDArray[np.float64]:
        """Point-law probability of each level set."""
        return self.levels * self.areas


def make_density(raw: ArrayLike, m: int) -> Density:
    """Normalize nonnegative cell weights into a density on an ``m x m`` grid.

    ``raw`` may be flat (``m*m`` entries, row-major over ``(ix, iy)``) or
    already shaped ``(m, m)``.
    """
    if int(m) != m or m < 1:
        raise InvalidDensityError(f"grid resolution must be a positive integer, got {m}")
    m = int(m)
    arr = np.asarray(raw, dtype=np.float64)
    if arr.size != m * m:
        raise InvalidDensityError(f"expected {m * m} cell values, got {arr.size}")
    arr = arr.reshape(m, m)
    if not np.all(np.isfinite(arr)):
        raise InvalidDensityError("density values must be finite")
    if np.any(arr < 0):
        raise InvalidDensityError("density values must be nonnegative")
    total = arr.sum()
    if total <= 0:
        raise InvalidDensityError("density has no positive cell")
    values = arr * (m * m / total)
    values.setflags(write=False)
    return Density(m, values)


def uniform(m: int = 1) -> Density:
    return make_density(np.ones(m * m), m)


def level_decomposition(d: Density) -> LevelDecomposition:
    flat = d.flat
    positive = flat[flat > 0]
    levels, counts = np.unique(positive, return_counts=True)
    areas = counts * d.cell_area
    # exclusive prefix sums: mass strictly below each level
    level_sqrt_mass = np.sqrt(levels) * areas
    level_prob = levels * areas
    below_mass = np.concatenate(([0.0], np.cumsum(level_sqrt_mass)[:-1]))
    below_prob = np.concatenate(([0.0], np.cumsum(level_prob)[:-1]))
    return LevelDecomposition(levels, areas, below_mass, below_prob)


def _check_alpha(alpha: float) -> None:
    if not alpha >= 1:
        raise ValueError(f"alpha must be >= 1, got {alpha}")


def g_alpha_integral(d: Density, alpha: float) -> float:
    """Integral over the square of the latency rate integrand ``g_alpha(f, .)``.

    Every level of a piecewise-constant density has positive area, so only
    the degenerate branch applies; level ``z`` with area ``h`` and
    ``eta = int sqrt(f) 1{f < z}`` contributes
    ``sqrt(z) * ((eta + sqrt(z) h)**(alpha+1) - eta**(alpha+1)) / (alpha+1)``.
    """
    _check_alpha(alpha)
    dec = level_decomposition(d)
    root = np.sqrt(dec.levels)
    upper = (dec.below_mass + root * dec.areas) ** (alpha + 1)
    lower = dec.below_mass ** (alpha + 1)
    return float(np.sum(root * (upper - lower)) / (alpha + 1))


def g_alpha_pointwise(d: Density, x: ArrayLike, y: ArrayLike, alpha: float) -> NDArray[np.float64]:
    """Evaluate the integrand ``g_alpha(f, (x, y))`` at points of the square."""
    _check_alpha(alpha)
    dec = level_decomposition(d)
    f = d.values[_cell_index(x, d.m), _cell_index(y, d.m)]
    out = np.zeros_like(f)
    pos = f > 0
    s = np.searchsorted(dec.levels, f[pos])
    z, h, eta = dec.levels[s], dec.areas[s], dec.below_mass[s]
    out[pos] = np.sqrt(z) * ((eta + np.sqrt(z) * h) ** (alpha + 1) - eta ** (alpha + 1)) / (
        (alpha + 1) * h
    )
    return out


def _cell_index(c: ArrayLike, m: int) -> NDArray[np.intp]:
    return np.minimum(np.floor(np.asarray(c, dtype=np.float64) * m).astype(np.intp), m - 1)


def g_f_fraction(d: Density, kappa: float) -> tuple[float, float]:
    """Threshold level ``y0`` and rate functional ``g_f(kappa)`` for ``k = kappa n``.

    ``F(y) = int f 1{f <= y}`` is the law of the density value at a sampled
    point; ``y0`` is the smallest positive level with ``1 - F(y0) <= kappa``.
    """
    if not 0 < kappa <= 1:
        raise ValueError(f"kappa must lie in (0, 1], got {kappa}")
    dec = level_decomposition(d)
    cdf = dec.below_prob + dec.level_prob
    tail = np.maximum(1.0 - cdf, 0.0)
    tail[-1] = 0.0  # no mass above the top level; cumsum rounding aside
    s = int(np.argmax(tail <= kappa))
    y0 = float(dec.levels[s])
    above = float(np.sum(dec.level_mass[s + 1 :]))
    gf = above + (kappa - tail[s]) / math.sqrt(y0)
    return y0, float(gf)


def refine(d: Density, beta: int) -> Density:
    """Split every cell into ``beta x beta`` equal cells carrying the same value."""
    if int(beta) != beta or beta < 1:
        raise ValueError(f"beta must be a positive integer, got {beta}")
    beta = int(beta)
    if beta == 1:
        return d
    values = np.kron(d.values, np.ones((beta, beta)))
    values.setflags(write=False)
    return Density(d.m * beta, values)


def cell_average_from_function(
    sampler: Callable[[NDArray[np.float64], NDArray[np.float64]], ArrayLike],
    m: int,
    quad_points: int = 4,
) -> Density:
    """Cell-average a nonnegative function into a piecewise-constant density.

    Each cell value is the mean of ``sampler`` over a ``quad_points x
    quad_points`` midpoint lattice inside the cell. ``sampler`` receives
    coordinate arrays and must broadcast.
    """
    if quad_points < 1:
        raise ValueError("quad_points must be >= 1")
    q = int(quad_points)
    offsets = (np.arange(q) + 0.5) / q
    # lattice coordinates for every cell, shape (m, q)
    coords = (np.arange(m)[:, None] + offsets[None, :]) / m
    xs = coords[:, None, :, None]
    ys = coords[None, :, None, :]
    vals = np.asarray(sampler(*np.broadcast_arrays(xs, ys)), dtype=np.float64)
    vals = np.broadcast_to(vals, (m, m, q, q))
    if not np.all(np.isfinite(vals)):
        raise InvalidFunctionError("sampler returned a non-finite value")
    if np.any(vals < 0):
        raise InvalidFunctionError("sampler returned a negative value")
    return make_density(vals.mean(axis=(2, 3)), m)
