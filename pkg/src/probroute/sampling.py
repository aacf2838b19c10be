"""Reproducible i.i.d. point sets drawn from a grid density.

Randomness comes from the counter-based Philox4x64-10 generator keyed by the
64-bit seed. Point ``i`` consumes exactly counter block ``i`` (four 64-bit
words): word 0 picks the cell, words 1 and 2 place the point inside it. A
point therefore depends only on ``(density, seed, i)``, so any prefix or
slice of a sample set can be regenerated independently.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from numpy.typing import NDArray

from .density import Density

_MASK64 = (1 << 64) - 1
_WORDS_PER_POINT = 4


@dataclass(frozen=True, eq=False)
class SampleSet:
    points: NDArray[np.float64]
    seed: int | None = None
    density_id: str | None = None
    meta: dict = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.points)

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["x", "y"])
            for x, y in self.points:
                w.writerow([repr(float(x)), repr(float(y))])

    def manifest(self) -> dict:
        return {"schema": 1, "n": len(self), "seed": self.seed, "density_id": self.density_id, **self.meta}

    def save(self, csv_path, manifest_path=None) -> None:
        self.write_csv(csv_path)
        manifest_path = manifest_path or Path(csv_path).with_suffix(".json")
        with open(manifest_path, "w") as fh:
            json.dump(self.manifest(), fh, indent=2)

    @classmethod
    def read_csv(cls, path) -> "SampleSet":
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
        if not rows or [c.strip() for c in rows[0]] != ["x", "y"]:
            raise ValueError(f"{path}: expected header x,y")
        pts = np.array([[float(a), float(b)] for a, b in rows[1:]], dtype=np.float64).reshape(-1, 2)
        seed = density_id = None
        manifest = Path(path).with_suffix(".json")
        if manifest.exists():
            info = json.loads(manifest.read_text())
            seed, density_id = info.get("seed"), info.get("density_id")
        return cls(pts, seed, density_id)


@dataclass(frozen=True)
class CellCounts:
    m: int
    counts: NDArray[np.int64]  # shape (m, m), indexed [ix, iy]

    @property
    def n(self) -> int:
        return int(self.counts.sum())


def as_points(s) -> NDArray[np.float64]:
    if isinstance(s, SampleSet):
        return s.points
    return np.asarray(s, dtype=np.float64).reshape(-1, 2)


def _uniforms(words: NDArray[np.uint64]) -> NDArray[np.float64]:
    # top 53 bits -> [0, 1)
    return (words >> np.uint64(11)).astype(np.float64) * (1.0 / 9007199254740992.0)


def point_stream(seed: int, start: int, count: int) -> NDArray[np.float64]:
    """Uniform variates for points ``start .. start+count-1``, shape ``(count, 4)``."""
    bitgen = np.random.Philox(key=int(seed) & _MASK64, counter=start)
    raw = bitgen.random_raw(count * _WORDS_PER_POINT).reshape(count, _WORDS_PER_POINT)
    return _uniforms(raw)


def sample_points(d: Density, n: int, seed: int) -> SampleSet:
    if n < 0:
        raise ValueError("n must be nonnegative")
    m = d.m
    if n == 0:
        return SampleSet(np.empty((0, 2)), seed, d.digest())
    u = point_stream(seed, 0, n)
    probs = d.cell_probabilities
    cdf = np.cumsum(probs)
    cell = np.searchsorted(cdf, u[:, 0] * cdf[-1], side="right")
    # rounding at the top end can only overshoot to the last positive cell
    cell = np.minimum(cell, np.flatnonzero(probs > 0)[-1])
    ix, iy = np.divmod(cell, m)
    pts = np.column_stack(((ix + u[:, 1]) / m, (iy + u[:, 2]) / m))
    # keep each point inside its own half-open cell despite rounding
    upper = np.column_stack(((ix + 1) / m, (iy + 1) / m))
    pts = np.minimum(pts, np.nextafter(upper, -np.inf))
    return SampleSet(pts, seed, d.digest())


def cell_of(points, m: int) -> tuple[NDArray[np.intp], NDArray[np.intp]]:
    """Cell coordinates ``(ix, iy)`` of each point; the edge ``x == 1`` maps to ``m - 1``."""
    p = as_points(points)
    idx = np.floor(p * m).astype(np.intp)
    np.clip(idx, 0, m - 1, out=idx)
    return idx[:, 0], idx[:, 1]


def cell_counts(s, m: int) -> CellCounts:
    if m < 1:
        raise ValueError("m must be >= 1")
    ix, iy = cell_of(s, m)
    counts = np.bincount(ix * m + iy, minlength=m * m).reshape(m, m)
    return CellCounts(m, counts.astype(np.int64))
