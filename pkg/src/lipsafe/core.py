"""Discretized state/action universe and the knowledge-set data model.

States and actions are referred to by integer index everywhere outside this
module; coordinates only matter for distances and I/O.
"""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Dict, Iterable, Iterator, List, Optional, Tuple

import numpy as np

__all__ = [
    "EPS_GEOM",
    "DEDUP_TOLERANCE",
    "Metric",
    "LipschitzConstants",
    "StateTable",
    "ActionTable",
    "KnowledgeSet",
    "DeterminismError",
    "hypersphere",
    "grid",
]

#: absolute slack added to every ball radius (grid values like 0.2*k are inexact)
EPS_GEOM = 1e-9
#: two states closer than this are the same state
DEDUP_TOLERANCE = 1e-9


class DeterminismError(ValueError):
    """A triplet contradicts a recorded outcome for the same (state, action)."""


@dataclass(frozen=True)
class Metric:
    kind: str = "euclidean"

    def __post_init__(self):
        if self.kind != "euclidean":
            raise ValueError(f"unsupported metric kind {self.kind!r}")

    def __call__(self, x, y) -> float:
        diff = np.asarray(x, dtype=float) - np.asarray(y, dtype=float)
        return float(np.sqrt(np.sum(diff * diff)))

    def to_many(self, x, ys: np.ndarray) -> np.ndarray:
        """Distances from one point ``x`` to each row of ``ys``."""
        diff = np.asarray(ys, dtype=float) - np.asarray(x, dtype=float)
        return np.sqrt(np.sum(diff * diff, axis=-1))

    def pairwise(self, xs: np.ndarray, ys: np.ndarray) -> np.ndarray:
        diff = np.asarray(xs, dtype=float)[:, None, :] - np.asarray(ys, dtype=float)[None, :, :]
        return np.sqrt(np.sum(diff * diff, axis=-1))


@dataclass(frozen=True)
class LipschitzConstants:
    l_s: float
    l_a: float

    def __post_init__(self):
        for name in ("l_s", "l_a"):
            v = getattr(self, name)
            if not (np.isfinite(v) and v > 0):
                raise ValueError(f"{name} must be positive and finite, got {v}")


def _as_rows(points: Iterable) -> np.ndarray:
    arr = np.asarray(list(points) if not isinstance(points, np.ndarray) else points, dtype=float)
    if arr.ndim == 1:
        arr = arr[:, None]
    if arr.ndim != 2:
        raise ValueError("expected a list of coordinate vectors")
    return arr


class StateTable:
    """Indexed universe of sampled states plus states visited at run time.

    Indices ``0 .. original_count - 1`` are the initial samples; later indices
    are appended by :meth:`intern` in visit order.
    """

    def __init__(self, samples, dedup_tolerance: float = DEDUP_TOLERANCE,
                 metric: Metric = Metric()):
        rows = _as_rows(samples)
        if len(rows) == 0:
            raise ValueError("state table needs at least one sample")
        if not np.all(np.isfinite(rows)):
            raise ValueError("state samples must be finite")
        if dedup_tolerance < 0:
            raise ValueError("dedup_tolerance must be non-negative")
        self.metric = metric
        self.dedup_tolerance = float(dedup_tolerance)
        self.dim = rows.shape[1]
        self._buf = np.empty((max(2 * len(rows), 16), self.dim))
        self._n = 0
        for row in rows:
            idx, fresh = self.intern(row)
            if not fresh:
                raise ValueError(f"duplicate initial sample {row.tolist()}")
        self.original_count = self._n
        self._orig_dist = metric.pairwise(rows, rows)

    def __len__(self) -> int:
        return self._n

    @property
    def coords(self) -> np.ndarray:
        """Read-only (n, dim) view of all entries."""
        view = self._buf[: self._n]
        view.flags.writeable = False
        return view

    def coord(self, i: int) -> np.ndarray:
        self._check(i)
        return self._buf[i]

    def scalar(self, i: int) -> float:
        """Coordinate of a 1-D state as a float."""
        return float(self.coord(i)[0])

    def _check(self, i: int) -> None:
        if not 0 <= i < self._n:
            raise IndexError(f"state index {i} out of range [0, {self._n})")

    def distance(self, i: int, j: int) -> float:
        self._check(i)
        self._check(j)
        if i < self.original_count and j < self.original_count:
            return float(self._orig_dist[i, j])
        return self.metric(self._buf[i], self._buf[j])

    def distances_from(self, i: int) -> np.ndarray:
        """Distances from state ``i`` to every entry, in index order."""
        self._check(i)
        return self.metric.to_many(self._buf[i], self.coords)

    def nearest(self, coords) -> Tuple[int, float]:
        x = np.asarray(coords, dtype=float).reshape(self.dim)
        d = self.metric.to_many(x, self.coords)
        i = int(np.argmin(d))  # first minimum, i.e. lowest index on ties
        return i, float(d[i])

    def intern(self, coords) -> Tuple[int, bool]:
        """Index of the state at ``coords``, appending it if it is new.

        Returns ``(index, freshly_added)``.
        """
        x = np.asarray(coords, dtype=float).reshape(-1)
        if x.shape != (self.dim,):
            raise ValueError(f"expected {self.dim}-dimensional state, got shape {x.shape}")
        if not np.all(np.isfinite(x)):
            raise ValueError(f"state coordinates must be finite, got {x.tolist()}")
        if self._n:
            i, d = self.nearest(x)
            if d <= self.dedup_tolerance:
                return i, False
        if self._n == len(self._buf):
            grown = np.empty((2 * len(self._buf), self.dim))
            grown[: self._n] = self._buf[: self._n]
            self._buf = grown
        self._buf[self._n] = x
        self._n += 1
        return self._n - 1, True

    def indices(self) -> range:
        return range(self._n)

    def original_indices(self) -> range:
        return range(self.original_count)


class ActionTable:
    """Fixed, ordered set of sampled actions."""

    def __init__(self, samples, metric: Metric = Metric()):
        rows = _as_rows(samples)
        if len(rows) == 0:
            raise ValueError("action table needs at least one sample")
        self.metric = metric
        self.coords = rows
        self.coords.flags.writeable = False
        self.dist = metric.pairwise(rows, rows)
        off_diag = self.dist[~np.eye(len(rows), dtype=bool)]
        if off_diag.size and off_diag.min() == 0.0:
            raise ValueError("action samples must be distinct")

    def __len__(self) -> int:
        return len(self.coords)

    def distance(self, a: int, b: int) -> float:
        return float(self.dist[a, b])

    def scalar(self, a: int) -> float:
        return float(self.coords[a][0])


class KnowledgeSet:
    """Set of certain transitions ``(s, a, s')``; only ever grows."""

    def __init__(self, triplets: Iterable[Tuple[int, int, int]] = ()):
        self._outcome: Dict[Tuple[int, int], int] = {}
        self._order: List[Tuple[int, int, int]] = []
        self._adj: Dict[int, Dict[int, int]] = {}
        for t in triplets:
            self.add(*t)

    def add(self, s: int, a: int, s_next: int) -> bool:
        """Insert a triplet. Returns False if it was already known.

        Raises :class:`DeterminismError` if ``(s, a)`` is recorded with a
        different outcome.
        """
        key = (int(s), int(a))
        known = self._outcome.get(key)
        if known is not None:
            if known != s_next:
                raise DeterminismError(
                    f"({s}, {a}) already leads to {known}, refusing outcome {s_next}")
            return False
        self._outcome[key] = int(s_next)
        self._order.append((key[0], key[1], int(s_next)))
        self._adj.setdefault(key[0], {})[key[1]] = int(s_next)
        return True

    def outcome(self, s: int, a: int) -> Optional[int]:
        return self._outcome.get((s, a))

    def successors(self, s: int) -> Dict[int, int]:
        """Mapping action -> outcome for the known transitions out of ``s``."""
        return self._adj.get(s, {})

    def __contains__(self, item) -> bool:
        if len(item) == 2:
            return tuple(item) in self._outcome
        s, a, s_next = item
        return self._outcome.get((s, a)) == s_next

    def __iter__(self) -> Iterator[Tuple[int, int, int]]:
        return iter(self._order)

    def __len__(self) -> int:
        return len(self._order)

    def copy(self) -> "KnowledgeSet":
        return KnowledgeSet(self._order)


def hypersphere(table: StateTable, center: int, radius: float,
                universe: Optional[Iterable[int]] = None,
                eps: float = EPS_GEOM) -> frozenset:
    """States of ``universe`` within ``radius`` (plus ``eps``) of ``center``."""
    if radius < 0:
        raise ValueError("radius must be non-negative")
    d = table.distances_from(center)
    if universe is None:
        return frozenset(np.flatnonzero(d <= radius + eps).tolist())
    return frozenset(j for j in universe if d[j] <= radius + eps)


def grid(lo: float, hi: float, step: float) -> np.ndarray:
    """Uniform 1-D grid ``lo, lo+step, ..., hi`` built index by index.

    Each point is computed exactly as a rational and rounded once, so grid
    values do not accumulate drift.
    """
    flo, fhi, fstep = Fraction(str(lo)), Fraction(str(hi)), Fraction(str(step))
    if fstep <= 0:
        raise ValueError("step must be positive")
    n = (fhi - flo) / fstep
    if n.denominator != 1 or n < 0:
        raise ValueError(f"grid [{lo}, {hi}] is not a whole number of {step} steps")
    return np.array([float(flo + k * fstep) for k in range(int(n) + 1)])

