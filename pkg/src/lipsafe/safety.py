"""Certified safe sets and the brute-force ground-truth safety oracle."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, List, Optional, Tuple

import numpy as np

from .core import grid
from .environments import EnvironmentSpec
from .uncertainty import UncertaintyMap

__all__ = [
    "SafeSet",
    "GroundTruthSafety",
    "expand_safe_set",
    "expand_safe_set_naive",
    "safe_pair_mask",
    "safe_actions",
    "ground_truth_safe",
    "is_crash",
]


@dataclass(frozen=True)
class SafeSet:
    members: frozenset
    generation: int = 0

    @classmethod
    def of(cls, members: Iterable[int], generation: int = 0) -> "SafeSet":
        return cls(frozenset(int(m) for m in members), generation)

    def __contains__(self, s) -> bool:
        return s in self.members

    def __len__(self) -> int:
        return len(self.members)

    def mask(self, n: int) -> np.ndarray:
        m = np.zeros(n, dtype=bool)
        if self.members:
            m[list(self.members)] = True
        return m

    def count_original(self, original_count: int) -> int:
        return sum(1 for s in self.members if s < original_count)


def safe_pair_mask(umap: UncertaintyMap, in_safe: np.ndarray,
                   discrete: bool = False) -> np.ndarray:
    """Pairs whose outcome support is non-empty and lies inside ``in_safe``.

    The true state space is continuous, so an uncertain outcome is checked
    against every sample whose cell it may land in (see
    :meth:`UncertaintyMap.support_indices`), and an empty set is never
    vacuously safe.  With ``discrete`` set, the plain candidate sets are used.
    """
    left, right = umap.bounds_indices() if discrete else umap.support_indices()
    unsafe_sorted = ~in_safe[umap.sorted_indices]
    prefix = np.concatenate(([0], np.cumsum(unsafe_sorted)))
    return (right > left) & (prefix[right] == prefix[left])


def expand_safe_set(current: SafeSet, umap: UncertaintyMap,
                    trace: Optional[List[Tuple[int, int, int]]] = None) -> SafeSet:
    """Least fixed point of the expansion operator above ``current``.

    Each sweep adds every state having an action whose whole candidate set is
    already safe.  If ``trace`` is given, ``(state, witness action, sweep)``
    is appended for every added state.
    """
    n = umap.n_rows
    in_safe = current.mask(n)
    sweep = 0
    while True:
        ok = safe_pair_mask(umap, in_safe)
        new = ok.any(axis=1) & ~in_safe
        if not new.any():
            break
        sweep += 1
        if trace is not None:
            for s in np.flatnonzero(new):
                trace.append((int(s), int(np.argmax(ok[s])), sweep))
        in_safe |= new
    if sweep == 0:
        return SafeSet(current.members, current.generation + 1)
    return SafeSet(frozenset(np.flatnonzero(in_safe).tolist()), current.generation + 1)


def expand_safe_set_naive(current: SafeSet, umap: UncertaintyMap) -> SafeSet:
    """Set-based full-rescan version of :func:`expand_safe_set` (reference)."""
    members = set(current.members)
    while True:
        grown = set(members)
        for s in range(umap.n_rows):
            if s in members:
                continue
            for a in range(umap.n_actions):
                outcomes = umap.support(s, a)
                if outcomes and outcomes <= members:
                    grown.add(s)
                    break
        if grown == members:
            return SafeSet(frozenset(members), current.generation + 1)
        members = grown


def safe_actions(s: int, umap: UncertaintyMap, safe: SafeSet) -> List[int]:
    """Actions at ``s`` whose candidate outcomes all lie in ``safe``."""
    ok = safe_pair_mask(umap, safe.mask(umap.n_rows))
    return np.flatnonzero(ok[s]).tolist()


@dataclass
class GroundTruthSafety:
    """Safe/unsafe mask over a fine grid, from brute-force reachability."""

    env: EnvironmentSpec
    resolution: float
    grid: np.ndarray
    safe_mask: np.ndarray = field(repr=False)

    def nearest(self, s) -> Tuple[np.ndarray, np.ndarray]:
        s = np.asarray(s, dtype=float)
        k = np.clip(np.rint((s - self.grid[0]) / self.resolution), 0, len(self.grid) - 1)
        k = k.astype(np.int64)
        return k, np.abs(self.grid[k] - s)

    def is_safe(self, s):
        """Vectorized: nearest grid point is safe and within half a cell."""
        k, d = self.nearest(s)
        out = self.safe_mask[k] & (d <= self.resolution / 2 + 1e-9)
        return bool(out) if np.ndim(out) == 0 else out

    def safe_interval(self) -> Tuple[float, float]:
        """Hull of the safe grid points."""
        pts = self.grid[self.safe_mask]
        return float(pts.min()), float(pts.max())

    def safe_states(self, coords) -> np.ndarray:
        return self.is_safe(np.asarray(coords, dtype=float))


def ground_truth_safe(env: EnvironmentSpec, resolution: Optional[float] = None,
                      max_iter: int = 100_000) -> GroundTruthSafety:
    """States from which some action sequence reaches the initial safe set.

    Works backwards on a grid over the state range: a grid point is safe if a
    sampled action moves it (true dynamics) into the initial interval or to
    within half a cell of a grid point already known to be safe.

    The default resolution is a tenth of the state sampling step.  At the
    sampling step itself slow inward drift (e.g. the Hilly Jumper near its
    edge) rounds back onto the starting point and is wrongly reported unsafe.
    """
    lo, hi, step = env.state_grid
    if resolution is None:
        resolution = step / 10
    if resolution <= 0:
        raise ValueError("resolution must be positive")
    pts = grid(lo, hi, resolution)
    acts = env.action_samples()
    out = env.step(pts[:, None], acts[None, :])
    lands_in_s0 = env.in_initial_set(out).any(axis=1)
    k = np.clip(np.rint((out - pts[0]) / resolution), 0, len(pts) - 1).astype(np.int64)
    close = np.abs(pts[k] - out) <= resolution / 2 + 1e-9
    safe = env.in_initial_set(pts) | lands_in_s0
    for _ in range(max_iter):
        grown = safe | (close & safe[k]).any(axis=1)
        if np.array_equal(grown, safe):
            break
        safe = grown
    return GroundTruthSafety(env=env, resolution=resolution, grid=pts, safe_mask=safe)


def is_crash(s, oracle: GroundTruthSafety) -> bool:
    """True if ``s`` is not a ground-truth safe state."""
    return not oracle.is_safe(float(np.asarray(s, dtype=float).reshape(-1)[0]))
