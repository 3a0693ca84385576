"""Uncertain transition function maintained incrementally.

For a 1-D state space every Lipschitz ball is a closed interval, so the set of
outcomes still consistent with the knowledge for a pair ``(s, a)`` is the
universe restricted to one interval ``[lo, hi]``.  The map stores those two
bounds per pair and counts members against the sorted universe; this is exact
and makes both updates and hypothetical updates cheap.

:func:`compute_fu` is the literal ball-intersection over all triplets, kept as
an independent reference that works in any dimension.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, List, Optional, Tuple

import numpy as np

from .core import (EPS_GEOM, ActionTable, DeterminismError, KnowledgeSet,
                   LipschitzConstants, StateTable, hypersphere)

__all__ = [
    "LipschitzViolation",
    "UpdateSummary",
    "UncertaintyMap",
    "compute_fu",
    "expand_knowledge",
    "total_uncertainty",
]


class LipschitzViolation(RuntimeError):
    """Knowledge and Lipschitz constants admit no outcome for some pair."""

    def __init__(self, state: int, action: int, detail: str = ""):
        self.state = state
        self.action = action
        msg = f"no outcome left for (state {state}, action {action})"
        super().__init__(msg + (f": {detail}" if detail else ""))


@dataclass(frozen=True)
class UpdateSummary:
    added: bool
    removed: int
    pairs_changed: int


def compute_fu(states: StateTable, actions: ActionTable, lipschitz: LipschitzConstants,
               knowledge: Iterable[Tuple[int, int, int]], s: int, a: int,
               universe: Optional[Iterable[int]] = None, eps: float = EPS_GEOM) -> frozenset:
    """Outcomes of ``(s, a)`` consistent with every triplet, from scratch."""
    result = frozenset(states.indices() if universe is None else universe)
    for s1, a1, s2 in knowledge:
        radius = lipschitz.l_s * states.distance(s1, s) + lipschitz.l_a * actions.distance(a1, a)
        result = result & hypersphere(states, s2, radius, result, eps)
    return result


class UncertaintyMap:
    """Candidate-outcome sets for every (state, action) pair.

    The universe of candidate outcomes is every entry of ``states``; new
    entries must be added through :meth:`intern` so that rows and membership
    stay in sync.
    """

    def __init__(self, states: StateTable, actions: ActionTable,
                 lipschitz: LipschitzConstants, knowledge: Optional[KnowledgeSet] = None,
                 eps: float = EPS_GEOM, cell_radius: Optional[float] = None):
        if states.dim != 1:
            raise ValueError("interval-backed uncertainty map needs a 1-D state space")
        self.states = states
        self.actions = actions
        self.lipschitz = lipschitz
        self.eps = eps
        self.knowledge = KnowledgeSet()
        n_act = len(actions)
        cap = max(2 * len(states), 16)
        self._lo = np.full((cap, n_act), -np.inf)
        self._hi = np.full((cap, n_act), np.inf)
        self._known = np.zeros((cap, n_act), dtype=bool)
        self._rows = 0
        self._xs = np.empty(0)
        self._order = np.empty(0, dtype=np.int64)
        self._version = 0
        self._cache_version = -1
        self._bounds_cache: Tuple[np.ndarray, np.ndarray] = (np.empty(0), np.empty(0))
        self._support_version = -1
        self._support_cache: Tuple[np.ndarray, np.ndarray] = (np.empty(0), np.empty(0))
        if cell_radius is None:
            gaps = np.diff(np.sort(states.coords[: states.original_count, 0]))
            cell_radius = float(gaps.min()) / 2 if len(gaps) else 0.0
        #: reach of a sample's cell; defaults to half the original spacing
        self.cell_radius = float(cell_radius)
        self._sync_rows()
        for t in (knowledge or ()):
            self.record_transition(*t)

    # -- shape ----------------------------------------------------------------
    @property
    def n_rows(self) -> int:
        return self._rows

    @property
    def n_actions(self) -> int:
        return len(self.actions)

    @property
    def lo(self) -> np.ndarray:
        return self._lo[: self._rows]

    @property
    def hi(self) -> np.ndarray:
        return self._hi[: self._rows]

    @property
    def known(self) -> np.ndarray:
        return self._known[: self._rows]

    @property
    def version(self) -> int:
        return self._version

    @property
    def sorted_coords(self) -> np.ndarray:
        """Universe coordinates in ascending order."""
        return self._xs

    @property
    def sorted_indices(self) -> np.ndarray:
        """State index of each entry of :attr:`sorted_coords`."""
        return self._order

    def _grow(self, rows: int) -> None:
        if rows <= len(self._lo):
            return
        cap = max(rows, 2 * len(self._lo))
        n_act = self.n_actions
        for name, fill in (("_lo", -np.inf), ("_hi", np.inf), ("_known", False)):
            old = getattr(self, name)
            new = np.full((cap, n_act), fill, dtype=old.dtype)
            new[: self._rows] = old[: self._rows]
            setattr(self, name, new)

    def _sync_rows(self) -> List[int]:
        """Create rows and universe entries for states interned elsewhere."""
        n = len(self.states)
        fresh = list(range(self._rows, n))
        if not fresh:
            return fresh
        self._grow(n)
        coords = self.states.coords[:, 0]
        for i in fresh:
            self._lo[i], self._hi[i] = self._row_bounds(coords[i])
        self._rows = n
        self._order = np.argsort(coords, kind="stable")
        self._xs = coords[self._order]
        self._version += 1
        return fresh

    def _row_bounds(self, x: float) -> Tuple[np.ndarray, np.ndarray]:
        n_act = self.n_actions
        if not len(self.knowledge):
            return np.full(n_act, -np.inf), np.full(n_act, np.inf)
        trip = np.array(list(self.knowledge), dtype=np.int64)
        coords = self.states.coords[:, 0]
        src, act, dst = coords[trip[:, 0]], trip[:, 1], coords[trip[:, 2]]
        radius = (self.lipschitz.l_s * np.abs(src - x))[:, None] + \
            self.lipschitz.l_a * self.actions.dist[act]
        lo = (dst[:, None] - radius).max(axis=0)
        hi = (dst[:, None] + radius).min(axis=0)
        return lo, hi

    def intern(self, coords) -> Tuple[int, bool]:
        """Intern a state in the shared table and extend the map with it."""
        idx, fresh = self.states.intern(coords)
        if fresh or idx >= self._rows:
            self._sync_rows()
        return idx, fresh

    # -- membership -----------------------------------------------------------
    def count_between(self, lo, hi) -> np.ndarray:
        """Number of universe points within ``eps`` of ``[lo, hi]`` (broadcasts)."""
        left = np.searchsorted(self._xs, np.asarray(lo) - self.eps, side="left")
        right = np.searchsorted(self._xs, np.asarray(hi) + self.eps, side="right")
        return np.maximum(right - left, 0)

    def bounds_indices(self) -> Tuple[np.ndarray, np.ndarray]:
        """Per-pair ``(left, right)`` slice of the sorted universe, cached."""
        if self._cache_version != self._version:
            left = np.searchsorted(self._xs, self.lo - self.eps, side="left")
            right = np.searchsorted(self._xs, self.hi + self.eps, side="right")
            self._bounds_cache = (left, np.maximum(right, left))
            self._cache_version = self._version
        return self._bounds_cache

    def support_indices(self) -> Tuple[np.ndarray, np.ndarray]:
        """Per-pair slice of universe points whose cell the outcome may hit.

        Samples stand for their neighbourhood of radius :attr:`cell_radius`.
        For a pair with an uncertain (non-degenerate) interval the true
        outcome may fall anywhere in it, so every point within the cell
        radius of the interval is included.  Pairs whose outcome is pinned to
        a point keep their exact members.  Used for safety checks only.
        """
        if self._support_version != self._version:
            left, right = self.bounds_indices()
            wide = self.hi - self.lo > self.eps
            left, right = left.copy(), right.copy()
            if wide.any() and self.cell_radius > 0:
                r = self.cell_radius + self.eps
                left[wide] = np.searchsorted(self._xs, self.lo[wide] - r, side="left")
                right[wide] = np.searchsorted(self._xs, self.hi[wide] + r, side="right")
            self._support_cache = (left, np.maximum(right, left))
            self._support_version = self._version
        return self._support_cache

    def support(self, s: int, a: int) -> frozenset:
        """Universe points whose cell the outcome of ``(s, a)`` may hit."""
        left, right = self.support_indices()
        return frozenset(self._order[left[s, a]:right[s, a]].tolist())

    def counts(self) -> np.ndarray:
        left, right = self.bounds_indices()
        return right - left

    def count(self, s: int, a: int) -> int:
        left, right = self.bounds_indices()
        return int(right[s, a] - left[s, a])

    def members(self, s: int, a: int) -> frozenset:
        left, right = self.bounds_indices()
        return frozenset(self._order[left[s, a]:right[s, a]].tolist())

    def member_array(self, s: int, a: int) -> np.ndarray:
        """Members of ``(s, a)`` as state indices, ordered by coordinate."""
        left, right = self.bounds_indices()
        return self._order[left[s, a]:right[s, a]]

    def contains(self, s: int, a: int, j: int) -> bool:
        x = self.states.scalar(j)
        return bool(self.lo[s, a] - self.eps <= x <= self.hi[s, a] + self.eps)

    def interval(self, s: int, a: int) -> Tuple[float, float]:
        """Continuous outcome interval of ``(s, a)``."""
        return float(self.lo[s, a]), float(self.hi[s, a])

    def is_known(self, s: int, a: int) -> bool:
        return bool(self._known[s, a])

    # -- updates --------------------------------------------------------------
    def radii(self, s: int, a: int, rows: Optional[int] = None) -> np.ndarray:
        """Ball radius ``L_s d(s, s') + L_a d(a, a')`` for every pair ``(s', a')``."""
        n = self._rows if rows is None else rows
        coords = self.states.coords[:n, 0]
        ds = np.abs(coords - self.states.scalar(s))
        return (self.lipschitz.l_s * ds)[:, None] + \
            (self.lipschitz.l_a * self.actions.dist[a])[None, :]

    def hypothetical_bounds(self, s: int, a: int, outcome: int,
                            rows: Optional[int] = None) -> Tuple[np.ndarray, np.ndarray]:
        """Bounds every pair would have if ``(s, a, outcome)`` were learnt."""
        n = self._rows if rows is None else rows
        radius = self.radii(s, a, n)
        c = self.states.scalar(outcome)
        return np.maximum(self._lo[:n], c - radius), np.minimum(self._hi[:n], c + radius)

    def record_transition(self, s: int, a: int, s_next: int) -> UpdateSummary:
        """Learn ``f(s, a) = s_next`` and shrink every pair's candidate set.

        Raises :class:`LipschitzViolation` (leaving the map untouched) if some
        pair would have no consistent outcome left.
        """
        if s_next >= self._rows or s >= self._rows:
            self._sync_rows()
        known = self.knowledge.outcome(s, a)
        if known is not None:
            if known != s_next:
                raise DeterminismError(
                    f"({s}, {a}) already leads to {known}, refusing outcome {s_next}")
            return UpdateSummary(added=False, removed=0, pairs_changed=0)
        new_lo, new_hi = self.hypothetical_bounds(s, a, s_next)
        empty = new_lo > new_hi + 2 * self.eps
        if empty.any():
            bad_s, bad_a = (int(v) for v in np.argwhere(empty)[0])
            raise LipschitzViolation(
                bad_s, bad_a,
                f"learning ({s}, {a}, {s_next}) empties the outcome interval")
        before = self.counts()
        changed = (new_lo != self.lo) | (new_hi != self.hi)
        self.knowledge.add(s, a, s_next)
        self._lo[: self._rows] = new_lo
        self._hi[: self._rows] = new_hi
        self._known[s, a] = True
        self._version += 1
        removed = int(before.sum() - self.counts().sum())
        return UpdateSummary(added=True, removed=removed, pairs_changed=int(changed.sum()))

    def expand_knowledge(self, mode: str = "discrete") -> List[Tuple[int, int, int]]:
        """Add every unknown pair whose outcome is already determined.

        ``mode="discrete"`` treats a pair as determined when exactly one
        universe state is a candidate.  ``mode="continuous"`` requires the
        outcome interval itself to collapse to a point, which is then interned
        as a state if needed; this is the sound rule when true outcomes need
        not be universe states.
        """
        if mode not in ("discrete", "continuous"):
            raise ValueError(f"unknown mode {mode!r}")
        added: List[Tuple[int, int, int]] = []
        while True:
            if mode == "discrete":
                todo = np.argwhere((self.counts() == 1) & ~self.known)
            else:
                width = self.hi - self.lo
                todo = np.argwhere((width <= self.eps) & ~self.known)
            if not len(todo):
                return added
            for s, a in todo.tolist():
                if self._known[s, a]:
                    continue
                if mode == "discrete":
                    members = self.member_array(s, a)
                    if len(members) != 1:
                        continue
                    target = int(members[0])
                else:
                    lo, hi = self.interval(s, a)
                    if hi - lo > self.eps:
                        continue
                    target, _ = self.intern([0.5 * (lo + hi)])
                self.record_transition(s, a, target)
                added.append((s, a, target))

    def total_uncertainty(self) -> int:
        """Sum of candidate counts over original-sample states and all actions."""
        return int(self.counts()[: self.states.original_count].sum())

    def snapshot(self) -> dict:
        """Pair bounds and universe size, for comparing map states."""
        return {"rows": self._rows, "lo": self.lo.copy(), "hi": self.hi.copy(),
                "knowledge": len(self.knowledge)}


def expand_knowledge(knowledge: KnowledgeSet, umap: UncertaintyMap,
                     mode: str = "discrete") -> KnowledgeSet:
    if knowledge is not umap.knowledge:
        raise ValueError("map does not track this knowledge set")
    umap.expand_knowledge(mode)
    return knowledge


def total_uncertainty(umap: UncertaintyMap) -> int:
    return umap.total_uncertainty()
