"""Scoring and greedy selection of the next uncertain action.

A candidate is a launch state reachable through known transitions plus one
uncertain action whose every possible outcome is already certified safe.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, List, Optional

import numpy as np

from ._kernels import hypothetical_growth, outcomes_that_expand, removed_total
from .core import KnowledgeSet
from .planning import bfs_tree, f_certain, path_from_tree
from .safety import SafeSet, safe_pair_mask
from .uncertainty import UncertaintyMap

__all__ = [
    "Candidate",
    "NoCandidateError",
    "expected_reduction",
    "expected_expansion",
    "optimize_greedily",
    "optimize_expansion",
    "boundary_states",
    "boundary_seeking_action",
]


class NoCandidateError(RuntimeError):
    """No safe action is reachable from the current state."""


@dataclass(frozen=True)
class Candidate:
    launch_state: int
    action: int
    path: List[int] = field(default_factory=list)
    score: float = 0.0


def _active_pairs(umap: UncertaintyMap, radius: np.ndarray, cmin: float, cmax: float,
                  rows: int) -> np.ndarray:
    """Pairs whose bounds some outcome in ``[cmin, cmax]`` would tighten."""
    return (cmax - radius > umap.lo[:rows]) | (cmin + radius < umap.hi[:rows])


def expected_reduction(s: int, a: int, umap: UncertaintyMap) -> float:
    """Mean number of candidates removed over original-sample pairs if ``(s, a)``
    were learnt, averaging uniformly over its possible outcomes."""
    outcomes = umap.member_array(s, a)
    if len(outcomes) == 0:
        return 0.0
    rows = umap.states.original_count
    coords = umap.states.coords[:, 0]
    c = coords[outcomes]
    radius = umap.radii(s, a, rows)
    active = _active_pairs(umap, radius, c.min(), c.max(), rows)
    if not active.any():
        return 0.0
    removed = removed_total(umap.sorted_coords, umap.lo[:rows][active],
                            umap.hi[:rows][active], umap.counts()[:rows][active],
                            radius[active], c, umap.eps)
    return float(removed / len(outcomes))


def _unsafe_prefix(umap: UncertaintyMap, in_safe: np.ndarray) -> np.ndarray:
    return np.concatenate(([0], np.cumsum(~in_safe[umap.sorted_indices])))


@dataclass
class _ExpansionContext:
    version: int
    members: frozenset
    in_safe: np.ndarray
    outside: np.ndarray
    unsafe_prefix: np.ndarray


def _expansion_context(umap: UncertaintyMap, safe_next: SafeSet) -> _ExpansionContext:
    in_safe = safe_next.mask(umap.n_rows)
    return _ExpansionContext(umap.version, safe_next.members, in_safe,
                             np.flatnonzero(~in_safe), _unsafe_prefix(umap, in_safe))


def expected_expansion(s: int, a: int, umap: UncertaintyMap, safe_next: SafeSet,
                       _ctx: Optional[_ExpansionContext] = None) -> float:
    """Mean growth of the certified set (original samples only) if ``(s, a)``
    were learnt, averaging uniformly over its possible outcomes.

    ``safe_next`` must already be closed under expansion for the current map.
    """
    outcomes = umap.member_array(s, a)
    if len(outcomes) == 0:
        return 0.0
    ctx = _ctx
    if ctx is None or ctx.version != umap.version or ctx.members is not safe_next.members:
        ctx = _expansion_context(umap, safe_next)
    if not len(ctx.outside):
        return 0.0
    coords = umap.states.coords[:, 0]
    lip = umap.lipschitz
    c_out = coords[outcomes]
    # Only pairs of uncertified states can newly become safe, and only if
    # the hypothetical triplet tightens them.
    radius = (lip.l_s * np.abs(coords[ctx.outside] - coords[s]))[:, None] + \
        (lip.l_a * umap.actions.dist[a])[None, :]
    lo_out, hi_out = umap.lo[ctx.outside], umap.hi[ctx.outside]
    active = (c_out.max() - radius > lo_out) | (c_out.min() + radius < hi_out)
    if not active.any():
        return 0.0
    r, base_lo, base_hi = radius[active], lo_out[active], hi_out[active]
    orig = umap.states.original_count
    hits = outcomes_that_expand(umap.sorted_coords, ctx.unsafe_prefix, base_lo, base_hi,
                                r, c_out, umap.eps, umap.cell_radius)
    total = 0
    if hits.any():
        # Something expands: run the full fixed point on the hypothetical map.
        full_radius = umap.radii(s, a)
        left, right = umap.support_indices()
        for c in c_out[hits]:
            total += hypothetical_growth(umap.sorted_coords, umap.sorted_indices, ctx.in_safe,
                                         umap.lo, umap.hi, left, right, full_radius, float(c),
                                         umap.eps, umap.cell_radius, orig)
    return total / len(outcomes)


def _launch_candidates(current: int, safe_next: SafeSet, umap: UncertaintyMap,
                       knowledge: KnowledgeSet, skip_known: bool):
    """Yield ``(state, path, safe actions)`` in ascending state order."""
    tree = bfs_tree(current, knowledge)
    ok = safe_pair_mask(umap, safe_next.mask(umap.n_rows))
    if skip_known:
        ok = ok & ~umap.known
    for s in sorted(safe_next.members):
        if s != current and s not in tree:
            continue
        actions = np.flatnonzero(ok[s])
        if not len(actions):
            continue
        path = [] if s == current else path_from_tree(tree, s)
        yield s, path, actions


def _greedy(current: int, safe_next: SafeSet, umap: UncertaintyMap,
            knowledge: KnowledgeSet, measure: Callable[[int, int], float]) -> Optional[Candidate]:
    best: Optional[Candidate] = None
    best_score = 0.0
    for s, path, actions in _launch_candidates(current, safe_next, umap, knowledge, True):
        for a in actions.tolist():
            score = measure(s, a) / (len(path) + 1)
            if score > best_score:
                best_score = score
                best = Candidate(s, a, path, score)
    if best is not None:
        assert f_certain(current, best.path, knowledge) == best.launch_state
        assert umap.support(best.launch_state, best.action) <= safe_next.members
    return best


def optimize_greedily(current: int, safe_next: SafeSet, umap: UncertaintyMap,
                      knowledge: Optional[KnowledgeSet] = None) -> Optional[Candidate]:
    """Reachable safe candidate maximizing expected uncertainty reduction per action.

    Known pairs are skipped (learning them again removes nothing).  Ties keep
    the first candidate in (state, action) order; returns None when every
    score is zero.
    """
    knowledge = umap.knowledge if knowledge is None else knowledge
    return _greedy(current, safe_next, umap, knowledge,
                   lambda s, a: expected_reduction(s, a, umap))


def optimize_expansion(current: int, safe_next: SafeSet, umap: UncertaintyMap,
                       knowledge: Optional[KnowledgeSet] = None) -> Optional[Candidate]:
    """Like :func:`optimize_greedily` but scored by expected safe-set growth."""
    knowledge = umap.knowledge if knowledge is None else knowledge
    ctx = _expansion_context(umap, safe_next)
    return _greedy(current, safe_next, umap, knowledge,
                   lambda s, a: expected_expansion(s, a, umap, safe_next, ctx))


def boundary_states(safe_next: SafeSet, umap: UncertaintyMap) -> List[int]:
    """Safe states closest to an original sample outside the safe set."""
    orig = umap.states.original_count
    coords = umap.states.coords[:, 0]
    members = np.array(sorted(safe_next.members), dtype=np.int64)
    outside = np.array([i for i in range(orig) if i not in safe_next.members], dtype=np.int64)
    if not len(outside):
        return members.tolist()
    gap = np.abs(coords[members][:, None] - coords[outside][None, :]).min(axis=1)
    return members[gap <= gap.min() + umap.eps].tolist()


def boundary_seeking_action(current: int, safe_next: SafeSet, umap: UncertaintyMap,
                            knowledge: Optional[KnowledgeSet] = None) -> Candidate:
    """Safe candidate whose outcome is expected to land closest to the boundary."""
    knowledge = umap.knowledge if knowledge is None else knowledge
    coords = umap.states.coords[:, 0]
    targets = coords[boundary_states(safe_next, umap)]
    left, right = umap.support_indices()
    order = umap.sorted_indices
    best: Optional[Candidate] = None
    best_dist = np.inf
    for s, path, actions in _launch_candidates(current, safe_next, umap, knowledge, False):
        for a in actions.tolist():
            outs = coords[order[left[s, a]:right[s, a]]]
            dist = float(np.abs(outs[:, None] - targets[None, :]).min(axis=1).mean())
            if dist < best_dist:
                best_dist = dist
                best = Candidate(s, a, path, -dist)
    if best is None:
        raise NoCandidateError(f"no safe action reachable from state {current}")
    return best
