"""Planning over certain transitions: lookups, reachability and BFS paths."""
from __future__ import annotations

from typing import Dict, List, Optional, Sequence, Tuple, Union

from .core import KnowledgeSet

__all__ = ["UNKNOWN", "f_certain", "path_exists", "shortest_path", "bfs_tree",
           "path_from_tree"]


class _Unknown:
    """Placeholder outcome for a transition that has not been learnt."""

    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self) -> str:
        return "UNKNOWN"

    def __bool__(self) -> bool:
        return False


UNKNOWN = _Unknown()


def f_certain(s: int, a: Union[int, Sequence[int]], knowledge: KnowledgeSet):
    """Known outcome of an action (or action sequence) from ``s``, else UNKNOWN."""
    if isinstance(a, (list, tuple)):
        cur = s
        for step in a:
            cur = knowledge.outcome(cur, step)
            if cur is None:
                return UNKNOWN
        return cur
    out = knowledge.outcome(s, int(a))
    return UNKNOWN if out is None else out


def bfs_tree(source: int, knowledge: KnowledgeSet) -> Dict[int, Tuple[int, int, int]]:
    """Breadth-first tree over known transitions from ``source``.

    Maps each reachable state to ``(depth, parent, action)``.  Levels are
    expanded in ascending state order and edges in ascending action order, so
    the first path found among equally short ones is deterministic.
    """
    tree = {source: (0, -1, -1)}
    level = [source]
    depth = 0
    while level:
        depth += 1
        nxt = []
        for u in sorted(level):
            succ = knowledge.successors(u)
            for a in sorted(succ):
                v = succ[a]
                if v not in tree:
                    tree[v] = (depth, u, a)
                    nxt.append(v)
        level = nxt
    return tree


def path_from_tree(tree: Dict[int, Tuple[int, int, int]], target: int) -> Optional[List[int]]:
    if target not in tree:
        return None
    actions = []
    v = target
    while True:
        _, parent, a = tree[v]
        if parent < 0:
            break
        actions.append(a)
        v = parent
    actions.reverse()
    return actions


def path_exists(s: int, t: int, knowledge: KnowledgeSet) -> bool:
    return s == t or t in bfs_tree(s, knowledge)


def shortest_path(s: int, t: int, knowledge: KnowledgeSet) -> Optional[List[int]]:
    """Fewest known actions leading from ``s`` to ``t``; ``[]`` if ``s == t``,
    None if ``t`` is unreachable."""
    if s == t:
        return []
    return path_from_tree(bfs_tree(s, knowledge), t)
