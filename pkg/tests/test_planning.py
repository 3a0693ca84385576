import numpy as np
from hypothesis import given, settings, strategies as st

from lipsafe.core import KnowledgeSet
from lipsafe.planning import UNKNOWN, bfs_tree, f_certain, path_exists, shortest_path

from oracles import enumerate_shortest


def test_f_certain_lookups():
    k = KnowledgeSet([(0, 1, 2), (2, 0, 3)])
    assert f_certain(0, 1, k) == 2
    assert f_certain(0, 0, k) is UNKNOWN and not UNKNOWN
    assert f_certain(0, [1, 0], k) == 3
    assert f_certain(0, [1, 1], k) is UNKNOWN
    assert f_certain(5, [], k) == 5
    assert repr(UNKNOWN) == "UNKNOWN"


def test_path_exists_examples():
    k = KnowledgeSet([(0, 0, 1), (1, 1, 2)])
    assert path_exists(4, 4, k)
    assert path_exists(0, 2, k)
    assert not path_exists(2, 0, k)


def test_shortest_path_examples():
    k = KnowledgeSet([(0, 0, 1), (1, 1, 2)])
    assert shortest_path(3, 3, k) == []
    assert shortest_path(0, 2, k) == [0, 1]
    assert shortest_path(2, 0, k) is None
    diamond = KnowledgeSet([(0, 0, 1), (1, 0, 3), (0, 1, 3), (0, 2, 2), (2, 0, 3)])
    assert shortest_path(0, 3, diamond) == [1]


def test_tie_break_prefers_low_state_then_low_action():
    # two 2-hop routes 0->1->3 and 0->2->3; state 1 is expanded first
    k = KnowledgeSet([(0, 1, 2), (0, 2, 1), (2, 0, 3), (1, 0, 3)])
    assert shortest_path(0, 3, k) == [2, 0]
    tree = bfs_tree(0, k)
    assert tree[3] == (2, 1, 0)


@settings(max_examples=120, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_bfs_matches_exhaustive_enumeration(seed):
    rng = np.random.default_rng(seed)
    n_states = int(rng.integers(2, 8))
    n_actions = int(rng.integers(1, 4))
    k = KnowledgeSet()
    for s in range(n_states):
        for a in range(n_actions):
            if rng.random() < 0.5:
                k.add(s, a, int(rng.integers(n_states)))
    for s in range(n_states):
        for t in range(n_states):
            want = enumerate_shortest(s, t, k, n_states, n_actions, n_states)
            got = shortest_path(s, t, k)
            if want is None:
                assert got is None and not path_exists(s, t, k)
            else:
                assert len(got) == want and path_exists(s, t, k)
                assert f_certain(s, got, k) == t
