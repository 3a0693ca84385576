import numpy as np
import pytest
from hypothesis import HealthCheck, given, settings, strategies as st

from lipsafe.core import ActionTable, DeterminismError, KnowledgeSet, LipschitzConstants, StateTable
from lipsafe.optimizer import expected_reduction
from lipsafe.uncertainty import (LipschitzViolation, UncertaintyMap, compute_fu,
                                 expand_knowledge, total_uncertainty)

from oracles import feed, index_of, random_instance


@pytest.fixture
def muddy_map(muddy):
    states = StateTable(muddy.state_samples())
    actions = ActionTable(muddy.action_samples())
    return UncertaintyMap(states, actions, muddy.lipschitz)


def test_fresh_muddy_total_uncertainty(muddy_map):
    assert muddy_map.total_uncertainty() == 101 * 121 * 101 == 1_234_321
    assert total_uncertainty(muddy_map) == 1_234_321


def test_single_triplet_example(muddy_map):
    st_, ac = muddy_map.states, muddy_map.actions
    s0, s02, one = index_of(st_, 0.0), index_of(st_, 0.2), index_of(st_, 1.0)
    a1 = int(np.argmin(np.abs(ac.coords[:, 0] - 1.0)))
    assert muddy_map.count(s02, a1) == 101
    summary = muddy_map.record_transition(s0, a1, one)
    assert summary.added and summary.removed > 0
    got = sorted(round(st_.scalar(i), 6) for i in muddy_map.members(s02, a1))
    assert got == [0.4, 0.6, 0.8, 1.0, 1.2, 1.4, 1.6]
    scratch = compute_fu(st_, ac, muddy_map.lipschitz, muddy_map.knowledge, s02, a1)
    assert scratch == muddy_map.members(s02, a1)
    assert muddy_map.members(s0, a1) == {one}


def test_compute_fu_trivial_cases():
    states, actions = StateTable([0.0, 1.0, 2.0]), ActionTable([0.0])
    lip = LipschitzConstants(1.0, 1.0)
    assert compute_fu(states, actions, lip, [], 0, 0) == {0, 1, 2}
    assert compute_fu(states, actions, lip, [(0, 0, 2)], 0, 0) == {2}


def test_recording_known_triplet_removes_nothing(muddy_map):
    muddy_map.record_transition(50, 60, 55)
    before = muddy_map.snapshot()
    summary = muddy_map.record_transition(50, 60, 55)
    assert summary.removed == 0 and not summary.added
    after = muddy_map.snapshot()
    assert np.array_equal(before["lo"], after["lo"]) and np.array_equal(before["hi"], after["hi"])
    with pytest.raises(DeterminismError):
        muddy_map.record_transition(50, 60, 56)


def test_contradiction_raises_and_leaves_map_untouched():
    states, actions = StateTable([0.0, 1.0, 5.0]), ActionTable([0.0])
    umap = UncertaintyMap(states, actions, LipschitzConstants(1.0, 1.0))
    umap.record_transition(0, 0, 0)
    snap = umap.snapshot()
    with pytest.raises(LipschitzViolation):
        umap.record_transition(1, 0, 2)  # |f(1) - f(0)| = 5 > 1
    assert np.array_equal(umap.lo, snap["lo"]) and len(umap.knowledge) == 1


def test_all_known_map_counts_one_per_pair():
    states, actions = StateTable([0.0, 1.0, 2.0]), ActionTable([-1.0, 1.0])
    umap = UncertaintyMap(states, actions, LipschitzConstants(1.0, 1.0))
    f = {(0, 0): 0, (0, 1): 1, (1, 0): 0, (1, 1): 2, (2, 0): 1, (2, 1): 2}
    for (s, a), t in f.items():
        umap.record_transition(s, a, t)
    assert umap.total_uncertainty() == 3 * 2


def test_expand_knowledge_three_state_example():
    # Learning f(0, a0) = 1 leaves a ball of radius 0.5 * 1 = 0.5 around 1 for
    # (1, a0), which holds only state 1 on a unit-spaced grid.
    states, actions = StateTable([0.0, 1.0, 2.0]), ActionTable([0.0, 1.0])
    umap = UncertaintyMap(states, actions, LipschitzConstants(0.5, 5.0))
    assert umap.expand_knowledge("discrete") == []
    umap.record_transition(0, 0, 1)
    added = umap.expand_knowledge("discrete")
    assert (1, 0, 1) in added
    assert umap.knowledge.outcome(1, 0) == 1


def test_expand_knowledge_noop_when_nothing_is_singleton(muddy_map):
    assert muddy_map.expand_knowledge("continuous") == []
    assert muddy_map.expand_knowledge("discrete") == []
    with pytest.raises(ValueError):
        muddy_map.expand_knowledge("fuzzy")


def test_module_level_expand_knowledge():
    states, actions = StateTable([0.0, 1.0, 2.0]), ActionTable([0.0, 1.0])
    umap = UncertaintyMap(states, actions, LipschitzConstants(0.5, 5.0))
    umap.record_transition(0, 0, 1)
    k = expand_knowledge(umap.knowledge, umap)
    assert (1, 0, 1) in k
    with pytest.raises(ValueError):
        expand_knowledge(KnowledgeSet(), umap)


def test_continuous_singleton_interns_point():
    # Two triplets pin (1, a0) to exactly 1.5, which is not a sample yet.
    states, actions = StateTable([0.0, 1.0, 2.0]), ActionTable([0.0])
    umap = UncertaintyMap(states, actions, LipschitzConstants(1.0, 1.0))
    umap.record_transition(0, 0, 0)     # f(1) in [-1, 1]
    umap.record_transition(2, 0, 2)     # f(1) in [1, 3]
    added = umap.expand_knowledge("continuous")
    assert len(added) == 1
    s, a, t = added[0]
    assert (s, a) == (1, 0) and states.scalar(t) == 1.0


def test_interning_extends_rows_and_sets():
    states, actions = StateTable([0.0, 1.0, 2.0]), ActionTable([0.0])
    umap = UncertaintyMap(states, actions, LipschitzConstants(1.0, 1.0))
    umap.record_transition(0, 0, 1)
    idx, fresh = umap.intern([0.5])
    assert fresh and umap.n_rows == 4
    assert umap.contains(0, 0, idx) is False
    assert idx in umap.members(1, 0)        # ball radius 1 around 1
    scratch = compute_fu(states, actions, umap.lipschitz, umap.knowledge, idx, 0)
    assert umap.members(idx, 0) == scratch


@settings(max_examples=200, deadline=None, suppress_health_check=[HealthCheck.too_slow])
@given(st.integers(0, 2**32 - 1))
def test_incremental_map_matches_scratch(seed):
    rng = np.random.default_rng(seed)
    umap, proposals = random_instance(rng)
    feed(umap, proposals)
    states, actions = umap.states, umap.actions
    for s in states.indices():
        for a in range(len(actions)):
            assert umap.members(s, a) == compute_fu(states, actions, umap.lipschitz,
                                                    umap.knowledge, s, a)


@settings(max_examples=200, deadline=None, suppress_health_check=[HealthCheck.too_slow])
@given(st.integers(0, 2**32 - 1))
def test_uncertainty_never_grows_and_reduction_is_nonnegative(seed):
    rng = np.random.default_rng(seed)
    umap, proposals = random_instance(rng)
    pairs = [(s, a) for s in umap.states.indices() for a in range(umap.n_actions)]
    sets = {p: umap.members(*p) for p in pairs}
    total = umap.total_uncertainty()
    for trip in proposals:
        if not feed(umap, [trip]):
            continue
        umap.expand_knowledge("discrete")
        for p in pairs:
            now = umap.members(*p)
            assert now <= sets[p]
            sets[p] = now
        assert umap.total_uncertainty() <= total
        total = umap.total_uncertainty()
        for p in pairs:
            assert expected_reduction(*p, umap) >= 0


def test_support_widens_uncertain_pairs_only():
    states, actions = StateTable([0.0, 1.0, 2.0, 3.0]), ActionTable([0.0])
    umap = UncertaintyMap(states, actions, LipschitzConstants(1.0, 1.0))
    assert umap.cell_radius == 0.5
    umap.record_transition(0, 0, 1)
    # (0, a) is pinned: support equals the exact member
    assert umap.support(0, 0) == {1}
    # (1, a) lies in [0, 2]; cells reach 0.5 further, adding nothing new here
    assert umap.support(1, 0) == umap.members(1, 0) == {0, 1, 2}
    idx, _ = umap.intern([2.4])
    assert idx not in umap.members(1, 0) and idx in umap.support(1, 0)
