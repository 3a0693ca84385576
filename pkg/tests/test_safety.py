import numpy as np
import pytest
from hypothesis import HealthCheck, given, settings, strategies as st

from lipsafe.core import ActionTable, LipschitzConstants, StateTable
from lipsafe.explorer import seed_initial_knowledge
from lipsafe.safety import (SafeSet, expand_safe_set, expand_safe_set_naive, is_crash,
                            safe_actions, safe_pair_mask)
from lipsafe.uncertainty import UncertaintyMap

from oracles import feed, index_of, random_instance


def chain_map():
    states, actions = StateTable([0.0, 1.0, 2.0]), ActionTable([-1.0])
    umap = UncertaintyMap(states, actions, LipschitzConstants(1.0, 1.0), cell_radius=0.0)
    return umap


def test_fully_uncertain_map_expands_nothing():
    umap = chain_map()
    s0 = SafeSet.of([0])
    assert expand_safe_set(s0, umap).members == s0.members


def test_one_step_expansion():
    umap = chain_map()
    umap.record_transition(1, 0, 0)
    assert expand_safe_set(SafeSet.of([0]), umap).members >= {0, 1}


def test_chain_needs_two_sweeps():
    umap = chain_map()
    umap.record_transition(2, 0, 1)
    umap.record_transition(1, 0, 0)
    trace = []
    out = expand_safe_set(SafeSet.of([0]), umap, trace)
    assert out.members == {0, 1, 2}
    assert [(s, sweep) for s, _, sweep in trace] == [(1, 1), (2, 2)]
    assert all(a == 0 for _, a, _ in trace)


def test_safe_set_generation_advances():
    umap = chain_map()
    s = SafeSet.of([0], generation=4)
    assert expand_safe_set(s, umap).generation == 5


def test_self_loop_is_a_safe_action():
    umap = chain_map()
    umap.record_transition(0, 0, 0)
    assert safe_actions(0, umap, SafeSet.of([0])) == [0]


def test_fresh_map_has_no_safe_actions(muddy):
    states, actions = StateTable(muddy.state_samples()), ActionTable(muddy.action_samples())
    umap = UncertaintyMap(states, actions, muddy.lipschitz)
    s0 = SafeSet.of(i for i in states.indices() if muddy.in_initial_set(states.scalar(i)))
    for s in (0, 50, 100):
        assert safe_actions(s, umap, s0) == []


def test_muddy_initial_safe_actions_at_origin(muddy):
    states, actions = StateTable(muddy.state_samples()), ActionTable(muddy.action_samples())
    k = seed_initial_knowledge(muddy, states, actions)
    umap = UncertaintyMap(states, actions, muddy.lipschitz, k)
    s0 = SafeSet.of(i for i in states.indices() if muddy.in_initial_set(states.scalar(i)))
    got = [round(actions.scalar(a), 6) for a in safe_actions(index_of(states, 0.0), umap, s0)]
    assert got == [round(-3.0 + 0.2 * k, 6) for k in range(31)]


def test_empty_candidate_set_is_never_safe():
    states, actions = StateTable([0.0, 1.0, 2.0]), ActionTable([0.0])
    umap = UncertaintyMap(states, actions, LipschitzConstants(0.2, 1.0))
    t, _ = umap.intern([0.35])
    umap.record_transition(0, 0, 0)     # f(1) in [-0.2, 0.2]
    umap.record_transition(2, 0, t)     # f(1) in [0.15, 0.55]
    assert umap.interval(1, 0) == pytest.approx((0.15, 0.2))
    assert umap.count(1, 0) == 0
    everything = np.ones(umap.n_rows, bool)
    assert not safe_pair_mask(umap, everything, discrete=True)[1, 0]
    # the outcome lands in the cells of 0.0 or 0.35, both safe here
    assert umap.support(1, 0) == {0, t}
    assert safe_pair_mask(umap, everything)[1, 0]


def test_cells_make_uncertain_pairs_conservative():
    # (1, a) is known to land in [0.9, 1.1]; the sample at 1.2 is one cell away.
    states, actions = StateTable([0.0, 1.0, 1.2]), ActionTable([0.0])
    umap = UncertaintyMap(states, actions, LipschitzConstants(0.1, 1.0))
    umap.record_transition(0, 0, 1)
    safe = np.array([True, True, False])
    assert umap.members(1, 0) == {1}
    assert safe_pair_mask(umap, safe, discrete=True)[1, 0]
    assert not safe_pair_mask(umap, safe)[1, 0]
    # once pinned, the exact member is all that counts
    umap.record_transition(1, 0, 1)
    assert safe_pair_mask(umap, safe)[1, 0]


@settings(max_examples=100, deadline=None, suppress_health_check=[HealthCheck.too_slow])
@given(st.integers(0, 2**32 - 1), st.booleans())
def test_vectorized_expansion_matches_naive(seed, cells):
    rng = np.random.default_rng(seed)
    umap, proposals = random_instance(rng, cell_radius=None if cells else 0.0)
    feed(umap, proposals)
    n = umap.n_rows
    start = SafeSet.of(np.flatnonzero(rng.random(n) < 0.4))
    fast = expand_safe_set(start, umap)
    assert fast.members == expand_safe_set_naive(start, umap).members
    assert fast.members >= start.members
    # idempotent: a fixed point
    assert expand_safe_set(fast, umap).members == fast.members


def test_ground_truth_intervals(muddy, hilly, muddy_oracle, hilly_oracle):
    ms = muddy.state_samples()
    safe = ms[muddy_oracle.safe_states(ms)]
    assert len(safe) == 89 and (safe.min(), safe.max()) == pytest.approx((-8.8, 8.8))
    hs = hilly.state_samples()
    safe = hs[hilly_oracle.safe_states(hs)]
    assert len(safe) == 133 and (safe.min(), safe.max()) == pytest.approx((-6.6, 6.6))


def test_ground_truth_examples(muddy_oracle, hilly_oracle):
    assert muddy_oracle.is_safe(8.8) and not muddy_oracle.is_safe(9.0)
    assert not muddy_oracle.is_safe(9.5)
    assert hilly_oracle.is_safe(6.6) and not hilly_oracle.is_safe(6.9)
    assert not is_crash(0.0, muddy_oracle)
    assert is_crash(10.0, muddy_oracle)
    assert not is_crash(0.0, hilly_oracle)
    assert np.array_equal(muddy_oracle.is_safe(np.array([0.0, 9.5])), [True, False])


def test_ground_truth_is_symmetric(muddy_oracle, hilly_oracle):
    for o in (muddy_oracle, hilly_oracle):
        assert np.array_equal(o.safe_mask, o.safe_mask[::-1])
