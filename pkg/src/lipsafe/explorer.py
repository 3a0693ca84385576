"""The exploration loop and the three baseline policies."""
from __future__ import annotations

import enum
import logging
from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import numpy as np

from .core import ActionTable, KnowledgeSet, StateTable
from .environments import EnvironmentSpec
from .optimizer import (Candidate, NoCandidateError, boundary_seeking_action,
                        expected_reduction, optimize_expansion, optimize_greedily)
from .planning import path_exists
from .safety import (GroundTruthSafety, SafeSet, expand_safe_set, ground_truth_safe,
                     safe_actions)
from .uncertainty import LipschitzViolation, UncertaintyMap

__all__ = [
    "PolicyKind",
    "Policy",
    "StepRecord",
    "RunTrace",
    "ConfigurationError",
    "GuaranteeViolation",
    "Exploration",
    "seed_initial_knowledge",
    "run",
]

log = logging.getLogger(__name__)


class PolicyKind(str, enum.Enum):
    UNCERTAINTY_REDUCTION = "uncertainty_reduction"
    RANDOM = "random"
    SAFE_NO_OPT = "safe_no_opt"
    EXPANSION_OPT = "expansion_opt"

    @classmethod
    def parse(cls, value) -> "PolicyKind":
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).replace("-", "_"))
        except ValueError:
            raise ValueError(f"unknown policy {value!r}; choose from "
                             f"{[p.value.replace('_', '-') for p in cls]}") from None

    @property
    def certified(self) -> bool:
        return self is not PolicyKind.RANDOM

    @property
    def seeded(self) -> bool:
        return self in (PolicyKind.RANDOM, PolicyKind.SAFE_NO_OPT)


@dataclass(frozen=True)
class Policy:
    kind: PolicyKind
    seed: int = 0


class ConfigurationError(ValueError):
    pass


class GuaranteeViolation(RuntimeError):
    """A certified policy reached an unsafe state or broke its own knowledge."""


@dataclass(frozen=True)
class StepRecord:
    action: int
    safe_size_original: int
    safe_size_total: int
    total_uncertainty: int
    state: float
    crashed: bool


@dataclass
class RunTrace:
    environment: str
    policy: str
    seed: int
    records: List[StepRecord] = field(default_factory=list)
    #: "completed", "crashed" (random policy only) or "stuck" (no reachable
    #: certified action; the safe set cannot change any more)
    status: str = "completed"
    #: action ordinals at which the certified set left the ground-truth safe set
    unsound_steps: List[int] = field(default_factory=list)
    #: number of states interned during the run
    visited_states: int = 0

    @property
    def final(self) -> StepRecord:
        return self.records[-1]

    @property
    def crashed(self) -> bool:
        return self.status == "crashed"

    def column(self, name: str) -> np.ndarray:
        return np.array([getattr(r, name) for r in self.records])


def seed_initial_knowledge(env: EnvironmentSpec, states: StateTable,
                           actions: ActionTable) -> KnowledgeSet:
    """All true transitions that start and end inside the initial safe interval.

    Outcomes are interned into ``states``.  Fails if some pair of initial
    sample states is not connected by these transitions.
    """
    s0_samples = [i for i in states.original_indices()
                  if env.in_initial_set(states.scalar(i))]
    if not s0_samples:
        raise ConfigurationError("no sampled state lies in the initial safe interval")
    knowledge = KnowledgeSet()
    for s in s0_samples:
        x = states.scalar(s)
        for a in range(len(actions)):
            y = env.step(x, actions.scalar(a))
            if env.in_initial_set(y):
                t, _ = states.intern([y])
                knowledge.add(s, a, t)
    for s in s0_samples:
        for t in s0_samples:
            if not path_exists(s, t, knowledge):
                raise ConfigurationError(
                    f"initial knowledge has no path from state {states.scalar(s)} "
                    f"to {states.scalar(t)}")
    return knowledge


class Exploration:
    """Mutable state of one exploration run.

    After construction and after every executed action the knowledge is
    closed under singleton inference and the safe set is expanded to its
    fixed point.
    """

    def __init__(self, env: EnvironmentSpec, policy: Policy,
                 oracle: Optional[GroundTruthSafety] = None, check_invariants: bool = False):
        self.env = env
        self.policy = policy
        self.kind = PolicyKind.parse(policy.kind)
        self.rng = np.random.default_rng(policy.seed)
        self.oracle = oracle if oracle is not None else ground_truth_safe(env)
        self.check_invariants = check_invariants

        self.states = StateTable(env.state_samples())
        self.actions = ActionTable(env.action_samples())
        knowledge = seed_initial_knowledge(env, self.states, self.actions)
        self.umap = UncertaintyMap(self.states, self.actions, env.lipschitz, knowledge)
        self.current, _ = self.umap.intern([env.s0])
        s0_members = [i for i in self.states.indices()
                      if env.in_initial_set(self.states.scalar(i))]
        self.initial_safe = SafeSet.of(s0_members)
        self.safe = self.initial_safe
        self._truth_orig = self.oracle.is_safe(
            self.states.coords[: self.states.original_count, 0])
        self.trace = RunTrace(environment=env.name, policy=self.kind.value, seed=policy.seed)
        self.m = 0
        self._close()
        self._record(crashed=False)

    @property
    def knowledge(self) -> KnowledgeSet:
        return self.umap.knowledge

    # -- bookkeeping ----------------------------------------------------------
    def _close(self) -> None:
        self.umap.expand_knowledge("continuous")
        self.safe = expand_safe_set(self.safe, self.umap)

    def _record(self, crashed: bool) -> None:
        orig = self.states.original_count
        n_orig = self.safe.count_original(orig)
        certified = [s for s in self.safe.members if s < orig]
        if not self._truth_orig[certified].all():
            self.trace.unsound_steps.append(self.m)
        self.trace.records.append(StepRecord(
            action=self.m,
            safe_size_original=n_orig,
            safe_size_total=len(self.safe),
            total_uncertainty=self.umap.total_uncertainty(),
            state=self.states.scalar(self.current),
            crashed=crashed,
        ))

    # -- policy selection -----------------------------------------------------
    def _plan(self) -> Optional[Tuple[List[int], int]]:
        """Certain path and final action to execute next, or None to stop."""
        kind = self.kind
        if kind is PolicyKind.RANDOM:
            return [], int(self.rng.integers(len(self.actions)))
        if kind is PolicyKind.SAFE_NO_OPT:
            acts = safe_actions(self.current, self.umap, self.safe)
            if not acts:
                return self._fallback()
            return [], int(acts[self.rng.integers(len(acts))])
        if kind is PolicyKind.UNCERTAINTY_REDUCTION:
            cand = optimize_greedily(self.current, self.safe, self.umap)
        else:
            cand = optimize_expansion(self.current, self.safe, self.umap)
        if cand is None:
            return self._fallback()
        return list(cand.path), cand.action

    def _fallback(self) -> Optional[Tuple[List[int], int]]:
        try:
            cand: Candidate = boundary_seeking_action(self.current, self.safe, self.umap)
        except NoCandidateError:
            log.info("no reachable safe action at step %d; stopping", self.m)
            return None
        return list(cand.path), cand.action

    # -- execution ------------------------------------------------------------
    def _execute(self, a: int) -> bool:
        """Take action ``a`` in the environment. Returns True on a crash."""
        s = self.current
        certain = self.knowledge.outcome(s, a)
        certified_pair = self.kind.certified and (
            certain is not None or a in safe_actions(s, self.umap, self.safe))
        if self.kind.certified and not certified_pair:
            raise GuaranteeViolation(f"action {a} at state {s} is not certified safe")
        y = self.env.step(self.states.scalar(s), self.actions.scalar(a))
        t, fresh = self.umap.intern([y])
        if certain is not None:
            if t != certain:
                raise GuaranteeViolation(
                    f"known transition ({s}, {a}) -> {certain} led to {y!r} instead")
            if self.check_invariants:
                before = (self.umap.version, self.safe.members)
                self.umap.record_transition(s, a, t)
                assert self.umap.version == before[0], "known transition changed the map"
        else:
            if not self.umap.contains(s, a, t):
                raise LipschitzViolation(s, a, f"true outcome {y!r} is not a candidate")
            if self.check_invariants:
                assert expected_reduction(s, a, self.umap) >= 0, "negative reduction"
                lo, hi = self.umap.lo.copy(), self.umap.hi.copy()
            self.umap.record_transition(s, a, t)
            if self.check_invariants:
                assert np.all(self.umap.lo >= lo) and np.all(self.umap.hi <= hi), \
                    "uncertainty grew"
        if certified_pair and t not in self.safe:
            # reached through a certified action: every candidate was safe
            self.safe = SafeSet(self.safe.members | {t}, self.safe.generation)
        self.current = t
        self.m += 1
        crashed = not self.oracle.is_safe(y)
        version = self.umap.version
        if self.check_invariants and certain is not None:
            safe_before = self.safe.members
        self._close()
        if self.check_invariants and certain is not None:
            assert self.umap.version == version and self.safe.members == safe_before, \
                "known transition expanded the safe set"
        self._record(crashed)
        self.trace.visited_states = len(self.states) - self.states.original_count
        return crashed

    def step(self) -> bool:
        """Run one planning iteration. Returns False when the run is over."""
        plan = self._plan()
        if plan is None:
            self.trace.status = "stuck"
            return False
        path, action = plan
        for a in [*path, action]:
            if self.m >= self._budget:
                return False
            if self._execute(a):
                if self.kind.certified:
                    raise GuaranteeViolation(
                        f"{self.kind.value} reached unsafe state "
                        f"{self.states.scalar(self.current)} at action {self.m}")
                self.trace.status = "crashed"
                return False
        return self.m < self._budget

    def run(self, n_actions: int) -> RunTrace:
        if n_actions < 0:
            raise ValueError("n_actions must be non-negative")
        self._budget = n_actions
        while self.m < n_actions and self.step():
            pass
        return self.trace


def run(env: EnvironmentSpec, policy, n_actions: int, seed: int = 0,
        oracle: Optional[GroundTruthSafety] = None,
        check_invariants: bool = False) -> RunTrace:
    """Explore ``env`` for ``n_actions`` executed actions with the given policy."""
    if not isinstance(policy, Policy):
        policy = Policy(PolicyKind.parse(policy), seed)
    return Exploration(env, policy, oracle, check_invariants).run(n_actions)
