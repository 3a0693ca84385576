"""Certified safe exploration of deterministic MDPs with Lipschitz dynamics."""
from .core import ActionTable, KnowledgeSet, LipschitzConstants, Metric, StateTable
from .environments import EnvironmentSpec, environment, hilly_jumper, muddy_jumper
from .explorer import Exploration, Policy, PolicyKind, RunTrace, StepRecord, run
from .safety import SafeSet, expand_safe_set, ground_truth_safe
from .uncertainty import LipschitzViolation, UncertaintyMap

__version__ = "0.1.0"

__all__ = [
    "ActionTable",
    "EnvironmentSpec",
    "Exploration",
    "KnowledgeSet",
    "LipschitzConstants",
    "LipschitzViolation",
    "Metric",
    "Policy",
    "PolicyKind",
    "RunTrace",
    "SafeSet",
    "StateTable",
    "StepRecord",
    "UncertaintyMap",
    "environment",
    "expand_safe_set",
    "ground_truth_safe",
    "hilly_jumper",
    "muddy_jumper",
    "run",
]
