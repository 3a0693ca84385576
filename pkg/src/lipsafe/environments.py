"""Muddy Jumper and Hilly Jumper: 1-D jumping robots with known dynamics.

Both environments are only ever *queried* by the explorer (one transition at a
time); the explorer never sees the formulas.  The safety oracle and the
Lipschitz checker use them directly.
"""
from __future__ import annotations

from dataclasses import asdict, dataclass, field, replace
from typing import Dict, Optional, Tuple

import numpy as np

from .core import LipschitzConstants, grid

__all__ = [
    "EnvironmentSpec",
    "LipschitzReport",
    "LipschitzSpecError",
    "muddy_jumper",
    "hilly_jumper",
    "ENVIRONMENTS",
    "environment",
    "verify_lipschitz",
]


@dataclass(frozen=True)
class EnvironmentSpec:
    """Parameters of one jumper environment.

    ``state_grid`` and ``action_grid`` are ``(min, max, step)`` triples used
    to sample the continuous spaces uniformly.
    """

    name: str
    A: float
    B: float
    C: float
    state_grid: Tuple[float, float, float]
    action_grid: Tuple[float, float, float]
    s0: float
    s0_interval: Tuple[float, float]
    lipschitz: LipschitzConstants = field(default_factory=lambda: LipschitzConstants(1.0, 1.0))

    def __post_init__(self):
        if self.name not in ("muddy", "hilly"):
            raise ValueError(f"unknown environment {self.name!r}")
        lo, hi = self.s0_interval
        if not lo <= self.s0 <= hi:
            raise ValueError("s0 must lie inside the initial safe interval")
        if lo < self.state_grid[0] or hi > self.state_grid[1]:
            raise ValueError("initial safe interval must lie inside the state grid")
        if self.name == "muddy" and not self.B > self.A:
            raise ValueError("muddy jumper needs B > A")

    # -- dynamics -----------------------------------------------------------
    def dampening(self, s):
        """Mud dampening factor psi(s) of the Muddy Jumper."""
        s = np.abs(np.asarray(s, dtype=float))
        return np.where(s < self.A, 0.0,
                        np.where(s < self.B, (s - self.A) / (self.B - self.A), 1.0))

    def elevation(self, s):
        """Terrain height h(s) of the Hilly Jumper."""
        s = np.asarray(s, dtype=float)
        A, B = self.A, self.B
        lo, hi = s + A, s - A
        bump_lo = -lo ** 4 / (4 * B ** 4) + lo ** 2 / (2 * B ** 2)
        bump_hi = -hi ** 4 / (4 * B ** 4) + hi ** 2 / (2 * B ** 2)
        return np.where(s < -A, bump_lo, np.where(s < A, 0.0, bump_hi))

    def slope(self, s):
        """h'(s), the derivative of :meth:`elevation`."""
        s = np.asarray(s, dtype=float)
        A, B = self.A, self.B
        lo, hi = s + A, s - A
        return np.where(s < -A, -lo ** 3 / B ** 4 + lo / B ** 2,
                        np.where(s < A, 0.0, -hi ** 3 / B ** 4 + hi / B ** 2))

    def step(self, s, a):
        """Exact next state ``f(s, a)``; broadcasts over arrays."""
        s = np.asarray(s, dtype=float)
        a = np.asarray(a, dtype=float)
        if self.name == "muddy":
            out = s + a * (1.0 - self.dampening(s))
        else:
            out = s + a - self.slope(s)
        return float(out) if out.ndim == 0 else out

    # -- sampling -----------------------------------------------------------
    def state_samples(self) -> np.ndarray:
        return grid(*self.state_grid)

    def action_samples(self) -> np.ndarray:
        return grid(*self.action_grid)

    def in_initial_set(self, s, eps: float = 1e-9):
        lo, hi = self.s0_interval
        s = np.asarray(s, dtype=float)
        return (s >= lo - eps) & (s <= hi + eps)

    # -- serialization ------------------------------------------------------
    def to_dict(self) -> dict:
        d = asdict(self)
        d["state_grid"] = list(self.state_grid)
        d["action_grid"] = list(self.action_grid)
        d["s0_interval"] = list(self.s0_interval)
        return d

    @classmethod
    def from_dict(cls, d: dict, base: Optional["EnvironmentSpec"] = None) -> "EnvironmentSpec":
        """Build a spec from a JSON-style mapping; missing keys come from ``base``."""
        merged = base.to_dict() if base is not None else {}
        for k, v in d.items():
            if k == "lipschitz" and isinstance(v, dict):
                merged["lipschitz"] = {**merged.get("lipschitz", {}), **v}
            else:
                merged[k] = v
        unknown = set(merged) - {f for f in cls.__dataclass_fields__}
        if unknown:
            raise ValueError(f"unknown environment field(s): {sorted(unknown)}")
        lip = merged.get("lipschitz")
        if isinstance(lip, dict):
            merged["lipschitz"] = LipschitzConstants(float(lip["l_s"]), float(lip["l_a"]))
        for k in ("state_grid", "action_grid", "s0_interval"):
            if k in merged:
                merged[k] = tuple(float(x) for x in merged[k])
        for k in ("A", "B", "C", "s0"):
            if k in merged:
                merged[k] = float(merged[k])
        return cls(**merged)

    def with_lipschitz(self, l_s: Optional[float] = None, l_a: Optional[float] = None):
        lip = LipschitzConstants(self.lipschitz.l_s if l_s is None else l_s,
                                 self.lipschitz.l_a if l_a is None else l_a)
        return replace(self, lipschitz=lip)


def muddy_jumper(A: float = 3.0, B: float = 9.0, C: float = 12.0) -> EnvironmentSpec:
    return EnvironmentSpec(
        name="muddy", A=A, B=B, C=C,
        state_grid=(-10.0, 10.0, 0.2),
        action_grid=(-C, C, 0.2),
        s0=0.0, s0_interval=(-A, A),
        lipschitz=LipschitzConstants(l_s=(C + B - A) / (B - A), l_a=1.0),
    )


def hilly_jumper(A: float = 1.2, B: float = 4.0, C: float = 0.3) -> EnvironmentSpec:
    return EnvironmentSpec(
        name="hilly", A=A, B=B, C=C,
        state_grid=(-6.9, 6.9, 0.1),
        action_grid=(-C, C, 0.1),
        s0=0.0, s0_interval=(-A, A),
        lipschitz=LipschitzConstants(l_s=1.4, l_a=1.0),
    )


ENVIRONMENTS: Dict[str, EnvironmentSpec] = {
    "muddy": muddy_jumper(),
    "hilly": hilly_jumper(),
}


def environment(name: str) -> EnvironmentSpec:
    try:
        return ENVIRONMENTS[name]
    except KeyError:
        raise KeyError(f"unknown environment {name!r}; choose from {sorted(ENVIRONMENTS)}") from None


class LipschitzSpecError(ValueError):
    """The configured Lipschitz constants do not bound the dynamics."""


@dataclass
class LipschitzReport:
    environment: str
    n_samples: int
    state_region: Tuple[float, float]
    max_state_ratio: float
    max_action_ratio: float
    state_violations: int
    action_violations: int
    l_s: float
    l_a: float

    @property
    def ok(self) -> bool:
        return self.state_violations == 0 and self.action_violations == 0

    def raise_for_violation(self) -> None:
        if not self.ok:
            raise LipschitzSpecError(
                f"{self.environment}: {self.state_violations} state and "
                f"{self.action_violations} action Lipschitz violations "
                f"(max ratios {self.max_state_ratio:.4f} vs L_s={self.l_s}, "
                f"{self.max_action_ratio:.4f} vs L_a={self.l_a})")


def verify_lipschitz(spec: EnvironmentSpec, n_samples: int = 100_000, seed: int = 0,
                     state_region: Optional[Tuple[float, float]] = None,
                     tol: float = 1e-9) -> LipschitzReport:
    """Sample random pairs and check both Lipschitz inequalities.

    ``state_region`` limits where states are drawn from; it defaults to the
    whole state grid for the Muddy Jumper and to the ground-truth safe
    interval for the Hilly Jumper, whose constant only holds locally.
    """
    rng = np.random.default_rng(seed)
    if state_region is None:
        if spec.name == "hilly":
            from .safety import ground_truth_safe

            state_region = ground_truth_safe(spec).safe_interval()
        else:
            state_region = spec.state_grid[:2]
    s_lo, s_hi = state_region
    a_lo, a_hi = spec.action_grid[:2]
    l_s, l_a = spec.lipschitz.l_s, spec.lipschitz.l_a

    s1 = rng.uniform(s_lo, s_hi, n_samples)
    s2 = rng.uniform(s_lo, s_hi, n_samples)
    a = rng.uniform(a_lo, a_hi, n_samples)
    ds = np.abs(s1 - s2)
    df = np.abs(spec.step(s1, a) - spec.step(s2, a))
    state_bad = df > l_s * ds + tol
    with np.errstate(divide="ignore", invalid="ignore"):
        state_ratio = np.where(ds > 0, df / ds, 0.0)

    s = rng.uniform(s_lo, s_hi, n_samples)
    a1 = rng.uniform(a_lo, a_hi, n_samples)
    a2 = rng.uniform(a_lo, a_hi, n_samples)
    da = np.abs(a1 - a2)
    dfa = np.abs(spec.step(s, a1) - spec.step(s, a2))
    action_bad = dfa > l_a * da + tol
    with np.errstate(divide="ignore", invalid="ignore"):
        action_ratio = np.where(da > 0, dfa / da, 0.0)

    return LipschitzReport(
        environment=spec.name, n_samples=n_samples,
        state_region=(float(s_lo), float(s_hi)),
        max_state_ratio=float(state_ratio.max()),
        max_action_ratio=float(action_ratio.max()),
        state_violations=int(state_bad.sum()),
        action_violations=int(action_bad.sum()),
        l_s=l_s, l_a=l_a,
    )
