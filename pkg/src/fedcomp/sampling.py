"""Client participation schedules: static fraction or exponential decay.

The dynamic schedule starts at full participation and shrinks the round's
client count as M * exp(-phi * t), never dropping below a small floor so
aggregation always has enough members.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

STATIC = "static"
DYNAMIC = "dynamic"
POLICY_KINDS = (STATIC, DYNAMIC)

DEFAULT_FLOOR = 5


@dataclass(frozen=True)
class SamplingPolicy:
    kind: str
    fraction: float = 0.5  # static only
    phi: float = 0.0  # dynamic decay rate
    floor: int = DEFAULT_FLOOR

    def __post_init__(self) -> None:
        if self.kind not in POLICY_KINDS:
            raise ValueError(f"unknown sampling kind {self.kind!r}")
        if self.kind == STATIC and not 0 < self.fraction <= 1:
            raise ValueError("static fraction must lie in (0, 1]")
        if self.kind == DYNAMIC and not (math.isfinite(self.phi) and self.phi >= 0):
            raise ValueError("phi must be finite and >= 0")
        if self.floor < 1:
            raise ValueError("floor must be >= 1")

    @classmethod
    def static(cls, fraction: float) -> "SamplingPolicy":
        return cls(kind=STATIC, fraction=fraction)

    @classmethod
    def dynamic(cls, phi: float, floor: int = DEFAULT_FLOOR) -> "SamplingPolicy":
        return cls(kind=DYNAMIC, phi=phi, floor=floor)


@dataclass(frozen=True)
class RoundContext:
    t: int
    num_clients: int
    seed: int

    def __post_init__(self) -> None:
        if self.t < 0:
            raise ValueError("round index must be >= 0")
        if self.num_clients < 1:
            raise ValueError("num_clients must be >= 1")


def _round_half_away(x: float) -> int:
    # Counts are non-negative, so half-away-from-zero is floor(x + 0.5).
    return int(math.floor(x + 0.5))


def sample_size(policy: SamplingPolicy, ctx: RoundContext) -> int:
    """Number of participants this round under the policy."""
    m = ctx.num_clients
    if policy.kind == STATIC:
        return max(1, _round_half_away(policy.fraction * m))
    raw = _round_half_away(m * math.exp(-policy.phi * ctx.t))
    return min(m, max(min(policy.floor, m), raw))


def sample_clients(policy: SamplingPolicy, ctx: RoundContext) -> np.ndarray:
    """Sorted uniform subset (without replacement); deterministic in (seed, t)."""
    size = sample_size(policy, ctx)
    rng = np.random.default_rng([ctx.seed, ctx.t])
    return np.sort(rng.choice(ctx.num_clients, size=size, replace=False))
