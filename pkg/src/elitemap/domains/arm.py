"""Rigid 3-link planar arm: maximize reach height across horizontal positions.

Three unit-length links driven by integer servo commands in [−150, +150]
steps, 1024 steps per full revolution.  The neutral command (150, 0, 0)
leaves the arm fully extended along +x; turning the first servo down by 256
steps (command −106) raises the arm to vertical, i.e. joint angles are
θ_i = (offset_i − steps_i) · 2π/1024 with offset = (150, 0, 0), accumulated
along the chain.

Fitness is the end effector's height y; the single feature descriptor is its
horizontal position x in [−3, 3], which experiments discretize into 64 bins.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..errors import DomainError
from .base import Evaluation

STEP_RANGE = 150
STEPS_PER_TURN = 1024
_OFFSET = (150, 0, 0)


def forward_kinematics(steps) -> tuple[float, float]:
    """End-effector (x, y) for three integer joint commands."""
    s = [int(v) for v in steps]
    if len(s) != 3:
        raise DomainError(f"arm genome needs 3 joint commands, got {len(s)}")
    if any(abs(v) > STEP_RANGE for v in s):
        raise DomainError(f"joint commands {s} outside [-{STEP_RANGE}, {STEP_RANGE}]")
    x = y = 0.0
    phi = 0.0
    for v, off in zip(s, _OFFSET):
        phi += (off - v) * 2.0 * math.pi / STEPS_PER_TURN
        x += math.cos(phi)
        y += math.sin(phi)
    return x, y


ArmGenome = tuple[int, int, int]


@dataclass
class ArmDomain:
    name = "arm"
    # σ ≈ 10% of per-joint range: wide enough to walk the archive out to the
    # folded-arm extremes within a 420-evaluation budget, narrow enough that
    # per-cell heights still refine (see decisions ledger)
    mutation_sigma: float = 30.0

    @property
    def descriptor_dims(self) -> int:
        return 1

    @property
    def bounds(self) -> tuple[tuple[float, float], ...]:
        return ((-3.0, 3.0),)

    def random_genome(self, rng: np.random.Generator) -> ArmGenome:
        return tuple(int(v) for v in rng.integers(-STEP_RANGE, STEP_RANGE + 1, 3))

    def mutate(self, genome: ArmGenome, rng: np.random.Generator) -> ArmGenome:
        """Integer Gaussian step on each joint, clipped to range; guaranteed ≠ parent."""
        while True:
            child = tuple(
                int(np.clip(v + round(rng.normal(0.0, self.mutation_sigma)), -STEP_RANGE, STEP_RANGE))
                for v in genome
            )
            if child != tuple(genome):
                return child

    def evaluate(self, genome: ArmGenome) -> Evaluation:
        x, y = forward_kinematics(genome)
        return Evaluation(y, np.array([x]))

    def encode_genome(self, genome: ArmGenome) -> str:
        return ",".join(str(int(v)) for v in genome)

    def decode_genome(self, text: str) -> ArmGenome:
        parts = text.split(",")
        if len(parts) != 3:
            raise DomainError(f"arm genome must be 's0,s1,s2', got {text!r}")
        return tuple(int(p) for p in parts)


def grid_levels(k: int) -> list[int]:
    """k step values evenly spread over [−150, 150] inclusive, rounded to integers."""
    if k < 2:
        raise DomainError("grid search needs at least 2 steps per joint")
    return [int(round(v)) for v in np.linspace(-STEP_RANGE, STEP_RANGE, k)]


def grid_search(steps_per_joint: int, bins: int = 64):
    """Exhaustive k³ sweep of evenly spaced joint commands → best-per-cell map."""
    from ..archive import FeatureSpace
    from ..controls import run_grid_search

    domain = ArmDomain()
    space = FeatureSpace(domain.bounds, (bins,))
    archive, _ = run_grid_search(domain, space, steps_per_joint)
    return archive
