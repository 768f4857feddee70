"""Synthetic oracle domain for tests: transparent descriptors, known fitness.

Genomes are real vectors in [0,1]^L (default L=6).  The descriptor is simply
the first two entries, which makes binning behavior fully predictable.
Fitness comes in two modes:

* ``constant`` — always 1.0 (isolates archive/coverage behavior);
* ``rastrigin`` — the remaining entries are mapped affinely onto
  [−5.12, 5.12] and scored with the negated, normalized Rastrigin function,
  so fitness lies in [0, 1] with the maximum 1.0 exactly at all-0.5.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import DomainError
from .base import Evaluation

# max over [-5.12, 5.12] of x^2 - 10 cos(2 pi x) + 10, found numerically
# (attained near x = ±4.52299365); normalizes Rastrigin to [0, 1] per coordinate.
RASTRIGIN_TERM_MAX = 40.35329019383896


@dataclass
class SyntheticDomain:
    name = "synthetic"
    genome_length: int = 6
    fitness_mode: str = "constant"
    mutation_sigma: float = 0.1

    def __post_init__(self) -> None:
        self.genome_length = int(self.genome_length)
        if self.genome_length < 2:
            raise DomainError("synthetic genome needs at least the 2 descriptor entries")
        if self.fitness_mode not in ("constant", "rastrigin"):
            raise DomainError(f"unknown fitness mode {self.fitness_mode!r}")
        if self.fitness_mode == "rastrigin" and self.genome_length < 3:
            raise DomainError("rastrigin mode needs at least one non-descriptor entry")

    @property
    def descriptor_dims(self) -> int:
        return 2

    @property
    def bounds(self) -> tuple[tuple[float, float], ...]:
        return ((0.0, 1.0), (0.0, 1.0))

    def random_genome(self, rng: np.random.Generator) -> np.ndarray:
        return rng.random(self.genome_length)

    def mutate(self, genome: np.ndarray, rng: np.random.Generator) -> np.ndarray:
        while True:
            child = np.clip(genome + rng.normal(0.0, self.mutation_sigma, len(genome)), 0.0, 1.0)
            if not np.array_equal(child, genome):
                return child

    def evaluate(self, genome: np.ndarray) -> Evaluation:
        g = np.asarray(genome, dtype=float)
        if self.fitness_mode == "constant":
            fitness = 1.0
        else:
            x = (g[2:] - 0.5) * 2.0 * 5.12
            terms = x * x - 10.0 * np.cos(2.0 * np.pi * x) + 10.0
            fitness = 1.0 - float(terms.sum()) / (len(x) * RASTRIGIN_TERM_MAX)
        return Evaluation(fitness, g[:2].copy())

    def encode_genome(self, genome: np.ndarray) -> str:
        return ",".join(f"{v:.17g}" for v in genome)

    def decode_genome(self, text: str) -> np.ndarray:
        values = np.array([float(v) for v in text.split(",")])
        if len(values) != self.genome_length:
            raise DomainError(
                f"synthetic genome has {len(values)} entries, domain expects {self.genome_length}"
            )
        return values
