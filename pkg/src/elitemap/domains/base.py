"""Domain interface: fitness function, descriptor function, genome operators.

A domain bundles everything the search algorithms need to know about a
problem: how to create and mutate genomes, and how to turn a genome into an
:class:`Evaluation` (fitness + feature descriptor).  ``evaluate`` must be a
pure function of the genome — the engine relies on this for its
serial/parallel equivalence guarantee.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Protocol, runtime_checkable

import numpy as np


@dataclass(frozen=True)
class Evaluation:
    """Result of scoring one genome: scalar fitness plus an N-dim descriptor."""

    fitness: float
    descriptor: np.ndarray

    def __post_init__(self) -> None:
        object.__setattr__(self, "descriptor", np.asarray(self.descriptor, dtype=float))


@runtime_checkable
class Domain(Protocol):
    """What a problem domain must provide to be searchable."""

    name: str

    @property
    def descriptor_dims(self) -> int: ...

    @property
    def bounds(self) -> tuple[tuple[float, float], ...]: ...

    def random_genome(self, rng: np.random.Generator): ...

    def mutate(self, genome, rng: np.random.Generator): ...

    def evaluate(self, genome) -> Evaluation: ...

    def encode_genome(self, genome) -> str: ...

    def decode_genome(self, text: str): ...
