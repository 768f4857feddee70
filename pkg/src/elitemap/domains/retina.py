"""Retina pattern-classification domain.

The task: an eight-pixel "retina" is shown every possible 8-bit pattern
(256 of them).  The left four pixels may or may not show a left-object, the
right four a right-object; the network must answer true (output ≥ 0) exactly
when *both* halves show objects.  Fitness is the fraction of the 256 patterns
answered correctly.

The searchable genome is a layered feedforward network over a fixed node
grid (default layer sizes 8-4-2-1): per-connection presence bits, real
weights, and per-node biases, all ranges configurable.  The two feature
descriptors are structural, not behavioral:

* normalized connection cost — sum of squared Euclidean lengths of the
  enabled connections divided by the all-enabled maximum, so 0 means no
  wiring and 1 means everything connected;
* network modularity — the best directed-modularity Q found by greedy
  agglomerative merging over the enabled-connection digraph, clamped to
  [0, 1] (negative Q reads as "no modular structure").

Within layer ``l``, node ``k`` sits at x = k − (size_l − 1)/2, y = l, which
makes vertically adjacent same-x nodes exactly distance 1 apart.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from ..errors import DomainError
from .base import Evaluation
from .modularity import greedy_modularity

# The eight odd-parity 4-bit patterns, used for both sides by default.  An
# object is "present" when its half's pixels have odd parity — the classic
# hard case for a small threshold network, and exactly 8 patterns per side.
DEFAULT_OBJECTS: tuple[int, ...] = (1, 2, 4, 7, 8, 11, 13, 14)


def load_object_set(path: str | Path) -> tuple[int, ...]:
    """Read a one-pattern-per-line object file.

    Lines may be written as decimal (``13``) or 4-bit binary (``1101``);
    blank lines and ``#`` comments are skipped.
    """
    values = []
    for raw in Path(path).read_text().splitlines():
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        value = int(line, 2) if set(line) <= {"0", "1"} and len(line) == 4 else int(line)
        if not 0 <= value <= 15:
            raise DomainError(f"object pattern {line!r} out of 4-bit range")
        values.append(value)
    if not values:
        raise DomainError(f"object set file {path} contains no patterns")
    return tuple(values)


@dataclass
class RetinaGenome:
    """Presence bits, weights (per layer pair, shaped in×out), and biases."""

    presence: tuple[np.ndarray, ...]
    weights: tuple[np.ndarray, ...]
    biases: tuple[np.ndarray, ...]

    def copy(self) -> "RetinaGenome":
        return RetinaGenome(
            tuple(p.copy() for p in self.presence),
            tuple(w.copy() for w in self.weights),
            tuple(b.copy() for b in self.biases),
        )


@dataclass
class RetinaDomain:
    name = "retina"
    layer_sizes: tuple[int, ...] = (8, 4, 2, 1)
    left_objects: tuple[int, ...] = DEFAULT_OBJECTS
    right_objects: tuple[int, ...] = DEFAULT_OBJECTS
    weight_range: float = 2.0
    toggle_rate: float = 0.02
    perturb_rate: float = 0.05
    perturb_sigma: float = 0.5

    def __post_init__(self) -> None:
        self.layer_sizes = tuple(int(s) for s in self.layer_sizes)
        if len(self.layer_sizes) < 2 or self.layer_sizes[0] != 8 or self.layer_sizes[-1] != 1:
            raise DomainError(
                f"layer sizes must run from 8 inputs to 1 output, got {self.layer_sizes}"
            )
        if any(s < 1 for s in self.layer_sizes):
            raise DomainError(f"layer sizes must be positive, got {self.layer_sizes}")
        for side, objs in (("left", self.left_objects), ("right", self.right_objects)):
            objs = tuple(int(o) for o in objs)
            if not objs or any(not 0 <= o <= 15 for o in objs) or len(set(objs)) != len(objs):
                raise DomainError(f"{side} object set must be distinct 4-bit patterns")
        self.left_objects = tuple(int(o) for o in self.left_objects)
        self.right_objects = tuple(int(o) for o in self.right_objects)
        self._build_tables()

    def _build_tables(self) -> None:
        sizes = self.layer_sizes
        patterns = np.arange(256, dtype=np.int64)
        # pixel k (0 = leftmost) is bit 7-k, so the left half is the high nibble
        bits = (patterns[:, None] >> (7 - np.arange(8))) & 1
        self._patterns = bits.astype(np.float64)
        left = set(self.left_objects)
        right = set(self.right_objects)
        target = [(int(p) >> 4) in left and (int(p) & 0xF) in right for p in patterns]
        self._targets = np.array(target, dtype=bool)
        # squared distances between nodes of adjacent layers (Δy is always 1)
        self._dist2 = []
        for lower, upper in zip(sizes, sizes[1:]):
            x_lo = np.arange(lower) - (lower - 1) / 2.0
            x_up = np.arange(upper) - (upper - 1) / 2.0
            self._dist2.append((x_lo[:, None] - x_up[None, :]) ** 2 + 1.0)
        self._max_cost = float(sum(d.sum() for d in self._dist2))
        self._node_offsets = np.concatenate([[0], np.cumsum(sizes)])[:-1]
        self._n_nodes = int(sum(sizes))

    # -- Domain interface --------------------------------------------------

    @property
    def descriptor_dims(self) -> int:
        return 2

    @property
    def bounds(self) -> tuple[tuple[float, float], ...]:
        return ((0.0, 1.0), (0.0, 1.0))

    def random_genome(self, rng: np.random.Generator) -> RetinaGenome:
        wr = self.weight_range
        presence, weights, biases = [], [], []
        for lower, upper in zip(self.layer_sizes, self.layer_sizes[1:]):
            presence.append(rng.random((lower, upper)) < 0.5)
            weights.append(rng.uniform(-wr, wr, (lower, upper)))
            biases.append(rng.uniform(-wr, wr, upper))
        return RetinaGenome(tuple(presence), tuple(weights), tuple(biases))

    def mutate(self, genome: RetinaGenome, rng: np.random.Generator) -> RetinaGenome:
        """Toggle connections / perturb weights and biases; never returns an
        unchanged genome (identical children waste evaluation budget)."""
        wr = self.weight_range
        while True:
            presence, weights, biases = [], [], []
            changed = False
            for p, w, b in zip(genome.presence, genome.weights, genome.biases):
                flips = rng.random(p.shape) < self.toggle_rate
                new_p = p ^ flips
                dw = rng.random(w.shape) < self.perturb_rate
                new_w = np.clip(w + dw * rng.normal(0.0, self.perturb_sigma, w.shape), -wr, wr)
                db = rng.random(b.shape) < self.perturb_rate
                new_b = np.clip(b + db * rng.normal(0.0, self.perturb_sigma, b.shape), -wr, wr)
                changed |= bool(flips.any()) or bool((new_w != w).any()) or bool((new_b != b).any())
                presence.append(new_p)
                weights.append(new_w)
                biases.append(new_b)
            if changed:
                return RetinaGenome(tuple(presence), tuple(weights), tuple(biases))

    def evaluate(self, genome: RetinaGenome) -> Evaluation:
        a = self._patterns
        last = len(genome.weights) - 1
        for l, (p, w, b) in enumerate(zip(genome.presence, genome.weights, genome.biases)):
            a = a @ (p * w) + b
            if l != last:
                a = np.tanh(a)
        answers = a[:, 0] >= 0.0
        fitness = float(np.count_nonzero(answers == self._targets)) / 256.0
        cost = self.connection_cost(genome)
        q = self.modularity(genome)
        return Evaluation(fitness, np.array([cost, max(0.0, min(1.0, q))]))

    # -- descriptor pieces (exposed for tests and analysis) ----------------

    def connection_cost(self, genome: RetinaGenome) -> float:
        """Sum of squared connection lengths over enabled connections, / max."""
        cost = 0.0
        for p, d2 in zip(genome.presence, self._dist2):
            cost += float((p * d2).sum())
        return cost / self._max_cost

    def modularity(self, genome: RetinaGenome) -> float:
        """Greedy directed modularity of the enabled-connection digraph (unclamped)."""
        n = self._n_nodes
        A = np.zeros((n, n))
        for l, p in enumerate(genome.presence):
            lo, hi = self._node_offsets[l], self._node_offsets[l + 1]
            A[lo : lo + p.shape[0], hi : hi + p.shape[1]] = p
        q, _ = greedy_modularity(A)
        return q

    # -- canonical text encoding -------------------------------------------

    def encode_genome(self, genome: RetinaGenome) -> str:
        parts = ["-".join(str(s) for s in self.layer_sizes)]
        for p, w in zip(genome.presence, genome.weights):
            pairs = [
                f"{int(pi)}:{wi:.17g}" for pi, wi in zip(p.reshape(-1), w.reshape(-1))
            ]
            parts.append(";".join(pairs))
        parts.append(";".join(f"{bi:.17g}" for b in genome.biases for bi in b))
        return "|".join(parts)

    def decode_genome(self, text: str) -> RetinaGenome:
        parts = text.split("|")
        sizes = tuple(int(s) for s in parts[0].split("-"))
        if sizes != self.layer_sizes:
            raise DomainError(f"genome encodes layers {sizes}, domain has {self.layer_sizes}")
        if len(parts) != len(sizes) + 1:
            raise DomainError("malformed retina genome encoding")
        presence, weights = [], []
        for section, (lower, upper) in zip(parts[1:-1], zip(sizes, sizes[1:])):
            pairs = section.split(";")
            if len(pairs) != lower * upper:
                raise DomainError("retina genome section has wrong connection count")
            p = np.empty(lower * upper, dtype=bool)
            w = np.empty(lower * upper)
            for i, pair in enumerate(pairs):
                bit, _, weight = pair.partition(":")
                p[i] = bool(int(bit))
                w[i] = float(weight)
            presence.append(p.reshape(lower, upper))
            weights.append(w.reshape(lower, upper))
        flat = [float(x) for x in parts[-1].split(";")]
        if len(flat) != sum(sizes[1:]):
            raise DomainError("retina genome has wrong bias count")
        biases, at = [], 0
        for s in sizes[1:]:
            biases.append(np.array(flat[at : at + s]))
            at += s
        return RetinaGenome(tuple(presence), tuple(weights), tuple(biases))
