"""Feature-space grid archive: one elite per cell, replace only on strict improvement.

The archive is the central data structure of the whole package.  A
:class:`FeatureSpace` describes an N-dimensional box partitioned into a
regular grid of cells; the :class:`Archive` stores at most one
:class:`Elite` per cell.  Insertion follows a single rule: an empty cell
accepts any candidate, an occupied cell is only taken over by a strictly
fitter one.  Ties keep the incumbent, which keeps runs reproducible (no
hidden order-dependence on equal fitness).

Descriptors that fall outside the box are clamped into the nearest edge
cell and flagged, so callers can count how often that happened.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field, replace
from typing import Iterator, Optional, Sequence

import numpy as np

from .errors import EliteMapError, EvaluationInvalid

CellIndex = tuple[int, ...]


def _as_resolution(res: Sequence[int]) -> tuple[int, ...]:
    out = tuple(int(r) for r in res)
    if not out or any(r < 1 for r in out):
        raise ValueError(f"resolution must be positive in every dimension, got {res!r}")
    return out


@dataclass(frozen=True)
class FeatureSpace:
    """An axis-aligned box in descriptor space plus its grid resolution.

    ``bounds`` holds one ``(min, max)`` pair per dimension and ``resolution``
    the number of cells along each axis.  ``schedule`` is an optional ordered
    list of ``(iteration_threshold, resolution)`` pairs used by the engine to
    refine the grid mid-run; every scheduled resolution must be an integer
    multiple, per dimension, of the one before it so that refinement only ever
    splits cells and never merges them.
    """

    bounds: tuple[tuple[float, float], ...]
    resolution: tuple[int, ...]
    schedule: tuple[tuple[int, tuple[int, ...]], ...] = ()

    def __post_init__(self) -> None:
        bounds = tuple((float(lo), float(hi)) for lo, hi in self.bounds)
        object.__setattr__(self, "bounds", bounds)
        object.__setattr__(self, "resolution", _as_resolution(self.resolution))
        if len(self.bounds) == 0:
            raise ValueError("feature space needs at least one dimension")
        for lo, hi in self.bounds:
            if not (np.isfinite(lo) and np.isfinite(hi) and lo < hi):
                raise ValueError(f"invalid bounds ({lo}, {hi}): need finite min < max")
        if len(self.resolution) != len(self.bounds):
            raise ValueError(
                f"resolution has {len(self.resolution)} dimensions, bounds have {len(self.bounds)}"
            )
        sched = []
        prev_threshold = None
        prev_res = self.resolution
        for threshold, res in self.schedule:
            res = _as_resolution(res)
            threshold = int(threshold)
            if len(res) != self.dims:
                raise ValueError(f"scheduled resolution {res} has wrong dimensionality")
            if prev_threshold is not None and threshold <= prev_threshold:
                raise ValueError("schedule thresholds must be strictly increasing")
            for new, old in zip(res, prev_res):
                if new % old != 0:
                    raise ValueError(
                        f"scheduled resolution {res} is not a per-dimension integer "
                        f"multiple of {prev_res}"
                    )
            sched.append((threshold, res))
            prev_threshold, prev_res = threshold, res
        object.__setattr__(self, "schedule", tuple(sched))
        lo = np.array([b[0] for b in self.bounds])
        hi = np.array([b[1] for b in self.bounds])
        object.__setattr__(self, "_lo", lo)
        object.__setattr__(self, "_span", hi - lo)

    @property
    def dims(self) -> int:
        return len(self.bounds)

    @property
    def cell_count(self) -> int:
        return int(np.prod(self.resolution))

    def bin(self, descriptor: Sequence[float]) -> CellIndex:
        """Map a descriptor to its cell index, clamping out-of-range values."""
        return self.bin_flag(descriptor)[0]

    def bin_flag(self, descriptor: Sequence[float]) -> tuple[CellIndex, bool]:
        """Like :meth:`bin` but also reports whether clamping occurred.

        A descriptor exactly on the upper bound belongs to the last cell and
        is *not* considered clamped; only values strictly outside the box
        raise the flag.  Non-finite descriptors raise
        :class:`~elitemap.errors.EvaluationInvalid`.
        """
        d = np.asarray(descriptor, dtype=float)
        if d.shape != (self.dims,):
            raise ValueError(f"descriptor has shape {d.shape}, expected ({self.dims},)")
        if not np.all(np.isfinite(d)):
            raise EvaluationInvalid(f"non-finite descriptor {d.tolist()}")
        res = np.asarray(self.resolution)
        raw = np.floor((d - self._lo) / self._span * res).astype(np.int64)
        idx = np.clip(raw, 0, res - 1)
        clamped = bool(np.any(d < self._lo) or np.any(d > self._lo + self._span))
        return tuple(int(i) for i in idx), clamped

    def flat_index(self, cell: CellIndex) -> int:
        flat = 0
        for i, r in zip(cell, self.resolution):
            flat = flat * r + i
        return flat

    def with_resolution(self, resolution: Sequence[int]) -> "FeatureSpace":
        """A copy of this space at a new resolution.

        Schedule entries the new grid has already reached (or passed) are
        dropped, so the remaining program is still a chain of refinements
        rooted at the new resolution.
        """
        res = _as_resolution(resolution)
        remaining = tuple(
            (t, r)
            for t, r in self.schedule
            if r != res and all(a % b == 0 for a, b in zip(r, res))
        )
        return replace(self, resolution=res, schedule=remaining)


@dataclass
class Elite:
    """A stored individual: genome plus everything needed to audit its origin."""

    genome: object
    fitness: float
    descriptor: np.ndarray
    cell: CellIndex
    birth_iteration: int
    id: int
    parent_id: Optional[int] = None
    parent_cell: Optional[CellIndex] = None
    parent_descriptor: Optional[np.ndarray] = None

    def __post_init__(self) -> None:
        self.descriptor = np.asarray(self.descriptor, dtype=float)
        self.fitness = float(self.fitness)


class InsertOutcome(enum.Enum):
    INSERTED_EMPTY = "inserted_empty"
    REPLACED_INCUMBENT = "replaced_incumbent"
    REJECTED = "rejected_worse_or_tied"

    @property
    def inserted(self) -> bool:
        return self is not InsertOutcome.REJECTED


class Archive:
    """Grid of elites over a :class:`FeatureSpace`.

    Cells are stored in a flat C-order list so that uniform random selection
    over occupied cells is O(1): a parallel list of occupied flat indices is
    maintained on every insertion.
    """

    def __init__(self, space: FeatureSpace):
        self.space = space
        self._cells: list[Optional[Elite]] = [None] * space.cell_count
        self._occupied: list[int] = []

    # -- basic queries ---------------------------------------------------

    @property
    def filled_count(self) -> int:
        return len(self._occupied)

    def __len__(self) -> int:
        return len(self._occupied)

    def get(self, cell: CellIndex) -> Optional[Elite]:
        return self._cells[self.space.flat_index(cell)]

    def __iter__(self) -> Iterator[Elite]:
        """Iterate elites in lexicographic cell order (deterministic)."""
        for flat in sorted(self._occupied):
            elite = self._cells[flat]
            assert elite is not None
            yield elite

    def best(self) -> Optional[Elite]:
        best = None
        for e in self:
            if best is None or e.fitness > best.fitness:
                best = e
        return best

    # -- insertion -------------------------------------------------------

    def try_insert(self, elite: Elite) -> InsertOutcome:
        """Place ``elite`` in the cell its descriptor bins to.

        Empty cell: insert.  Occupied cell: replace only if the incumbent's
        fitness is strictly lower; equal fitness keeps the incumbent.
        """
        if not np.isfinite(elite.fitness):
            raise EvaluationInvalid(f"non-finite fitness {elite.fitness!r}")
        cell, _ = self.space.bin_flag(elite.descriptor)
        elite.cell = cell
        flat = self.space.flat_index(cell)
        incumbent = self._cells[flat]
        if incumbent is None:
            self._cells[flat] = elite
            self._occupied.append(flat)
            return InsertOutcome.INSERTED_EMPTY
        if incumbent.fitness < elite.fitness:
            self._cells[flat] = elite
            return InsertOutcome.REPLACED_INCUMBENT
        return InsertOutcome.REJECTED

    # -- selection -------------------------------------------------------

    def random_elite(self, rng: np.random.Generator) -> Elite:
        """Uniform choice over occupied cells (with replacement across calls)."""
        if not self._occupied:
            raise EliteMapError("cannot select from an empty archive")
        flat = self._occupied[int(rng.integers(0, len(self._occupied)))]
        elite = self._cells[flat]
        assert elite is not None
        return elite

    # -- refinement ------------------------------------------------------

    def subdivide(self, new_resolution: Sequence[int]) -> "Archive":
        """Return a finer-grained archive holding the same elites.

        Every elite is re-binned using its stored (real-valued) descriptor.
        Because the finer grid is a per-dimension integer refinement of the
        current one, each old cell is partitioned exactly by new cells, so
        two elites can never collide; this is asserted rather than trusted.
        """
        new_res = _as_resolution(new_resolution)
        for new, old in zip(new_res, self.space.resolution):
            if new % old != 0:
                raise ValueError(
                    f"new resolution {new_res} is not a per-dimension integer "
                    f"multiple of current {self.space.resolution}"
                )
        new_space = self.space.with_resolution(new_res)
        out = Archive(new_space)
        for elite in self:
            cell, _ = new_space.bin_flag(elite.descriptor)
            flat = new_space.flat_index(cell)
            if out._cells[flat] is not None:
                raise EliteMapError(
                    f"subdivision collision in cell {cell}; this violates the "
                    "refinement invariant and indicates corrupted descriptors"
                )
            elite.cell = cell
            out._cells[flat] = elite
            out._occupied.append(flat)
        return out

    # -- export ----------------------------------------------------------

    def to_dense_map(self) -> np.ndarray:
        """Fitness per cell as an ndarray shaped like the grid; NaN = empty."""
        dense = np.full(self.space.resolution, np.nan)
        flat = dense.reshape(-1)
        for i in self._occupied:
            elite = self._cells[i]
            assert elite is not None
            flat[i] = elite.fitness
        return dense

    def check_integrity(self) -> None:
        """Verify stored invariants; cheap enough to run after every batch in tests."""
        seen = 0
        for flat, elite in enumerate(self._cells):
            if elite is None:
                continue
            seen += 1
            cell, _ = self.space.bin_flag(elite.descriptor)
            if self.space.flat_index(cell) != flat:
                raise EliteMapError(
                    f"elite stored in flat cell {flat} but its descriptor bins to {cell}"
                )
        occupied = set(self._occupied)
        if seen != len(occupied) or len(occupied) != len(self._occupied):
            raise EliteMapError(
                f"occupancy index has {len(self._occupied)} entries, grid has {seen}"
            )
        if any(self._cells[i] is None for i in occupied):
            raise EliteMapError("occupancy index points at an empty cell")
