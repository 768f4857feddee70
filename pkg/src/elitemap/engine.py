"""The MAP-Elites loop: batched generate/evaluate/apply with a resolution schedule.

Determinism contract
--------------------
Every candidate's variation draws come from its own substream, derived from
``(run seed, iteration, slot)`` — iteration 0 is the initialization batch,
search batches count from 1.  Parents are selected serially from the archive
as it stood at batch start, results are applied strictly in slot order, and
evaluation itself is pure.  Parallel evaluation is therefore a pure
throughput optimization: a run with 8 workers produces byte-identical
artifacts to a serial run with the same seed.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .archive import Archive, Elite, FeatureSpace
from .domains.base import Domain
from .errors import ConfigError, DomainError, EliteMapError


@dataclass(frozen=True)
class RunConfig:
    """Everything that determines a run; hashable-by-value and YAML-roundtrippable.

    The engine consumes the map_elites fields (init_batch / batch_size /
    iterations / schedule); control algorithms consume ``budget`` plus their
    own knobs.  ``resolution`` is the starting grid for the engine and the
    (only) grid for controls.
    """

    domain: str
    seed: int
    algorithm: str = "map_elites"
    domain_params: dict = field(default_factory=dict)
    resolution: tuple[int, ...] = ()
    schedule: tuple[tuple[int, tuple[int, ...]], ...] = ()
    init_batch: Optional[int] = None
    batch_size: Optional[int] = None
    iterations: Optional[int] = None
    budget: Optional[int] = None
    population_size: int = 256
    tournament_size: int = 2
    k_neighbors: int = 15
    archive_probability: float = 0.02
    grid_steps: int = 8
    workers: int = 1

    def total_evaluations(self) -> int:
        if self.algorithm == "map_elites":
            assert self.init_batch is not None
            assert self.batch_size is not None and self.iterations is not None
            return self.init_batch + self.iterations * self.batch_size
        if self.algorithm == "grid_search":
            return self.grid_steps**3
        assert self.budget is not None
        return self.budget

    def final_resolution(self) -> tuple[int, ...]:
        return self.schedule[-1][1] if self.schedule else self.resolution


@dataclass
class BatchRecord:
    """One run-log row; ``iteration`` 0 is the init batch."""

    iteration: int
    evaluations: int  # cumulative
    filled: int
    best_fitness: float
    clamped: int  # this batch
    invalid: int  # this batch
    resolution: tuple[int, ...]


@dataclass
class InsertionRecord:
    """Lineage edge written whenever a candidate enters the archive."""

    id: int
    parent_id: Optional[int]
    birth_iteration: int
    fitness: float
    descriptor: np.ndarray
    parent_fitness: Optional[float]
    parent_descriptor: Optional[np.ndarray]


class RunLog:
    """Per-batch accounting plus the lineage edge table."""

    def __init__(self) -> None:
        self.batches: list[BatchRecord] = []
        self.insertions: dict[int, InsertionRecord] = {}
        self.resolution_changes: list[tuple[int, tuple[int, ...], tuple[int, ...]]] = []
        self.total_evaluations = 0
        self.total_clamped = 0
        self.total_invalid = 0

    def record_batch(self, record: BatchRecord) -> None:
        self.batches.append(record)
        self.total_clamped += record.clamped
        self.total_invalid += record.invalid

    @property
    def edges(self) -> list[InsertionRecord]:
        return [self.insertions[i] for i in sorted(self.insertions)]


def candidate_rng(seed: int, iteration: int, slot: int) -> np.random.Generator:
    """The per-candidate substream: all variation draws for one candidate."""
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(iteration, slot)))


def _evaluate_jobs(domain: Domain, seed: int, iteration: int, jobs):
    """Worker body: (slot, parent_genome | None) -> (slot, genome, fitness, desc, ok).

    Pure with respect to everything but the derived substream; safe to run in
    any process.  A candidate whose evaluation raises or returns non-finite
    values is marked invalid rather than aborting the batch.
    """
    out = []
    for slot, parent in jobs:
        rng = candidate_rng(seed, iteration, slot)
        genome = domain.random_genome(rng) if parent is None else domain.mutate(parent, rng)
        try:
            ev = domain.evaluate(genome)
            ok = bool(
                np.isfinite(ev.fitness) and np.all(np.isfinite(ev.descriptor))
            )
            fitness, desc = float(ev.fitness), np.asarray(ev.descriptor, dtype=float)
        except Exception:
            ok, fitness, desc = False, math.nan, None
        out.append((slot, genome, fitness, desc, ok))
    return out


class SerialEvaluator:
    workers = 1

    def run(self, domain: Domain, seed: int, iteration: int, jobs):
        return _evaluate_jobs(domain, seed, iteration, jobs)

    def close(self) -> None:
        pass


class ParallelEvaluator:
    """Fans a batch out over a process pool; results re-ordered by slot."""

    def __init__(self, workers: int):
        self.workers = workers
        self._pool = ProcessPoolExecutor(max_workers=workers)

    def run(self, domain: Domain, seed: int, iteration: int, jobs):
        if not jobs:
            return []
        chunk = max(1, math.ceil(len(jobs) / self.workers))
        futures = [
            self._pool.submit(_evaluate_jobs, domain, seed, iteration, jobs[at : at + chunk])
            for at in range(0, len(jobs), chunk)
        ]
        results = [item for f in futures for item in f.result()]
        results.sort(key=lambda r: r[0])
        return results

    def close(self) -> None:
        self._pool.shutdown()


@dataclass
class RunState:
    """Mutable engine state threaded through init / step_batch / schedule."""

    config: RunConfig
    domain: Domain
    archive: Archive
    log: RunLog
    rng: np.random.Generator  # master stream: parent selection only
    evaluator: SerialEvaluator | ParallelEvaluator
    iteration: int = 0  # completed search iterations
    evaluations: int = 0
    parents: list = field(default_factory=list)  # batch-start snapshot (D7)


def _build_space(config: RunConfig, domain: Domain) -> FeatureSpace:
    if not config.resolution:
        raise ConfigError("run config is missing a feature-space resolution")
    if len(config.resolution) != domain.descriptor_dims:
        raise ConfigError(
            f"resolution {config.resolution} has {len(config.resolution)} dimensions, "
            f"domain {domain.name!r} produces {domain.descriptor_dims}"
        )
    try:
        return FeatureSpace(domain.bounds, config.resolution, config.schedule)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def _apply_results(state: RunState, results, iteration: int) -> tuple[int, int]:
    """Insert evaluated candidates in slot order; returns (clamped, invalid)."""
    clamped = invalid = 0
    space = state.archive.space
    for slot, genome, fitness, desc, ok in results:
        eval_id = state.evaluations
        state.evaluations += 1
        if not ok:
            invalid += 1
            continue
        _, was_clamped = space.bin_flag(desc)
        if was_clamped:
            clamped += 1
        parent = state.parents[slot] if iteration > 0 else None
        elite = Elite(
            genome=genome,
            fitness=fitness,
            descriptor=desc,
            cell=(),
            birth_iteration=iteration,
            id=eval_id,
            parent_id=parent.id if parent is not None else None,
            parent_cell=parent.cell if parent is not None else None,
            parent_descriptor=parent.descriptor.copy() if parent is not None else None,
        )
        if state.archive.try_insert(elite).inserted:
            state.log.insertions[eval_id] = InsertionRecord(
                id=eval_id,
                parent_id=elite.parent_id,
                birth_iteration=iteration,
                fitness=fitness,
                descriptor=elite.descriptor,
                parent_fitness=parent.fitness if parent is not None else None,
                parent_descriptor=elite.parent_descriptor,
            )
    return clamped, invalid


def _record_batch(state: RunState, iteration: int, clamped: int, invalid: int) -> None:
    best = state.archive.best()
    state.log.record_batch(
        BatchRecord(
            iteration=iteration,
            evaluations=state.evaluations,
            filled=state.archive.filled_count,
            best_fitness=best.fitness if best is not None else math.nan,
            clamped=clamped,
            invalid=invalid,
            resolution=state.archive.space.resolution,
        )
    )
    state.log.total_evaluations = state.evaluations


def validate_engine_config(config: RunConfig, domain: Domain) -> FeatureSpace:
    """All configuration checks; runs before any evaluation or pool creation."""
    if config.algorithm != "map_elites":
        raise ConfigError(f"engine runs map_elites, config says {config.algorithm!r}")
    if config.init_batch is None or config.init_batch < 1:
        raise ConfigError("init_batch must be ≥ 1")
    if config.batch_size is None or config.batch_size < 1:
        raise ConfigError("batch_size must be ≥ 1")
    if config.iterations is None or config.iterations < 0:
        raise ConfigError("iterations must be ≥ 0")
    return _build_space(config, domain)


def initialize_run(config: RunConfig, domain: Domain, evaluator=None) -> RunState:
    """Build state and run the initialization batch (iteration 0)."""
    space = validate_engine_config(config, domain)
    if evaluator is None:
        evaluator = (
            ParallelEvaluator(config.workers) if config.workers > 1 else SerialEvaluator()
        )
    state = RunState(
        config=config,
        domain=domain,
        archive=Archive(space),
        log=RunLog(),
        rng=np.random.default_rng(np.random.SeedSequence(config.seed, spawn_key=(0xE11E,))),
        evaluator=evaluator,
    )
    jobs = [(slot, None) for slot in range(config.init_batch)]
    results = state.evaluator.run(domain, config.seed, 0, jobs)
    clamped, invalid = _apply_results(state, results, iteration=0)
    apply_resolution_schedule(state)
    _record_batch(state, 0, clamped, invalid)
    return state


def step_batch(state: RunState) -> RunState:
    """One generate → evaluate → apply cycle (one search iteration)."""
    config = state.config
    if state.archive.filled_count == 0:
        raise DomainError(
            "archive is empty after initialization; every init candidate was invalid"
        )
    iteration = state.iteration + 1
    # D7: all parents come from the batch-start snapshot.  Selection happens
    # serially on the master stream before any evaluation or insertion.
    parents = [state.archive.random_elite(state.rng) for _ in range(config.batch_size)]
    state.parents = parents
    jobs = [(slot, parents[slot].genome) for slot in range(config.batch_size)]
    results = state.evaluator.run(state.domain, config.seed, iteration, jobs)
    clamped, invalid = _apply_results(state, results, iteration)
    state.iteration = iteration
    apply_resolution_schedule(state)
    _record_batch(state, iteration, clamped, invalid)
    return state


def apply_resolution_schedule(state: RunState) -> RunState:
    """Subdivide the archive for every schedule threshold equal to the
    current completed-iteration count (threshold 0 fires right after init)."""
    for threshold, resolution in state.archive.space.schedule:
        if threshold == state.iteration and resolution != state.archive.space.resolution:
            old = state.archive.space.resolution
            before = state.archive.filled_count
            state.archive = state.archive.subdivide(resolution)
            if state.archive.filled_count != before:
                raise EliteMapError("subdivision changed the elite count")
            state.log.resolution_changes.append((state.iteration, old, resolution))
    return state


def run_map_elites(config: RunConfig, domain: Domain) -> tuple[Archive, RunLog]:
    """Full run: init batch, ``iterations`` search batches, scheduled refinement."""
    validate_engine_config(config, domain)
    evaluator = ParallelEvaluator(config.workers) if config.workers > 1 else SerialEvaluator()
    try:
        state = initialize_run(config, domain, evaluator)
        for _ in range(config.iterations):
            step_batch(state)
    finally:
        evaluator.close()
    expected = config.total_evaluations()
    if state.evaluations != expected:
        raise EliteMapError(
            f"evaluation accounting broken: ran {state.evaluations}, expected {expected}"
        )
    return state.archive, state.log


# -- lineage exports -------------------------------------------------------


@dataclass(frozen=True)
class ArrowRecord:
    elite_id: int
    parent_descriptor: np.ndarray
    elite_descriptor: np.ndarray
    parent_fitness: float
    elite_fitness: float


def export_lineage_arrows(
    log: RunLog,
    archive: Archive,
    sample: Optional[int] = None,
    rng: Optional[np.random.Generator] = None,
) -> tuple[list[ArrowRecord], int]:
    """Parent→child arrows for final elites; init-born elites are counted, not drawn.

    ``sample`` picks that many elites uniformly without replacement (the
    sampling stream defaults to a fixed seed so exports are reproducible).
    Returns (arrows, omitted_count); len(arrows) + omitted = elites considered.
    """
    elites = list(archive)
    if sample is not None and sample < len(elites):
        if rng is None:
            rng = np.random.default_rng(0)
        chosen = rng.choice(len(elites), size=sample, replace=False)
        elites = [elites[i] for i in sorted(chosen)]
    arrows: list[ArrowRecord] = []
    omitted = 0
    for elite in elites:
        rec = log.insertions.get(elite.id)
        if rec is None:
            raise EliteMapError(f"final elite {elite.id} has no insertion record")
        if rec.parent_id is None:
            omitted += 1
            continue
        arrows.append(
            ArrowRecord(
                elite_id=elite.id,
                parent_descriptor=np.asarray(rec.parent_descriptor),
                elite_descriptor=rec.descriptor,
                parent_fitness=float(rec.parent_fitness),
                elite_fitness=rec.fitness,
            )
        )
    return arrows, omitted


def export_lineage_trace(log: RunLog, elite_id: int) -> list[InsertionRecord]:
    """Ancestor chain for one elite, ordered generation-0 ancestor first."""
    if elite_id not in log.insertions:
        raise EliteMapError(f"elite id {elite_id} not found in run log")
    chain = []
    rec: Optional[InsertionRecord] = log.insertions[elite_id]
    while rec is not None:
        chain.append(rec)
        rec = log.insertions[rec.parent_id] if rec.parent_id is not None else None
    chain.reverse()
    return chain
