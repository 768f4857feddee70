"""Treatment × replicate orchestration.

``run_experiment`` executes every (treatment, replicate) pair of a manifest,
each with seed ``base_seed + replicate_index``, writes per-run artifacts into
its own directory, and finishes with a single-writer aggregation step (runs
index, metrics report, figures).  Replicates are independent and can run in
parallel processes; a failed run is recorded and excluded from statistics
rather than aborting the experiment.

Directory layout::

    <out>/
      manifest_effective.yaml
      meta.yaml                  # timestamps live here and only here
      runs_index.csv
      runs/<treatment>/rep_<k>/
        effective_config.yaml
        archive.csv
        runlog.csv
        lineage_edges.csv        # map_elites runs only
        FAILED.txt               # only on failure
      report/                    # written by elitemap.report
"""

from __future__ import annotations

import dataclasses
import datetime
import math
import traceback
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Optional, Union

import yaml

from . import __version__
from .archive import Archive, FeatureSpace
from .config import ExperimentManifest, dump_effective_config, dump_effective_manifest
from .controls import (
    run_grid_search,
    run_ns_lc,
    run_random_sampling,
    run_ea_diversity,
    run_traditional_ea,
)
from .domains import make_domain
from .engine import RunConfig, run_map_elites
from .errors import ConfigError
from .serialization import (
    write_archive_csv,
    write_lineage_edges,
    write_runlog_csv,
)

Logger = Optional[Callable[[str], None]]


@dataclass(frozen=True)
class RunOutcome:
    treatment: str
    replicate: int
    seed: int
    ok: bool
    filled: int = 0
    best_fitness: float = math.nan
    evaluations: int = 0
    error: str = ""


def run_single(config: RunConfig, keep_log: bool = False):
    """Dispatch one run to the right algorithm; returns (archive, log).

    The log is an engine RunLog for map_elites and a ControlLog otherwise;
    both expose ``batches``, ``insertions`` and the totals the writers need.
    """
    domain = make_domain(config.domain, **config.domain_params)
    if config.algorithm == "map_elites":
        return run_map_elites(config, domain)
    space = FeatureSpace(domain.bounds, config.resolution)
    if config.algorithm == "random_sampling":
        return run_random_sampling(
            domain, space, config.budget, config.seed, keep_log=keep_log
        )
    if config.algorithm == "traditional_ea":
        return run_traditional_ea(
            domain,
            space,
            config.budget,
            config.seed,
            pop_size=config.population_size,
            tournament_k=config.tournament_size,
            keep_log=keep_log,
        )
    if config.algorithm == "ea_diversity":
        return run_ea_diversity(
            domain,
            space,
            config.budget,
            config.seed,
            pop_size=config.population_size,
            keep_log=keep_log,
        )
    if config.algorithm == "ns_lc":
        return run_ns_lc(
            domain,
            space,
            config.budget,
            config.seed,
            pop_size=config.population_size,
            k_neighbors=config.k_neighbors,
            archive_probability=config.archive_probability,
            keep_log=keep_log,
        )
    if config.algorithm == "grid_search":
        return run_grid_search(domain, space, config.grid_steps, keep_log=keep_log)
    raise ConfigError(f"unknown algorithm {config.algorithm!r}")


def write_run_artifacts(config: RunConfig, archive: Archive, log, run_dir: Union[str, Path]) -> None:
    run_dir = Path(run_dir)
    run_dir.mkdir(parents=True, exist_ok=True)
    (run_dir / "effective_config.yaml").write_text(dump_effective_config(config))
    domain = make_domain(config.domain, **config.domain_params)
    write_archive_csv(archive, domain, run_dir / "archive.csv")
    write_runlog_csv(log.batches, run_dir / "runlog.csv")
    if config.algorithm == "map_elites":
        write_lineage_edges(log, domain.descriptor_dims, run_dir / "lineage_edges.csv")


def _execute_replicate(args) -> RunOutcome:
    """Worker body: run one replicate and write its artifacts.

    Module-level (and single-argument) so it pickles for process pools.
    Exceptions become a failed RunOutcome plus a FAILED.txt in the run dir.
    """
    treatment, replicate, config, run_dir = args
    run_dir = Path(run_dir)
    try:
        archive, log = run_single(config, keep_log=False)
        write_run_artifacts(config, archive, log, run_dir)
        best = archive.best()
        return RunOutcome(
            treatment=treatment,
            replicate=replicate,
            seed=config.seed,
            ok=True,
            filled=archive.filled_count,
            best_fitness=best.fitness if best is not None else math.nan,
            evaluations=log.total_evaluations,
        )
    except Exception as exc:  # noqa: BLE001 — D-style failure tolerance
        run_dir.mkdir(parents=True, exist_ok=True)
        (run_dir / "FAILED.txt").write_text(traceback.format_exc())
        return RunOutcome(
            treatment=treatment,
            replicate=replicate,
            seed=config.seed,
            ok=False,
            error=f"{type(exc).__name__}: {exc}",
        )


def replicate_jobs(manifest: ExperimentManifest, out_dir: Path):
    jobs = []
    for spec in manifest.treatments:
        for rep in range(spec.replicates):
            config = dataclasses.replace(spec.config, seed=manifest.base_seed + rep)
            run_dir = out_dir / "runs" / spec.name / f"rep_{rep}"
            jobs.append((spec.name, rep, config, str(run_dir)))
    return jobs


def write_runs_index(outcomes: list[RunOutcome], dest: Path) -> None:
    lines = ["treatment,replicate,seed,status,evaluations,filled,error"]
    for o in outcomes:
        err = o.error.replace("\n", " ").replace(",", ";")
        lines.append(
            f"{o.treatment},{o.replicate},{o.seed},"
            f"{'ok' if o.ok else 'failed'},{o.evaluations},{o.filled},{err}"
        )
    dest.write_text("\n".join(lines) + "\n")


def _check_budget_parity(manifest: ExperimentManifest, log: Logger) -> Optional[str]:
    totals = {s.name: s.config.total_evaluations() for s in manifest.treatments}
    if len(set(totals.values())) > 1 and log is not None:
        msg = "treatments differ in evaluation budget: " + ", ".join(
            f"{name}={count}" for name, count in totals.items()
        )
        log(f"warning: {msg}")
        return msg
    return None


def run_experiment(
    manifest: ExperimentManifest,
    out_dir: Union[str, Path],
    workers: Optional[int] = None,
    log: Logger = None,
    build_report: bool = True,
) -> list[RunOutcome]:
    """Execute the full matrix, then aggregate (index, report, figures)."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    started = datetime.datetime.now(datetime.timezone.utc)
    (out_dir / "manifest_effective.yaml").write_text(dump_effective_manifest(manifest))
    parity_note = _check_budget_parity(manifest, log)

    jobs = replicate_jobs(manifest, out_dir)
    workers = manifest.workers if workers is None else workers
    outcomes: list[RunOutcome] = []
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            for outcome in pool.map(_execute_replicate, jobs):
                outcomes.append(outcome)
                _log_outcome(outcome, log)
    else:
        for job in jobs:
            outcome = _execute_replicate(job)
            outcomes.append(outcome)
            _log_outcome(outcome, log)

    write_runs_index(outcomes, out_dir / "runs_index.csv")
    finished = datetime.datetime.now(datetime.timezone.utc)
    meta = {
        "version": __version__,
        "started": started.isoformat(),
        "finished": finished.isoformat(),
        "wall seconds": round((finished - started).total_seconds(), 3),
    }
    if parity_note:
        meta["budget warning"] = parity_note
    (out_dir / "meta.yaml").write_text(yaml.safe_dump(meta, sort_keys=False))

    if build_report:
        from .report import build_report as _build

        _build(out_dir, log=log)
    return outcomes


def _log_outcome(outcome: RunOutcome, log: Logger) -> None:
    if log is None:
        return
    if outcome.ok:
        log(
            f"{outcome.treatment}/rep_{outcome.replicate} (seed {outcome.seed}): "
            f"{outcome.evaluations} evaluations, {outcome.filled} cells filled"
        )
    else:
        log(
            f"{outcome.treatment}/rep_{outcome.replicate} (seed {outcome.seed}) "
            f"FAILED: {outcome.error}"
        )
