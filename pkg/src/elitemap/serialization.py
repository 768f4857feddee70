"""CSV artifacts: archives, run logs, lineage edges/arrows/traces.

All writers are byte-deterministic (17-significant-digit floats, fixed
column order, ``\\n`` line endings), which is what lets tests compare whole
runs by file content.  Archive CSVs open with a ``#`` metadata line carrying
the feature space (bounds + resolution) so they reload standalone; readers
skip any leading comment lines, keeping the header row the first CSV row.
"""

from __future__ import annotations

import csv
import io
import math
from pathlib import Path
from typing import Optional, TextIO, Union

import numpy as np

from .archive import Archive, Elite, FeatureSpace
from .domains.base import Domain
from .engine import ArrowRecord, BatchRecord, InsertionRecord, RunLog
from .errors import EliteMapError

PathLike = Union[str, Path]


def _fmt(value: float) -> str:
    return format(float(value), ".17g")


def _res_str(resolution: tuple[int, ...]) -> str:
    return "x".join(str(r) for r in resolution)


# ---------------------------------------------------------------------------
# archive CSV


def _space_comment(space: FeatureSpace) -> str:
    bounds = ";".join(f"{_fmt(lo)}:{_fmt(hi)}" for lo, hi in space.bounds)
    return f"# feature-space bounds={bounds} resolution={_res_str(space.resolution)}"


def _parse_space_comment(line: str) -> FeatureSpace:
    try:
        fields = dict(part.split("=", 1) for part in line[1:].split() if "=" in part)
        bounds = tuple(
            (float(lo), float(hi))
            for lo, hi in (pair.split(":") for pair in fields["bounds"].split(";"))
        )
        resolution = tuple(int(r) for r in fields["resolution"].split("x"))
        return FeatureSpace(bounds, resolution)
    except (KeyError, ValueError) as exc:
        raise EliteMapError(f"unparsable archive metadata line: {line!r}") from exc


def archive_csv_text(archive: Archive, domain: Domain) -> str:
    buf = io.StringIO()
    write_archive_csv(archive, domain, buf)
    return buf.getvalue()


def write_archive_csv(archive: Archive, domain: Domain, dest: Union[PathLike, TextIO]) -> None:
    """One row per occupied cell, lexicographic cell order."""
    if not hasattr(dest, "write"):
        with open(dest, "w", newline="") as f:
            write_archive_csv(archive, domain, f)
        return
    dims = archive.space.dims
    dest.write(_space_comment(archive.space) + "\n")
    writer = csv.writer(dest, lineterminator="\n")
    header = (
        [f"cell_idx_{d}" for d in range(dims)]
        + [f"desc_{d}" for d in range(dims)]
        + ["fitness", "birth_iteration", "id", "parent_id", "genome"]
    )
    writer.writerow(header)
    for elite in archive:
        writer.writerow(
            [str(c) for c in elite.cell]
            + [_fmt(v) for v in elite.descriptor]
            + [
                _fmt(elite.fitness),
                str(elite.birth_iteration),
                str(elite.id),
                "" if elite.parent_id is None else str(elite.parent_id),
                domain.encode_genome(elite.genome),
            ]
        )


def read_archive_dense(path: PathLike) -> tuple[FeatureSpace, np.ndarray]:
    """Feature space + dense fitness map from an archive CSV, genomes ignored.

    Enough for heatmap export, which needs no domain to decode genomes.
    """
    with open(path, newline="") as f:
        first = f.readline()
        if not first.startswith("#"):
            raise EliteMapError(f"{path}: missing feature-space metadata line")
        space = _parse_space_comment(first.strip())
        reader = csv.reader(f)
        header = next(reader, None)
        if header is None:
            raise EliteMapError(f"{path}: missing header row")
        dense = np.full(space.resolution, np.nan)
        fitness_col = 2 * space.dims
        for row in reader:
            cell = tuple(int(v) for v in row[: space.dims])
            dense[cell] = float(row[fitness_col])
    return space, dense


def read_archive_csv(path: PathLike, domain: Domain) -> Archive:
    """Rebuild an archive; every elite must re-bin to its recorded cell."""
    with open(path, newline="") as f:
        first = f.readline()
        if not first.startswith("#"):
            raise EliteMapError(f"{path}: missing feature-space metadata line")
        space = _parse_space_comment(first.strip())
        reader = csv.reader(f)
        header = next(reader, None)
        if header is None:
            raise EliteMapError(f"{path}: missing header row")
        dims = sum(1 for col in header if col.startswith("cell_idx_"))
        if dims != space.dims:
            raise EliteMapError(f"{path}: header has {dims} cell dims, metadata {space.dims}")
        archive = Archive(space)
        for row in reader:
            cell = tuple(int(v) for v in row[:dims])
            descriptor = np.array([float(v) for v in row[dims : 2 * dims]])
            fitness, birth, eid, parent, genome_text = row[2 * dims : 2 * dims + 5]
            elite = Elite(
                genome=domain.decode_genome(genome_text),
                fitness=float(fitness),
                descriptor=descriptor,
                cell=(),
                birth_iteration=int(birth),
                id=int(eid),
                parent_id=None if parent == "" else int(parent),
            )
            outcome = archive.try_insert(elite)
            if not outcome.inserted or elite.cell != cell:
                raise EliteMapError(
                    f"{path}: row for cell {cell} re-binned to {elite.cell}; file corrupt"
                )
    return archive


# ---------------------------------------------------------------------------
# run log CSV


def write_runlog_csv(batches: list[BatchRecord], dest: Union[PathLike, TextIO]) -> None:
    if not hasattr(dest, "write"):
        with open(dest, "w", newline="") as f:
            write_runlog_csv(batches, f)
        return
    writer = csv.writer(dest, lineterminator="\n")
    writer.writerow(
        ["iteration", "evaluations", "filled", "best_fitness", "clamped", "invalid", "resolution"]
    )
    for rec in batches:
        writer.writerow(
            [
                str(rec.iteration),
                str(rec.evaluations),
                str(rec.filled),
                "" if math.isnan(rec.best_fitness) else _fmt(rec.best_fitness),
                str(rec.clamped),
                str(rec.invalid),
                _res_str(rec.resolution),
            ]
        )


# ---------------------------------------------------------------------------
# lineage files


def write_lineage_edges(log: RunLog, dims: int, dest: Union[PathLike, TextIO]) -> None:
    """Every insertion ever made: the complete ancestry table for a run."""
    if not hasattr(dest, "write"):
        with open(dest, "w", newline="") as f:
            write_lineage_edges(log, dims, f)
        return
    writer = csv.writer(dest, lineterminator="\n")
    writer.writerow(
        ["child_id", "parent_id", "birth_iteration", "child_fitness"]
        + [f"child_desc_{d}" for d in range(dims)]
        + ["parent_fitness"]
        + [f"parent_desc_{d}" for d in range(dims)]
    )
    for rec in log.edges:
        root = rec.parent_id is None
        writer.writerow(
            [
                str(rec.id),
                "" if root else str(rec.parent_id),
                str(rec.birth_iteration),
                _fmt(rec.fitness),
            ]
            + [_fmt(v) for v in rec.descriptor]
            + (
                [""] * (dims + 1)
                if root
                else [_fmt(rec.parent_fitness)] + [_fmt(v) for v in rec.parent_descriptor]
            )
        )


def read_lineage_edges(path: PathLike) -> RunLog:
    """Reload the insertion table into a bare RunLog (for post-hoc exports)."""
    log = RunLog()
    with open(path, newline="") as f:
        reader = csv.reader(f)
        header = next(reader, None)
        if header is None or header[0] != "child_id":
            raise EliteMapError(f"{path}: not a lineage edges file")
        dims = sum(1 for col in header if col.startswith("child_desc_"))
        for row in reader:
            child_id = int(row[0])
            parent_id = None if row[1] == "" else int(row[1])
            log.insertions[child_id] = InsertionRecord(
                id=child_id,
                parent_id=parent_id,
                birth_iteration=int(row[2]),
                fitness=float(row[3]),
                descriptor=np.array([float(v) for v in row[4 : 4 + dims]]),
                parent_fitness=None if parent_id is None else float(row[4 + dims]),
                parent_descriptor=(
                    None
                    if parent_id is None
                    else np.array([float(v) for v in row[5 + dims : 5 + 2 * dims]])
                ),
            )
    return log


def write_arrows_csv(arrows: list[ArrowRecord], dims: int, dest: Union[PathLike, TextIO]) -> None:
    if not hasattr(dest, "write"):
        with open(dest, "w", newline="") as f:
            write_arrows_csv(arrows, dims, f)
        return
    writer = csv.writer(dest, lineterminator="\n")
    writer.writerow(
        ["elite_id"]
        + [f"parent_desc_{d}" for d in range(dims)]
        + [f"elite_desc_{d}" for d in range(dims)]
        + ["parent_fitness", "elite_fitness"]
    )
    for arrow in arrows:
        writer.writerow(
            [str(arrow.elite_id)]
            + [_fmt(v) for v in arrow.parent_descriptor]
            + [_fmt(v) for v in arrow.elite_descriptor]
            + [_fmt(arrow.parent_fitness), _fmt(arrow.elite_fitness)]
        )


def write_trace_csv(
    chain: list[InsertionRecord], trace_id: int, dims: int, dest: Union[PathLike, TextIO]
) -> None:
    """Ancestor chain, step 0 = generation-0 ancestor."""
    if not hasattr(dest, "write"):
        with open(dest, "w", newline="") as f:
            write_trace_csv(chain, trace_id, dims, f)
        return
    writer = csv.writer(dest, lineterminator="\n")
    writer.writerow(
        ["trace_id", "step", "id", "birth_iteration"]
        + [f"desc_{d}" for d in range(dims)]
        + ["fitness"]
    )
    for step, rec in enumerate(chain):
        writer.writerow(
            [str(trace_id), str(step), str(rec.id), str(rec.birth_iteration)]
            + [_fmt(v) for v in rec.descriptor]
            + [_fmt(rec.fitness)]
        )
