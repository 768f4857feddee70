"""Command-line interface.

Subcommands: ``run`` (single run), ``experiment`` (treatment × replicate
matrix), ``heatmap`` (archive CSV → delimited matrix or PGM image),
``lineage`` (arrow table / single-elite trace from a run directory) and
``report`` (rebuild aggregation for an experiment directory).

Output defaults under ``$ELITEMAP_OUT`` (falling back to the working
directory).  Exit codes: 0 success, 2 configuration problem, 3 runtime or
domain failure.
"""

from __future__ import annotations

import dataclasses
import os
import sys
import traceback
from pathlib import Path
from typing import Optional

import click

from .config import ExperimentManifest, load_config, preset_path
from .engine import RunConfig
from .errors import ConfigError, EliteMapError
from .heatmap import heatmap_matrix, write_heatmap_csv, write_heatmap_pgm

OUT_ENV = "ELITEMAP_OUT"


def _output_root() -> Path:
    return Path(os.environ.get(OUT_ENV, "."))


def _load(config_arg: str):
    """A path on disk, or failing that a packaged preset name."""
    if Path(config_arg).exists():
        return load_config(config_arg)
    return load_config(preset_path(config_arg))


@click.group()
@click.version_option(package_name="elitemap")
def cli() -> None:
    """Illumination-style search over feature-space grids, with controls,
    map metrics and reproducible experiments."""


@cli.command()
@click.argument("config_path", metavar="CONFIG")
@click.option("-o", "--out", "out_dir", type=click.Path(file_okay=False), default=None,
              help=f"Run directory (default: under ${OUT_ENV} or cwd).")
@click.option("--seed", type=int, default=None, help="Override the config seed.")
@click.option("--workers", type=int, default=None, help="Override evaluation workers.")
def run(config_path: str, out_dir: Optional[str], seed: Optional[int], workers: Optional[int]) -> None:
    """Execute one run from CONFIG (a YAML path or packaged preset name)."""
    from .experiment import run_single, write_run_artifacts

    config = _load(config_path)
    if isinstance(config, ExperimentManifest):
        raise ConfigError(
            f"{config_path} is an experiment manifest; use `elitemap experiment`"
        )
    overrides = {}
    if seed is not None:
        overrides["seed"] = seed
    if workers is not None:
        overrides["workers"] = workers
    if overrides:
        config = dataclasses.replace(config, **overrides)
    if out_dir is None:
        out_dir = _output_root() / f"run_{config.domain}_{config.algorithm}_seed{config.seed}"
    archive, log = run_single(config)
    write_run_artifacts(config, archive, log, out_dir)
    best = archive.best()
    click.echo(
        f"{config.algorithm} on {config.domain}: {log.total_evaluations} evaluations, "
        f"{archive.filled_count} cells filled"
        + (f", best fitness {best.fitness:.6g}" if best is not None else "")
    )
    click.echo(f"artifacts in {out_dir}")


@cli.command()
@click.argument("manifest_path", metavar="MANIFEST")
@click.option("-o", "--out", "out_dir", type=click.Path(file_okay=False), default=None,
              help=f"Experiment directory (default: under ${OUT_ENV} or cwd).")
@click.option("--workers", type=int, default=None,
              help="Replicates to run in parallel (default: manifest value).")
@click.option("--report/--no-report", "with_report", default=True,
              help="Build the aggregate report after the runs.")
def experiment(manifest_path: str, out_dir: Optional[str], workers: Optional[int],
               with_report: bool) -> None:
    """Run every (treatment, replicate) pair of MANIFEST (path or preset name)."""
    from .experiment import run_experiment

    manifest = _load(manifest_path)
    if not isinstance(manifest, ExperimentManifest):
        raise ConfigError(f"{manifest_path} is a single-run config; use `elitemap run`")
    if out_dir is None:
        out_dir = Path(manifest.output) if manifest.output else _output_root() / manifest.name
    outcomes = run_experiment(
        manifest, out_dir, workers=workers, log=click.echo, build_report=with_report
    )
    failures = [o for o in outcomes if not o.ok]
    click.echo(
        f"{len(outcomes) - len(failures)}/{len(outcomes)} runs succeeded; "
        f"experiment directory: {out_dir}"
    )
    if failures:
        raise EliteMapError(f"{len(failures)} run(s) failed; see runs_index.csv")


def _parse_slices(slices: tuple[str, ...]) -> Optional[dict[int, int]]:
    parsed: dict[int, int] = {}
    for spec in slices:
        dim, eq, index = spec.partition("=")
        if not eq or not dim.strip().isdigit() or not index.strip().lstrip("-").isdigit():
            raise ConfigError(f"--slice expects DIM=INDEX with integers, got {spec!r}")
        parsed[int(dim)] = int(index)
    return parsed or None


@cli.command()
@click.argument("archive_path", metavar="ARCHIVE", type=click.Path(exists=True, dir_okay=False))
@click.option("--format", "fmt", type=click.Choice(["csv", "pgm"]), default="csv",
              show_default=True, help="Delimited matrix or plain grayscale PGM.")
@click.option("--slice", "slices", multiple=True, metavar="DIM=INDEX",
              help="Pin extra dimensions (repeatable) for maps with >2 dims.")
@click.option("-o", "--out", "out_path", type=click.Path(dir_okay=False), default=None,
              help="Output file (default: next to the archive).")
def heatmap(archive_path: str, fmt: str, slices: tuple[str, ...], out_path: Optional[str]) -> None:
    """Export the fitness map of ARCHIVE as a heatmap."""
    from .serialization import read_archive_dense

    _, dense = read_archive_dense(archive_path)
    matrix = heatmap_matrix(dense, _parse_slices(slices))
    if out_path is None:
        out_path = Path(archive_path).with_suffix(".heatmap." + fmt)
    if fmt == "csv":
        write_heatmap_csv(matrix, out_path)
    else:
        write_heatmap_pgm(matrix, out_path)
    click.echo(f"heatmap written to {out_path}")


@cli.command()
@click.argument("run_dir", metavar="RUN_DIR", type=click.Path(exists=True, file_okay=False))
@click.option("--arrows", "mode_arrows", is_flag=True,
              help="Parent→child arrow table over the final map (default).")
@click.option("--trace", "trace_id", type=int, default=None,
              help="Full ancestor chain of one elite id instead.")
@click.option("--sample", "sample", type=int, default=None,
              help="With --arrows: restrict to this many sampled elites.")
@click.option("-o", "--out", "out_path", type=click.Path(dir_okay=False), default=None,
              help="Output file (default: inside RUN_DIR).")
def lineage(run_dir: str, mode_arrows: bool, trace_id: Optional[int],
            sample: Optional[int], out_path: Optional[str]) -> None:
    """Export lineage data recorded by a map_elites run."""
    from .domains import make_domain
    from .engine import export_lineage_arrows, export_lineage_trace
    from .serialization import (
        read_archive_csv,
        read_lineage_edges,
        write_arrows_csv,
        write_trace_csv,
    )

    if mode_arrows and trace_id is not None:
        raise ConfigError("--arrows and --trace are mutually exclusive")
    run_path = Path(run_dir)
    edges_path = run_path / "lineage_edges.csv"
    if not edges_path.exists():
        raise ConfigError(f"{run_dir} has no lineage_edges.csv (map_elites runs only)")
    config = load_config(run_path / "effective_config.yaml")
    assert isinstance(config, RunConfig)
    domain = make_domain(config.domain, **config.domain_params)
    log = read_lineage_edges(edges_path)
    dims = domain.descriptor_dims

    if trace_id is not None:
        chain = export_lineage_trace(log, trace_id)
        out_path = out_path or run_path / f"lineage_trace_{trace_id}.csv"
        write_trace_csv(chain, trace_id, dims, out_path)
        click.echo(f"trace of {len(chain)} steps written to {out_path}")
        return
    archive = read_archive_csv(run_path / "archive.csv", domain)
    arrows, omitted = export_lineage_arrows(log, archive, sample=sample)
    out_path = out_path or run_path / "lineage_arrows.csv"
    write_arrows_csv(arrows, dims, out_path)
    click.echo(
        f"{len(arrows)} arrows written to {out_path} "
        f"({omitted} initialization-born elites have no parent)"
    )


@cli.command("report")
@click.argument("experiment_dir", metavar="EXPERIMENT_DIR",
                type=click.Path(exists=True, file_okay=False))
def report_cmd(experiment_dir: str) -> None:
    """(Re)build metrics, significance table and figures for an experiment."""
    from .report import build_report

    build_report(experiment_dir, log=click.echo)


def main(argv: Optional[list[str]] = None) -> int:
    try:
        cli.main(args=argv, standalone_mode=False)
        return 0
    except click.exceptions.Abort:
        click.echo("aborted", err=True)
        return 130
    except click.ClickException as exc:
        exc.show()
        return 2
    except ConfigError as exc:
        click.echo(f"configuration error: {exc}", err=True)
        return 2
    except EliteMapError as exc:
        click.echo(f"error: {exc}", err=True)
        return 3
    except Exception:  # noqa: BLE001 — anything else is a runtime failure: exit 3
        traceback.print_exc()
        return 3


if __name__ == "__main__":
    sys.exit(main())
