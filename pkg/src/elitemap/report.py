"""Aggregate an experiment directory into metrics, significance and figures.

Reads ``manifest_effective.yaml`` + per-run archives, builds the cross-run
reference map (cell-wise best over every successful run of every treatment),
and writes into ``<experiment>/report/``:

* ``metrics.csv`` — one row per successful run, all four map metrics
* ``significance.csv`` — pairwise two-tailed Mann-Whitney U per metric
* ``report.txt`` — medians, significance table, exclusions, failures
* ``figures/`` — metric box plots and one example map per treatment

Everything except the figures directory is plain delimited text, written
deterministically (no timestamps — those live in ``meta.yaml``).
"""

from __future__ import annotations

import csv
import statistics
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Optional, Union

import numpy as np

from .config import ExperimentManifest, load_config
from .domains import make_domain
from .errors import EliteMapError
from .heatmap import heatmap_matrix
from .metrics import (
    MetricsRecord,
    compute_metrics,
    excluded_reference_cells,
    mann_whitney_u,
    reference_map,
)
from .serialization import _fmt, read_archive_csv

METRIC_FIELDS = ("coverage", "global_reliability", "precision", "global_performance")
METRIC_TITLES = {
    "coverage": "coverage",
    "global_reliability": "reliability",
    "precision": "precision",
    "global_performance": "performance",
}

Logger = Optional[Callable[[str], None]]


@dataclass(frozen=True)
class IndexRow:
    treatment: str
    replicate: int
    seed: int
    ok: bool
    error: str


@dataclass(frozen=True)
class RunMetrics:
    treatment: str
    replicate: int
    seed: int
    metrics: MetricsRecord


@dataclass
class ExperimentData:
    manifest: ExperimentManifest
    index: list[IndexRow]
    maps: dict[tuple[str, int], np.ndarray]  # (treatment, replicate) -> dense map
    reference: Optional[np.ndarray]
    runs: list[RunMetrics]


def read_runs_index(path: Path) -> list[IndexRow]:
    rows = []
    with open(path, newline="") as f:
        for row in csv.DictReader(f):
            rows.append(
                IndexRow(
                    treatment=row["treatment"],
                    replicate=int(row["replicate"]),
                    seed=int(row["seed"]),
                    ok=row["status"] == "ok",
                    error=row["error"],
                )
            )
    return rows


def load_experiment(out_dir: Union[str, Path]) -> ExperimentData:
    """Load every successful run's dense map and score it against the
    cross-run reference."""
    out_dir = Path(out_dir)
    manifest = load_config(out_dir / "manifest_effective.yaml")
    if not isinstance(manifest, ExperimentManifest):
        raise EliteMapError(f"{out_dir} does not look like an experiment directory")
    index_path = out_dir / "runs_index.csv"
    if index_path.exists():
        index = read_runs_index(index_path)
    else:
        # tolerate a directory assembled by hand: every present archive is "ok"
        index = [
            IndexRow(spec.name, rep, manifest.base_seed + rep, True, "")
            for spec in manifest.treatments
            for rep in range(spec.replicates)
            if (out_dir / "runs" / spec.name / f"rep_{rep}" / "archive.csv").exists()
        ]

    domains = {
        spec.name: make_domain(spec.config.domain, **spec.config.domain_params)
        for spec in manifest.treatments
    }
    maps: dict[tuple[str, int], np.ndarray] = {}
    for row in index:
        if not row.ok:
            continue
        archive_path = out_dir / "runs" / row.treatment / f"rep_{row.replicate}" / "archive.csv"
        archive = read_archive_csv(archive_path, domains[row.treatment])
        maps[(row.treatment, row.replicate)] = archive.to_dense_map()

    reference = reference_map(list(maps.values())) if maps else None
    runs = []
    if reference is not None:
        for row in index:
            if not row.ok:
                continue
            record = compute_metrics(
                row.treatment, row.seed, maps[(row.treatment, row.replicate)], reference
            )
            runs.append(RunMetrics(row.treatment, row.replicate, row.seed, record))
    return ExperimentData(manifest, index, maps, reference, runs)


# ---------------------------------------------------------------------------
# tables


def metric_samples(data: ExperimentData) -> dict[str, dict[str, list[float]]]:
    """``samples[metric][treatment]`` = defined per-run values, run order."""
    out: dict[str, dict[str, list[float]]] = {
        metric: {spec.name: [] for spec in data.manifest.treatments}
        for metric in METRIC_FIELDS
    }
    for run in data.runs:
        for metric in METRIC_FIELDS:
            value = getattr(run.metrics, metric)
            if value is not None:
                out[metric][run.treatment].append(float(value))
    return out


def write_metrics_csv(data: ExperimentData, dest: Path) -> None:
    lines = ["treatment,replicate,seed," + ",".join(METRIC_FIELDS)]
    for run in data.runs:
        cells = [run.treatment, str(run.replicate), str(run.seed)]
        for metric in METRIC_FIELDS:
            value = getattr(run.metrics, metric)
            cells.append("" if value is None else _fmt(value))
        lines.append(",".join(cells))
    dest.write_text("\n".join(lines) + "\n")


def significance_rows(data: ExperimentData) -> list[dict]:
    samples = metric_samples(data)
    names = [spec.name for spec in data.manifest.treatments]
    rows = []
    for metric in METRIC_FIELDS:
        for i, a in enumerate(names):
            for b in names[i + 1:]:
                sa, sb = samples[metric][a], samples[metric][b]
                if not sa or not sb:
                    continue  # metric undefined for a whole treatment
                u, p = mann_whitney_u(sa, sb)
                rows.append(
                    {
                        "metric": metric,
                        "a": a,
                        "b": b,
                        "n_a": len(sa),
                        "n_b": len(sb),
                        "U": u,
                        "p": p,
                    }
                )
    return rows


def write_significance_csv(rows: list[dict], dest: Path) -> None:
    lines = ["metric,treatment_a,treatment_b,n_a,n_b,U,p"]
    for r in rows:
        lines.append(
            f"{r['metric']},{r['a']},{r['b']},{r['n_a']},{r['n_b']},"
            f"{_fmt(r['U'])},{_fmt(r['p'])}"
        )
    dest.write_text("\n".join(lines) + "\n")


def _is_number(cell: str) -> bool:
    try:
        float(cell)
    except ValueError:
        return cell == "-"
    return True


def _table(header: list[str], body: list[list[str]]) -> list[str]:
    widths = [
        max(len(header[c]), *(len(row[c]) for row in body)) if body else len(header[c])
        for c in range(len(header))
    ]
    numeric = [bool(body) and all(_is_number(row[c]) for row in body) for c in range(len(header))]

    def fmt(row):
        return "  ".join(
            cell.rjust(widths[c]) if numeric[c] else cell.ljust(widths[c])
            for c, cell in enumerate(row)
        ).rstrip()

    return [fmt(header)] + [fmt(row) for row in body]


def report_text(data: ExperimentData) -> str:
    manifest = data.manifest
    ok = [r for r in data.index if r.ok]
    failed = [r for r in data.index if not r.ok]
    res = "x".join(str(r) for r in manifest.resolution)
    lines = [
        f"Experiment report: {manifest.name}",
        f"Domain: {manifest.domain} | map resolution: {res}",
        f"Successful runs: {len(ok)}/{len(data.index)}",
    ]
    if data.reference is None:
        lines += ["", "No successful runs; nothing to aggregate."]
    else:
        filled = int(np.isfinite(data.reference).sum())
        excluded = excluded_reference_cells(data.reference)
        lines.append(
            f"Reference map: {filled}/{data.reference.size} cells filled "
            f"across all {len(ok)} runs; {excluded} filled cells excluded "
            "from reliability/precision (best-known fitness <= 0)"
        )
        samples = metric_samples(data)
        body = []
        for spec in manifest.treatments:
            row = [spec.name, str(sum(1 for r in ok if r.treatment == spec.name))]
            for metric in METRIC_FIELDS:
                values = samples[metric][spec.name]
                row.append(f"{statistics.median(values):.4f}" if values else "-")
            body.append(row)
        lines += ["", "Median metrics per treatment"]
        lines += _table(
            ["treatment", "n", *(METRIC_TITLES[m] for m in METRIC_FIELDS)], body
        )
        lines.append(
            "(precision/performance medians use only runs with a non-empty map)"
        )
        if len(manifest.treatments) >= 2:
            rows = significance_rows(data)
            body = [
                [
                    METRIC_TITLES[r["metric"]],
                    r["a"],
                    r["b"],
                    f"{r['U']:.1f}",
                    f"{r['p']:.4g}",
                ]
                for r in rows
            ]
            lines += ["", "Pairwise Mann-Whitney U (two-tailed)"]
            lines += _table(["metric", "treatment A", "treatment B", "U", "p"], body)
    budgets = {s.name: s.config.total_evaluations() for s in manifest.treatments}
    if len(set(budgets.values())) > 1:
        lines += [
            "",
            "Note: treatments differ in evaluation budget: "
            + ", ".join(f"{k}={v}" for k, v in budgets.items()),
        ]
    lines += ["", "Failed runs"]
    if failed:
        lines += [
            f"- {r.treatment}/rep_{r.replicate} (seed {r.seed}): {r.error}"
            for r in failed
        ]
        lines.append("(failed runs are excluded from all statistics above)")
    else:
        lines.append("- none")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# entry point


def build_report(out_dir: Union[str, Path], log: Logger = None) -> Path:
    out_dir = Path(out_dir)
    data = load_experiment(out_dir)
    report_dir = out_dir / "report"
    report_dir.mkdir(parents=True, exist_ok=True)

    write_metrics_csv(data, report_dir / "metrics.csv")
    if data.reference is not None and len(data.manifest.treatments) >= 2:
        write_significance_csv(significance_rows(data), report_dir / "significance.csv")
    (report_dir / "report.txt").write_text(report_text(data))

    figures_dir = report_dir / "figures"
    figures_dir.mkdir(exist_ok=True)
    from . import figures

    if data.runs:
        figures.metric_boxplots(
            metric_samples(data),
            figures_dir / "metrics_boxplot.png",
            title=data.manifest.name,
        )
    bounds = make_domain(
        data.manifest.domain,
        **data.manifest.treatments[0].config.domain_params,
    ).bounds
    for spec in data.manifest.treatments:
        reps = sorted(r for t, r in data.maps if t == spec.name)
        if not reps:
            continue
        matrix = heatmap_matrix(data.maps[(spec.name, reps[0])])
        figures.archive_heatmap(
            matrix,
            bounds,
            figures_dir / f"map_{spec.name}.png",
            title=f"{spec.name} (replicate {reps[0]})",
        )
    if log is not None:
        log(f"report written to {report_dir}")
    return report_dir
