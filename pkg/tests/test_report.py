"""Experiment aggregation: metrics tables, significance, rendered report."""

import csv

import numpy as np
import pytest

from elitemap.config import parse_manifest
from elitemap.experiment import run_experiment
from elitemap.report import (
    build_report,
    load_experiment,
    metric_samples,
    report_text,
    significance_rows,
)

MANIFEST = {
    "name": "report_fixture",
    "domain": "synthetic",
    "resolution": [6, 6],
    "replicates": 3,
    "base seed": 21,
    "domain params": {"fitness mode": "rastrigin"},
    "treatments": [
        {"name": "me", "initial batch": 60, "batch size": 30, "iterations": 8},
        {"name": "rs", "algorithm": "random_sampling", "budget": 300},
        {"name": "ea", "algorithm": "traditional_ea", "budget": 300,
         "population size": 30},
    ],
}


@pytest.fixture(scope="module")
def exp_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("report_exp")
    run_experiment(parse_manifest(dict(MANIFEST)), out)
    return out


@pytest.fixture(scope="module")
def data(exp_dir):
    return load_experiment(exp_dir)


class TestLoadExperiment:
    def test_reference_covers_every_run(self, data):
        assert data.reference is not None
        for dense in data.maps.values():
            filled = np.isfinite(dense)
            assert np.isfinite(data.reference[filled]).all()
            assert np.all(data.reference[filled] >= dense[filled])

    def test_one_metrics_row_per_successful_run(self, data):
        assert len(data.runs) == 9
        assert {(r.treatment, r.replicate) for r in data.runs} == set(data.maps)

    def test_samples_keep_run_order(self, data):
        samples = metric_samples(data)
        assert list(samples["coverage"]) == ["me", "rs", "ea"]
        assert all(len(v) == 3 for v in samples["coverage"].values())


class TestSignificance:
    def test_pairs_cover_all_unordered_combinations(self, data):
        rows = significance_rows(data)
        per_metric = {}
        for r in rows:
            per_metric.setdefault(r["metric"], []).append((r["a"], r["b"]))
        for metric, pairs in per_metric.items():
            assert pairs == [("me", "rs"), ("me", "ea"), ("rs", "ea")]

    def test_csv_layout(self, exp_dir):
        with open(exp_dir / "report" / "significance.csv") as f:
            rows = list(csv.DictReader(f))
        assert set(rows[0]) == {"metric", "treatment_a", "treatment_b", "n_a", "n_b", "U", "p"}
        for row in rows:
            assert 0.0 < float(row["p"]) <= 1.0

    def test_metrics_csv_numeric(self, exp_dir):
        with open(exp_dir / "report" / "metrics.csv") as f:
            rows = list(csv.DictReader(f))
        assert len(rows) == 9
        for row in rows:
            assert 0.0 <= float(row["coverage"]) <= 1.0


class TestReportText:
    def test_mentions_every_treatment_with_medians(self, data):
        text = report_text(data)
        assert "Median metrics per treatment" in text
        for name in ("me", "rs", "ea"):
            assert name in text
        assert "Mann-Whitney" in text
        assert "Failed runs" in text and "- none" in text

    def test_reference_disclosure_line(self, data):
        text = report_text(data)
        assert "Reference map:" in text
        assert "excluded from reliability/precision" in text

    def test_budget_mismatch_noted(self, tmp_path):
        manifest = dict(MANIFEST)
        manifest["treatments"] = [
            {"name": "me", "initial batch": 60, "batch size": 30, "iterations": 8},
            {"name": "rs", "algorithm": "random_sampling", "budget": 999},
        ]
        manifest["replicates"] = 1
        run_experiment(parse_manifest(manifest), tmp_path, build_report=False)
        text = report_text(load_experiment(tmp_path))
        assert "differ in evaluation budget" in text

    def test_failed_runs_listed_and_excluded(self, tmp_path, monkeypatch):
        import elitemap.experiment as experiment

        calls = {"n": 0}
        real = experiment.run_random_sampling

        def flaky(*args, **kwargs):
            calls["n"] += 1
            if calls["n"] == 1:
                raise RuntimeError("boom")
            return real(*args, **kwargs)

        monkeypatch.setattr(experiment, "run_random_sampling", flaky)
        manifest = dict(MANIFEST)
        manifest["treatments"] = [
            {"name": "rs", "algorithm": "random_sampling", "budget": 300},
        ]
        run_experiment(parse_manifest(manifest), tmp_path, build_report=False)
        data = load_experiment(tmp_path)
        assert len(data.runs) == 2  # third replicate failed and is excluded
        text = report_text(data)
        assert "rs/rep_0" in text and "boom" in text
        assert "excluded from all statistics" in text


class TestFigures:
    def test_written_alongside_tables(self, exp_dir):
        figures = exp_dir / "report" / "figures"
        assert (figures / "metrics_boxplot.png").exists()
        for name in ("me", "rs", "ea"):
            assert (figures / f"map_{name}.png").exists()

    def test_rebuild_identical_tables(self, exp_dir):
        metrics = exp_dir / "report" / "metrics.csv"
        report = exp_dir / "report" / "report.txt"
        before = metrics.read_bytes(), report.read_bytes()
        build_report(exp_dir)
        assert (metrics.read_bytes(), report.read_bytes()) == before
