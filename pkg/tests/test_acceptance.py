"""Acceptance gate: one test per shipped claim, one verdict line each.

Criteria 1 and 2 share a full desk-scale retina experiment (the packaged
``retina_desk_experiment`` preset — 40 runs of 100,000 evaluations each),
which is run once per session and dominates the suite's wall time.  The
remaining criteria run in seconds.  Each test states the claim it checks in
its docstring; tolerances are part of the assertions.
"""

import dataclasses
import itertools
import math
import statistics
import time
from types import SimpleNamespace

import numpy as np
import pytest

import elitemap.archive as archive_mod
from elitemap.archive import Archive, Elite, FeatureSpace
from elitemap.config import load_config, preset_path
from elitemap.controls import EvalLogEntry, elites_from_log
from elitemap.domains import make_domain
from elitemap.domains.modularity import greedy_modularity, partition_modularity
from elitemap.engine import RunConfig, run_map_elites
from elitemap.experiment import run_experiment
from elitemap.metrics import (
    coverage,
    global_performance,
    global_reliability,
    mann_whitney_u,
    precision,
)
from elitemap.report import load_experiment, metric_samples, significance_rows
from elitemap.serialization import archive_csv_text, read_archive_dense

CONTROLS = ("random_sampling", "traditional_ea", "ns_lc")


def _median(samples, metric, treatment):
    return statistics.median(samples[metric][treatment])


@pytest.fixture(scope="session")
def retina_experiment(tmp_path_factory):
    """The packaged desk-scale retina benchmark, run exactly as shipped."""
    out = tmp_path_factory.mktemp("retina_desk")
    manifest = load_config(preset_path("retina_desk_experiment"))
    t0 = time.monotonic()
    outcomes = run_experiment(manifest, out, workers=1, build_report=False)
    wall = time.monotonic() - t0
    failed = [o for o in outcomes if not o.ok]
    assert not failed, f"runs failed: {[(o.treatment, o.replicate, o.error) for o in failed]}"
    data = load_experiment(out)
    return SimpleNamespace(
        out=out,
        data=data,
        wall=wall,
        samples=metric_samples(data),
        significance=significance_rows(data),
    )


def test_criterion_1_retina_quality_ordering(retina_experiment):
    """MAP-Elites leads every control on median coverage and reliability,
    each lead significant at p < 0.01 (two-tailed Mann-Whitney), with the
    whole 40-run experiment finishing inside 30 minutes."""
    samples = retina_experiment.samples
    lines = []
    for metric in ("coverage", "global_reliability"):
        me = _median(samples, metric, "map_elites")
        for control in CONTROLS:
            other = _median(samples, metric, control)
            lines.append(f"{metric}: map_elites {me:.4f} vs {control} {other:.4f}")
            assert me > other, "; ".join(lines)
    pvals = {
        (r["metric"], r["a"], r["b"]): r["p"] for r in retina_experiment.significance
    }
    for metric in ("coverage", "global_reliability"):
        for control in CONTROLS:
            p = pvals[(metric, "map_elites", control)]
            assert p < 0.01, f"{metric} map_elites vs {control}: p = {p:.4g}"
    assert retina_experiment.wall < 30 * 60, f"experiment took {retina_experiment.wall:.0f}s"


def test_criterion_2_precision_gap_direction(retina_experiment):
    """MAP-Elites beats random sampling on median precision; its
    precision-to-reliability gap is narrower than its coverage lead over
    random sampling; and precision ≥ reliability holds for every run."""
    samples = retina_experiment.samples
    me_precision = _median(samples, "precision", "map_elites")
    rs_precision = _median(samples, "precision", "random_sampling")
    assert me_precision > rs_precision, f"{me_precision:.4f} vs {rs_precision:.4f}"

    gap = me_precision - _median(samples, "global_reliability", "map_elites")
    advantage = _median(samples, "coverage", "map_elites") - _median(
        samples, "coverage", "random_sampling"
    )
    assert gap < advantage, f"precision gap {gap:.4f} vs coverage advantage {advantage:.4f}"

    for run in retina_experiment.data.runs:
        if run.metrics.precision is not None:
            assert run.metrics.precision >= run.metrics.global_reliability - 1e-12, (
                run.treatment,
                run.seed,
            )


def test_criterion_3_arm_fills_and_heights(tmp_path_factory):
    """On the arm benchmark, MAP-Elites' median filled-bin count matches or
    beats the 512-evaluation grid sweep despite its smaller budget, and its
    mean elite height beats random sampling's in at least 8 of 10 seeds."""
    out = tmp_path_factory.mktemp("arm_methods")
    manifest = load_config(preset_path("arm_experiment"))
    outcomes = run_experiment(manifest, out, workers=1, build_report=False)
    assert all(o.ok for o in outcomes), [o.error for o in outcomes if not o.ok]

    filled = {t: [] for t in ("map_elites", "grid_search", "random_sampling")}
    for o in outcomes:
        filled[o.treatment].append(o.filled)
    assert statistics.median(filled["map_elites"]) >= filled["grid_search"][0], filled

    def mean_heights(treatment):
        means = []
        for rep in range(10):
            path = out / "runs" / treatment / f"rep_{rep}" / "archive.csv"
            _, dense = read_archive_dense(path)
            means.append(float(np.nanmean(dense)))
        return means

    me, rs = mean_heights("map_elites"), mean_heights("random_sampling")
    wins = sum(1 for a, b in zip(me, rs) if a >= b)
    assert wins >= 8, f"map_elites mean-height wins in {wins}/10 paired seeds"


def test_criterion_4_metric_formula_oracles():
    """Two- and three-cell maps laid out by hand reproduce all four map
    metrics to 1e-12 against direct arithmetic."""
    nan = math.nan
    # two cells: reference filled in both, the run filled only the first
    M2 = np.array([10.0, 5.0])
    m2 = np.array([8.0, nan])
    assert abs(coverage(m2, M2) - 1 / 2) < 1e-12
    assert abs(global_reliability(m2, M2) - (8 / 10 + 0) / 2) < 1e-12
    assert abs(precision(m2, M2) - (8 / 10) / 1) < 1e-12
    assert abs(global_performance(m2, M2) - 8 / 10) < 1e-12

    # three cells: one never attained by anyone (NaN in the reference)
    M3 = np.array([4.0, 2.0, nan])
    m3 = np.array([1.0, nan, nan])
    assert abs(coverage(m3, M3) - 1 / 2) < 1e-12
    assert abs(global_reliability(m3, M3) - (1 / 4 + 0) / 2) < 1e-12
    assert abs(precision(m3, M3) - (1 / 4) / 1) < 1e-12
    assert abs(global_performance(m3, M3) - 1 / 4) < 1e-12

    # three cells, all filled, distinct denominators
    M3b = np.array([4.0, 2.0, 8.0])
    m3b = np.array([3.0, 2.0, 0.5])
    assert abs(coverage(m3b, M3b) - 1.0) < 1e-12
    expected = (3 / 4 + 2 / 2 + 0.5 / 8) / 3
    assert abs(global_reliability(m3b, M3b) - expected) < 1e-12
    assert abs(precision(m3b, M3b) - expected) < 1e-12
    assert abs(global_performance(m3b, M3b) - 3 / 8) < 1e-12


def _set_partitions(items):
    items = list(items)
    if not items:
        yield []
        return
    first, rest = items[0], items[1:]
    for partition in _set_partitions(rest):
        for i in range(len(partition)):
            yield partition[:i] + [[first] + partition[i]] + partition[i + 1 :]
        yield [[first]] + partition


def _exhaustive_best_q(adjacency):
    n = adjacency.shape[0]
    best = -np.inf
    for partition in _set_partitions(range(n)):
        labels = np.empty(n, dtype=int)
        for module, members in enumerate(partition):
            labels[list(members)] = module
        best = max(best, partition_modularity(adjacency, labels))
    return best


def _two_cycles(k1, k2):
    n = k1 + k2
    A = np.zeros((n, n))
    for i in range(k1):
        A[i, (i + 1) % k1] = 1
    for i in range(k2):
        A[k1 + i, k1 + (i + 1) % k2] = 1
    return A


def test_criterion_5_greedy_modularity_vs_exhaustive():
    """Over 200 random digraphs on ≤ 8 nodes the greedy merge never beats the
    exhaustive-partition optimum, and on two disjoint cycles it attains it."""
    rng = np.random.default_rng(7)
    for _ in range(200):
        n = int(rng.integers(2, 9))
        A = (rng.random((n, n)) < rng.uniform(0.15, 0.6)).astype(float)
        np.fill_diagonal(A, 0)
        q, _ = greedy_modularity(A)
        assert q <= _exhaustive_best_q(A) + 1e-12

    for k1, k2 in [(3, 3), (3, 4), (4, 4), (3, 5), (5, 5)]:
        A = _two_cycles(k1, k2)
        q, labels = greedy_modularity(A)
        by_cycle = np.array([0] * k1 + [1] * k2)
        assert q == pytest.approx(partition_modularity(A, by_cycle), abs=1e-12)
        if k1 + k2 <= 8:
            assert q == pytest.approx(_exhaustive_best_q(A), abs=1e-12)


def test_criterion_6_serial_parallel_byte_identical():
    """For every domain, a fixed-seed run evaluated serially and with eight
    worker processes exports byte-identical archive CSVs."""
    configs = {
        "retina": dict(resolution=(16, 16), init_batch=64, batch_size=40, iterations=8),
        "arm": dict(resolution=(64,), init_batch=50, batch_size=25, iterations=6),
        "synthetic": dict(resolution=(12, 12), init_batch=80, batch_size=40, iterations=5),
    }
    for name, kw in configs.items():
        domain = make_domain(name)
        serial_cfg = RunConfig(domain=name, seed=97, **kw)
        archive_serial, _ = run_map_elites(serial_cfg, domain)
        parallel_cfg = dataclasses.replace(serial_cfg, workers=8)
        archive_parallel, _ = run_map_elites(parallel_cfg, domain)
        text_serial = archive_csv_text(archive_serial, domain)
        text_parallel = archive_csv_text(archive_parallel, domain)
        assert text_serial == text_parallel, f"{name}: serial and 8-way runs diverge"


def test_criterion_7_subdivision_preserves_elites():
    """Full desk-scale retina runs refine 16² → 32² → 64²; each refinement
    keeps the elite count exactly and never loses or degrades a survivor."""
    base = load_config(preset_path("retina_desk"))
    original = archive_mod.Archive.subdivide
    for seed in (3000, 3001):
        events = []

        def spying(self, new_resolution, _original=original, _events=events):
            before = {e.id: (e.fitness, tuple(e.descriptor)) for e in self}
            result = _original(self, new_resolution)
            after = {e.id: (e.fitness, tuple(e.descriptor)) for e in result}
            _events.append((self.space.resolution, result.space.resolution, before, after))
            return result

        config = dataclasses.replace(base, seed=seed)
        domain = make_domain(config.domain, **config.domain_params)
        with pytest.MonkeyPatch.context() as mp:
            mp.setattr(archive_mod.Archive, "subdivide", spying)
            archive, log = run_map_elites(config, domain)

        assert [(old, new) for old, new, *_ in events] == [
            ((16, 16), (32, 32)),
            ((32, 32), (64, 64)),
        ]
        for old_res, new_res, before, after in events:
            assert len(after) == len(before), (seed, old_res, new_res)
            for elite_id, (fitness, descriptor) in before.items():
                assert elite_id in after, (seed, new_res, elite_id)
                new_fitness, new_descriptor = after[elite_id]
                assert new_fitness >= fitness, (seed, new_res, elite_id)
                assert new_descriptor == descriptor, (seed, new_res, elite_id)
        assert archive.space.resolution == (64, 64)
        assert [c[1:] for c in log.resolution_changes] == [
            ((16, 16), (32, 32)),
            ((32, 32), (64, 64)),
        ]


def test_criterion_8_rank_test_reference_values():
    """The rank-sum test reproduces small-sample reference behavior: the
    {1,2} vs {3,4} exact two-tailed p of 1/3, argument-order symmetry over
    1,000 random pairs, and exact/approximate agreement within 0.02 for
    every tie-free arrangement at the size where the branches hand over."""
    u, p = mann_whitney_u([1, 2], [3, 4])
    assert u == 0
    assert p == pytest.approx(1 / 3, abs=1e-12)

    rng = np.random.default_rng(42)
    for _ in range(1000):
        n, m = int(rng.integers(1, 11)), int(rng.integers(1, 11))
        pool = rng.integers(0, 6, size=n + m).astype(float)  # ties likely
        a, b = list(pool[:n]), list(pool[n:])
        _, p_ab = mann_whitney_u(a, b)
        _, p_ba = mann_whitney_u(b, a)
        assert abs(p_ab - p_ba) < 1e-12

    values = list(range(12))  # distinct ⇒ tie-free; 6+6 is the handover size
    for chosen in itertools.combinations(range(12), 6):
        a = [float(values[i]) for i in chosen]
        b = [float(values[i]) for i in range(12) if i not in chosen]
        _, p_exact = mann_whitney_u(a, b, method="exact")
        _, p_approx = mann_whitney_u(a, b, method="approx")
        assert abs(p_exact - p_approx) <= 0.02, (a, b)


def test_criterion_9_log_distillation_matches_insertion():
    """Distilling an archive from an evaluation log equals inserting the
    same entries one by one, on 10,000-entry randomized logs."""
    space = FeatureSpace(((0.0, 1.0), (0.0, 1.0)), (12, 9))
    for seed in (1, 2, 3):
        rng = np.random.default_rng(seed)
        entries = []
        for index in range(10_000):
            descriptor = rng.random(2)
            # coarse fitness grid forces plenty of exact ties
            fitness = float(rng.integers(0, 40)) / 8.0
            entries.append(
                EvalLogEntry(
                    genome=index, fitness=fitness, descriptor=descriptor, index=index
                )
            )

        distilled = elites_from_log(entries, space)

        replayed = Archive(space)
        for entry in entries:
            replayed.try_insert(
                Elite(
                    genome=entry.genome,
                    fitness=entry.fitness,
                    descriptor=entry.descriptor,
                    cell=(),
                    birth_iteration=0,
                    id=entry.index,
                    parent_id=None,
                )
            )

        as_dict = lambda archive: {e.cell: (e.fitness, e.id) for e in archive}
        assert as_dict(distilled) == as_dict(replayed)
