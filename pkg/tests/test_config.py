"""Config loading: key validation, shorthands, manifests, effective echoes."""

import textwrap

import pytest
import yaml

from elitemap.config import (
    ExperimentManifest,
    dump_effective_config,
    dump_effective_manifest,
    load_config,
    parse_manifest,
    parse_run_config,
    preset_names,
    preset_path,
)
from elitemap.engine import RunConfig
from elitemap.errors import ConfigError


def load_text(tmp_path, text, name="config.yaml"):
    path = tmp_path / name
    path.write_text(textwrap.dedent(text))
    return load_config(path)


class TestRunConfigs:
    def test_minimal_map_elites(self, tmp_path):
        config = load_text(
            tmp_path,
            """
            domain: synthetic
            budget: 1000
            """,
        )
        assert isinstance(config, RunConfig)
        assert config.algorithm == "map_elites"
        assert config.resolution == (10, 10)  # synthetic default
        assert (config.init_batch, config.batch_size, config.iterations) == (100, 100, 9)
        assert config.total_evaluations() == 1000

    def test_budget_shorthand_respects_given_batches(self, tmp_path):
        config = load_text(
            tmp_path,
            """
            domain: synthetic
            budget: 420
            initial batch: 120
            batch size: 10
            """,
        )
        assert config.iterations == 30

    def test_budget_must_divide(self, tmp_path):
        with pytest.raises(ConfigError):
            load_text(
                tmp_path,
                """
                domain: synthetic
                budget: 1050
                batch size: 100
                """,
            )

    def test_unknown_key_named_in_error(self, tmp_path):
        with pytest.raises(ConfigError, match="batchsize"):
            load_text(
                tmp_path,
                """
                domain: synthetic
                budget: 100
                batchsize: 10
                """,
            )

    def test_unknown_domain_and_algorithm(self):
        with pytest.raises(ConfigError, match="maze"):
            parse_run_config({"domain": "maze"})
        with pytest.raises(ConfigError, match="hillclimb"):
            parse_run_config({"domain": "synthetic", "algorithm": "hillclimb"})

    def test_resolution_broadcast_from_int(self):
        config = parse_run_config(
            {"domain": "synthetic", "budget": 100, "resolution": 8}
        )
        assert config.resolution == (8, 8)

    def test_resolution_dimension_mismatch(self):
        with pytest.raises(ConfigError):
            parse_run_config(
                {"domain": "arm", "budget": 100, "resolution": [8, 8]}
            )

    def test_schedule_sorted_and_validated(self):
        config = parse_run_config(
            {
                "domain": "synthetic",
                "budget": 500,
                "resolution": [5, 5],
                "resolution change program": {4: [20, 20], 2: [10, 10]},
            }
        )
        assert config.schedule == ((2, (10, 10)), (4, (20, 20)))

    def test_schedule_must_refine(self):
        with pytest.raises(ConfigError):
            parse_run_config(
                {
                    "domain": "synthetic",
                    "budget": 500,
                    "resolution": [6, 6],
                    "resolution change program": {2: [8, 8]},
                }
            )

    def test_schedule_rejected_for_controls(self):
        with pytest.raises(ConfigError):
            parse_run_config(
                {
                    "domain": "synthetic",
                    "algorithm": "random_sampling",
                    "budget": 100,
                    "resolution change program": {2: [20, 20]},
                }
            )

    def test_controls_need_budget(self):
        with pytest.raises(ConfigError, match="budget"):
            parse_run_config({"domain": "synthetic", "algorithm": "ns_lc"})

    def test_grid_search_is_arm_only(self):
        with pytest.raises(ConfigError):
            parse_run_config({"domain": "synthetic", "algorithm": "grid_search"})
        config = parse_run_config({"domain": "arm", "algorithm": "grid_search"})
        assert config.grid_steps == 8
        assert config.total_evaluations() == 512

    def test_domain_params_spaces_become_underscores(self):
        config = parse_run_config(
            {
                "domain": "synthetic",
                "budget": 100,
                "domain params": {"fitness mode": "rastrigin", "genome length": 4},
            }
        )
        assert config.domain_params == {"fitness_mode": "rastrigin", "genome_length": 4}

    def test_bad_domain_params_fail_at_load(self):
        with pytest.raises(ConfigError):
            parse_run_config(
                {
                    "domain": "synthetic",
                    "budget": 100,
                    "domain params": {"fitness mode": "bogus"},
                }
            )

    def test_objects_file_loaded_relative_to_config(self, tmp_path):
        (tmp_path / "left.txt").write_text("0001\n0010\n")
        config = load_text(
            tmp_path,
            """
            domain: retina
            budget: 100
            domain params:
              left objects file: left.txt
            """,
        )
        assert config.domain_params["left_objects"] == (1, 2)

    def test_non_integer_rejected(self):
        with pytest.raises(ConfigError):
            parse_run_config({"domain": "synthetic", "budget": "many"})
        with pytest.raises(ConfigError, match="seed"):
            parse_run_config({"domain": "synthetic", "budget": 100, "seed": -1})


class TestManifests:
    BASE = {
        "name": "exp",
        "domain": "synthetic",
        "resolution": [10, 10],
        "replicates": 3,
        "base seed": 50,
        "treatments": [
            {"name": "me", "budget": 300},
            {"name": "rs", "algorithm": "random_sampling", "budget": 300},
        ],
    }

    def test_treatments_inherit_shared_keys(self):
        data = dict(self.BASE)
        manifest = parse_manifest(data)
        assert isinstance(manifest, ExperimentManifest)
        assert manifest.replicates == 3
        me, rs = manifest.treatments
        assert me.config.seed == rs.config.seed == 50
        assert me.config.resolution == rs.config.resolution == (10, 10)

    def test_per_treatment_replicates_override(self):
        data = dict(self.BASE)
        data["treatments"] = [
            {"name": "me", "budget": 300},
            {"name": "rs", "algorithm": "random_sampling", "budget": 300, "replicates": 1},
        ]
        manifest = parse_manifest(data)
        assert [t.replicates for t in manifest.treatments] == [3, 1]

    def test_control_resolution_pinned_to_manifest(self):
        data = dict(self.BASE)
        data["treatments"] = [
            {"name": "rs", "algorithm": "random_sampling", "budget": 300, "resolution": [5, 5]},
        ]
        with pytest.raises(ConfigError, match="resolution"):
            parse_manifest(data)

    def test_map_elites_must_end_at_manifest_resolution(self):
        data = dict(self.BASE)
        data["treatments"] = [{"name": "me", "budget": 300, "resolution": [5, 5]}]
        with pytest.raises(ConfigError, match="final"):
            parse_manifest(data)

    def test_map_elites_schedule_may_start_coarser(self):
        data = dict(self.BASE)
        data["treatments"] = [
            {
                "name": "me",
                "budget": 300,
                "resolution": [5, 5],
                "resolution change program": {1: [10, 10]},
            }
        ]
        manifest = parse_manifest(data)
        assert manifest.treatments[0].config.resolution == (5, 5)
        assert manifest.treatments[0].config.final_resolution() == (10, 10)

    def test_duplicate_names_rejected(self):
        data = dict(self.BASE)
        data["treatments"] = [
            {"name": "same", "budget": 300},
            {"name": "same", "algorithm": "ns_lc", "budget": 300},
        ]
        with pytest.raises(ConfigError, match="duplicate"):
            parse_manifest(data)

    def test_unsafe_names_rejected(self):
        data = dict(self.BASE)
        data["treatments"] = [{"name": "a/b", "budget": 300}]
        with pytest.raises(ConfigError, match="directory"):
            parse_manifest(data)

    def test_name_defaults_to_algorithm(self):
        data = dict(self.BASE)
        data["treatments"] = [{"algorithm": "random_sampling", "budget": 300}]
        manifest = parse_manifest(data)
        assert manifest.treatments[0].name == "random_sampling"


class TestEffectiveEcho:
    def test_run_echo_reloads_identically(self, tmp_path):
        config = parse_run_config(
            {
                "domain": "synthetic",
                "budget": 500,
                "resolution": [5, 5],
                "resolution change program": {2: [10, 10]},
                "domain params": {"fitness mode": "rastrigin"},
            }
        )
        out = tmp_path / "effective_config.yaml"
        out.write_text(dump_effective_config(config))
        assert load_config(out) == config

    def test_manifest_echo_reloads_identically(self, tmp_path):
        manifest = parse_manifest(dict(TestManifests.BASE))
        out = tmp_path / "manifest_effective.yaml"
        out.write_text(dump_effective_manifest(manifest))
        again = load_config(out)
        assert again == manifest

    def test_echo_is_plain_yaml(self, tmp_path):
        config = parse_run_config({"domain": "synthetic", "budget": 100})
        data = yaml.safe_load(dump_effective_config(config))
        assert data["batch size"] == 100
        assert data["algorithm"] == "map_elites"


class TestPresets:
    def test_all_presets_load(self):
        names = preset_names()
        assert len(names) >= 5
        for name in names:
            load_config(preset_path(name))

    def test_unknown_preset_lists_available(self):
        with pytest.raises(ConfigError, match="retina_desk"):
            preset_path("nonexistent")

    def test_full_scale_preset_total_budget(self):
        config = load_config(preset_path("retina_full"))
        assert config.total_evaluations() == 20_020_000

    def test_desk_experiment_budgets_match(self):
        manifest = load_config(preset_path("retina_desk_experiment"))
        budgets = {t.config.total_evaluations() for t in manifest.treatments}
        assert budgets == {100_000}
