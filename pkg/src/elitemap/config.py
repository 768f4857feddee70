"""YAML configuration: single runs and experiment manifests.

Keys are spelled the way the experiment parameter tables name them
(`batch size`, `initial batch`, `iterations`, `resolution change program`),
so a config file reads one-to-one against those tables.  ``load_config``
returns a fully validated RunConfig, or an ExperimentManifest when the file
has a ``treatments`` list.  Every loader resolves all defaults and can echo
the result back out (the "effective config") so a run directory always
records exactly what was executed.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Optional, Union

import yaml

from .archive import FeatureSpace
from .domains import domain_names, load_object_set, make_domain
from .engine import RunConfig
from .errors import ConfigError, DomainError

ALGORITHMS = (
    "map_elites",
    "random_sampling",
    "traditional_ea",
    "ea_diversity",
    "ns_lc",
    "grid_search",
)

DEFAULT_RESOLUTION = {
    "retina": (64, 64),
    "arm": (64,),
    "synthetic": (10, 10),
}

# the documented budget-shorthand for map_elites (minimal configs)
DEFAULT_BATCH_SIZE = 100

_RUN_KEYS = {
    "domain",
    "algorithm",
    "seed",
    "resolution",
    "resolution change program",
    "initial batch",
    "batch size",
    "iterations",
    "budget",
    "population size",
    "tournament size",
    "neighbors",
    "archive probability",
    "grid steps",
    "workers",
    "domain params",
}

_MANIFEST_ONLY_KEYS = {"name", "treatments", "replicates", "base seed", "output"}


@dataclass(frozen=True)
class TreatmentSpec:
    name: str
    config: RunConfig  # seed field holds the base seed; replicates add their index
    replicates: int


@dataclass(frozen=True)
class ExperimentManifest:
    name: str
    domain: str
    base_seed: int
    replicates: int
    resolution: tuple[int, ...]
    treatments: tuple[TreatmentSpec, ...]
    output: Optional[str] = None
    workers: int = 1


def preset_names() -> tuple[str, ...]:
    root = resources.files(__package__) / "presets"
    return tuple(sorted(p.name[:-5] for p in root.iterdir() if p.name.endswith(".yaml")))


def preset_path(name: str) -> Path:
    """Path of a packaged preset config by bare name (no extension)."""
    candidate = Path(str(resources.files(__package__) / "presets" / f"{name}.yaml"))
    if not candidate.exists():
        raise ConfigError(
            f"no preset named {name!r}; available: {', '.join(preset_names())}"
        )
    return candidate


def load_config(path: Union[str, Path]) -> Union[RunConfig, ExperimentManifest]:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"{path} is not valid YAML: {exc}") from None
    if not isinstance(data, dict):
        raise ConfigError(f"{path} must contain a mapping at top level")
    if "treatments" in data:
        return parse_manifest(data, base_dir=path.parent)
    return parse_run_config(data, base_dir=path.parent)


# ---------------------------------------------------------------------------
# single-run configs


def _require_int(data: dict, key: str, minimum: int) -> Optional[int]:
    if key not in data or data[key] is None:
        return None
    value = data[key]
    if not isinstance(value, int) or isinstance(value, bool) or value < minimum:
        raise ConfigError(f"key {key!r} must be an integer ≥ {minimum}, got {value!r}")
    return value


def _as_resolution(value, dims: int, key: str) -> tuple[int, ...]:
    if isinstance(value, int):
        value = [value] * dims
    if not isinstance(value, (list, tuple)) or not all(
        isinstance(v, int) and v >= 1 for v in value
    ):
        raise ConfigError(f"key {key!r} must be a positive integer or list of them")
    if len(value) != dims:
        raise ConfigError(
            f"key {key!r} has {len(value)} dimensions but the domain's descriptor has {dims}"
        )
    return tuple(int(v) for v in value)


def _parse_domain_params(raw, base_dir: Path) -> dict:
    if raw is None:
        return {}
    if not isinstance(raw, dict):
        raise ConfigError("key 'domain params' must be a mapping")
    params = {}
    for key, value in raw.items():
        if key in ("left objects file", "right objects file"):
            target = key.split()[0] + "_objects"
            file_path = Path(value)
            if not file_path.is_absolute():
                file_path = base_dir / file_path
            try:
                params[target] = load_object_set(file_path)
            except (DomainError, OSError) as exc:
                raise ConfigError(f"cannot load {key!r}: {exc}") from None
        else:
            params[str(key).replace(" ", "_")] = (
                tuple(value) if isinstance(value, list) else value
            )
    return params


def parse_run_config(data: dict, base_dir: Union[str, Path] = ".") -> RunConfig:
    base_dir = Path(base_dir)
    unknown = set(data) - _RUN_KEYS - {"name"}
    if unknown:
        raise ConfigError(f"unknown config key {sorted(unknown)[0]!r}")
    if "domain" not in data:
        raise ConfigError("missing required key 'domain'")
    domain_name = data["domain"]
    if domain_name not in domain_names():
        raise ConfigError(
            f"unknown domain {domain_name!r}; available: {', '.join(domain_names())}"
        )
    algorithm = data.get("algorithm", "map_elites")
    if algorithm not in ALGORITHMS:
        raise ConfigError(
            f"unknown algorithm {algorithm!r}; available: {', '.join(ALGORITHMS)}"
        )
    domain_params = _parse_domain_params(data.get("domain params"), base_dir)
    try:
        domain = make_domain(domain_name, **domain_params)  # validates params early
    except (DomainError, TypeError) as exc:
        raise ConfigError(f"invalid 'domain params' for {domain_name!r}: {exc}") from None
    dims = domain.descriptor_dims

    resolution = _as_resolution(
        data.get("resolution", DEFAULT_RESOLUTION[domain_name]), dims, "resolution"
    )
    schedule = _parse_schedule(data.get("resolution change program"), dims)
    seed = _require_int(data, "seed", minimum=0) or 0
    budget = _require_int(data, "budget", minimum=1)
    init_batch = _require_int(data, "initial batch", minimum=1)
    batch_size = _require_int(data, "batch size", minimum=1)
    iterations = _require_int(data, "iterations", minimum=0)

    if algorithm == "map_elites":
        if iterations is None and budget is not None:
            batch_size = batch_size or DEFAULT_BATCH_SIZE
            init_batch = init_batch or batch_size
            remaining = budget - init_batch
            if remaining < 0 or remaining % batch_size != 0:
                raise ConfigError(
                    f"budget {budget} cannot be split into 'initial batch' {init_batch} "
                    f"plus whole batches of {batch_size}"
                )
            iterations = remaining // batch_size
        if iterations is None:
            raise ConfigError("map_elites needs 'iterations' (or a 'budget' shorthand)")
        init_batch = init_batch or batch_size or DEFAULT_BATCH_SIZE
        batch_size = batch_size or DEFAULT_BATCH_SIZE
        budget = None  # shorthand fully resolved into the three batch fields
    elif schedule:
        raise ConfigError(
            f"'resolution change program' applies to map_elites only, not {algorithm!r}"
        )
    elif algorithm != "grid_search" and budget is None:
        raise ConfigError(f"{algorithm!r} needs a 'budget'")
    if algorithm == "grid_search" and domain_name != "arm":
        raise ConfigError("grid_search is defined for the arm domain only")

    config = RunConfig(
        domain=domain_name,
        seed=seed,
        algorithm=algorithm,
        domain_params=domain_params,
        resolution=resolution,
        schedule=schedule,
        init_batch=init_batch,
        batch_size=batch_size,
        iterations=iterations,
        budget=budget,
        population_size=_require_int(data, "population size", minimum=2) or 256,
        tournament_size=_require_int(data, "tournament size", minimum=1) or 2,
        k_neighbors=_require_int(data, "neighbors", minimum=1) or 15,
        archive_probability=float(data.get("archive probability", 0.02)),
        grid_steps=_require_int(data, "grid steps", minimum=2) or 8,
        workers=_require_int(data, "workers", minimum=1) or 1,
    )
    # surfaces invalid schedules (non-multiple steps …) at load time
    try:
        FeatureSpace(domain.bounds, config.resolution, config.schedule)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    return config


def _parse_schedule(raw, dims: int) -> tuple[tuple[int, tuple[int, ...]], ...]:
    if raw is None:
        return ()
    if not isinstance(raw, dict):
        raise ConfigError(
            "'resolution change program' must map iteration thresholds to resolutions"
        )
    entries = []
    for threshold, res in raw.items():
        if not isinstance(threshold, int) or threshold < 0:
            raise ConfigError(
                f"resolution change threshold {threshold!r} must be an integer ≥ 0"
            )
        entries.append((threshold, _as_resolution(res, dims, f"resolution@{threshold}")))
    entries.sort(key=lambda e: e[0])
    return tuple(entries)


# ---------------------------------------------------------------------------
# experiment manifests


def parse_manifest(data: dict, base_dir: Union[str, Path] = ".") -> ExperimentManifest:
    base_dir = Path(base_dir)
    unknown = set(data) - _RUN_KEYS - _MANIFEST_ONLY_KEYS
    if unknown:
        raise ConfigError(f"unknown manifest key {sorted(unknown)[0]!r}")
    treatments_raw = data.get("treatments")
    if not isinstance(treatments_raw, list) or not treatments_raw:
        raise ConfigError("manifest needs a non-empty 'treatments' list")
    if "domain" not in data:
        raise ConfigError("missing required key 'domain'")
    base_seed = _require_int(data, "base seed", minimum=0)
    base_seed = 0 if base_seed is None else base_seed
    replicates = _require_int(data, "replicates", minimum=1) or 10

    shared = {
        key: value
        for key, value in data.items()
        if key in _RUN_KEYS and key not in ("workers",)
    }
    if data["domain"] not in domain_names():
        raise ConfigError(
            f"unknown domain {data['domain']!r}; available: {', '.join(domain_names())}"
        )
    probe_params = _parse_domain_params(data.get("domain params"), base_dir)
    try:
        probe = make_domain(data["domain"], **probe_params)
    except (DomainError, TypeError) as exc:
        raise ConfigError(
            f"invalid 'domain params' for {data['domain']!r}: {exc}"
        ) from None
    resolution = _as_resolution(
        data.get("resolution", DEFAULT_RESOLUTION[data["domain"]]),
        probe.descriptor_dims,
        "resolution",
    )

    specs = []
    names = set()
    for i, entry in enumerate(treatments_raw):
        if not isinstance(entry, dict):
            raise ConfigError(f"treatment #{i} must be a mapping")
        entry = dict(entry)
        name = entry.pop("name", None) or entry.get("algorithm")
        if not name:
            raise ConfigError(f"treatment #{i} needs a 'name' or 'algorithm'")
        if name in names:
            raise ConfigError(f"duplicate treatment name {name!r}")
        if not re.fullmatch(r"[A-Za-z0-9_.+-]+", str(name)):
            raise ConfigError(
                f"treatment name {name!r} must use only letters, digits, _ . + - "
                "(it becomes a directory name)"
            )
        names.add(name)
        reps = entry.pop("replicates", None)
        if reps is not None and (not isinstance(reps, int) or reps < 1):
            raise ConfigError(f"treatment {name!r}: replicates must be an integer ≥ 1")
        merged = dict(shared)
        merged.update(entry)
        merged.setdefault("seed", base_seed)
        if merged.get("algorithm", "map_elites") != "map_elites":
            # controls build their virtual archive on the experiment grid
            tre_res = entry.get("resolution")
            if tre_res is not None and _as_resolution(
                tre_res, probe.descriptor_dims, "resolution"
            ) != resolution:
                raise ConfigError(
                    f"treatment {name!r}: control resolution must match the "
                    f"experiment resolution {resolution} for comparable maps"
                )
            merged["resolution"] = list(resolution)
            merged.pop("resolution change program", None)
        config = parse_run_config(merged, base_dir)
        if config.algorithm == "map_elites" and config.final_resolution() != resolution:
            raise ConfigError(
                f"treatment {name!r}: final map resolution {config.final_resolution()} "
                f"must equal the experiment resolution {resolution}"
            )
        specs.append(TreatmentSpec(name=name, config=config, replicates=reps or replicates))

    return ExperimentManifest(
        name=str(data.get("name", "experiment")),
        domain=data["domain"],
        base_seed=base_seed,
        replicates=replicates,
        resolution=resolution,
        treatments=tuple(specs),
        output=data.get("output"),
        workers=_require_int(data, "workers", minimum=1) or 1,
    )


# ---------------------------------------------------------------------------
# effective-config echo


def _spaced(params: dict) -> dict:
    out = {}
    for key, value in sorted(params.items()):
        if isinstance(value, tuple):
            value = list(value)
        out[key.replace("_", " ")] = value
    return out


def effective_config_dict(config: RunConfig) -> dict:
    """The run config with every default resolved, using the file key names."""
    out = {
        "domain": config.domain,
        "algorithm": config.algorithm,
        "seed": config.seed,
        "resolution": list(config.resolution),
        "workers": config.workers,
    }
    if config.schedule:
        out["resolution change program"] = {t: list(r) for t, r in config.schedule}
    if config.algorithm == "map_elites":
        out["initial batch"] = config.init_batch
        out["batch size"] = config.batch_size
        out["iterations"] = config.iterations
    elif config.algorithm == "grid_search":
        out["grid steps"] = config.grid_steps
    else:
        out["budget"] = config.budget
    if config.algorithm in ("traditional_ea", "ea_diversity", "ns_lc"):
        out["population size"] = config.population_size
    if config.algorithm == "traditional_ea":
        out["tournament size"] = config.tournament_size
    if config.algorithm == "ns_lc":
        out["neighbors"] = config.k_neighbors
        out["archive probability"] = config.archive_probability
    if config.domain_params:
        out["domain params"] = _spaced(config.domain_params)
    return out


def dump_effective_config(config: RunConfig) -> str:
    return yaml.safe_dump(effective_config_dict(config), sort_keys=False)


def dump_effective_manifest(manifest: ExperimentManifest) -> str:
    out = {
        "name": manifest.name,
        "domain": manifest.domain,
        "base seed": manifest.base_seed,
        "replicates": manifest.replicates,
        "resolution": list(manifest.resolution),
        "workers": manifest.workers,
        "treatments": [
            {
                "name": spec.name,
                "replicates": spec.replicates,
                **effective_config_dict(spec.config),
            }
            for spec in manifest.treatments
        ],
    }
    if manifest.output:
        out["output"] = manifest.output
    return yaml.safe_dump(out, sort_keys=False)
