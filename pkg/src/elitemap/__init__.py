"""elitemap: MAP-Elites illumination, control algorithms, and map-quality metrics."""

from .archive import Archive, CellIndex, Elite, FeatureSpace, InsertOutcome
from .domains import Domain, Evaluation, make_domain
from .errors import ConfigError, DomainError, EliteMapError, EvaluationInvalid

__version__ = "0.1.0"


def __getattr__(name: str):
    # Defer the heavier layers so `import elitemap` stays light; the core
    # types above are always available.
    lazy = {
        "RunConfig": "engine",
        "run_map_elites": "engine",
        "load_config": "config",
        "run_experiment": "experiment",
        "run_single": "experiment",
        "build_report": "report",
        "compute_metrics": "metrics",
        "mann_whitney_u": "metrics",
        "reference_map": "metrics",
    }
    if name in lazy:
        import importlib

        module = importlib.import_module(f".{lazy[name]}", __package__)
        return getattr(module, name)
    raise AttributeError(f"module {__name__!r} has no attribute {name!r}")


__all__ = [
    "Archive",
    "CellIndex",
    "ConfigError",
    "Domain",
    "DomainError",
    "Elite",
    "EliteMapError",
    "Evaluation",
    "EvaluationInvalid",
    "FeatureSpace",
    "InsertOutcome",
    "RunConfig",
    "__version__",
    "build_report",
    "compute_metrics",
    "load_config",
    "make_domain",
    "mann_whitney_u",
    "reference_map",
    "run_experiment",
    "run_map_elites",
    "run_single",
]
