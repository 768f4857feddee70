"""Benchmark domains: retina network, rigid 3-link arm, synthetic oracle."""

from __future__ import annotations

from ..errors import ConfigError
from .arm import ArmDomain, forward_kinematics, grid_levels
from .base import Domain, Evaluation
from .modularity import greedy_modularity, partition_modularity
from .retina import DEFAULT_OBJECTS, RetinaDomain, RetinaGenome, load_object_set
from .synthetic import SyntheticDomain

_DOMAINS = {
    "retina": RetinaDomain,
    "arm": ArmDomain,
    "synthetic": SyntheticDomain,
}


def domain_names() -> tuple[str, ...]:
    return tuple(sorted(_DOMAINS))


def make_domain(name: str, **params) -> Domain:
    """Instantiate a domain by registry name; unknown names/params are config errors."""
    try:
        cls = _DOMAINS[name]
    except KeyError:
        raise ConfigError(
            f"unknown domain {name!r}; available: {', '.join(domain_names())}"
        ) from None
    try:
        return cls(**params)
    except TypeError as exc:
        raise ConfigError(f"bad parameters for domain {name!r}: {exc}") from None


__all__ = [
    "ArmDomain",
    "DEFAULT_OBJECTS",
    "Domain",
    "Evaluation",
    "RetinaDomain",
    "RetinaGenome",
    "SyntheticDomain",
    "domain_names",
    "forward_kinematics",
    "greedy_modularity",
    "grid_levels",
    "load_object_set",
    "make_domain",
    "partition_modularity",
]
