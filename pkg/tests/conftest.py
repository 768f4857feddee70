import numpy as np
import pytest

from elitemap.archive import Archive, Elite, FeatureSpace


@pytest.fixture
def unit_space():
    """10×10 grid over the unit square."""
    return FeatureSpace(((0.0, 1.0), (0.0, 1.0)), (10, 10))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def make_elite(
    descriptor,
    fitness=1.0,
    eid=0,
    parent_id=None,
    birth_iteration=0,
    genome=None,
):
    """Bare elite for archive-level tests; genome defaults to the descriptor."""
    descriptor = np.asarray(descriptor, dtype=float)
    return Elite(
        genome=descriptor.copy() if genome is None else genome,
        fitness=float(fitness),
        descriptor=descriptor,
        cell=(),
        birth_iteration=birth_iteration,
        id=eid,
        parent_id=parent_id,
    )


@pytest.fixture
def filled_archive(unit_space):
    """Archive with three elites at known cells/fitnesses."""
    archive = Archive(unit_space)
    for i, (desc, fit) in enumerate(
        [((0.05, 0.05), 0.5), ((0.55, 0.35), 0.9), ((0.95, 0.95), 0.2)]
    ):
        assert archive.try_insert(make_elite(desc, fit, eid=i)).inserted
    return archive
