import functools

import pytest

from redgreen.mesh import build_initial_mesh
from redgreen.refine import refine_scenario


@functools.lru_cache(maxsize=None)
def _hierarchy(scenario, J):
    h = build_initial_mesh("cube")
    refine_scenario(h, scenario, J)
    return h


@pytest.fixture(scope="session")
def hier():
    """Cached refined cube hierarchies, keyed by ``(scenario, J)``; treat as read-only."""
    return _hierarchy


@pytest.fixture
def fresh():
    def make(scenario="uniform", J=1):
        h = build_initial_mesh("cube")
        if J:
            refine_scenario(h, scenario, J)
        return h

    return make
