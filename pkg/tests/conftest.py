import os

import numpy as np
import pytest
from hypothesis import HealthCheck, assume, settings
from hypothesis import strategies as st

from teamauction.setsystem import ExplicitFamily, OwnedSetSystem, StGraph

settings.register_profile("default", deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

DATA = os.path.join(os.path.dirname(__file__), "data")

ACCEPTANCE_LINES = []


def fig1():
    """s -> v -> t owned by X (cost 1 each), direct s -> t owned by Y (cost 8)."""
    g = StGraph(3, (("sv", 0, 1), ("vt", 1, 2), ("st", 0, 2)), 0, 2, True)
    sys = OwnedSetSystem(("sv", "vt", "st"), g, {"sv": "X", "vt": "X", "st": "Y"})
    return sys, {"sv": 1.0, "vt": 1.0, "st": 8.0}


@pytest.fixture
def fig1_instance():
    return fig1()


@st.composite
def explicit_systems(draw, max_elements=5, max_sets=5, one_per_agent=False, max_cost=6):
    """Small monopoly-free explicit systems with integer costs."""
    n = draw(st.integers(2, max_elements))
    k = draw(st.integers(2, max_sets))
    sets = draw(st.lists(st.frozensets(st.integers(0, n - 1), min_size=1),
                         min_size=k, max_size=k, unique=True))
    assume(not frozenset.intersection(*sets))
    used = sorted(frozenset.union(*sets))
    if one_per_agent:
        owner = {e: e for e in used}
    else:
        n_agents = draw(st.integers(1, len(used)))
        owner = {e: f"a{draw(st.integers(0, n_agents - 1))}" for e in used}
    costs = {e: draw(st.integers(0, max_cost)) for e in used}
    fam = ExplicitFamily(tuple(tuple(sorted(s)) for s in sets))
    return OwnedSetSystem(tuple(used), fam, owner), costs


def random_path_graph(rng, n_vertices, n_edges, directed=False):
    """Random multigraph with a guaranteed s-t route and continuous costs."""
    edges = []
    for i in range(n_edges):
        u, v = rng.choice(n_vertices, size=2, replace=False)
        edges.append((i, int(u), int(v)))
    edges.append((n_edges, 0, n_vertices - 1))
    g = StGraph(n_vertices, tuple(edges), 0, n_vertices - 1, directed)
    elements = tuple(e for e, _, _ in edges)
    sys = OwnedSetSystem(elements, g, {e: e for e in elements})
    costs = {e: float(rng.uniform(0.05, 1.0)) for e in elements}
    return sys, costs


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.write_sep("=", "acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
