"""Seeded random instances for tests, probes and the command line."""

from __future__ import annotations

from typing import Dict, Optional

import numpy as np

from .setsystem import ExplicitFamily, OwnedSetSystem, StGraph, canonical, st_paths


def random_explicit_system(rng: np.random.Generator, n_elements: int, n_sets: int,
                           n_agents: Optional[int] = None, max_tries: int = 1000) -> OwnedSetSystem:
    """Monopoly-free explicit system on elements ``0..n-1``.

    Each element ends up in some feasible set. With ``n_agents=None`` every
    element is its own agent; otherwise elements are spread over
    ``n_agents`` agents, each owning at least one.
    """
    if n_elements < 2 or n_sets < 2:
        raise ValueError("need at least two elements and two sets")
    if n_sets > 2**n_elements - 1:
        raise ValueError(f"at most {2**n_elements - 1} distinct sets fit on {n_elements} elements")
    for _ in range(max_tries):
        sets = set()
        while len(sets) < n_sets:
            size = int(rng.integers(1, n_elements + 1))
            sets.add(canonical(int(x) for x in rng.choice(n_elements, size=size, replace=False)))
        sets = sorted(sets)
        used = set().union(*map(set, sets))
        common = set(sets[0]).intersection(*map(set, sets[1:]))
        if common or len(used) != n_elements:
            continue
        return OwnedSetSystem(tuple(range(n_elements)), ExplicitFamily(tuple(sets)),
                              random_ownership(rng, n_elements, n_agents))
    raise RuntimeError("could not draw a monopoly-free system")


def random_ownership(rng: np.random.Generator, n_elements: int, n_agents: Optional[int]) -> Dict:
    if n_agents is None:
        return {e: e for e in range(n_elements)}
    if not 1 <= n_agents <= n_elements:
        raise ValueError("need 1 <= n_agents <= n_elements")
    labels = np.concatenate([np.arange(n_agents), rng.integers(0, n_agents, n_elements - n_agents)])
    rng.shuffle(labels)
    return {e: f"a{int(labels[e])}" for e in range(n_elements)}


def random_graph_system(rng: np.random.Generator, n_vertices: int, edge_prob: float = 0.5,
                        directed: bool = False, n_agents: Optional[int] = None,
                        max_tries: int = 1000, max_paths: int = 500) -> OwnedSetSystem:
    """G(n, p) graph with s = 0, t = n-1 and at least two s-t paths and no
    edge on every path; edges are elements ``0..m-1``."""
    for _ in range(max_tries):
        edges = []
        for u in range(n_vertices):
            for v in range(n_vertices):
                if u == v or (not directed and v < u):
                    continue
                if rng.random() < edge_prob:
                    edges.append((len(edges), u, v))
        if len(edges) < 2:
            continue
        g = StGraph(n_vertices, tuple(edges), 0, n_vertices - 1, directed)
        try:
            paths = st_paths(g, max_paths)
        except ValueError:
            continue
        if len(paths) < 2 or set(paths[0]).intersection(*map(set, paths[1:])):
            continue
        elements = tuple(e for e, _, _ in edges)
        owner = random_ownership(rng, len(elements), n_agents)
        return OwnedSetSystem(elements, g, owner)
    raise RuntimeError("could not draw a monopoly-free graph")


def uniform_costs(rng: np.random.Generator, sys: OwnedSetSystem, low: float = 0.0,
                  high: float = 1.0) -> Dict:
    return {e: float(rng.uniform(low, high)) for e in sys.elements}
