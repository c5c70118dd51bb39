"""Owned set systems, feasible-set oracles and the two false-name transforms.

An owned set system is a ground set of elements, a family of feasible
subsets (given explicitly, or implicitly as the simple s-t paths of a
graph) and a partition of the elements among agents.

Element and agent identifiers are opaque but must be hashable and mutually
comparable (ints or strings in practice). Element sets are always handled in
canonical form: a tuple sorted by element id. Lexicographic order of those
tuples is the tie-breaking order used everywhere a minimizer is chosen.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Dict, Hashable, Iterable, Mapping, Sequence, Tuple, Union

import numpy as np

ElementId = Hashable
AgentId = Hashable
ElementSet = Tuple[ElementId, ...]

TOL = 1e-9
MAX_AMOUNT = 1e12
DEFAULT_MAX_FEASIBLE = 100_000


class SetSystemError(ValueError):
    pass


class CountExceeded(SetSystemError):
    pass


class EmptyFamily(SetSystemError):
    pass


class UnknownElement(SetSystemError):
    pass


class UnknownAgent(SetSystemError):
    pass


class BadArity(SetSystemError):
    pass


class NotAPartition(SetSystemError):
    pass


@dataclass(frozen=True)
class ExplicitFamily:
    sets: Tuple[ElementSet, ...]

    def __post_init__(self):
        canon = tuple(canonical(s) for s in self.sets)
        if any(len(s) == 0 for s in canon):
            raise SetSystemError("feasible sets must be non-empty")
        if len(set(canon)) != len(canon):
            raise SetSystemError("feasible sets must be distinct")
        object.__setattr__(self, "sets", canon)


@dataclass(frozen=True)
class StGraph:
    """Path-auction source: feasible sets are the simple s-t paths.

    ``edges`` holds ``(element, u, v)`` triples over vertices ``0..vertices-1``.
    Parallel edges are allowed (they carry distinct element ids).
    """

    vertices: int
    edges: Tuple[Tuple[ElementId, int, int], ...]
    s: int
    t: int
    directed: bool = True

    def __post_init__(self):
        object.__setattr__(self, "edges", tuple(tuple(e) for e in self.edges))
        if self.vertices < 2:
            raise SetSystemError("graph needs at least two vertices")
        if not (0 <= self.s < self.vertices and 0 <= self.t < self.vertices):
            raise SetSystemError("s and t must be vertices")
        if self.s == self.t:
            raise SetSystemError("s and t must differ")
        for e, u, v in self.edges:
            if not (0 <= u < self.vertices and 0 <= v < self.vertices):
                raise SetSystemError(f"edge {e!r} has an endpoint outside the vertex range")
            if u == v:
                raise SetSystemError(f"edge {e!r} is a self-loop")
        ids = [e for e, _, _ in self.edges]
        if len(set(ids)) != len(ids):
            raise SetSystemError("edge ids must be unique")

    def arcs(self):
        """Directed arcs ``(element, tail, head)``; undirected edges yield both."""
        for e, u, v in self.edges:
            yield e, u, v
            if not self.directed:
                yield e, v, u


FeasibleSource = Union[ExplicitFamily, StGraph]


@dataclass(frozen=True)
class OwnedSetSystem:
    elements: Tuple[ElementId, ...]
    feasible: FeasibleSource
    ownership: Mapping[ElementId, AgentId] = field(compare=True)

    def __post_init__(self):
        elements = tuple(self.elements)
        if len(set(elements)) != len(elements):
            raise SetSystemError("element ids must be unique")
        object.__setattr__(self, "elements", elements)
        object.__setattr__(self, "ownership", dict(self.ownership))
        known = set(elements)
        if set(self.ownership) != known:
            raise SetSystemError("ownership must assign exactly one owner to every element")
        if isinstance(self.feasible, ExplicitFamily):
            for s in self.feasible.sets:
                bad = [e for e in s if e not in known]
                if bad:
                    raise UnknownElement(f"feasible set mentions unknown elements {bad}")
        else:
            if {e for e, _, _ in self.feasible.edges} != known:
                raise SetSystemError("graph edge ids must equal the element set")

    def owned(self, agent: AgentId) -> ElementSet:
        out = canonical(e for e, a in self.ownership.items() if a == agent)
        if not out:
            raise UnknownAgent(f"unknown agent {agent!r}")
        return out

    @property
    def agents(self) -> Tuple[AgentId, ...]:
        return tuple(sorted(set(self.ownership.values())))

    def is_monopoly_free(self, max_count: int = DEFAULT_MAX_FEASIBLE) -> bool:
        fam = feasible_sets(self, max_count)
        common = set(fam[0])
        for s in fam[1:]:
            common &= set(s)
        return not common


@dataclass(frozen=True)
class BidProfile:
    bids: Mapping[ElementId, float]
    reported_owner: Mapping[ElementId, AgentId]

    def __post_init__(self):
        object.__setattr__(self, "bids", dict(self.bids))
        object.__setattr__(self, "reported_owner", dict(self.reported_owner))
        if set(self.bids) != set(self.reported_owner):
            raise SetSystemError("bids and reported owners must cover the same elements")
        for e, b in self.bids.items():
            if not math.isfinite(b) or b < 0:
                raise SetSystemError(f"bid for {e!r} must be finite and non-negative")
            if b > MAX_AMOUNT:
                raise SetSystemError(f"bid for {e!r} exceeds {MAX_AMOUNT:g}")

    def check_against(self, sys: OwnedSetSystem) -> None:
        if set(self.bids) != set(sys.elements):
            raise SetSystemError("bid profile domain must equal the system's element set")


def canonical(s: Iterable[ElementId]) -> ElementSet:
    return tuple(sorted(s))


def truthful_bids(sys: OwnedSetSystem, costs: Mapping[ElementId, float]) -> BidProfile:
    """Bids equal to costs, reported under the true owners."""
    return BidProfile({e: float(costs[e]) for e in sys.elements}, dict(sys.ownership))


def set_cost(s: Iterable[ElementId], c: Mapping[ElementId, float]) -> float:
    return sum(c[e] for e in s)


# ---------------------------------------------------------------------------
# feasible-set enumeration


def _adjacency(g: StGraph):
    adj = [[] for _ in range(g.vertices)]
    for e, u, v in g.arcs():
        adj[u].append((e, v))
    for lst in adj:
        lst.sort(key=lambda ev: ev[0])
    return adj


def st_paths(g: StGraph, max_count: int, *, max_hops: int | None = None,
             must_use: ElementId | None = None) -> list[ElementSet]:
    """Simple s-t paths of ``g`` as canonical edge sets (DFS, capped).

    Raises CountExceeded as soon as more than ``max_count`` paths are found.
    """
    adj = _adjacency(g)
    out: list[ElementSet] = []
    on_path = [False] * g.vertices
    path: list[ElementId] = []
    limit = max_hops if max_hops is not None else g.vertices - 1

    def dfs(u: int) -> None:
        if u == g.t:
            if must_use is None or must_use in path:
                out.append(canonical(path))
                if len(out) > max_count:
                    raise CountExceeded(f"more than {max_count} feasible sets")
            return
        if len(path) >= limit:
            return
        on_path[u] = True
        for e, v in adj[u]:
            if not on_path[v]:
                path.append(e)
                dfs(v)
                path.pop()
        on_path[u] = False

    dfs(g.s)
    return out


def feasible_sets(sys: OwnedSetSystem, max_count: int = DEFAULT_MAX_FEASIBLE) -> list[ElementSet]:
    """All feasible sets, each canonical, sorted lexicographically."""
    if isinstance(sys.feasible, ExplicitFamily):
        fam = list(sys.feasible.sets)
        if len(fam) > max_count:
            raise CountExceeded(f"more than {max_count} feasible sets")
    else:
        fam = st_paths(sys.feasible, max_count)
    if not fam:
        raise EmptyFamily("no feasible set exists")
    return sorted(set(fam))


def width(sys: OwnedSetSystem, s: Iterable[ElementId],
          reported_owner: Mapping[ElementId, AgentId] | None = None) -> int:
    """Number of distinct (reported) owners intersecting ``s``."""
    owner = sys.ownership if reported_owner is None else reported_owner
    known = set(sys.elements)
    owners = set()
    for e in s:
        if e not in known:
            raise UnknownElement(f"unknown element {e!r}")
        owners.add(owner[e])
    return len(owners)


def cheapest_feasible_set(sys: OwnedSetSystem, c: Mapping[ElementId, float],
                          max_count: int = DEFAULT_MAX_FEASIBLE) -> ElementSet:
    """argmin c(S), ties broken by lexicographic order of canonical sets."""
    best = None
    best_cost = math.inf
    for s in feasible_sets(sys, max_count):
        cost = set_cost(s, c)
        if cost < best_cost - TOL:
            best, best_cost = s, cost
    return best


# ---------------------------------------------------------------------------
# false-name transforms


def _fresh(existing: set, base, k: int) -> list:
    """``k`` new identifiers not in ``existing``; ints stay ints."""
    if existing and all(isinstance(x, (int, np.integer)) and not isinstance(x, bool) for x in existing):
        start = max(existing) + 1
        return list(range(start, start + k))
    out = []
    for j in range(1, k + 1):
        cand = f"{base}.{j}"
        while cand in existing or cand in out:
            cand += "'"
        out.append(cand)
    return out


def subdivide_with_ids(sys: OwnedSetSystem, e: ElementId, k: int):
    """Like :func:`subdivide`, also returning the new element and agent ids."""
    if e not in sys.ownership:
        raise UnknownElement(f"unknown element {e!r}")
    if k < 2:
        raise BadArity("self-division needs at least two parts")
    new_elems = _fresh(set(sys.elements), e, k)
    new_agents = _fresh(set(sys.ownership.values()), f"{sys.ownership[e]}/{e}", k)
    elements = tuple(x for x in sys.elements if x != e) + tuple(new_elems)
    ownership = {x: a for x, a in sys.ownership.items() if x != e}
    ownership.update(zip(new_elems, new_agents))
    if isinstance(sys.feasible, ExplicitFamily):
        sets = []
        for s in sys.feasible.sets:
            if e in s:
                sets.append(canonical([x for x in s if x != e] + new_elems))
            else:
                sets.append(s)
        feasible = ExplicitFamily(tuple(sets))
    else:
        g = sys.feasible
        edges = []
        nv = g.vertices
        for x, u, v in g.edges:
            if x != e:
                edges.append((x, u, v))
                continue
            chain = [u] + list(range(nv, nv + k - 1)) + [v]
            nv += k - 1
            for j, part in enumerate(new_elems):
                edges.append((part, chain[j], chain[j + 1]))
        feasible = StGraph(nv, tuple(edges), g.s, g.t, g.directed)
    return OwnedSetSystem(elements, feasible, ownership), tuple(new_elems), tuple(new_agents)


def subdivide(sys: OwnedSetSystem, e: ElementId, k: int) -> OwnedSetSystem:
    """Replace element ``e`` by ``k`` elements, each owned by a fresh agent.

    Feasible sets containing ``e`` get all ``k`` parts instead; on a graph the
    edge becomes a chain through ``k - 1`` new vertices.
    """
    return subdivide_with_ids(sys, e, k)[0]


def split_identifiers_with_ids(sys: OwnedSetSystem, agent: AgentId,
                               parts: Sequence[Iterable[ElementId]]):
    owned = set(sys.owned(agent))
    blocks = [canonical(p) for p in parts]
    if len(blocks) < 2 or any(not b for b in blocks):
        raise NotAPartition("need at least two non-empty blocks")
    flat = [e for b in blocks for e in b]
    if len(flat) != len(set(flat)) or set(flat) != owned:
        raise NotAPartition(f"blocks do not partition the elements of {agent!r}")
    new_agents = _fresh(set(sys.ownership.values()), agent, len(blocks))
    ownership = dict(sys.ownership)
    for b, a in zip(blocks, new_agents):
        for e in b:
            ownership[e] = a
    return OwnedSetSystem(sys.elements, sys.feasible, ownership), tuple(new_agents)


def split_identifiers(sys: OwnedSetSystem, agent: AgentId,
                      parts: Sequence[Iterable[ElementId]]) -> OwnedSetSystem:
    """Report each block of ``parts`` under a fresh agent id; ``F`` is unchanged."""
    return split_identifiers_with_ids(sys, agent, parts)[0]


# ---------------------------------------------------------------------------
# hop-constrained shortest paths


class HopTable:
    """Bellman-Ford table of min-cost s-to-v walks using at most k arcs.

    Row ``k`` of ``cost`` holds, for every vertex, the cheapest way to reach
    it from ``s`` with ``<= k`` arcs. With non-negative weights the optimum
    is always attained by a simple path, and the reconstruction below keeps
    the shorter-hop witness on ties so witnesses are simple.
    """

    _KEEP = -2

    def __init__(self, g: StGraph, weights: Mapping[ElementId, float], kmax: int,
                 removed: Iterable[ElementId] = ()):
        removed = set(removed)
        rank = {e: i for i, e in enumerate(sorted(e for e, _, _ in g.edges))}
        arcs = [(e, u, v) for e, u, v in g.arcs() if e not in removed]
        self.graph = g
        self.kmax = kmax
        self.arc_elem = [e for e, _, _ in arcs]
        n = g.vertices
        tails = np.array([u for _, u, _ in arcs], dtype=np.int64)
        heads = np.array([v for _, _, v in arcs], dtype=np.int64)
        self.tails = tails
        w = np.array([float(weights[e]) for e, _, _ in arcs], dtype=float)
        keys = np.array([rank[e] for e, _, _ in arcs], dtype=np.int64)
        cost = np.full((kmax + 1, n), np.inf)
        pred = np.full((kmax + 1, n), -1, dtype=np.int64)
        cost[0, g.s] = 0.0
        for k in range(1, kmax + 1):
            prev = cost[k - 1]
            best = np.full(n, np.inf)
            arc = np.full(n, -1, dtype=np.int64)
            if len(arcs):
                cand = prev[tails] + w
                order = np.lexsort((keys, cand, heads))
                h = heads[order]
                first = order[np.concatenate(([True], h[1:] != h[:-1]))]
                best[heads[first]] = cand[first]
                arc[heads[first]] = first
            keep = prev <= best + TOL
            cost[k] = np.where(keep, prev, best)
            pred[k] = np.where(keep, self._KEEP, arc)
            if np.array_equal(cost[k], prev) and np.all(keep):
                # converged: later rows repeat this one
                cost[k + 1:] = prev
                pred[k + 1:] = self._KEEP
                break
        self.cost = cost
        self.pred = pred

    def to_target(self) -> np.ndarray:
        return self.cost[:, self.graph.t]

    def witness(self, k: int, v: int | None = None) -> Tuple[ElementId, ...]:
        """Edge ids of the witness path (in traversal order) for row ``k``."""
        v = self.graph.t if v is None else v
        if not math.isfinite(self.cost[k, v]):
            raise ValueError(f"vertex {v} unreachable within {k} hops")
        path = []
        seen = {v}
        while k > 0:
            a = self.pred[k, v]
            if a == self._KEEP:
                k -= 1
                continue
            if a < 0:
                break
            path.append(self.arc_elem[a])
            v = int(self.tails[a])
            if v in seen:
                raise AssertionError("witness walk is not simple")
            seen.add(v)
            k -= 1
        if v != self.graph.s:
            raise AssertionError("witness does not start at s")
        return tuple(reversed(path))


def min_cost_path_with_hops(g: StGraph, weights: Mapping[ElementId, float], kmax: int
                            ) -> Dict[int, Tuple[float, Tuple[ElementId, ...]]]:
    """Map ``k -> (min cost over s-t paths with <= k edges, witness path)``.

    Hop counts with no such path are absent from the result.
    """
    if kmax < 1:
        raise ValueError("kmax must be >= 1")
    if any(weights[e] < 0 for e, _, _ in g.edges):
        raise ValueError("weights must be non-negative")
    table = HopTable(g, weights, kmax)
    out = {}
    for k in range(1, kmax + 1):
        c = table.cost[k, g.t]
        if math.isfinite(c):
            out[k] = (float(c), table.witness(k))
    return out
