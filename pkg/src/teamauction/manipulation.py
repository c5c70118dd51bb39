"""Bounded search for profitable deviations: misreports, identifier splits, self-division.

A search fixes every other agent's bids (truthful by default) and enumerates,
for one agent, a grid of reported bid vectors under each reporting structure
(true ownership, every partition of the agent's elements into pseudo-agents,
every self-division of one element into 2..max_arity parts). Each structure
is compiled once and all its bid vectors are scored in a single vectorized
batch. Profit is always payments received minus the agent's *true* cost of
the elements bought.

This is a finite test of a universally quantified claim: absence of a
profitable deviation on the grid is evidence, not proof.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field
from typing import Dict, Hashable, Iterator, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from .mechanisms import CompiledFamily, Mechanism
from .setsystem import (
    DEFAULT_MAX_FEASIBLE,
    BidProfile,
    OwnedSetSystem,
    feasible_sets,
    split_identifiers_with_ids,
    subdivide_with_ids,
)

MISREPORT, SPLIT, SELF_DIVIDE = "misreport", "split", "selfdivide"
CHUNK = 20_000


@dataclass(frozen=True)
class SearchBudget:
    # bid levels as multiples of the element's cost, plus fractions of the cap
    fine_cost_levels: Tuple[float, ...] = (0.0, 0.25, 0.5, 0.75, 1.0, 1.5, 2.0)
    fine_cap_levels: Tuple[float, ...] = (0.5, 1.0)
    coarse_cost_levels: Tuple[float, ...] = (0.0, 0.5, 1.0, 2.0)
    coarse_cap_levels: Tuple[float, ...] = (1.0,)
    max_arity: int = 4
    simplex_resolution: int = 4
    max_partition_elements: int = 6
    max_evaluations: int = 2_000_000


@dataclass(frozen=True)
class Deviation:
    kind: str
    agent: Hashable
    parameters: Dict

    def parameters_json(self) -> str:
        return json.dumps(self.parameters, sort_keys=True, default=str)


@dataclass
class DeviationReport:
    agent: Hashable
    truthful_profit: float
    best_deviation: Optional[Deviation] = None
    best_profit: float = float("-inf")
    searched_count: int = 0
    budget_exceeded: bool = False
    opponents: str = "truthful"
    # kind -> (best profit, deviation) within that kind of manipulation
    best_by_kind: Dict[str, Tuple[float, Deviation]] = field(default_factory=dict)

    @property
    def gain(self) -> float:
        return self.best_profit - self.truthful_profit


def bid_cap(mechanism: Mechanism, c: Mapping) -> float:
    """Top of the bid grid: the reserve, or twice the largest cost for MP."""
    if mechanism.reserve is not None:
        return mechanism.reserve
    top = max((float(v) for v in c.values()), default=0.0)
    return 2.0 * top if top > 0 else 1.0


def bid_levels(cost: float, cap: float, cost_levels, cap_levels) -> List[float]:
    vals = {float(cost) * m for m in cost_levels} | {cap * m for m in cap_levels}
    return sorted(vals)


def set_partitions(items: Sequence) -> Iterator[List[List]]:
    """All partitions of ``items`` into non-empty blocks."""
    if not items:
        yield []
        return
    first, rest = items[0], items[1:]
    for part in set_partitions(rest):
        yield [[first]] + part
        for i in range(len(part)):
            yield part[:i] + [[first] + part[i]] + part[i + 1:]


def compositions(total: int, parts: int) -> Iterator[Tuple[int, ...]]:
    """Weak compositions of ``total`` into ``parts`` non-negative integers."""
    for cuts in itertools.combinations(range(total + parts - 1), parts - 1):
        prev, out = -1, []
        for cpos in cuts:
            out.append(cpos - prev - 1)
            prev = cpos
        out.append(total + parts - 1 - prev - 1)
        yield tuple(out)


def _true_bids(sys: OwnedSetSystem, c: Mapping, agent, others: Optional[Mapping]) -> Dict:
    bids = {e: float(c[e]) for e in sys.elements}
    if others:
        for e, b in others.items():
            if sys.ownership[e] != agent:
                bids[e] = float(b)
    return bids


def truthful_profit(mechanism: Mechanism, sys: OwnedSetSystem, c: Mapping, agent,
                    others: Optional[Mapping] = None, *,
                    max_count: int = DEFAULT_MAX_FEASIBLE) -> float:
    """Profit of ``agent`` when it bids its costs under its true identity."""
    sys.owned(agent)
    bids = BidProfile(_true_bids(sys, c, agent, others), sys.ownership)
    out = mechanism.run(sys, bids, max_count=max_count)
    if out.winner is None:
        return 0.0
    incurred = sum(float(c[e]) for e in out.winner if sys.ownership[e] == agent)
    return out.payments.get(agent, 0.0) - incurred


class _Structure:
    """One reporting structure and the grid of bid vectors to score under it."""

    def __init__(self, kind, system, identities, cost_on, varied, base_bids, extra=None):
        self.kind = kind
        self.system = system
        self.identities = identities  # the agent's reported ids in this structure
        self.cost_on = cost_on  # element -> true cost charged if it wins
        self.varied = varied  # list of (element or tuple of elements, list of bid options)
        self.base_bids = base_bids
        self.extra = extra or {}

    def size(self) -> int:
        n = 1
        for _, opts in self.varied:
            n *= len(opts)
        return n


def _structures(mechanism, sys, c, agent, budget, others) -> Iterator[_Structure]:
    owned = list(sys.owned(agent))
    cap = bid_cap(mechanism, c)
    base = _true_bids(sys, c, agent, others)
    fine = {e: bid_levels(c[e], cap, budget.fine_cost_levels, budget.fine_cap_levels) for e in owned}
    coarse = {e: bid_levels(c[e], cap, budget.coarse_cost_levels, budget.coarse_cap_levels) for e in owned}
    truth_cost = {e: float(c[e]) for e in owned}

    yield _Structure(MISREPORT, sys, [agent], truth_cost, [(e, [(v,) for v in fine[e]]) for e in owned], base)

    if 2 <= len(owned) <= budget.max_partition_elements:
        for part in set_partitions(owned):
            if len(part) < 2:
                continue
            new_sys, ids = split_identifiers_with_ids(sys, agent, part)
            varied = [(e, [(v,) for v in coarse[e]]) for e in owned]
            blocks = [sorted(b) for b in part]
            yield _Structure(SPLIT, new_sys, list(ids), truth_cost, varied, base,
                             {"partition": blocks, "ids": list(ids)})

    for e in owned:
        for k in range(2, budget.max_arity + 1):
            new_sys, parts, ids = subdivide_with_ids(sys, e, k)
            alloc = [np.array(w, dtype=float) / budget.simplex_resolution
                     for w in compositions(budget.simplex_resolution, k)]
            options = sorted({tuple(float(v) for v in float(t) * a) for t in coarse[e] for a in alloc})
            varied = [(tuple(parts), options)] + [(x, [(v,) for v in coarse[x]]) for x in owned if x != e]
            cost_on = {x: truth_cost[x] for x in owned if x != e}
            cost_on[parts[0]] = truth_cost[e]
            nb = {x: v for x, v in base.items() if x != e}
            yield _Structure(SELF_DIVIDE, new_sys, [agent] + list(ids), cost_on, varied, nb,
                             {"element": e, "arity": k, "parts": list(parts), "ids": list(ids)})


def _rows(st: _Structure, cf: CompiledFamily, limit: int):
    """Yield (bid matrix, option tuples) chunks in enumeration order."""
    base = np.array([st.base_bids.get(e, 0.0) for e in cf.elements])
    cols = []
    for key, _ in st.varied:
        keys = key if isinstance(key, tuple) else (key,)
        cols.append([cf.index[x] for x in keys])
    product = itertools.islice(itertools.product(*[opts for _, opts in st.varied]), limit)
    while True:
        chunk = list(itertools.islice(product, CHUNK))
        if not chunk:
            return
        B = np.tile(base, (len(chunk), 1))
        for j, idx in enumerate(cols):
            B[:, idx] = np.array([row[j] for row in chunk])
        yield B, chunk


def _describe(st: _Structure, agent, choice) -> Deviation:
    bids = {}
    for (key, _), vals in zip(st.varied, choice):
        if isinstance(key, tuple):
            for x, v in zip(key, vals):
                bids[str(x)] = float(v)
        else:
            bids[str(key)] = float(vals[0])
    params = dict(st.extra)
    params["bids"] = bids
    params.pop("ids", None)
    return Deviation(st.kind, agent, params)


def search_deviations(mechanism: Mechanism, sys: OwnedSetSystem, c: Mapping, agent,
                      budget: SearchBudget = SearchBudget(), others: Optional[Mapping] = None,
                      *, max_count: int = DEFAULT_MAX_FEASIBLE) -> DeviationReport:
    """Best deviation on the grid for ``agent``, other agents' bids held fixed.

    Stops after ``budget.max_evaluations`` scored bid vectors and flags the
    report as partial. Among equal profits the first in enumeration order wins.
    """
    report = DeviationReport(agent, truthful_profit(mechanism, sys, c, agent, others, max_count=max_count),
                             opponents="truthful" if not others else "fixed")
    remaining = budget.max_evaluations
    best_choice = None
    by_kind = {}
    for st in _structures(mechanism, sys, c, agent, budget, others):
        if remaining <= 0:
            report.budget_exceeded = True
            break
        cf = CompiledFamily(st.system.elements, feasible_sets(st.system, max_count), st.system.ownership)
        mine = [cf.agents.index(a) for a in st.identities if a in cf.agents]
        charge = np.array([st.cost_on.get(e, 0.0) for e in cf.elements])
        if st.size() > remaining:
            report.budget_exceeded = True
        for B, chunk in _rows(st, cf, remaining):
            win, pay = mechanism.evaluate(cf, B)
            bought = win >= 0
            incurred = np.where(bought, cf.incf[np.maximum(win, 0)] @ charge, 0.0)
            profit = pay[:, mine].sum(axis=1) - incurred
            k = int(np.argmax(profit))
            if profit[k] > report.best_profit:
                report.best_profit = float(profit[k])
                best_choice = (st, chunk[k])
            if st.kind not in by_kind or profit[k] > by_kind[st.kind][0]:
                by_kind[st.kind] = (float(profit[k]), st, chunk[k])
            report.searched_count += len(chunk)
            remaining -= len(chunk)
    if best_choice is not None and report.best_profit > report.truthful_profit + 1e-9:
        report.best_deviation = _describe(best_choice[0], agent, best_choice[1])
    report.best_by_kind = {k: (p, _describe(st, agent, ch)) for k, (p, st, ch) in by_kind.items()}
    return report


def random_opponents(rng: np.random.Generator, sys: OwnedSetSystem, c: Mapping, agent,
                     cap: float) -> Dict:
    """Random bids in [0, cap] for every element not owned by ``agent``."""
    return {e: float(rng.uniform(0.0, cap)) for e in sys.elements if sys.ownership[e] != agent}


def audit(mechanism: Mechanism, sys: OwnedSetSystem, c: Mapping,
          budget: SearchBudget = SearchBudget(), *, opponent_profiles: int = 0, seed: int = 0,
          max_count: int = DEFAULT_MAX_FEASIBLE) -> List[DeviationReport]:
    """Search every agent against truthful opponents plus sampled opponent bids."""
    rng = np.random.default_rng(seed)
    cap = bid_cap(mechanism, c)
    reports = []
    for agent in sys.agents:
        reports.append(search_deviations(mechanism, sys, c, agent, budget, max_count=max_count))
        for _ in range(opponent_profiles):
            others = random_opponents(rng, sys, c, agent, cap)
            reports.append(search_deviations(mechanism, sys, c, agent, budget, others, max_count=max_count))
    return reports
