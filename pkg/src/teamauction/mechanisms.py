"""Winner determination and payments for MP, AP and reserve-cost VCG.

All three mechanisms are evaluated by one vectorized core over an explicit
feasible family (``CompiledFamily``), so a batch of bid vectors can be
scored at once; the deviation search relies on that. Path auctions too large
to enumerate go through hop-constrained Bellman-Ford instead
(``PathAuction``), which also backs the random-graph experiments.

Payment conventions:

* MP pays every winning element as its own pseudo-agent and sums the
  per-element amounts per reported owner.
* AP and RVCG pay each winning reported agent once, against the best
  alternative avoiding all of that agent's elements.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Dict, Hashable, Mapping, Optional, Sequence, Tuple

import numpy as np

from .setsystem import (
    DEFAULT_MAX_FEASIBLE,
    TOL,
    BidProfile,
    ElementSet,
    EmptyFamily,
    ExplicitFamily,
    HopTable,
    OwnedSetSystem,
    SetSystemError,
    StGraph,
    canonical,
    feasible_sets,
    st_paths,
)

MECHANISMS = ("mp", "ap", "rvcg")
LOG_SIZE_CUTOFF = 50


class MechanismError(ValueError):
    pass


class MonopolyElement(MechanismError):
    pass


class TargetNotWinning(MechanismError):
    pass


@dataclass(frozen=True)
class AuctionOutcome:
    mechanism: str
    winner: Optional[ElementSet]
    payments: Dict[Hashable, float]
    adjusted_cost: Optional[float] = None
    reserve: Optional[float] = None
    # agent (or element, for MP) -> (alternative set or None, its objective value)
    diagnostics: Dict[Hashable, Tuple[Optional[ElementSet], float]] = field(default_factory=dict)

    @property
    def purchased(self) -> bool:
        return self.winner is not None

    def total_payment(self) -> float:
        return float(sum(self.payments.values()))


def penalty(r: float, w) -> np.ndarray | float:
    """Width penalty (1 - 2^(1-w)) * r."""
    return (1.0 - np.exp2(1.0 - np.asarray(w, dtype=float))) * r


def check_reserve(r) -> float:
    if r is None:
        raise MechanismError("a reserve cost is required")
    r = float(r)
    if not math.isfinite(r) or r < 0:
        raise MechanismError("reserve cost must be finite and non-negative")
    return r


# ---------------------------------------------------------------------------
# explicit-family core


def first_min(values: np.ndarray, tol: float = TOL) -> np.ndarray:
    """Row-wise index of the first entry within ``tol`` of the row minimum.

    Columns are expected in lexicographic set order, so this is the
    lexicographic tie-break.
    """
    mins = values.min(axis=1, keepdims=True)
    with np.errstate(invalid="ignore"):
        near = values <= mins + tol
    near |= values == mins  # handles -inf / inf rows
    return near.argmax(axis=1)


def _masked_min(values: np.ndarray, mask: np.ndarray) -> np.ndarray:
    """Row-wise min over the columns where ``mask`` holds (inf if none)."""
    if not mask.any():
        return np.full(values.shape[0], np.inf)
    return values[:, mask].min(axis=1)


def mp_keys(sums: np.ndarray, sizes: np.ndarray) -> Tuple[np.ndarray, bool]:
    """MP objective b(S)*2^(|S|-1), or its log2 once sets get large."""
    if sizes.max(initial=1) <= LOG_SIZE_CUTOFF:
        return sums * np.exp2(sizes - 1.0), True
    with np.errstate(divide="ignore"):
        return np.log2(sums) + (sizes - 1.0), False


class CompiledFamily:
    """Incidence-matrix view of an owned set system with a fixed reporting."""

    def __init__(self, elements: Sequence, sets: Sequence[ElementSet],
                 reported_owner: Mapping):
        self.elements = tuple(sorted(elements))
        self.index = {e: i for i, e in enumerate(self.elements)}
        self.sets = sorted(canonical(s) for s in sets)
        if not self.sets:
            raise EmptyFamily("no feasible set exists")
        n, m = len(self.elements), len(self.sets)
        inc = np.zeros((m, n), dtype=bool)
        for j, s in enumerate(self.sets):
            inc[j, [self.index[e] for e in s]] = True
        self.inc = inc
        self.incf = inc.astype(float)
        self.sizes = inc.sum(axis=1).astype(float)
        self.agents = tuple(sorted({reported_owner[e] for e in self.elements}))
        agent_index = {a: i for i, a in enumerate(self.agents)}
        self.owner = np.array([agent_index[reported_owner[e]] for e in self.elements], dtype=np.int64)
        own = np.zeros((n, len(self.agents)), dtype=bool)
        own[np.arange(n), self.owner] = True
        self.own = own
        # set j touches agent a
        self.touches = (inc.astype(np.int64) @ own.astype(np.int64)) > 0
        self.widths = self.touches.sum(axis=1).astype(float)

    @classmethod
    def from_system(cls, sys: OwnedSetSystem, reported_owner: Mapping | None = None,
                    max_count: int = DEFAULT_MAX_FEASIBLE) -> "CompiledFamily":
        owner = sys.ownership if reported_owner is None else reported_owner
        return cls(sys.elements, feasible_sets(sys, max_count), owner)

    def bid_matrix(self, bids: Mapping) -> np.ndarray:
        return np.array([[float(bids[e]) for e in self.elements]])

    # -- batch evaluators: B has shape (K, n) --------------------------------

    def mp(self, B: np.ndarray):
        """Return winner index (K,) and per-element payments (K, n).

        Raises MonopolyElement if a winning element has no avoiding set.
        """
        sums = B @ self.incf.T
        keys, linear = mp_keys(sums, self.sizes)
        win = first_min(keys)
        rows = np.arange(B.shape[0])
        pay = np.zeros_like(B)
        for i in range(len(self.elements)):
            wins_i = self.inc[win, i]
            if not wins_i.any():
                continue
            avoid = ~self.inc[:, i]
            if not avoid.any():
                raise MonopolyElement(f"element {self.elements[i]!r} is in every feasible set")
            best_alt = keys[:, avoid].min(axis=1)
            contains = self.inc[:, i]
            if linear:
                scaled = best_alt[:, None] / np.exp2(self.sizes[contains] - 1.0)
            else:
                scaled = np.exp2(best_alt[:, None] - (self.sizes[contains] - 1.0))
            # threshold of element i: the largest bid at which some set through i
            # still ties the best set avoiding i
            terms = scaled - (sums[:, contains] - B[:, [i]])
            tau = terms.max(axis=1)
            pay[rows[wins_i], i] = tau[wins_i]
        return win, pay

    def ap(self, B: np.ndarray, r: float):
        """Winner index (K,), -1 for no purchase, and per-agent payments (K, A)."""
        sums = B @ self.incf.T
        adj = sums + penalty(r, self.widths)
        win = first_min(adj)
        rows = np.arange(B.shape[0])
        adj_star = adj[rows, win]
        bought = adj_star <= r + TOL
        pay = np.zeros((B.shape[0], len(self.agents)))
        for a in range(len(self.agents)):
            wins_a = bought & self.touches[win, a]
            if not wins_a.any():
                continue
            alt = np.minimum(r, _masked_min(adj, ~self.touches[:, a]))
            mine = self.own[:, a]
            own_on_win = np.einsum("kj,kj->k", B[:, mine], self.incf[win][:, mine])
            p = alt - (adj_star - own_on_win)
            pay[wins_a, a] = p[wins_a]
        return np.where(bought, win, -1), pay

    def rvcg(self, B: np.ndarray, r: float):
        sums = B @ self.incf.T
        win = first_min(sums)
        rows = np.arange(B.shape[0])
        best = sums[rows, win]
        bought = best <= r + TOL
        pay = np.zeros((B.shape[0], len(self.agents)))
        for a in range(len(self.agents)):
            wins_a = bought & self.touches[win, a]
            if not wins_a.any():
                continue
            alt = np.minimum(r, _masked_min(sums, ~self.touches[:, a]))
            own_on_win = np.einsum("kj,kj->k", B[:, self.own[:, a]],
                                   self.incf[win][:, self.own[:, a]])
            pay[wins_a, a] = (alt - (best - own_on_win))[wins_a]
        return np.where(bought, win, -1), pay


# ---------------------------------------------------------------------------
# path-auction fast path


class PathAuction:
    """Hop-profile evaluator for path auctions with one element per agent.

    Caches the Bellman-Ford table of the full graph and of the graph minus
    each queried edge, so that AP can be re-run for many reserve costs.
    """

    def __init__(self, g: StGraph, bids: Mapping, kmax: int | None = None):
        self.graph = g
        self.bids = {e: float(bids[e]) for e, _, _ in g.edges}
        self.kmax = g.vertices - 1 if kmax is None else kmax
        self._tables: Dict[object, HopTable] = {}

    def table(self, removed=None) -> HopTable:
        if removed not in self._tables:
            self._tables[removed] = HopTable(self.graph, self.bids, self.kmax,
                                             () if removed is None else (removed,))
        return self._tables[removed]

    def profile(self, removed=None) -> np.ndarray:
        """Min cost to t with <= k hops, index k = 0..kmax."""
        return self.table(removed).to_target()

    @staticmethod
    def _best_hops(values: np.ndarray) -> Optional[int]:
        finite = np.isfinite(values)
        if not finite.any():
            return None
        v = np.where(finite, values, np.inf)
        return int(np.argmax(v <= v.min() + TOL))

    # RVCG -----------------------------------------------------------------
    def rvcg(self, r: float) -> AuctionOutcome:
        prof = self.profile()
        best = prof[-1]
        if not math.isfinite(best) or best > r + TOL:
            return AuctionOutcome("rvcg", None, {}, None if not math.isfinite(best) else float(best), r)
        k = self._best_hops(prof)
        winner = self.table().witness(k)
        payments, diag = {}, {}
        for e in winner:
            alt_prof = self.profile(e)
            alt = alt_prof[-1]
            diag[e] = (self._alt_witness(e, alt_prof), float(alt))
            payments[e] = min(r, alt) - (best - self.bids[e])
        return AuctionOutcome("rvcg", canonical(winner), payments, float(best), r, diag)

    # AP -------------------------------------------------------------------
    def ap_adjusted(self, r: float, removed=None) -> Tuple[float, Optional[int]]:
        prof = self.profile(removed)
        ks = np.arange(len(prof))
        adj = prof + penalty(r, np.maximum(ks, 1))
        adj[0] = np.inf
        k = self._best_hops(adj)
        return (math.inf, None) if k is None else (float(adj[k]), k)

    def ap(self, r: float) -> AuctionOutcome:
        adj_star, k = self.ap_adjusted(r)
        if k is None or adj_star > r + TOL:
            return AuctionOutcome("ap", None, {}, None if k is None else adj_star, r)
        winner = self.table().witness(k)
        payments, diag = {}, {}
        for e in winner:
            alt, k_alt = self.ap_adjusted(r, e)
            diag[e] = (None if k_alt is None else canonical(self.table(e).witness(k_alt)), alt)
            payments[e] = min(r, alt) - (adj_star - self.bids[e])
        return AuctionOutcome("ap", canonical(winner), payments, adj_star, r, diag)

    # MP -------------------------------------------------------------------
    def mp(self) -> AuctionOutcome:
        prof = self.profile()
        ks = np.arange(len(prof)).astype(float)
        keys, linear = mp_keys(prof, ks)
        keys[0] = np.inf
        k = self._best_hops(keys)
        if k is None:
            raise EmptyFamily("no s-t path")
        winner = self.table().witness(k)
        b_star = float(prof[k])
        payments, diag = {}, {}
        for e in winner:
            alt_prof = self.profile(e)
            alt_keys, _ = mp_keys(alt_prof, ks)
            alt_keys[0] = np.inf
            k_alt = self._best_hops(alt_keys)
            if k_alt is None:
                raise MonopolyElement(f"element {e!r} is on every s-t path")
            m_alt = float(alt_keys[k_alt])
            diag[e] = (canonical(self.table(e).witness(k_alt)), m_alt)
            payments[e] = self._mp_threshold(e, winner, b_star, m_alt, linear)
        value = float(keys[k]) if linear else float(np.exp2(keys[k]))
        return AuctionOutcome("mp", canonical(winner), payments, value, None, diag)

    def _mp_threshold(self, e, winner, b_star, m_alt, linear) -> float:
        def scaled(size):
            return m_alt / 2.0 ** (size - 1) if linear else 2.0 ** (m_alt - (size - 1))

        be = self.bids[e]
        best = scaled(len(winner)) - (b_star - be)
        # only paths through e with fewer edges than the winner can beat the
        # winner's own term; enumerate them with cost pruning
        if len(winner) > 1:
            for path in self._short_paths_through(e, len(winner) - 1, scaled, be, best):
                term = scaled(len(path)) - (sum(self.bids[x] for x in path) - be)
                best = max(best, term)
        return best

    def _short_paths_through(self, e, max_hops, scaled, be, floor):
        g = self.graph
        adj = [[] for _ in range(g.vertices)]
        for x, u, v in g.arcs():
            adj[u].append((x, v))
        on_path = [False] * g.vertices
        path, found = [], []

        def dfs(u, cost):
            h = len(path)
            if h and scaled(h) - (cost - (be if e in path else 0.0)) <= floor:
                return
            if u == g.t:
                if e in path:
                    found.append(tuple(path))
                return
            if h >= max_hops:
                return
            on_path[u] = True
            for x, v in adj[u]:
                if not on_path[v]:
                    path.append(x)
                    dfs(v, cost + self.bids[x])
                    path.pop()
            on_path[u] = False

        dfs(g.s, 0.0)
        return found

    def _alt_witness(self, e, prof):
        if not math.isfinite(prof[-1]):
            return None
        return canonical(self.table(e).witness(self._best_hops(prof)))


# ---------------------------------------------------------------------------
# public entry points


def _one_element_per_agent(owner: Mapping) -> bool:
    return len(set(owner.values())) == len(owner)


def _use_fast_path(sys: OwnedSetSystem, bids: BidProfile, method: str, single_owner_needed: bool) -> bool:
    if method == "enumerate" or not isinstance(sys.feasible, StGraph):
        return False
    if single_owner_needed and not _one_element_per_agent(bids.reported_owner):
        if method == "graph":
            raise MechanismError("graph fast path needs one element per reported agent")
        return False
    return True


def _aggregate(per_key: Mapping, owner: Mapping) -> Dict:
    out: Dict = {}
    for e, p in per_key.items():
        out[owner[e]] = out.get(owner[e], 0.0) + float(p)
    return out


def _agent_diag(cf: CompiledFamily, values: np.ndarray, agent_idx: int, r: float | None):
    avoid = ~cf.touches[:, agent_idx]
    if not avoid.any():
        return None, (math.inf if r is None else r)
    j = int(first_min(values[None, :][:, avoid])[0])
    idx = np.flatnonzero(avoid)[j]
    return cf.sets[idx], float(values[idx])


def mp_run(sys: OwnedSetSystem, bids: BidProfile, *, method: str = "auto",
           max_count: int = DEFAULT_MAX_FEASIBLE) -> AuctionOutcome:
    """Multiplicative-penalty mechanism.

    Picks the set minimizing b(S) * 2^(|S|-1) and pays every winning element
    its threshold bid: the largest bid at which some feasible set through the
    element still ties the best set avoiding it. When the winning set is the
    minimizer among sets through the element this is
    2^(|S^-e| - |S*|) * b(S^-e) - b(S* - e).
    """
    bids.check_against(sys)
    if _use_fast_path(sys, bids, method, single_owner_needed=False):
        out = PathAuction(sys.feasible, bids.bids).mp()
        return AuctionOutcome("mp", out.winner, _aggregate(out.payments, bids.reported_owner),
                              out.adjusted_cost, None, out.diagnostics)
    cf = CompiledFamily.from_system(sys, bids.reported_owner, max_count)
    B = cf.bid_matrix(bids.bids)
    win, pay = cf.mp(B)
    winner = cf.sets[int(win[0])]
    sums = (B @ cf.incf.T)[0]
    keys, linear = mp_keys(sums[None, :], cf.sizes)
    per_elem, diag = {}, {}
    for e in winner:
        i = cf.index[e]
        per_elem[e] = float(pay[0, i])
        avoid = ~cf.inc[:, i]
        j = np.flatnonzero(avoid)[int(first_min(keys[:, avoid])[0])]
        diag[e] = (cf.sets[j], float(keys[0, j]) if linear else float(np.exp2(keys[0, j])))
    adj = float(keys[0, win[0]]) if linear else float(np.exp2(keys[0, win[0]]))
    return AuctionOutcome("mp", winner, _aggregate(per_elem, bids.reported_owner), adj, None, diag)


def ap_run(sys: OwnedSetSystem, bids: BidProfile, r: float, *, method: str = "auto",
           max_count: int = DEFAULT_MAX_FEASIBLE) -> AuctionOutcome:
    """Additive-penalty mechanism with reserve cost ``r``.

    Adjusted cost Adj(S) = b(S) + (1 - 2^(1-w(S))) r with w the number of
    distinct reported owners in S. Buys the Adj-minimizer unless its adjusted
    cost exceeds r; agent i is paid min(r, Adj(S^-i)) - (b(S* - T_i) + penalty).
    """
    r = check_reserve(r)
    bids.check_against(sys)
    if _use_fast_path(sys, bids, method, single_owner_needed=True):
        out = PathAuction(sys.feasible, bids.bids).ap(r)
        return AuctionOutcome("ap", out.winner, _aggregate(out.payments, bids.reported_owner),
                              out.adjusted_cost, r,
                              {bids.reported_owner[e]: d for e, d in out.diagnostics.items()})
    cf = CompiledFamily.from_system(sys, bids.reported_owner, max_count)
    B = cf.bid_matrix(bids.bids)
    adj = (B @ cf.incf.T)[0] + penalty(r, cf.widths)
    win, pay = cf.ap(B, r)
    best = int(first_min(adj[None, :])[0])
    if win[0] < 0:
        return AuctionOutcome("ap", None, {}, float(adj[best]), r)
    winner = cf.sets[int(win[0])]
    payments, diag = {}, {}
    for a, agent in enumerate(cf.agents):
        if cf.touches[win[0], a]:
            payments[agent] = float(pay[0, a])
            diag[agent] = _agent_diag(cf, adj, a, r)
    return AuctionOutcome("ap", winner, payments, float(adj[win[0]]), r, diag)


def rvcg_run(sys: OwnedSetSystem, bids: BidProfile, r: float, *, method: str = "auto",
             max_count: int = DEFAULT_MAX_FEASIBLE) -> AuctionOutcome:
    """VCG truncated by a reserve cost.

    Buys the cheapest set S* if b(S*) <= r and pays each winning agent
    min(r, b(S^-i)) - b(S* - T_i); with one element per agent this is the
    per-edge rule min(r, c(S^-e)) - c(S* - e).
    """
    r = check_reserve(r)
    bids.check_against(sys)
    if _use_fast_path(sys, bids, method, single_owner_needed=True):
        out = PathAuction(sys.feasible, bids.bids).rvcg(r)
        return AuctionOutcome("rvcg", out.winner, _aggregate(out.payments, bids.reported_owner),
                              out.adjusted_cost, r,
                              {bids.reported_owner[e]: d for e, d in out.diagnostics.items()})
    cf = CompiledFamily.from_system(sys, bids.reported_owner, max_count)
    B = cf.bid_matrix(bids.bids)
    sums = (B @ cf.incf.T)[0]
    win, pay = cf.rvcg(B, r)
    best = int(first_min(sums[None, :])[0])
    if win[0] < 0:
        return AuctionOutcome("rvcg", None, {}, float(sums[best]), r)
    winner = cf.sets[int(win[0])]
    payments, diag = {}, {}
    for a, agent in enumerate(cf.agents):
        if cf.touches[win[0], a]:
            payments[agent] = float(pay[0, a])
            diag[agent] = _agent_diag(cf, sums, a, r)
    return AuctionOutcome("rvcg", winner, payments, float(sums[win[0]]), r, diag)


@dataclass(frozen=True)
class Mechanism:
    """A mechanism name bound to its reserve cost (None for MP)."""

    name: str
    reserve: Optional[float] = None

    def __post_init__(self):
        if self.name not in MECHANISMS:
            raise MechanismError(f"unknown mechanism {self.name!r}")
        if self.name == "mp" and self.reserve is not None:
            raise MechanismError("mp takes no reserve cost")
        if self.name != "mp":
            object.__setattr__(self, "reserve", check_reserve(self.reserve))

    def run(self, sys: OwnedSetSystem, bids: BidProfile, **kw) -> AuctionOutcome:
        if self.name == "mp":
            return mp_run(sys, bids, **kw)
        if self.name == "ap":
            return ap_run(sys, bids, self.reserve, **kw)
        return rvcg_run(sys, bids, self.reserve, **kw)

    def evaluate(self, cf: CompiledFamily, B: np.ndarray):
        """Batch evaluation: (winner index or -1, payments per reported agent)."""
        if self.name == "mp":
            win, pay = cf.mp(B)
            return win, pay @ cf.own.astype(float)
        if self.name == "ap":
            return cf.ap(B, self.reserve)
        return cf.rvcg(B, self.reserve)


# ---------------------------------------------------------------------------
# independent threshold oracle


def _wins(outcome: AuctionOutcome, needed: Sequence) -> bool:
    return outcome.winner is not None and set(needed) <= set(outcome.winner)


def _bisect(wins_at, lo: float, hi: float, tol: float) -> float:
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if wins_at(mid):
            lo = mid
        else:
            hi = mid
    return lo


def threshold_oracle(mechanism: Mechanism, sys: OwnedSetSystem, bids: BidProfile, target,
                     *, tol: float = 1e-9, max_count: int = DEFAULT_MAX_FEASIBLE) -> float:
    """Payment recomputed by bisection on the target's own bid(s).

    ``target`` is an element id or a reported agent id. Under MP each
    winning element is bisected separately (the element keeps winning) and
    the thresholds are summed over the agent's winning elements. Under AP and
    RVCG the agent's winning bundle is bid on as a whole: its other elements
    are withdrawn (bid above the reserve), the bundle bid is scaled and the
    sup at which the same bundle still wins is returned, minus nothing. This
    needs the bundle to be atomic: every remaining feasible set contains all
    of it or none of it.
    """
    owner = bids.reported_owner
    run = lambda b: mechanism.run(sys, BidProfile(b, owner), method="enumerate", max_count=max_count)
    base = run(bids.bids)
    if target in owner:
        agent = owner[target] if mechanism.name != "mp" else None
        elems = [target] if mechanism.name == "mp" else None
    else:
        agent = target
        elems = None
    if agent is not None and agent not in set(owner.values()):
        raise TargetNotWinning(f"unknown target {target!r}")
    if base.winner is None:
        raise TargetNotWinning("nothing was purchased")

    if mechanism.name == "mp":
        if elems is None:
            elems = [e for e in base.winner if owner[e] == agent]
        if not elems or not set(elems) <= set(base.winner):
            raise TargetNotWinning(f"{target!r} does not win")
        total = 0.0
        for e in elems:
            def wins_at(x, e=e):
                b = dict(bids.bids)
                b[e] = x
                return _wins(run(b), [e])
            hi = max(1.0, 2.0 * bids.bids[e])
            while wins_at(hi):
                hi *= 2.0
                if hi > 1e12:
                    raise MonopolyElement(f"{e!r} wins at any bid")
            total += _bisect(wins_at, bids.bids[e], hi, tol)
        return total

    bundle = [e for e in base.winner if owner[e] == agent]
    if not bundle:
        raise TargetNotWinning(f"{target!r} does not win")
    r = mechanism.reserve
    others = [e for e in sys.elements if owner[e] == agent and e not in bundle]
    withdrawn = 2.0 * r + 1.0 + sum(bids.bids.values())
    fam = feasible_sets(sys, max_count)
    live = [s for s in fam if not set(s) & set(others)]
    if any(0 < len(set(s) & set(bundle)) < len(bundle) for s in live):
        raise MechanismError("oracle needs an atomic winning bundle")
    base_bids = np.array([bids.bids[e] for e in bundle])
    total0 = base_bids.sum()
    shares = base_bids / total0 if total0 > 0 else np.full(len(bundle), 1.0 / len(bundle))

    def wins_at(x):
        b = dict(bids.bids)
        for e in others:
            b[e] = withdrawn
        for e, s in zip(bundle, shares):
            b[e] = x * s
        return _wins(run(b), bundle)

    if not wins_at(total0):
        raise TargetNotWinning("bundle stops winning once the agent's other elements are withdrawn")
    return _bisect(wins_at, total0, r + 1.0, tol)
