"""The nu(c) first-price benchmark, frugality probes and the MP lower-bound family.

nu(c) is the least total price sum_{e in S} x_e on the cheapest set S such
that every price is at least the cost, no feasible set T is undercut
(x(S - T) <= c(T - S)), and each e in S is held down by some T_e avoiding e
with x(S - T_e) = c(T_e - S).

The last condition is existential, so the program is solved once per choice
of tight sets. Only the image of the assignment e -> T_e matters, and a
smaller image only drops equality constraints, so it suffices to solve one LP
per minimal cover: a collection of feasible sets in which every e in S is
avoided by some member and no member is redundant.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction
from numbers import Rational
from typing import Callable, Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from . import lp
from .mechanisms import Mechanism
from .setsystem import (
    DEFAULT_MAX_FEASIBLE,
    ElementSet,
    OwnedSetSystem,
    StGraph,
    TOL,
    feasible_sets,
    set_cost,
    truthful_bids,
)

MAX_DENOMINATOR = 10**6


class FrugalityError(ValueError):
    pass


class NotMonopolyFree(FrugalityError):
    pass


class TooLarge(FrugalityError):
    pass


class Infeasible(FrugalityError):
    pass


@dataclass(frozen=True)
class NuResult:
    value: object  # Fraction when solved exactly, else float
    prices: Dict
    cheapest_set: ElementSet
    tight_sets: Dict
    exact: bool = False


@dataclass
class FrugalityEstimate:
    ratio_max: float = 0.0
    witness_cost: Optional[Dict] = None
    trials: int = 0
    per_trial: List[Tuple[float, float]] = field(default_factory=list)


def as_rational(v) -> Optional[Fraction]:
    """``v`` as a Fraction with denominator <= 1e6, or None if it is not one."""
    if isinstance(v, Rational):
        f = Fraction(v)
        return f if f.denominator <= MAX_DENOMINATOR else None
    v = float(v)
    if not math.isfinite(v):
        return None
    f = Fraction(v).limit_denominator(MAX_DENOMINATOR)
    return f if float(f) == v else None


def _cheapest(fam: Sequence[ElementSet], c: Mapping) -> ElementSet:
    best, best_cost = None, None
    for s in fam:
        cost = sum(c[e] for e in s)
        if best is None or cost < best_cost - (0 if isinstance(cost, Fraction) else TOL):
            best, best_cost = s, cost
    return best


def _check_monopoly_free(fam: Sequence[ElementSet]) -> None:
    common = set(fam[0])
    for s in fam[1:]:
        common &= set(s)
    if common:
        raise NotMonopolyFree(f"elements {sorted(common)} lie in every feasible set")


def _program(fam, S, c):
    """Rows a_T (indicator of S - T) and right-hand sides c(T - S) - c(S - T).

    Variables are the markups y_e = x_e - c_e >= 0 for e in S.
    """
    Sset = set(S)
    rows, rhs = [], []
    for T in fam:
        Tset = set(T)
        rows.append([0 if e in Tset else 1 for e in S])
        rhs.append(sum(c[e] for e in T if e not in Sset) - sum(c[e] for e in S if e not in Tset))
    return rows, rhs


def minimal_covers(fam: Sequence[ElementSet], S: ElementSet, limit: int):
    """Index tuples of minimal collections of sets avoiding every e in S."""
    pos = {e: i for i, e in enumerate(S)}
    full = (1 << len(S)) - 1
    masks = []
    for T in fam:
        m = full
        for e in T:
            if e in pos:
                m &= ~(1 << pos[e])
        masks.append(m)
    cands = [j for j, m in enumerate(masks) if m]
    seen = 0
    for k in range(1, len(S) + 1):
        for combo in itertools.combinations(cands, k):
            seen += 1
            if seen > limit:
                raise TooLarge(f"more than {limit} candidate tight-set collections")
            union = 0
            for j in combo:
                union |= masks[j]
            if union != full:
                continue
            minimal = True
            for drop in range(k):
                u = 0
                for i, j in enumerate(combo):
                    if i != drop:
                        u |= masks[j]
                if u == full:
                    minimal = False
                    break
            if minimal:
                yield combo


def nu(sys: OwnedSetSystem, c: Mapping, max_feasible: int = DEFAULT_MAX_FEASIBLE, *,
       exact: Optional[bool] = None, max_covers: int = 2_000_000) -> NuResult:
    """Exact nu(c) by exhaustive search over tight-set choices.

    Uses rational arithmetic when every cost is a rational with denominator
    at most 1e6 (``exact=None`` decides automatically), HiGHS otherwise.
    """
    fam = feasible_sets(sys, max_feasible)
    _check_monopoly_free(fam)
    rat = {e: as_rational(c[e]) for e in sys.elements}
    if exact is None:
        exact = all(v is not None for v in rat.values())
    if exact:
        if any(v is None for v in rat.values()):
            raise FrugalityError("exact solve needs rational costs")
        cc = rat
    else:
        cc = {e: float(c[e]) for e in sys.elements}
    if any(v < 0 for v in cc.values()):
        raise FrugalityError("costs must be non-negative")
    S = _cheapest(fam, cc)
    rows, rhs = _program(fam, S, cc)
    ub = [(a, b) for a, b in zip(rows, rhs) if any(a)]
    A_ub = [a for a, _ in ub]
    b_ub = [b for _, b in ub]
    solve = lp.solve_exact if exact else lp.solve_float
    objective = [1] * len(S)

    best_val, best_x = None, None
    for cover in minimal_covers(fam, S, max_covers):
        res = solve(objective, A_ub, b_ub, [rows[j] for j in cover], [rhs[j] for j in cover])
        if res.status != lp.OPTIMAL:
            continue
        better = best_val is None or (res.value < best_val if exact else res.value < best_val - TOL)
        if better:
            best_val, best_x = res.value, res.x
    if best_val is None:
        raise Infeasible("no choice of tight sets is feasible")

    prices = {e: cc[e] + y for e, y in zip(S, best_x)}
    tight = {}
    for i, e in enumerate(S):
        for T, a, b in zip(fam, rows, rhs):
            if e in T:
                continue
            lhs = sum(y for y, ai in zip(best_x, a) if ai)
            if (lhs == b) if exact else abs(lhs - b) <= 1e-7:
                tight[e] = T
                break
        else:  # pragma: no cover - the LP equalities guarantee a tight set
            raise AssertionError(f"no tight set for {e!r}")
    value = sum(prices.values()) if exact else float(sum(prices.values()))
    return NuResult(value, prices, S, tight, exact)


def nu_local_search(sys: OwnedSetSystem, c: Mapping, *, restarts: int = 30, seed: int = 0,
                    max_feasible: int = 64) -> float:
    """nu(c) by randomized-restart hill climbing over tight-set assignments.

    Independent of :func:`nu`: each assignment is scored on the precomputed
    vertices of the polytope {y >= 0, a_T . y <= rhs_T}, as the pair (number
    of violated tight equalities, total markup), minimized lexicographically.
    """
    fam = feasible_sets(sys, max_feasible)
    _check_monopoly_free(fam)
    cf = {e: float(c[e]) for e in sys.elements}
    S = _cheapest(fam, cf)
    rows, rhs = _program(fam, S, cf)
    A = np.array(rows, dtype=float)
    b = np.array(rhs, dtype=float)
    d = len(S)
    G = np.vstack([-np.eye(d), A])
    h = np.concatenate([np.zeros(d), b])
    verts = []
    for idx in itertools.combinations(range(len(G)), d):
        M = G[list(idx)]
        if abs(np.linalg.det(M)) < 1e-12:
            continue
        v = np.linalg.solve(M, h[list(idx)])
        if np.all(G @ v <= h + 1e-9):
            verts.append(v)
    V = np.array(verts)
    totals = V.sum(axis=1)
    tight = np.abs(V @ A.T - b) <= 1e-7  # (vertex, set)
    cand = [[j for j, T in enumerate(fam) if e not in T] for e in S]
    rng = np.random.default_rng(seed)

    def score(assign):
        viol = np.zeros(len(V), dtype=int)
        for j in assign:
            viol += ~tight[:, j]
        key = viol * 1e6 + totals
        k = int(np.argmin(key))
        return int(viol[k]), float(totals[k])

    best = None
    for _ in range(restarts):
        assign = [int(rng.choice(ch)) for ch in cand]
        cur = score(assign)
        improved = True
        while improved:
            improved = False
            for i in range(d):
                for j in cand[i]:
                    if j == assign[i]:
                        continue
                    trial = assign[:i] + [j] + assign[i + 1:]
                    s = score(trial)
                    if s < cur:
                        assign, cur, improved = trial, s, True
        if cur[0] == 0 and (best is None or cur[1] < best):
            best = cur[1]
    if best is None:
        raise Infeasible("local search found no feasible tight-set assignment")
    return sum(cf[e] for e in S) + best


def lower_bound_instance(m: int, kappa: float):
    """Two parallel s-t routes: a chain of ``m`` edges and a single edge.

    The first chain edge costs ``kappa``, every other edge costs 0, and each
    edge is its own agent. Elements are ``0..m-1`` along the chain and ``m``
    for the direct edge; vertex 0 is s and vertex 1 is t.
    """
    if m < 1:
        raise ValueError("m must be >= 1")
    if not kappa > 0:
        raise ValueError("kappa must be positive")
    chain = [0] + list(range(2, m + 1)) + [1]
    edges = [(j, chain[j], chain[j + 1]) for j in range(m)]
    edges.append((m, 0, 1))
    g = StGraph(m + 1, tuple(edges), 0, 1, True)
    elements = tuple(range(m + 1))
    sys = OwnedSetSystem(elements, g, {e: e for e in elements})
    costs = {e: 0 for e in elements}
    costs[0] = kappa
    return sys, costs


def frugality_probe(mechanism: Mechanism, sys: OwnedSetSystem,
                    cost_sampler: Callable[[np.random.Generator, OwnedSetSystem], Mapping],
                    trials: int, max_feasible: int = DEFAULT_MAX_FEASIBLE, *,
                    seed: int = 0) -> FrugalityEstimate:
    """Empirical lower estimate of the frugality ratio over sampled costs.

    Trials where nothing is bought or nu is 0 are recorded but do not enter
    the ratio.
    """
    rng = np.random.default_rng(seed)
    est = FrugalityEstimate()
    for _ in range(trials):
        c = dict(cost_sampler(rng, sys))
        out = mechanism.run(sys, truthful_bids(sys, c), max_count=max_feasible)
        value = float(nu(sys, c, max_feasible).value)
        pay = out.total_payment()
        est.per_trial.append((pay, value))
        est.trials += 1
        if out.purchased and value > 0:
            ratio = pay / value
            if est.witness_cost is None or ratio > est.ratio_max:
                est.ratio_max, est.witness_cost = ratio, c
    return est


def reserve_frugality_bound(result: NuResult, c: Mapping, n: int) -> float:
    """2^n * max_e c(T_e): a reserve at or below this caps AP's ratio at 2^n."""
    return 2.0**n * max(float(set_cost(T, c)) for T in result.tight_sets.values())
