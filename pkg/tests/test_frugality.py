from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings

from conftest import explicit_systems
from teamauction.frugality import (
    NotMonopolyFree,
    TooLarge,
    frugality_probe,
    lower_bound_instance,
    minimal_covers,
    nu,
    nu_local_search,
    reserve_frugality_bound,
)
from teamauction.mechanisms import Mechanism, ap_run, mp_run
from teamauction.random_instances import random_explicit_system
from teamauction.setsystem import (
    ExplicitFamily,
    OwnedSetSystem,
    feasible_sets,
    set_cost,
    truthful_bids,
)


def parallel(costs):
    elems = tuple(range(len(costs)))
    fam = ExplicitFamily(tuple((e,) for e in elems))
    return OwnedSetSystem(elems, fam, {e: e for e in elems}), dict(zip(elems, costs))


def test_fig1_nu(fig1_instance):
    sys, c = fig1_instance
    res = nu(sys, c)
    assert res.exact and res.value == 8
    assert res.cheapest_set == ("sv", "vt")
    assert res.tight_sets == {"sv": ("st",), "vt": ("st",)}
    assert nu_local_search(sys, c) == pytest.approx(8)


@pytest.mark.parametrize("costs", [(3, 4), (5, 1, 2), (0, 0), (2, 2, 9), (7, 0.5, 0.25)])
def test_parallel_elements_cost_second_lowest(costs):
    sys, c = parallel(costs)
    assert nu(sys, c).value == sorted(costs)[1]


def test_monopoly_rejected():
    sys = OwnedSetSystem((1, 2), ExplicitFamily(((1,), (1, 2))), {1: 1, 2: 2})
    with pytest.raises(NotMonopolyFree):
        nu(sys, {1: 1, 2: 1})


def test_float_costs_use_highs():
    sys, c = parallel((np.pi, np.e))
    res = nu(sys, c)
    assert not res.exact
    assert res.value == pytest.approx(np.pi)


def test_minimal_covers_limit():
    S = (0, 1)
    fam = [(0, 1), (0,), (1,), (2,)]
    covers = list(minimal_covers(fam, S, 100))
    assert sorted(covers) == [(1, 2), (3,)]
    with pytest.raises(TooLarge):
        list(minimal_covers(fam, S, 1))


@settings(max_examples=60)
@given(explicit_systems(max_elements=5, max_sets=5, one_per_agent=True))
def test_nu_feasible_and_matches_local_search(sc):
    sys, c = sc
    res = nu(sys, c)
    S = res.cheapest_set
    fam = feasible_sets(sys)
    # prices respect costs; no set undercuts; each winner held by a tight set
    for e in S:
        assert res.prices[e] >= c[e]
    for T in fam:
        assert sum(res.prices[e] for e in S if e not in T) <= set_cost([e for e in T if e not in S], c)
    for e, T in res.tight_sets.items():
        assert e not in T
        assert sum(res.prices[x] for x in S if x not in T) == set_cost([x for x in T if x not in S], c)
    assert set_cost(S, c) <= res.value
    assert float(res.value) == pytest.approx(nu_local_search(sys, c, restarts=20), abs=1e-6)


@pytest.mark.parametrize("m", range(1, 13))
def test_lower_bound_family_ratio(m):
    kappa = 2.0 ** (1 - m)
    sys, c = lower_bound_instance(m, kappa)
    out = mp_run(sys, truthful_bids(sys, c))
    value = nu(sys, c).value
    assert value == Fraction(kappa)
    assert out.winner == (m,)
    assert out.total_payment() / float(value) == pytest.approx(2.0 ** (m - 1), rel=1e-9)


def test_lower_bound_arguments():
    with pytest.raises(ValueError):
        lower_bound_instance(0, 1.0)
    with pytest.raises(ValueError):
        lower_bound_instance(3, 0.0)


@settings(max_examples=40)
@given(explicit_systems(max_elements=5, max_sets=5, one_per_agent=True))
def test_mp_within_exponential_bound(sc):
    sys, c = sc
    n = len(sys.elements)
    pay = mp_run(sys, truthful_bids(sys, c)).total_payment()
    assert pay <= 2.0 ** n * float(nu(sys, c).value) + 1e-6


def test_ap_reserve_bound_caps_ratio():
    rng = np.random.default_rng(5)
    for _ in range(30):
        sys = random_explicit_system(rng, 5, 4)
        c = {e: int(rng.integers(1, 6)) for e in sys.elements}
        res = nu(sys, c)
        n = len(sys.elements)
        r = reserve_frugality_bound(res, c, n)
        out = ap_run(sys, truthful_bids(sys, c), r)
        assert out.total_payment() <= r + 1e-9
        assert out.total_payment() <= 2.0 ** n * max(set_cost(T, c) for T in res.tight_sets.values()) + 1e-9


def test_frugality_probe_records_trials():
    sys, _ = parallel((1, 2, 3))

    def sampler(rng, s):
        return {e: int(rng.integers(1, 5)) for e in s.elements}

    est = frugality_probe(Mechanism("mp"), sys, sampler, 10, seed=3)
    assert est.trials == 10 and len(est.per_trial) == 10
    # one-element sets: MP pays the second-lowest bid, which is nu
    assert est.ratio_max == pytest.approx(1.0)
    again = frugality_probe(Mechanism("mp"), sys, sampler, 10, seed=3)
    assert again.per_trial == est.per_trial


def test_random_system_rejects_impossible_family_size():
    rng = np.random.default_rng(0)
    sys = random_explicit_system(rng, 2, 3)
    assert len(sys.feasible.sets) == 3
    with pytest.raises(ValueError):
        random_explicit_system(rng, 2, 4)
