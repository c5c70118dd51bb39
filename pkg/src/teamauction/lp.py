"""Small linear programs: exact two-phase simplex over Fractions, or HiGHS.

Solves  min c.x  s.t.  A_ub x <= b_ub,  A_eq x = b_eq,  x >= 0.
The exact solver is a dense tableau with Bland's rule, which is plenty for
the handful of variables the frugality benchmark needs.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import List, Optional, Sequence

import numpy as np
from scipy.optimize import linprog

OPTIMAL, INFEASIBLE, UNBOUNDED = "optimal", "infeasible", "unbounded"


@dataclass(frozen=True)
class LPResult:
    status: str
    x: Optional[tuple] = None
    value: Optional[object] = None


def _pivot(T: List[List[Fraction]], basis: List[int], row: int, col: int) -> None:
    piv = T[row][col]
    T[row] = [v / piv for v in T[row]]
    for i, r in enumerate(T):
        if i != row and r[col] != 0:
            f = r[col]
            T[i] = [a - f * b for a, b in zip(r, T[row])]
    basis[row] = col


def _simplex(T, basis, cost, allowed) -> str:
    """Minimize ``cost`` over the tableau (last column is the RHS)."""
    m = len(T)
    ncol = len(T[0]) - 1
    while True:
        # reduced costs
        red = list(cost)
        for i in range(m):
            cb = cost[basis[i]]
            if cb:
                red = [rc - cb * t for rc, t in zip(red, T[i][:ncol])]
        enter = next((j for j in range(ncol) if allowed[j] and red[j] < 0), None)
        if enter is None:
            return OPTIMAL
        best, leave = None, None
        for i in range(m):
            a = T[i][enter]
            if a > 0:
                ratio = T[i][-1] / a
                if best is None or ratio < best or (ratio == best and basis[i] < basis[leave]):
                    best, leave = ratio, i
        if leave is None:
            return UNBOUNDED
        _pivot(T, basis, leave, enter)


def solve_exact(c: Sequence, A_ub: Sequence[Sequence] = (), b_ub: Sequence = (),
                A_eq: Sequence[Sequence] = (), b_eq: Sequence = ()) -> LPResult:
    """Two-phase simplex in exact rational arithmetic."""
    n = len(c)
    c = [Fraction(v) for v in c]
    rows = [([Fraction(v) for v in a], Fraction(b), "ub") for a, b in zip(A_ub, b_ub)]
    rows += [([Fraction(v) for v in a], Fraction(b), "eq") for a, b in zip(A_eq, b_eq)]
    m = len(rows)
    if m == 0:
        if any(v < 0 for v in c):
            return LPResult(UNBOUNDED)
        return LPResult(OPTIMAL, tuple(Fraction(0) for _ in c), Fraction(0))
    n_slack = sum(1 for _, _, k in rows if k == "ub")
    # columns: x (n) | slacks (n_slack) | artificials (m)
    ncol = n + n_slack + m
    T, basis = [], []
    s_idx = n
    for i, (a, b, kind) in enumerate(rows):
        row = a + [Fraction(0)] * (n_slack + m) + [b]
        if kind == "ub":
            row[s_idx] = Fraction(1)
            s_idx += 1
        if b < 0:
            row = [-v for v in row]
        row[n + n_slack + i] = Fraction(1)
        T.append(row)
        basis.append(n + n_slack + i)
    allowed = [True] * ncol
    phase1 = [Fraction(0)] * (n + n_slack) + [Fraction(1)] * m
    _simplex(T, basis, phase1, allowed)
    if sum(T[i][-1] for i in range(m) if basis[i] >= n + n_slack) != 0:
        return LPResult(INFEASIBLE)
    # drive zero-level artificials out of the basis
    for i in range(m):
        if basis[i] >= n + n_slack:
            col = next((j for j in range(n + n_slack) if T[i][j] != 0), None)
            if col is not None:
                _pivot(T, basis, i, col)
    for j in range(n + n_slack, ncol):
        allowed[j] = False
    phase2 = c + [Fraction(0)] * (n_slack + m)
    status = _simplex(T, basis, phase2, allowed)
    if status != OPTIMAL:
        return LPResult(status)
    x = [Fraction(0)] * ncol
    for i, bcol in enumerate(basis):
        x[bcol] = T[i][-1]
    sol = tuple(x[:n])
    return LPResult(OPTIMAL, sol, sum(ci * xi for ci, xi in zip(c, sol)))


def solve_float(c, A_ub=(), b_ub=(), A_eq=(), b_eq=()) -> LPResult:
    res = linprog(
        np.asarray(c, dtype=float),
        A_ub=np.asarray(A_ub, dtype=float) if len(A_ub) else None,
        b_ub=np.asarray(b_ub, dtype=float) if len(b_ub) else None,
        A_eq=np.asarray(A_eq, dtype=float) if len(A_eq) else None,
        b_eq=np.asarray(b_eq, dtype=float) if len(b_eq) else None,
        bounds=(0, None),
        method="highs",
    )
    if res.status == 2:
        return LPResult(INFEASIBLE)
    if res.status == 3:
        return LPResult(UNBOUNDED)
    if res.status != 0:
        raise RuntimeError(f"LP solver failed: {res.message}")
    return LPResult(OPTIMAL, tuple(float(v) for v in res.x), float(res.fun))
