"""Dense two-phase primal simplex for small linear programs.

Solves    min c'x   s.t.  A x <= b,  x >= 0

with a classic tableau.  Entering variables are chosen by the Dantzig
rule (most negative reduced cost) until progress stalls, after which the
solver switches to Bland's smallest-index rule, which guarantees
termination on degenerate problems.  Leaving-row ties always go to the
smallest basis index.  Everything is deterministic.

Sized for problems with a few hundred rows and columns; no sparsity is
exploited.
"""

from __future__ import annotations

import numpy as np

from .errors import Infeasible, SolverStall

_TOL = 1e-9
_STALL_PIVOTS = 50  # pivots without objective progress before Bland's rule


def _pivot(tab: np.ndarray, basis: np.ndarray, row: int, col: int) -> None:
    tab[row] /= tab[row, col]
    factors = tab[:, col].copy()
    factors[row] = 0.0
    tab -= np.outer(factors, tab[row])
    basis[row] = col


def _choose_entering(cost: np.ndarray, ncols: int, bland: bool) -> int | None:
    reduced = cost[:ncols]
    if bland:
        below = np.nonzero(reduced < -_TOL)[0]
        return int(below[0]) if below.size else None
    j = int(np.argmin(reduced))
    return j if reduced[j] < -_TOL else None


def _choose_leaving(tab: np.ndarray, basis: np.ndarray, col: int) -> int | None:
    column = tab[:-1, col]
    rhs = tab[:-1, -1]
    candidates = np.nonzero(column > _TOL)[0]
    if candidates.size == 0:
        return None
    ratios = rhs[candidates] / column[candidates]
    best = ratios.min()
    tied = candidates[ratios <= best + _TOL]
    # smallest basis index among ties (anti-cycling with Bland)
    return int(tied[np.argmin(basis[tied])])


def _run(tab: np.ndarray, basis: np.ndarray, ncols: int, max_pivots: int) -> None:
    bland = False
    stall = 0
    last_obj = tab[-1, -1]
    for _ in range(max_pivots):
        col = _choose_entering(tab[-1], ncols, bland)
        if col is None:
            return
        row = _choose_leaving(tab, basis, col)
        if row is None:
            raise SolverStall("unbounded direction in a bounded problem")
        _pivot(tab, basis, row, col)
        obj = tab[-1, -1]
        if obj > last_obj + _TOL:
            stall = 0
            last_obj = obj
        else:
            stall += 1
            if stall >= _STALL_PIVOTS:
                bland = True
    raise SolverStall("pivot cap exceeded")


def solve_lp(c: np.ndarray, a_ub: np.ndarray, b_ub: np.ndarray,
             max_pivots: int | None = None) -> tuple[np.ndarray, float]:
    """Minimize c'x subject to A x <= b and x >= 0.

    Returns ``(x, objective)``.  Raises :class:`Infeasible` if phase one
    cannot zero the artificial variables and :class:`SolverStall` on a
    pivot-cap or unboundedness (neither occurs on well-posed inputs).
    """
    c = np.asarray(c, dtype=float)
    a = np.asarray(a_ub, dtype=float)
    b = np.asarray(b_ub, dtype=float).copy()
    m, n = a.shape
    if max_pivots is None:
        max_pivots = 200 * (m + n + 10)

    # Normalize rows to b >= 0; slack coefficient is +1 or -1 accordingly.
    signs = np.where(b < 0, -1.0, 1.0)
    a = a * signs[:, None]
    b = b * signs
    slack = np.diag(signs)

    need_art = signs < 0
    n_art = int(need_art.sum())
    art = np.zeros((m, n_art))
    art[np.nonzero(need_art)[0], np.arange(n_art)] = 1.0

    ntot = n + m + n_art
    tab = np.zeros((m + 1, ntot + 1))
    tab[:m, :n] = a
    tab[:m, n:n + m] = slack
    tab[:m, n + m:ntot] = art
    tab[:m, -1] = b

    basis = np.empty(m, dtype=int)
    art_col = n + m
    for i in range(m):
        if need_art[i]:
            basis[i] = art_col
            art_col += 1
        else:
            basis[i] = n + i

    if n_art:
        # Phase 1: minimize the sum of artificials.
        cost1 = np.zeros(ntot + 1)
        cost1[n + m:ntot] = 1.0
        tab[-1] = cost1
        for i in range(m):
            if basis[i] >= n + m:
                tab[-1] -= tab[i]
        _run(tab, basis, ntot, max_pivots)
        if tab[-1, -1] < -1e-7:
            raise Infeasible("phase one left positive artificial mass")
        # Drive any lingering artificials out of the basis; a row with no
        # eligible pivot is redundant and stays inert at level zero.
        for i in range(m):
            if basis[i] >= n + m:
                pivots = np.nonzero(np.abs(tab[i, :n + m]) > _TOL)[0]
                if pivots.size:
                    _pivot(tab, basis, i, int(pivots[0]))

    # Phase 2 with the real objective.
    cost2 = np.zeros(ntot + 1)
    cost2[:n] = c
    tab[-1] = cost2
    for i in range(m):
        if cost2[basis[i]] != 0.0:
            tab[-1] -= cost2[basis[i]] * tab[i]
    _run(tab, basis, n + m, max_pivots)

    x = np.zeros(ntot)
    x[basis] = tab[:m, -1]
    return x[:n], float(-tab[-1, -1])
