"""Small dense linear-programming solver (two-phase simplex, Bland's rule).

Built for the yield-bounding and phase-error LPs in this package: a few
dozen variables, two-sided row constraints whose right-hand sides span many
orders of magnitude, and a hard determinism requirement (identical answers
run to run, machine to machine). Dense double-precision arithmetic
throughout; no sparsity, no presolve beyond the two documented
normalizations below.

Normalizations applied before the simplex
-----------------------------------------
* **Row equilibration** — each constraint row is divided by the magnitude
  of its right-hand side (or its largest coefficient when both sides are
  zero), so the feasibility tolerance is meaningful for rows whose natural
  scale is 1e-9 as well as rows of scale 1. For problems whose coefficient
  magnitudes carry the physical scale (rather than the right-hand sides),
  ``scale_floor`` keeps a near-zero right-hand side from blowing the row's
  coefficients up: the divisor is never smaller than ``scale_floor`` times
  the row's largest coefficient.
* **Null-interval rows** — a row confined to ``0 <= a.x <= 0`` whose
  nonzero coefficients all share one sign fixes every touched variable at
  zero (given nonnegative shifted variables); those variables are pinned
  and the row dropped. Equilibration alone would otherwise blow such rows
  up into a numerically hopeless scale.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError

#: feasibility tolerance on the row-equilibrated system
FEAS_TOL = 1e-9
#: reduced-cost tolerance for optimality
OPT_TOL = 1e-9
#: smallest acceptable pivot magnitude
PIVOT_TOL = 1e-12

LESS, GREATER, EQUAL = 0, 1, 2


@dataclass(frozen=True)
class LinearProgram:
    """min or max of c.x subject to b_lo <= A x <= b_hi, x_lo <= x <= x_hi.

    Infinite entries of ``b_lo``/``b_hi`` drop that side of a row;
    variable boxes must be finite.
    """

    c: np.ndarray
    A: np.ndarray
    b_lo: np.ndarray
    b_hi: np.ndarray
    x_lo: np.ndarray
    x_hi: np.ndarray
    sense: str = "min"
    scale_floor: float = 0.0

    def __post_init__(self):
        c = np.asarray(self.c, dtype=float)
        A = np.atleast_2d(np.asarray(self.A, dtype=float))
        object.__setattr__(self, "c", c)
        object.__setattr__(self, "A", A)
        for name in ("b_lo", "b_hi", "x_lo", "x_hi"):
            object.__setattr__(self, name, np.asarray(getattr(self, name), dtype=float))
        m, n = self.A.shape
        if self.c.shape != (n,) or self.x_lo.shape != (n,) or self.x_hi.shape != (n,):
            raise DomainError("objective/box dimensions do not match A's columns")
        if self.b_lo.shape != (m,) or self.b_hi.shape != (m,):
            raise DomainError("bound dimensions do not match A's rows")
        if self.sense not in ("min", "max"):
            raise DomainError(f"unknown sense {self.sense!r}")
        if self.scale_floor < 0.0:
            raise DomainError("scale_floor must be nonnegative")
        if np.any(self.b_lo > self.b_hi):
            raise DomainError("some b_lo exceeds its b_hi")
        if np.any(self.x_lo > self.x_hi):
            raise DomainError("some x_lo exceeds its x_hi")
        if not (np.all(np.isfinite(self.x_lo)) and np.all(np.isfinite(self.x_hi))):
            raise DomainError("variable boxes must be finite")


@dataclass(frozen=True)
class LpSolution:
    """Result of :func:`solve`.

    ``status`` is one of ``optimal``, ``infeasible``, ``unbounded`` or
    ``numerical_failure``. When optimal, ``x`` attains ``objective_value``
    (recomputed as c.x) and ``active_rows`` lists the indices of input rows
    tight at the optimum. When infeasible, ``offending_row`` names the
    input row that phase 1 could not satisfy (-1 when unattributable).
    """

    status: str
    x: np.ndarray | None = None
    objective_value: float | None = None
    active_rows: tuple[int, ...] = field(default=())
    offending_row: int | None = None


def _simplex(tableau: np.ndarray, basis: np.ndarray, cost: np.ndarray, max_iter: int):
    """Revised dense simplex on an equality tableau [A | b] with x >= 0.

    ``cost`` is the full objective row (to minimize). Bland's rule for both
    entering and leaving choices gives deterministic, cycle-free pivoting.
    Returns (status, tableau, basis) with status in
    {"optimal", "unbounded", "numerical_failure"}.
    """
    m = tableau.shape[0]
    n = tableau.shape[1] - 1
    for _ in range(max_iter):
        # reduced costs: cost - cost_B . B^-1 A  (tableau rows are B^-1 [A|b])
        cb = cost[basis]
        reduced = cost[:n] - cb @ tableau[:, :n]
        entering = -1
        for j in range(n):
            if reduced[j] < -OPT_TOL:
                entering = j
                break
        if entering < 0:
            return "optimal", tableau, basis
        col = tableau[:, entering]
        rhs = tableau[:, n]
        best_ratio = np.inf
        leaving = -1
        for i in range(m):
            if col[i] > PIVOT_TOL:
                ratio = rhs[i] / col[i]
                if ratio < best_ratio - 1e-15 or (
                    abs(ratio - best_ratio) <= 1e-15
                    and (leaving < 0 or basis[i] < basis[leaving])
                ):
                    best_ratio = ratio
                    leaving = i
        if leaving < 0:
            return "unbounded", tableau, basis
        pivot = tableau[leaving, entering]
        if abs(pivot) < PIVOT_TOL:
            return "numerical_failure", tableau, basis
        tableau[leaving] /= pivot
        for i in range(m):
            if i != leaving and tableau[i, entering] != 0.0:
                tableau[i] -= tableau[i, entering] * tableau[leaving]
        basis[leaving] = entering
    return "numerical_failure", tableau, basis


def solve(lp: LinearProgram) -> LpSolution:
    """Solve a :class:`LinearProgram` to a vertex optimum.

    Two-phase dense simplex. Deterministic: identical inputs give
    bit-identical outputs regardless of call order or thread count.
    """
    n = lp.A.shape[1]
    sign = 1.0 if lp.sense == "min" else -1.0

    # --- shift variables to x' = x - x_lo in [0, u] ---------------------
    u = lp.x_hi - lp.x_lo
    shift = lp.A @ lp.x_lo
    b_lo = lp.b_lo - shift
    b_hi = lp.b_hi - shift

    fixed_zero = np.zeros(n, dtype=bool)  # variables pinned at x' = 0
    fixed_zero |= u <= 0.0

    # --- null-interval row presolve --------------------------------------
    # A row one of whose sides confines same-signed coefficients of
    # nonnegative variables to zero pins every touched variable. Pinning
    # can cascade (a pinned column may leave another row single-signed), so
    # iterate to a fixed point before equilibrating.
    dropped = np.zeros(lp.A.shape[0], dtype=bool)
    while True:
        changed = False
        for i in range(lp.A.shape[0]):
            if dropped[i]:
                continue
            row = lp.A[i]
            nz = (np.abs(row) > 0.0) & ~fixed_zero
            if not np.any(nz):
                continue
            vals = row[nz]
            pins = (b_hi[i] == 0.0 and np.all(vals > 0.0)) or (
                b_lo[i] == 0.0 and np.all(vals < 0.0)
            )
            if pins:
                fixed_zero |= nz
                dropped[i] = True
                changed = True
        if not changed:
            break
    live_rows = [i for i in range(lp.A.shape[0]) if not dropped[i]]

    free = ~fixed_zero
    idx_free = np.nonzero(free)[0]
    nf = idx_free.size

    # violated pin: a pinned variable combination may contradict a row later;
    # handled naturally because pinned columns are simply removed (x'=0).

    # --- assemble scaled single-sided rows -------------------------------
    rows: list[np.ndarray] = []
    rhs: list[float] = []
    rel: list[int] = []
    origin: list[int] = []  # input row index each simplex row came from

    def push(a: np.ndarray, beta: float, r: int, src: int) -> None:
        if beta < 0.0:
            a, beta = -a, -beta
            r = {LESS: GREATER, GREATER: LESS, EQUAL: EQUAL}[r]
        rows.append(a)
        rhs.append(beta)
        rel.append(r)
        origin.append(src)

    for i in live_rows:
        a_full = lp.A[i]
        a = a_full[free]
        lo, hi = b_lo[i], b_hi[i]
        scale = max(abs(lo) if np.isfinite(lo) else 0.0, abs(hi) if np.isfinite(hi) else 0.0)
        scale = max(scale, lp.scale_floor * float(np.max(np.abs(a), initial=0.0)))
        if scale == 0.0:
            scale = float(np.max(np.abs(a), initial=0.0))
        if scale == 0.0:
            # all-zero live row: feasible iff 0 within [lo, hi]
            if lo > FEAS_TOL or hi < -FEAS_TOL:
                return LpSolution(status="infeasible", offending_row=i)
            continue
        a = a / scale
        lo, hi = lo / scale, hi / scale
        if np.isfinite(lo) and np.isfinite(hi) and hi - lo <= 1e-15:
            push(a, 0.5 * (lo + hi), EQUAL, i)
            continue
        if np.isfinite(hi):
            push(a, hi, LESS, i)
        if np.isfinite(lo):
            push(a, lo, GREATER, i)

    # upper bounds of the shifted variables as explicit rows (cap > 0 is
    # guaranteed: zero-width boxes were pinned above)
    for k in range(nf):
        cap = u[idx_free[k]]
        a = np.zeros(nf)
        a[k] = 1.0 / cap
        push(a, 1.0, LESS, -1)

    m = len(rows)
    A = np.array(rows) if m else np.zeros((0, nf))
    b = np.array(rhs)

    # --- build the phase-1 tableau --------------------------------------
    n_slack = sum(1 for r in rel if r in (LESS, GREATER))
    n_art = sum(1 for r in rel if r in (GREATER, EQUAL))
    total = nf + n_slack + n_art
    T = np.zeros((m, total + 1))
    T[:, :nf] = A
    T[:, total] = b
    basis = np.empty(m, dtype=int)
    art_rows: dict[int, int] = {}  # artificial column -> simplex row
    js, ja = nf, nf + n_slack
    for i, r in enumerate(rel):
        if r == LESS:
            T[i, js] = 1.0
            basis[i] = js
            js += 1
        elif r == GREATER:
            T[i, js] = -1.0
            T[i, ja] = 1.0
            basis[i] = ja
            art_rows[ja] = i
            js += 1
            ja += 1
        else:
            T[i, ja] = 1.0
            basis[i] = ja
            art_rows[ja] = i
            ja += 1

    max_iter = 200 * (m + total + 10)

    if n_art:
        cost1 = np.zeros(total)
        cost1[nf + n_slack:] = 1.0
        status, T, basis = _simplex(T, basis, cost1, max_iter)
        if status == "numerical_failure":
            return LpSolution(status="numerical_failure")
        art_sum = float(np.sum(T[:, total][np.isin(basis, list(art_rows))]))
        if status == "unbounded" or art_sum > FEAS_TOL * (1.0 + abs(float(np.max(b, initial=0.0)))):
            # name the input row whose artificial carries the residual
            worst, worst_row = 0.0, -1
            for i in range(m):
                if basis[i] in art_rows and T[i, total] > worst:
                    worst = T[i, total]
                    worst_row = origin[art_rows[basis[i]]]
            return LpSolution(status="infeasible", offending_row=worst_row)
        # pivot surviving (degenerate) artificials out of the basis
        for i in range(m):
            if basis[i] in art_rows:
                pivot_col = -1
                for j in range(nf + n_slack):
                    if abs(T[i, j]) > PIVOT_TOL:
                        pivot_col = j
                        break
                if pivot_col >= 0:
                    piv = T[i, pivot_col]
                    T[i] /= piv
                    for k in range(m):
                        if k != i and T[k, pivot_col] != 0.0:
                            T[k] -= T[k, pivot_col] * T[i]
                    basis[i] = pivot_col
                # else: redundant zero row; leave the artificial at level 0

    # --- phase 2 ----------------------------------------------------------
    cost2 = np.zeros(total)
    cost2[:nf] = sign * lp.c[free]
    # forbid re-entry of artificial columns
    if n_art:
        T[:, nf + n_slack: total] = 0.0
        for i in range(m):
            if basis[i] in art_rows:  # stuck at zero in a redundant row
                T[i, basis[i]] = 1.0
    status, T, basis = _simplex(T, basis, cost2, max_iter)
    if status != "optimal":
        return LpSolution(status=status)

    x_shift = np.zeros(nf)
    for i in range(m):
        if basis[i] < nf:
            x_shift[basis[i]] = T[i, total]
    x = lp.x_lo.copy()
    x[idx_free] += x_shift
    x = np.minimum(np.maximum(x, lp.x_lo), lp.x_hi)

    # active input rows at the optimum
    ax = lp.A @ x
    active = []
    for i in range(lp.A.shape[0]):
        ref = max(abs(lp.b_lo[i]) if np.isfinite(lp.b_lo[i]) else 0.0,
                  abs(lp.b_hi[i]) if np.isfinite(lp.b_hi[i]) else 0.0, 1e-300)
        if (np.isfinite(lp.b_hi[i]) and abs(ax[i] - lp.b_hi[i]) <= 1e-7 * ref) or (
            np.isfinite(lp.b_lo[i]) and abs(ax[i] - lp.b_lo[i]) <= 1e-7 * ref
        ):
            active.append(i)

    return LpSolution(
        status="optimal",
        x=x,
        objective_value=float(lp.c @ x),
        active_rows=tuple(active),
    )
