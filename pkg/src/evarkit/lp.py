"""Dense two-phase simplex with Bland's rule.

The solver is small and deterministic on purpose: every problem in this
package has at most a few thousand entries, and callers need certified
statuses (dual values, Farkas multipliers, recession rays) more than speed.

The problem solved is::

    maximize    c @ p
    subject to  A_ub @ p <= b_ub
                A_eq @ p == b_eq
                lb <= p <= ub          (lb defaults to 0, ub to +inf)
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
UNBOUNDED = "unbounded"

MAX_ITER = 10_000
_COST_TOL = 1e-9
_PIVOT_TOL = 1e-9
_FEAS_TOL = 1e-9


class NumericalStallError(RuntimeError):
    """Raised when the simplex iteration limit is exceeded."""


def _as_matrix(A, n: int) -> np.ndarray:
    if A is None:
        return np.zeros((0, n))
    A = np.atleast_2d(np.asarray(A, dtype=float))
    if A.size == 0:
        return np.zeros((0, n))
    return A


def _as_vector(b, m: int) -> np.ndarray:
    if b is None:
        return np.zeros(m)
    return np.atleast_1d(np.asarray(b, dtype=float)).ravel()


@dataclass(frozen=True)
class LinearProgram:
    c: np.ndarray
    A_ub: np.ndarray | None = None
    b_ub: np.ndarray | None = None
    A_eq: np.ndarray | None = None
    b_eq: np.ndarray | None = None
    lb: np.ndarray | None = None
    ub: np.ndarray | None = None

    def __post_init__(self):
        c = np.atleast_1d(np.asarray(self.c, dtype=float)).ravel()
        n = c.size
        A_ub = _as_matrix(self.A_ub, n)
        A_eq = _as_matrix(self.A_eq, n)
        b_ub = _as_vector(self.b_ub, A_ub.shape[0])
        b_eq = _as_vector(self.b_eq, A_eq.shape[0])
        lb = np.zeros(n) if self.lb is None else np.broadcast_to(np.asarray(self.lb, dtype=float), (n,)).copy()
        ub = np.full(n, np.inf) if self.ub is None else np.broadcast_to(np.asarray(self.ub, dtype=float), (n,)).copy()

        if A_ub.shape[1] != n or A_eq.shape[1] != n:
            raise ValueError(f"constraint matrices must have {n} columns")
        if b_ub.size != A_ub.shape[0] or b_eq.size != A_eq.shape[0]:
            raise ValueError("right-hand sides do not match constraint rows")
        for name, arr in (("c", c), ("A_ub", A_ub), ("b_ub", b_ub), ("A_eq", A_eq), ("b_eq", b_eq)):
            if not np.all(np.isfinite(arr)):
                raise ValueError(f"{name} has non-finite entries")
        if np.any(np.isnan(lb)) or np.any(np.isnan(ub)) or np.any(lb == np.inf) or np.any(ub == -np.inf):
            raise ValueError("invalid variable bounds")
        if np.any(lb > ub):
            raise ValueError("lower bound exceeds upper bound")

        for name, arr in (("c", c), ("A_ub", A_ub), ("b_ub", b_ub), ("A_eq", A_eq),
                          ("b_eq", b_eq), ("lb", lb), ("ub", ub)):
            object.__setattr__(self, name, arr)

    @property
    def n_vars(self) -> int:
        return self.c.size


@dataclass(frozen=True)
class LpSolution:
    """Result of :func:`solve`.

    For ``optimal`` solutions ``x``, ``value`` and the dual vectors are set.
    For ``infeasible`` ones ``farkas_ub``/``farkas_eq`` hold row multipliers
    ``y >= 0, z`` whose combination ``r = A_ub.T y + A_eq.T z`` satisfies
    ``min_{lb<=p<=ub} r @ p > b_ub @ y + b_eq @ z``. For ``unbounded`` ones
    ``x`` is a feasible point and ``ray`` an improving recession direction.
    """

    status: str
    value: float | None = None
    x: np.ndarray | None = None
    dual_ub: np.ndarray | None = None
    dual_eq: np.ndarray | None = None
    dual_value: float | None = None
    farkas_ub: np.ndarray | None = None
    farkas_eq: np.ndarray | None = None
    ray: np.ndarray | None = None
    iterations: int = 0

    @property
    def optimal(self) -> bool:
        return self.status == OPTIMAL


@dataclass
class _Standard:
    """The LP rewritten as ``A u == b, u >= 0`` plus the map back to ``p``."""

    A: np.ndarray
    b: np.ndarray
    cost: np.ndarray
    T: np.ndarray          # p = offset + T @ u[:n_u]
    offset: np.ndarray
    n_u: int
    row_kind: list = field(default_factory=list)   # ("ub", i) | ("eq", i) | ("bound", j)
    slack_of_row: dict = field(default_factory=dict)


def _standardize(lp: LinearProgram) -> _Standard:
    n = lp.n_vars
    cols = []
    offset = np.zeros(n)
    bound_rows = []  # (u index, capacity)
    for j in range(n):
        lo, hi = lp.lb[j], lp.ub[j]
        if np.isfinite(lo):
            offset[j] = lo
            e = np.zeros(n); e[j] = 1.0
            cols.append(e)
            if np.isfinite(hi):
                bound_rows.append((len(cols) - 1, hi - lo))
        elif np.isfinite(hi):
            offset[j] = hi
            e = np.zeros(n); e[j] = -1.0
            cols.append(e)
        else:
            e = np.zeros(n); e[j] = 1.0
            cols.append(e)
            cols.append(-e)
    T = np.array(cols).T if cols else np.zeros((n, 0))
    n_u = T.shape[1]

    A_ub = lp.A_ub @ T
    b_ub = lp.b_ub - lp.A_ub @ offset
    A_eq = lp.A_eq @ T
    b_eq = lp.b_eq - lp.A_eq @ offset
    A_bd = np.zeros((len(bound_rows), n_u))
    b_bd = np.zeros(len(bound_rows))
    for r, (k, cap) in enumerate(bound_rows):
        A_bd[r, k] = 1.0
        b_bd[r] = cap

    A_in = np.vstack([A_ub, A_bd])
    b_in = np.concatenate([b_ub, b_bd])
    m_in, m_eq = A_in.shape[0], A_eq.shape[0]
    A = np.zeros((m_in + m_eq, n_u + m_in))
    A[:m_in, :n_u] = A_in
    A[:m_in, n_u:] = np.eye(m_in)
    A[m_in:, :n_u] = A_eq
    b = np.concatenate([b_in, b_eq])

    row_kind = [("ub", i) for i in range(A_ub.shape[0])]
    row_kind += [("bound", k) for k, _ in bound_rows]
    row_kind += [("eq", i) for i in range(m_eq)]
    slack_of_row = {i: n_u + i for i in range(m_in)}
    cost = np.concatenate([lp.c @ T, np.zeros(m_in)])
    return _Standard(A, b, cost, T, offset, n_u, row_kind, slack_of_row)


def _pivot(tab: np.ndarray, r: int, j: int) -> None:
    tab[r] /= tab[r, j]
    col = tab[:, j].copy()
    col[r] = 0.0
    tab -= np.outer(col, tab[r])


class _Counter:
    def __init__(self, limit: int):
        self.limit = limit
        self.n = 0

    def tick(self):
        self.n += 1
        if self.n > self.limit:
            raise NumericalStallError(f"simplex exceeded {self.limit} iterations")


def _bland(tab: np.ndarray, basis: list[int], n_cols: int, counter: _Counter,
           floor: float | None = None):
    """Run primal simplex on a tableau whose last row holds reduced costs.

    Returns ``None`` at optimality or the entering column of an unbounded
    direction. With ``floor`` set, stop once the objective (stored negated in
    the corner) is known to be within ``floor`` of its upper bound zero.
    """
    m = tab.shape[0] - 1
    while True:
        if floor is not None and tab[-1, -1] <= floor:
            return None
        d = tab[-1, :n_cols]
        enter = np.flatnonzero(d > _COST_TOL)
        if enter.size == 0:
            return None
        j = int(enter[0])
        col = tab[:m, j]
        pos = np.flatnonzero(col > _PIVOT_TOL)
        if pos.size == 0:
            return j
        ratios = tab[pos, -1] / col[pos]
        rmin = ratios.min()
        ties = pos[ratios <= rmin + 1e-12 * (1.0 + abs(rmin))]
        r = int(min(ties, key=lambda i: basis[i]))
        _pivot(tab, r, j)
        basis[r] = j
        counter.tick()


def solve(lp: LinearProgram, max_iter: int = MAX_ITER) -> LpSolution:
    """Solve ``lp`` and return a certified :class:`LpSolution`.

    Raises :class:`NumericalStallError` after ``max_iter`` pivots.
    """
    std = _standardize(lp)
    A, b = std.A.copy(), std.b.copy()
    m, N = A.shape

    # equilibrate rows, then make the right-hand side nonnegative
    scale = np.abs(A).max(axis=1) if N else np.ones(m)
    scale = np.where(scale > 0, scale, 1.0)
    sign = np.where(b < 0, -1.0, 1.0)
    rowmul = sign / scale
    A *= rowmul[:, None]
    b *= rowmul
    # then columns; u = colmul * u_scaled
    colscale = np.abs(A).max(axis=0) if m else np.ones(N)
    colmul = 1.0 / np.where(colscale > 0, colscale, 1.0)
    A *= colmul[None, :]
    cost = std.cost * colmul

    n_art = 0
    basis: list[int] = []
    art_rows = []
    for i in range(m):
        s = std.slack_of_row.get(i)
        if s is not None and sign[i] > 0:
            basis.append(s)
        else:
            basis.append(N + n_art)
            art_rows.append(i)
            n_art += 1

    tab = np.zeros((m + 1, N + n_art + 1))
    tab[:m, :N] = A
    for k, i in enumerate(art_rows):
        tab[i, N + k] = 1.0
    tab[:m, -1] = b
    counter = _Counter(max_iter)

    if n_art:
        # phase I: maximize -sum(artificials)
        tab[-1, N:N + n_art] = -1.0
        for i in art_rows:
            tab[-1] += tab[i]
        feas_tol = _FEAS_TOL * (1.0 + np.abs(b).max(initial=0.0))
        _bland(tab, basis, N + n_art, counter, floor=feas_tol)
        if tab[-1, -1] > feas_tol:
            c1 = np.zeros(N + n_art)
            c1[N:] = -1.0
            B = tab_basis_matrix(A, art_rows, basis, N)
            y = np.linalg.solve(B.T, c1[basis])
            y_orig = y * rowmul
            f_ub, f_eq = _split_rows(std, y_orig, lp)
            return LpSolution(INFEASIBLE, farkas_ub=f_ub, farkas_eq=f_eq, iterations=counter.n)

        # drive remaining artificials out of the basis; drop redundant rows
        keep = []
        for r in range(m):
            if basis[r] >= N:
                nz = np.flatnonzero(np.abs(tab[r, :N]) > _PIVOT_TOL)
                if nz.size:
                    _pivot(tab, r, int(nz[0]))
                    basis[r] = int(nz[0])
                    keep.append(r)
            else:
                keep.append(r)
        tab = np.vstack([tab[keep][:, list(range(N)) + [-1]], np.zeros((1, N + 1))])
        basis = [basis[r] for r in keep]
        rows = keep
    else:
        tab = np.delete(tab, np.s_[N:N + n_art], axis=1)
        rows = list(range(m))

    # phase II
    tab[-1, :] = 0.0
    tab[-1, :N] = cost
    for r, j in enumerate(basis):
        if tab[-1, j] != 0.0:
            tab[-1] -= tab[-1, j] * tab[r]
    entering = _bland(tab, basis, N, counter)

    A_k = A[rows]
    b_k = b[rows]
    B = A_k[:, basis]
    u = np.zeros(N)
    u[basis] = _refine(B, b_k, tab[:-1, -1])
    u = np.maximum(u, 0.0) * colmul
    x = std.offset + std.T @ u[:std.n_u]

    if entering is not None:
        d = np.zeros(N)
        d[entering] = 1.0
        d[basis] = -tab[:-1, entering]
        d *= colmul
        ray = std.T @ d[:std.n_u]
        return LpSolution(UNBOUNDED, x=x, ray=ray, iterations=counter.n)

    y_k = np.linalg.solve(B.T, cost[basis]) if len(basis) else np.zeros(0)
    y = np.zeros(m)
    y[rows] = y_k
    y_orig = y * rowmul
    dual_ub, dual_eq = _split_rows(std, y_orig, lp)
    value = float(lp.c @ x)
    return LpSolution(OPTIMAL, value=value, x=x, dual_ub=dual_ub, dual_eq=dual_eq,
                      dual_value=dual_objective(lp, dual_ub, dual_eq), iterations=counter.n)


def tab_basis_matrix(A, art_rows, basis, N):
    """Basis matrix including artificial identity columns."""
    m = A.shape[0]
    full = np.zeros((m, N + len(art_rows)))
    full[:, :N] = A
    for k, i in enumerate(art_rows):
        full[i, N + k] = 1.0
    return full[:, basis]


def _refine(B: np.ndarray, b: np.ndarray, guess: np.ndarray) -> np.ndarray:
    if B.size == 0:
        return guess
    try:
        xb = np.linalg.solve(B, b)
    except np.linalg.LinAlgError:
        return guess
    # one step of iterative refinement
    xb += np.linalg.solve(B, b - B @ xb)
    return xb


def _split_rows(std: _Standard, y: np.ndarray, lp: LinearProgram):
    y_ub = np.zeros(lp.A_ub.shape[0])
    y_eq = np.zeros(lp.A_eq.shape[0])
    for i, (kind, k) in enumerate(std.row_kind):
        if kind == "ub":
            y_ub[k] = y[i]
        elif kind == "eq":
            y_eq[k] = y[i]
    return y_ub, y_eq


def dual_objective(lp: LinearProgram, y_ub: np.ndarray, y_eq: np.ndarray) -> float:
    """Lagrangian dual bound for row multipliers, with box terms maximized."""
    r = lp.c - lp.A_ub.T @ y_ub - lp.A_eq.T @ y_eq
    val = float(lp.b_ub @ y_ub + lp.b_eq @ y_eq)
    for j, rj in enumerate(r):
        if abs(rj) <= 1e-12:
            continue
        bound = lp.ub[j] if rj > 0 else lp.lb[j]
        if not np.isfinite(bound):
            return np.inf
        val += rj * bound
    return float(val)


def farkas_gap(lp: LinearProgram, y_ub: np.ndarray, y_eq: np.ndarray) -> float:
    """``min_box r @ p - (b_ub @ y + b_eq @ z)``; positive certifies infeasibility."""
    r = lp.A_ub.T @ y_ub + lp.A_eq.T @ y_eq
    lo = 0.0
    for j, rj in enumerate(r):
        if abs(rj) <= 1e-12:
            continue
        bound = lp.lb[j] if rj > 0 else lp.ub[j]
        if not np.isfinite(bound):
            return -np.inf
        lo += rj * bound
    return lo - float(lp.b_ub @ y_ub + lp.b_eq @ y_eq)
