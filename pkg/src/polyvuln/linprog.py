"""Linear programming: a dense two-phase simplex solver plus a sparse backend.

:func:`solve` runs a deterministic dense tableau simplex with Bland's
anti-cycling rule.  With ``method="auto"``, problems whose dense tableau
would exceed ``DENSE_LIMIT`` entries are routed to SciPy's HiGHS solver
instead; ``method="simplex"`` and ``method="highs"`` force one backend.
Constraint matrices may be dense arrays or ``scipy.sparse`` matrices.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.optimize import linprog as _scipy_linprog

PIVOT_TOL = 1e-9
FEAS_TOL = 1e-7
# dense tableau entries above which "auto" hands the problem to HiGHS
DENSE_LIMIT = 1_000_000

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
UNBOUNDED = "unbounded"


@dataclass
class LinearProgram:
    """``min`` (or ``max``) ``c @ x`` s.t. ``A_ub x <= b_ub``, ``A_eq x = b_eq``, bounds.

    ``bounds`` is a list of ``(lower, upper)`` pairs (``None`` or infinities
    for unbounded sides) or a single pair applied to every variable.  The
    default is ``x >= 0``.
    """

    c: np.ndarray
    A_ub: object = None
    b_ub: np.ndarray | None = None
    A_eq: object = None
    b_eq: np.ndarray | None = None
    bounds: object = (0.0, None)
    maximize: bool = False

    def __post_init__(self):
        self.c = np.asarray(self.c, dtype=float).ravel()
        nv = self.c.size
        self.A_ub, self.b_ub = _check_block(self.A_ub, self.b_ub, nv, "A_ub")
        self.A_eq, self.b_eq = _check_block(self.A_eq, self.b_eq, nv, "A_eq")
        self.lower, self.upper = _normalize_bounds(self.bounds, nv)
        if not np.all(np.isfinite(self.c)):
            raise ValueError("objective coefficients must be finite")

    @property
    def num_vars(self) -> int:
        return self.c.size

    @property
    def is_sparse(self) -> bool:
        return sp.issparse(self.A_ub) or sp.issparse(self.A_eq)

    def objective(self, x) -> float:
        return float(self.c @ x)

    def violation(self, x) -> float:
        """Largest constraint or bound violation of ``x`` (0 when feasible)."""
        x = np.asarray(x, dtype=float)
        v = 0.0
        if self.A_ub.shape[0]:
            v = max(v, float(np.max(self.A_ub @ x - self.b_ub)))
        if self.A_eq.shape[0]:
            v = max(v, float(np.max(np.abs(self.A_eq @ x - self.b_eq))))
        if x.size:
            v = max(v, float(np.max(self.lower - x)), float(np.max(x - self.upper)))
        return max(v, 0.0)


@dataclass
class LPSolution:
    status: str
    x: np.ndarray | None = None
    objective: float | None = None
    iterations: int = 0
    backend: str = "simplex"
    info: dict = field(default_factory=dict)

    @property
    def optimal(self) -> bool:
        return self.status == OPTIMAL


def _check_block(A, b, nv, name):
    if A is None:
        return np.zeros((0, nv)), np.zeros(0)
    if sp.issparse(A):
        A = sp.csr_matrix(A, dtype=float)
        if A.nnz and not np.all(np.isfinite(A.data)):
            raise ValueError(f"{name} has non-finite entries")
    else:
        A = np.asarray(A, dtype=float)
        if A.ndim == 1:
            A = A.reshape(1, -1)
        if not np.all(np.isfinite(A)):
            raise ValueError(f"{name} has non-finite entries")
    b = np.asarray(b, dtype=float).ravel()
    if A.shape[1] != nv:
        raise ValueError(f"{name} has {A.shape[1]} columns, expected {nv}")
    if A.shape[0] != b.size:
        raise ValueError(f"{name} has {A.shape[0]} rows but right-hand side has {b.size}")
    if not np.all(np.isfinite(b)):
        raise ValueError(f"right-hand side of {name} must be finite")
    return A, b


def _normalize_bounds(bounds, nv):
    if bounds is None:
        bounds = (None, None)
    if isinstance(bounds, tuple) and len(bounds) == 2 and not isinstance(bounds[0], (tuple, list)):
        bounds = [bounds] * nv
    if len(bounds) != nv:
        raise ValueError(f"got {len(bounds)} bounds for {nv} variables")
    lo = np.array([-np.inf if b[0] is None else float(b[0]) for b in bounds])
    hi = np.array([np.inf if b[1] is None else float(b[1]) for b in bounds])
    if np.any(np.isnan(lo)) or np.any(np.isnan(hi)) or np.any(lo == np.inf) or np.any(hi == -np.inf):
        raise ValueError("invalid variable bounds")
    return lo, hi


def solve(lp: LinearProgram, method: str = "auto") -> LPSolution:
    """Solve ``lp``.  ``method`` is ``"auto"``, ``"simplex"`` or ``"highs"``."""
    if method not in ("auto", "simplex", "highs"):
        raise ValueError(f"unknown method {method!r}")
    if method == "auto":
        m = lp.A_ub.shape[0] + lp.A_eq.shape[0]
        method = "highs" if m * (lp.num_vars + 2 * m) > DENSE_LIMIT else "simplex"
    if np.any(lp.lower > lp.upper + FEAS_TOL):
        return LPSolution(INFEASIBLE, backend=method)
    if method == "highs":
        return _solve_highs(lp)
    return _solve_simplex(lp)


# ---------------------------------------------------------------------------
# HiGHS backend
# ---------------------------------------------------------------------------


def _solve_highs(lp: LinearProgram) -> LPSolution:
    sign = -1.0 if lp.maximize else 1.0
    kw = {}
    if lp.A_ub.shape[0]:
        kw.update(A_ub=lp.A_ub, b_ub=lp.b_ub)
    if lp.A_eq.shape[0]:
        kw.update(A_eq=lp.A_eq, b_eq=lp.b_eq)
    bounds = list(zip(np.where(np.isfinite(lp.lower), lp.lower, None),
                      np.where(np.isfinite(lp.upper), lp.upper, None)))
    res = _scipy_linprog(sign * lp.c, bounds=bounds, method="highs",
                         options={"primal_feasibility_tolerance": 1e-9,
                                  "dual_feasibility_tolerance": 1e-9}, **kw)
    if res.status == 0:
        return LPSolution(OPTIMAL, np.asarray(res.x), float(lp.c @ res.x),
                          int(getattr(res, "nit", 0)), "highs")
    if res.status == 2:
        return LPSolution(INFEASIBLE, backend="highs")
    if res.status == 3:
        return LPSolution(UNBOUNDED, backend="highs")
    raise RuntimeError(f"HiGHS failed: {res.message}")


# ---------------------------------------------------------------------------
# dense two-phase simplex
# ---------------------------------------------------------------------------


def _standard_form(lp: LinearProgram):
    """Rewrite as ``min c's y`` s.t. ``A y (<=|=) b``, ``y >= 0``.

    Returns the pieces plus a recovery map ``x = offset + T y``.
    """
    nv = lp.num_vars
    lo, hi = lp.lower, lp.upper
    cols = []  # (original var, coefficient) per standard column
    offset = np.zeros(nv)
    extra_rows = []
    for k in range(nv):
        if np.isfinite(lo[k]):
            offset[k] = lo[k]
            cols.append((k, 1.0))
            if np.isfinite(hi[k]):
                extra_rows.append((len(cols) - 1, hi[k] - lo[k]))
        elif np.isfinite(hi[k]):
            offset[k] = hi[k]
            cols.append((k, -1.0))
        else:
            cols.append((k, 1.0))
            cols.append((k, -1.0))
    T = np.zeros((nv, len(cols)))
    for s, (k, a) in enumerate(cols):
        T[k, s] = a
    A_ub = _dense(lp.A_ub)
    A_eq = _dense(lp.A_eq)
    ub_A = A_ub @ T
    ub_b = lp.b_ub - A_ub @ offset
    if extra_rows:
        E = np.zeros((len(extra_rows), len(cols)))
        for r, (s, _) in enumerate(extra_rows):
            E[r, s] = 1.0
        ub_A = np.vstack([ub_A, E])
        ub_b = np.concatenate([ub_b, [v for _, v in extra_rows]])
    eq_A = A_eq @ T
    eq_b = lp.b_eq - A_eq @ offset
    sign = -1.0 if lp.maximize else 1.0
    c = sign * (lp.c @ T)
    return c, ub_A, ub_b, eq_A, eq_b, T, offset


def _dense(A):
    return A.toarray() if sp.issparse(A) else A


class _Tableau:
    """Simplex tableau ``[A | b]`` with objective row kept separately."""

    def __init__(self, A, b, basis):
        self.A = A
        self.b = b
        self.basis = basis
        self.iterations = 0

    def pivot(self, r, j):
        A, b = self.A, self.b
        piv = A[r, j]
        A[r] /= piv
        b[r] /= piv
        col = A[:, j].copy()
        col[r] = 0.0
        nz = np.nonzero(np.abs(col) > 0)[0]
        if nz.size:
            A[nz] -= np.outer(col[nz], A[r])
            b[nz] -= col[nz] * b[r]
        A[nz, j] = 0.0
        A[r, j] = 1.0
        self.basis[r] = j
        self.iterations += 1

    def reduced_costs(self, cost):
        cb = cost[self.basis]
        return cost - cb @ self.A

    def run(self, cost, allowed, max_iter):
        """Minimize ``cost @ y`` over the columns flagged ``allowed``.

        Bland's rule: enter the lowest-index improving column; leave by the
        minimum ratio, ties broken by the lowest basic variable index.
        """
        while True:
            if self.iterations >= max_iter:
                raise RuntimeError("simplex iteration limit reached")
            d = self.reduced_costs(cost)
            cand = np.nonzero((d < -PIVOT_TOL) & allowed)[0]
            if cand.size == 0:
                return OPTIMAL
            j = int(cand[0])
            col = self.A[:, j]
            rows = np.nonzero(col > PIVOT_TOL)[0]
            if rows.size == 0:
                return UNBOUNDED
            ratios = self.b[rows] / col[rows]
            best = ratios.min()
            ties = rows[ratios <= best + PIVOT_TOL * max(1.0, abs(best))]
            r = int(ties[np.argmin(self.basis[ties])])
            self.pivot(r, j)


def _solve_simplex(lp: LinearProgram) -> LPSolution:
    c, ub_A, ub_b, eq_A, eq_b, T, offset = _standard_form(lp)
    ns = c.size
    mu, me = ub_A.shape[0], eq_A.shape[0]
    m = mu + me
    # columns: structural | slacks (one per <= row) | artificials (one per row)
    ncol = ns + mu + m
    A = np.zeros((m, ncol))
    b = np.concatenate([ub_b, eq_b])
    A[:mu, :ns] = ub_A
    A[mu:, :ns] = eq_A
    A[np.arange(mu), ns + np.arange(mu)] = 1.0
    neg = b < 0
    A[neg] *= -1.0
    b = np.where(neg, -b, b)
    art = ns + mu + np.arange(m)
    A[np.arange(m), art] = 1.0
    basis = art.copy()
    # a slack with a +1 coefficient can start in the basis instead of an artificial
    for r in range(mu):
        if not neg[r]:
            basis[r] = ns + r
    tab = _Tableau(A, b.astype(float), basis)
    max_iter = 50_000 + 50 * ncol
    allowed = np.ones(ncol, dtype=bool)

    phase1 = np.zeros(ncol)
    phase1[art] = 1.0
    if np.any(np.isin(tab.basis, art)):
        tab.run(phase1, allowed, max_iter)
        infeas = float(phase1[tab.basis] @ tab.b)
        if infeas > FEAS_TOL:
            return LPSolution(INFEASIBLE, iterations=tab.iterations)
    # drive remaining artificials out of the basis, dropping redundant rows
    keep = np.ones(m, dtype=bool)
    for r in range(m):
        if tab.basis[r] in art:
            cand = np.nonzero(np.abs(tab.A[r, : ns + mu]) > PIVOT_TOL)[0]
            if cand.size:
                tab.pivot(r, int(cand[0]))
            else:
                keep[r] = False
    tab.A = tab.A[keep][:, : ns + mu]
    tab.b = tab.b[keep]
    tab.basis = tab.basis[keep]

    cost = np.concatenate([c, np.zeros(mu)])
    status = tab.run(cost, np.ones(ns + mu, dtype=bool), max_iter)
    if status == UNBOUNDED:
        return LPSolution(UNBOUNDED, iterations=tab.iterations)
    y = np.zeros(ns + mu)
    y[tab.basis] = tab.b
    y = np.maximum(y, 0.0)
    x = offset + T @ y[:ns]
    return LPSolution(OPTIMAL, x, float(lp.c @ x), tab.iterations, "simplex")
