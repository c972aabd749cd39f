"""Dense linear programming in standard form.

min c.x  subject to  A x = b, x >= 0, solved with a two-phase revised
simplex. Basic systems are solved directly (np.linalg.solve) each iteration,
which is plenty for the problem sizes produced by the conic grid solver
(tens of rows, a few thousand columns). Pricing starts with Dantzig's rule
and falls back to Bland's rule after 5 * n_cols iterations so cycling on
degenerate vertices cannot occur.

An optional warm start (``init_basis``) skips phase 1 when the caller already
holds a feasible basis for the same (A, b); the conic solver exploits this
because its alternations only change the objective vector.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = ["LpProblem", "LpSolution", "solve_lp"]

PIVOT_TOL = 1e-10
FEAS_TOL = 1e-9


@dataclass(frozen=True)
class LpProblem:
    A: np.ndarray
    b: np.ndarray
    c: np.ndarray

    def __post_init__(self):
        A = np.atleast_2d(np.asarray(self.A, dtype=float))
        b = np.asarray(self.b, dtype=float).ravel()
        c = np.asarray(self.c, dtype=float).ravel()
        if A.shape != (b.size, c.size):
            raise ValueError("A must be (len(b), len(c))")
        if not (np.all(np.isfinite(A)) and np.all(np.isfinite(b)) and np.all(np.isfinite(c))):
            raise ValueError("LP data must be finite")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "c", c)


@dataclass
class LpSolution:
    status: str  # "optimal" | "infeasible" | "unbounded"
    x: np.ndarray
    objective: float
    basis: np.ndarray
    y: np.ndarray  # dual vector of the equality constraints (optimal only)
    iterations: int


def _simplex(A, b, c, basis, switch_after, max_iter=200000):
    """Phase kernel: iterate from a feasible basis until optimal/unbounded.

    Returns (status, basis, iterations). basis is modified in place.
    """
    m, n = A.shape
    for it in range(max_iter):
        B = A[:, basis]
        xB = np.linalg.solve(B, b)
        y = np.linalg.solve(B.T, c[basis])
        reduced = c - A.T @ y
        reduced[basis] = 0.0
        if it < switch_after:
            j = int(np.argmin(reduced))
            if reduced[j] >= -PIVOT_TOL:
                return "optimal", basis, it
        else:
            candidates = np.nonzero(reduced < -PIVOT_TOL)[0]
            if candidates.size == 0:
                return "optimal", basis, it
            j = int(candidates[0])
        d = np.linalg.solve(B, A[:, j])
        pos = d > PIVOT_TOL
        if not np.any(pos):
            return "unbounded", basis, it
        ratios = np.full(m, np.inf)
        ratios[pos] = xB[pos] / d[pos]
        best = ratios.min()
        # smallest basic variable index among the tied rows (anti-cycling)
        tied = np.nonzero(ratios <= best + PIVOT_TOL * (1.0 + abs(best)))[0]
        r = int(tied[np.argmin(basis[tied])])
        basis[r] = j
    raise RuntimeError("simplex iteration limit reached")


def _basic_point(A, b, basis, n):
    x = np.zeros(n)
    x[basis] = np.linalg.solve(A[:, basis], b)
    return x


def solve_lp(problem, init_basis=None):
    """Solve the standard-form LP; returns an LpSolution.

    With ``init_basis`` (a feasible basis for the same A, b) phase 1 is
    skipped entirely. A basis that turns out singular or infeasible falls
    back to the cold two-phase path.
    """
    A0, b0, c = problem.A, problem.b, problem.c
    m, n = A0.shape
    m_full = m
    rows = np.arange(m)  # active original row indices (redundant rows get dropped)
    # orient rows so b >= 0 (phase 1 needs it)
    flip = b0 < 0
    A = np.where(flip[:, None], -A0, A0)
    b = np.where(flip, -b0, b0)

    basis = None
    iters = 0
    if init_basis is not None:
        cand = np.asarray(init_basis, dtype=int)
        if cand.shape == (m,) and np.all(cand >= 0) and np.all(cand < n):
            try:
                xB = np.linalg.solve(A[:, cand], b)
            except np.linalg.LinAlgError:
                xB = None
            if xB is not None and np.all(xB >= -FEAS_TOL):
                basis = cand.copy()

    if basis is None:
        # phase 1: artificial columns with unit costs
        A1 = np.hstack([A, np.eye(m)])
        c1 = np.concatenate([np.zeros(n), np.ones(m)])
        basis = np.arange(n, n + m)
        status, basis, it1 = _simplex(A1, b, c1, basis, switch_after=5 * (n + m))
        iters += it1
        if status != "optimal":
            raise RuntimeError("phase 1 terminated " + status)
        obj1 = float(c1[basis] @ np.linalg.solve(A1[:, basis], b))
        if obj1 > FEAS_TOL:
            return LpSolution(
                status="infeasible",
                x=np.full(n, np.nan),
                objective=np.nan,
                basis=basis.copy(),
                y=np.full(m, np.nan),
                iterations=iters,
            )
        # drive leftover artificials out; a row none of the real columns can
        # pivot on is redundant and gets dropped
        keep = np.ones(m, dtype=bool)
        for pos in range(m):
            if basis[pos] < n:
                continue
            u = np.zeros(m)
            u[pos] = 1.0
            row = np.linalg.solve(A1[:, basis].T, u) @ A
            row[basis[basis < n]] = 0.0
            j = np.nonzero(np.abs(row) > PIVOT_TOL)[0]
            if j.size:
                basis[pos] = int(j[0])
            else:
                keep[pos] = False
        if not np.all(keep):
            A = A[keep]
            b = b[keep]
            basis = basis[keep]
            rows = rows[keep]
            m = rows.size

    status, basis, it2 = _simplex(A, b, c, basis, switch_after=5 * n)
    iters += it2
    if status == "unbounded":
        return LpSolution(
            status="unbounded",
            x=np.full(n, np.nan),
            objective=-np.inf,
            basis=basis.copy(),
            y=np.full(m_full, np.nan),
            iterations=iters,
        )
    x = _basic_point(A, b, basis, n)
    x[(x < 0) & (x > -1e-7)] = 0.0
    # duals of the active rows; dropped (redundant) rows keep dual 0, and the
    # sign flip from the b >= 0 orientation is undone per row
    y_act = np.linalg.solve(A[:, basis].T, c[basis])
    y = np.zeros(m_full)
    y[rows] = np.where(flip[rows], -y_act, y_act)
    return LpSolution(
        status="optimal",
        x=x,
        objective=float(problem.c @ x),
        basis=basis.copy(),
        y=y,
        iterations=iters,
    )
