"""Dense two-phase simplex with Bland's rule and dual multipliers.

Solves::

    minimize    c @ x
    subject to  A_ub @ x <= b_ub
                A_eq @ x == b_eq
                lo <= x <= hi

Problems here are tiny (a handful of atoms and generators), so a dense
tableau is plenty. Bland's smallest-index rule is used in both phases, which
rules out cycling on the degenerate vertices these problems produce
constantly (many constraints of the form ``x_i = k1_i``).

Marginals follow the ``scipy.optimize.linprog`` convention: they are the
sensitivities of the optimal value with respect to the right-hand sides, so
they are ``<= 0`` for ``<=`` rows of a minimization.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .errors import DimensionMismatch, InfeasibleLP, NoConvergence, UnboundedLP

logger = logging.getLogger(__name__)

Bound = Tuple[Optional[float], Optional[float]]


@dataclass(frozen=True)
class LPResult:
    x: np.ndarray
    fun: float
    ineq_marginals: np.ndarray
    eq_marginals: np.ndarray
    upper_marginals: np.ndarray
    nit: int


class _Tableau:
    """Tableau ``[B^-1 A | B^-1 b]`` plus a reduced-cost row."""

    def __init__(self, A: np.ndarray, b: np.ndarray, tol: float):
        m, n = A.shape
        self.m = m
        self.n_struct = n
        self.tol = tol
        # Artificial columns start as the identity; in the final tableau they hold B^-1.
        self.table = np.zeros((m + 1, n + m + 1))
        self.table[:m, :n] = A
        self.table[:m, n:n + m] = np.eye(m)
        self.table[:m, -1] = b
        self.basis: List[int] = list(range(n, n + m))
        self.nit = 0

    def set_costs(self, costs: np.ndarray) -> None:
        cost_b = costs[self.basis]
        self.table[-1, :-1] = costs - cost_b @ self.table[:-1, :-1]
        self.table[-1, -1] = -cost_b @ self.table[:-1, -1]

    def pivot(self, row: int, col: int) -> None:
        table = self.table
        table[row] /= table[row, col]
        for i in range(table.shape[0]):
            if i != row and table[i, col] != 0.0:
                table[i] -= table[i, col] * table[row]
        table[np.abs(table) < 1e-14] = 0.0
        self.basis[row] = col
        self.nit += 1

    def run(self, allowed: np.ndarray, max_iters: int, pin_artificial: bool = False) -> None:
        """Pivot until no allowed column has a negative reduced cost.

        With ``pin_artificial`` an artificial still basic at level zero blocks
        any entering column with a nonzero entry in its row, in either sign,
        so it cannot be pushed off zero.
        """
        table = self.table
        while True:
            if self.nit >= max_iters:
                raise NoConvergence(f"Simplex exceeded {max_iters} pivots")
            reduced = table[-1, :-1]
            candidates = np.flatnonzero(allowed & (reduced < -self.tol))
            if candidates.size == 0:
                return
            col = int(candidates[0])
            column = table[:-1, col]
            blocking = column > self.tol
            if pin_artificial:
                blocking |= self._basic_artificial() & (np.abs(column) > self.tol)
            rows = np.flatnonzero(blocking)
            if rows.size == 0:
                raise UnboundedLP("Objective is unbounded below on the feasible set")
            ratios = np.maximum(table[rows, -1], 0.0) / np.abs(column[rows])
            best = ratios.min()
            ties = rows[ratios <= best + self.tol * max(1.0, abs(best))]
            row = int(min(ties, key=lambda r: self.basis[r]))
            self.pivot(row, col)

    def _basic_artificial(self) -> np.ndarray:
        return np.array([var >= self.n_struct for var in self.basis], dtype=bool)

    def drive_out_artificials(self) -> int:
        """Replace zero-level artificials by structural columns after phase one.

        A row with no usable structural entry is a redundant equality; its
        structural entries are cleared and the artificial stays pinned at zero.
        Returns the number of redundant rows.
        """
        table = self.table
        table[:-1, -1][np.abs(table[:-1, -1]) <= self.tol] = 0.0
        redundant = 0
        for row in np.flatnonzero(self._basic_artificial()):
            table[row, -1] = 0.0
            coefficients = np.abs(table[row, : self.n_struct])
            col = int(np.argmax(coefficients)) if coefficients.size else -1
            if col >= 0 and coefficients[col] > self.tol:
                self.pivot(int(row), col)
            else:
                table[row, : self.n_struct] = 0.0
                redundant += 1
        return redundant


def _standardize(
    n: int, bounds: Optional[Sequence[Bound]]
) -> Tuple[np.ndarray, np.ndarray, List[Tuple[int, float]]]:
    """Map ``x = T @ y + offset`` with ``y >= 0``; return finite upper rows on y."""
    if bounds is None:
        bounds = [(0.0, None)] * n
    elif len(bounds) == 2 and not isinstance(bounds[0], (tuple, list)):
        bounds = [tuple(bounds)] * n  # type: ignore[list-item]
    if len(bounds) != n:
        raise DimensionMismatch(f"{len(bounds)} bounds given for {n} variables")

    columns: List[np.ndarray] = []
    offset = np.zeros(n)
    uppers: List[Tuple[int, float]] = []
    for k, (lo, hi) in enumerate(bounds):
        lo = -np.inf if lo is None else float(lo)
        hi = np.inf if hi is None else float(hi)
        if lo > hi:
            raise InfeasibleLP(f"Variable {k} has bounds {lo} > {hi}")
        unit = np.zeros(n)
        unit[k] = 1.0
        if np.isfinite(lo):
            offset[k] = lo
            columns.append(unit)
            if np.isfinite(hi):
                uppers.append((len(columns) - 1, hi - lo))
        elif np.isfinite(hi):
            offset[k] = hi
            columns.append(-unit)
        else:
            columns.append(unit)
            columns.append(-unit)
    transform = np.column_stack(columns) if columns else np.zeros((n, 0))
    return transform, offset, uppers


def linprog_simplex(
    c: Sequence[float],
    A_ub: Optional[np.ndarray] = None,
    b_ub: Optional[Sequence[float]] = None,
    A_eq: Optional[np.ndarray] = None,
    b_eq: Optional[Sequence[float]] = None,
    bounds: Optional[Sequence[Bound]] = None,
    tol: float = 1e-9,
    max_iters: int = 10_000,
) -> LPResult:
    """Solve a small dense LP exactly up to floating point.

    Parameters
    ----------
    c:
        Objective coefficients (minimized).
    A_ub, b_ub:
        Inequality rows ``A_ub @ x <= b_ub``.
    A_eq, b_eq:
        Equality rows.
    bounds:
        One ``(lo, hi)`` pair per variable, ``None`` meaning infinite.
        Defaults to ``x >= 0``.
    tol:
        Pivot and feasibility tolerance.

    Raises
    ------
    InfeasibleLP, UnboundedLP, NoConvergence
    """
    c = np.asarray(c, dtype=float).reshape(-1)
    n = c.size
    A_ub = np.zeros((0, n)) if A_ub is None else np.atleast_2d(np.asarray(A_ub, dtype=float))
    b_ub = np.zeros(0) if b_ub is None else np.asarray(b_ub, dtype=float).reshape(-1)
    A_eq = np.zeros((0, n)) if A_eq is None else np.atleast_2d(np.asarray(A_eq, dtype=float))
    b_eq = np.zeros(0) if b_eq is None else np.asarray(b_eq, dtype=float).reshape(-1)
    if A_ub.shape != (b_ub.size, n) or A_eq.shape != (b_eq.size, n):
        raise DimensionMismatch("Constraint matrices do not match the objective dimension")

    transform, offset, uppers = _standardize(n, bounds)
    n_y = transform.shape[1]
    m_ub, m_eq, m_up = b_ub.size, b_eq.size, len(uppers)
    m_slack = m_ub + m_up
    m = m_slack + m_eq

    # Rows: [ub rows | upper-bound rows | eq rows]; slack columns follow y.
    A = np.zeros((m, n_y + m_slack))
    b = np.zeros(m)
    A[:m_ub, :n_y] = A_ub @ transform
    b[:m_ub] = b_ub - A_ub @ offset
    for r, (col, width) in enumerate(uppers):
        A[m_ub + r, col] = 1.0
        b[m_ub + r] = width
    A[:m_slack, n_y:] = np.eye(m_slack)
    A[m_slack:, :n_y] = A_eq @ transform
    b[m_slack:] = b_eq - A_eq @ offset

    signs = np.where(b < 0.0, -1.0, 1.0)
    A *= signs[:, None]
    b *= signs

    tableau = _Tableau(A, b, tol)
    n_cols = A.shape[1] + m
    structural = np.zeros(n_cols, dtype=bool)
    structural[: A.shape[1]] = True

    # Phase 1: minimize the sum of artificials.
    phase_one = np.zeros(n_cols)
    phase_one[A.shape[1]:] = 1.0
    tableau.set_costs(phase_one)
    tableau.run(np.ones(n_cols, dtype=bool), max_iters)
    infeasibility = -tableau.table[-1, -1]
    if infeasibility > tol * max(1.0, float(np.abs(b).max(initial=0.0))):
        raise InfeasibleLP(f"Constraints are inconsistent (phase-one residual {infeasibility:.3e})")

    redundant = tableau.drive_out_artificials()
    if redundant:
        logger.debug("Dropped %d redundant constraint rows", redundant)

    # Phase 2 on the original objective; artificials may no longer enter.
    costs = np.zeros(n_cols)
    costs[:n_y] = c @ transform
    tableau.set_costs(costs)
    tableau.run(structural, max_iters, pin_artificial=True)

    solution = np.zeros(n_cols)
    for row, var in enumerate(tableau.basis):
        solution[var] = tableau.table[row, -1]
    y = solution[:n_y]
    x = transform @ y + offset

    duals = -tableau.table[-1, A.shape[1]:-1] * signs
    logger.debug("Simplex finished after %d pivots", tableau.nit)
    return LPResult(
        x=x,
        fun=float(c @ x),
        ineq_marginals=duals[:m_ub].copy(),
        eq_marginals=duals[m_slack:].copy(),
        upper_marginals=duals[m_ub:m_slack].copy(),
        nit=tableau.nit,
    )


__all__ = ["LPResult", "linprog_simplex"]
