"""Self-contained bounded-variable simplex solver.

Solves   minimize c.x   subject to   A x <= b,   lower <= x <= upper
with finite lower bounds and finite or infinite upper bounds, using a dense
two-phase tableau method with upper-bound handling (bound flips) and a
Bland-rule fallback against cycling.  Problem sizes here are tiny (at most a
few thousand columns, a few hundred rows), so dense pivoting is adequate.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
UNBOUNDED = "unbounded"
ITERATION_LIMIT = "iteration_limit"

_AT_LOWER = 0
_AT_UPPER = 1

_TOL_COST = 1e-9
_TOL_PIVOT = 1e-10
_TIE_TOL = 1e-9


@dataclass
class LpResult:
    status: str
    x: np.ndarray  # structural variables, original space
    objective: float
    iterations: int = 0


class _Tableau:
    """Dense simplex state over structural + slack + artificial columns."""

    def __init__(self, A: np.ndarray, b: np.ndarray, upper: np.ndarray):
        m, n = A.shape
        self.m, self.n = m, n
        flip = b < 0
        A2 = np.hstack([A, np.eye(m)])
        A2[flip] *= -1.0
        rhs = np.where(flip, -b, b)
        art_rows = np.flatnonzero(flip)
        self.art_start = n + m
        if len(art_rows):
            art_cols = np.zeros((m, len(art_rows)))
            art_cols[art_rows, np.arange(len(art_rows))] = 1.0
            A2 = np.hstack([A2, art_cols])
        self.T = A2
        self.ncols = A2.shape[1]
        self.upper = np.concatenate(
            [upper, np.full(m, np.inf), np.zeros(len(art_rows))]
        )
        self.upper[self.art_start :] = np.inf  # free during phase 1
        self.status = np.full(self.ncols, _AT_LOWER, dtype=np.int8)
        # initial basis: slack on ordinary rows, artificial on flipped rows
        self.basis = np.arange(n, n + m)
        for k, r in enumerate(art_rows):
            self.basis[r] = self.art_start + k
        self.beta = rhs.astype(np.float64).copy()
        self.is_basic = np.zeros(self.ncols, dtype=bool)
        self.is_basic[self.basis] = True
        self.iterations = 0

    def values(self) -> np.ndarray:
        """Current value of every column."""
        x = np.where(
            (self.status == _AT_UPPER) & np.isfinite(self.upper), self.upper, 0.0
        )
        x[self.basis] = self.beta
        return x

    def run(self, cost: np.ndarray, max_iter: int) -> str:
        bland = False
        degenerate_streak = 0
        while self.iterations < max_iter:
            self.iterations += 1
            d = cost - cost[self.basis] @ self.T
            d[self.basis] = 0.0
            nonbasic = ~self.is_basic
            gain = np.where(
                nonbasic & (self.status == _AT_LOWER),
                -d,
                np.where(nonbasic & (self.status == _AT_UPPER), d, -np.inf),
            )
            # variables pinned by a zero upper bound cannot move
            gain[self.upper <= 0.0] = -np.inf
            if bland:
                cand = np.flatnonzero(gain > _TOL_COST)
                if len(cand) == 0:
                    return OPTIMAL
                j = int(cand[0])
            else:
                j = int(np.argmax(gain))
                if gain[j] <= _TOL_COST:
                    return OPTIMAL
            sigma = 1.0 if self.status[j] == _AT_LOWER else -1.0
            w = self.T[:, j]

            theta = self.upper[j] if np.isfinite(self.upper[j]) else np.inf
            leave_row, leave_at_upper = -1, False
            a = sigma * w
            ub_basis = self.upper[self.basis]
            with np.errstate(divide="ignore", invalid="ignore"):
                lim_lower = np.where(a > _TOL_PIVOT, self.beta / a, np.inf)
                lim_upper = np.where(
                    (a < -_TOL_PIVOT) & np.isfinite(ub_basis),
                    (ub_basis - self.beta) / (-a),
                    np.inf,
                )
            lim = np.minimum(lim_lower, lim_upper)
            lim = np.maximum(lim, 0.0)  # degenerate negatives from roundoff
            if lim.size:
                best = float(lim.min())
                if best < theta - _TIE_TOL:
                    ties = np.flatnonzero(lim <= best + _TIE_TOL)
                    if bland:
                        r = int(ties[np.argmin(self.basis[ties])])
                    else:
                        r = int(ties[np.argmax(np.abs(a[ties]))])
                    theta = float(lim[r])
                    leave_row = r
                    leave_at_upper = lim_upper[r] < lim_lower[r]
            if leave_row < 0 and not np.isfinite(theta):
                return UNBOUNDED
            theta = max(theta, 0.0)

            if theta <= _TIE_TOL:
                degenerate_streak += 1
                if degenerate_streak > 60:
                    bland = True
            else:
                degenerate_streak = 0

            if leave_row < 0:
                # entering variable flips from one bound to the other
                self.beta -= sigma * theta * w
                self._clamp_basics()
                self.status[j] = _AT_UPPER if sigma > 0 else _AT_LOWER
                continue

            entering_value = (
                0.0 if self.status[j] == _AT_LOWER else self.upper[j]
            ) + sigma * theta
            self.beta -= sigma * theta * w
            piv = self.T[leave_row, j]
            self.T[leave_row] /= piv
            col = self.T[:, j].copy()
            col[leave_row] = 0.0
            self.T -= np.outer(col, self.T[leave_row])
            leaving = self.basis[leave_row]
            self.is_basic[leaving] = False
            self.status[leaving] = _AT_UPPER if leave_at_upper else _AT_LOWER
            self.basis[leave_row] = j
            self.is_basic[j] = True
            self.beta[leave_row] = entering_value
            self._clamp_basics()
        return ITERATION_LIMIT

    def _clamp_basics(self) -> None:
        # keep basic values inside their bounds against roundoff drift
        np.maximum(self.beta, 0.0, out=self.beta)
        ub = self.upper[self.basis]
        finite = np.isfinite(ub)
        self.beta[finite] = np.minimum(self.beta[finite], ub[finite])


def solve_lp(
    c: np.ndarray,
    A: np.ndarray,
    b: np.ndarray,
    lower: np.ndarray,
    upper: np.ndarray,
    max_iter: int | None = None,
) -> LpResult:
    """Minimize c.x subject to A x <= b and lower <= x <= upper.

    Returns structural variable values in the original (unshifted) space.
    On infeasibility, x holds the phase-1 end point, which is useful for
    locating violated rows.
    """
    c = np.asarray(c, dtype=np.float64)
    A = np.asarray(A, dtype=np.float64).reshape(-1, len(c)) if len(c) else np.zeros((len(b), 0))
    b = np.asarray(b, dtype=np.float64)
    lower = np.asarray(lower, dtype=np.float64)
    upper = np.asarray(upper, dtype=np.float64)
    if np.any(lower > upper + 1e-12):
        return LpResult(INFEASIBLE, lower.copy(), float("nan"))
    m, n = A.shape
    if max_iter is None:
        max_iter = 200 * (m + n) + 2000

    # shift to zero lower bounds
    b_sh = b - A @ lower if n else b.copy()
    u_sh = upper - lower
    tab = _Tableau(A, b_sh, u_sh)

    scale = max(1.0, float(np.abs(b_sh).max(initial=0.0)))
    if tab.art_start < tab.ncols:
        cost1 = np.zeros(tab.ncols)
        cost1[tab.art_start :] = 1.0
        status = tab.run(cost1, max_iter)
        if status == ITERATION_LIMIT:
            return LpResult(ITERATION_LIMIT, tab.values()[:n] + lower, float("nan"), tab.iterations)
        art_sum = float(cost1 @ tab.values())
        if art_sum > 1e-7 * scale:
            x = tab.values()[:n] + lower
            return LpResult(INFEASIBLE, x, float("nan"), tab.iterations)
        tab.upper[tab.art_start :] = 0.0  # pin artificials for phase 2

    cost2 = np.zeros(tab.ncols)
    cost2[:n] = c
    status = tab.run(cost2, max_iter)
    x = tab.values()[:n] + lower
    obj = float(c @ x)
    if status == OPTIMAL:
        return LpResult(OPTIMAL, x, obj, tab.iterations)
    if status == UNBOUNDED:
        return LpResult(UNBOUNDED, x, float("-inf"), tab.iterations)
    return LpResult(ITERATION_LIMIT, x, obj, tab.iterations)
