"""Bounded-variable primal simplex for  min c^T x  s.t.  A x = b,  l <= x <= u.

Nonbasic variables sit at a finite bound (or at zero when free), so box
constraints such as 0 <= x <= 1 are handled without extra rows. Phase one
adds one signed artificial column per equality row; phase two fixes the
artificials at zero. Pricing is Dantzig's rule and switches to Bland's rule
while pivots are degenerate.
"""

from __future__ import annotations

import math

import numpy as np
from loguru import logger

from src.errors import SolverError
from src.models import SolverOptions, SolverOutcome, SolverStatus

_PIVOT_TOL = 1e-9
_STEP_TOL = 1e-12
_REFACTOR_INTERVAL = 50


class BoundedSimplex:
    """
    Revised simplex over an explicit basis inverse.

    Each pivot updates the inverse by a rank-one (eta) correction; the inverse
    is recomputed from the basis columns every refactor_interval pivots and
    before the final duality-gap check.
    """

    refactor_interval = _REFACTOR_INTERVAL

    def __init__(
        self,
        costs: np.ndarray,
        equality_matrix: np.ndarray,
        rhs: np.ndarray,
        lower: np.ndarray,
        upper: np.ndarray,
        opts: SolverOptions,
    ) -> None:
        """Set up the phase-one problem with artificial variables."""
        self.opts = opts
        self.c = costs
        self.A = equality_matrix
        self.b = rhs
        m, n = equality_matrix.shape
        self.m, self.n = m, n

        x = np.where(np.isfinite(lower), lower, np.where(np.isfinite(upper), upper, 0.0))
        residual = rhs - equality_matrix @ x
        signs = np.where(residual < 0.0, -1.0, 1.0)

        self.A_full = np.hstack([equality_matrix, np.diag(signs)])
        self.lower = np.concatenate([lower, np.zeros(m)])
        self.upper = np.concatenate([upper, np.full(m, np.inf)])
        self.x = np.concatenate([x, np.abs(residual)])
        self.basis = list(range(n, n + m))
        self.is_basic = np.zeros(n + m, dtype=bool)
        self.is_basic[self.basis] = True
        self.B_inv = np.diag(signs)
        self.pivots_since_refactor = 0
        self.iterations = 0
        self.feas_tol = opts.tolerance_feas * (1.0 + float(np.linalg.norm(rhs)))
        self.y = np.zeros(m)

    def refactor(self) -> None:
        """Recompute the basis inverse from the current basis columns."""
        self.B_inv = np.linalg.inv(self.A_full[:, self.basis])
        self.pivots_since_refactor = 0

    def _update_inverse(self, w: np.ndarray, row: int) -> None:
        if self.pivots_since_refactor + 1 >= self.refactor_interval:
            self.refactor()
            return
        pivot_row = self.B_inv[row] / w[row]
        self.B_inv -= np.outer(w, pivot_row)
        self.B_inv[row] = pivot_row
        self.pivots_since_refactor += 1

    def _basic_solution(self) -> None:
        x_nonbasic = np.where(self.is_basic, 0.0, self.x)
        self.x[self.basis] = self.B_inv @ (self.b - self.A_full @ x_nonbasic)

    def _reduced_costs(self, cost: np.ndarray) -> np.ndarray:
        self.y = self.B_inv.T @ cost[self.basis]
        d = cost - self.A_full.T @ self.y
        d[self.basis] = 0.0
        return d

    def _choose_entering(self, d: np.ndarray, tol: float, bland: bool) -> tuple[int, float] | None:
        nonbasic = ~self.is_basic
        can_increase = nonbasic & (self.x < self.upper) & (d < -tol)
        can_decrease = nonbasic & (self.x > self.lower) & (d > tol)
        eligible = np.flatnonzero(can_increase | can_decrease)
        if eligible.size == 0:
            return None
        if bland:
            j = int(eligible[0])
        else:
            j = int(eligible[np.argmax(np.abs(d[eligible]))])
        return j, (1.0 if can_increase[j] else -1.0)

    def _ratio_test(self, w: np.ndarray, direction: float, bland: bool) -> tuple[float, int, float]:
        """Largest step before a basic variable hits a bound: (theta, row, rate)."""
        rates = direction * w
        x_b = self.x[self.basis]
        lo = self.lower[self.basis]
        hi = self.upper[self.basis]
        ratios = np.full(self.m, np.inf)
        dec = rates > _PIVOT_TOL
        inc = rates < -_PIVOT_TOL
        ratios[dec] = (x_b[dec] - lo[dec]) / rates[dec]
        ratios[inc] = (hi[inc] - x_b[inc]) / (-rates[inc])
        ratios = np.maximum(ratios, 0.0)
        theta = float(ratios.min()) if self.m else math.inf
        if not math.isfinite(theta):
            return math.inf, -1, 0.0
        ties = np.flatnonzero(ratios <= theta + _STEP_TOL)
        if bland:
            row = int(min(ties, key=lambda r: self.basis[r]))
        else:
            row = int(ties[np.argmax(np.abs(rates[ties]))])
        return theta, row, float(rates[row])

    def run_phase(self, cost: np.ndarray) -> SolverStatus:
        """Iterate until optimal, unbounded or out of iterations."""
        tol = self.opts.tolerance_opt * max(1.0, float(np.abs(cost).max(initial=0.0)))
        bland = False
        while True:
            self._basic_solution()
            d = self._reduced_costs(cost)
            entering = self._choose_entering(d, tol, bland)
            if entering is None:
                return SolverStatus.OPTIMAL
            if self.iterations >= self.opts.max_iterations:
                return SolverStatus.ITERATION_LIMIT
            self.iterations += 1

            j, direction = entering
            w = self.B_inv @ self.A_full[:, j]
            theta_basic, row, rate = self._ratio_test(w, direction, bland)
            theta_flip = self.upper[j] - self.lower[j]

            if not math.isfinite(theta_basic) and not math.isfinite(theta_flip):
                return SolverStatus.UNBOUNDED
            if theta_flip <= theta_basic:
                # bound flip, basis unchanged
                self.x[j] = self.upper[j] if direction > 0 else self.lower[j]
                bland = False
                continue

            leaving = self.basis[row]
            self.x[leaving] = self.lower[leaving] if rate > 0 else self.upper[leaving]
            self.x[j] += direction * theta_basic
            self.basis[row] = j
            self.is_basic[leaving] = False
            self.is_basic[j] = True
            self._update_inverse(w, row)
            bland = theta_basic <= _STEP_TOL

    def duality_gap(self, cost: np.ndarray) -> float:
        """Primal minus dual objective for the bounded problem at the current basis."""
        self.refactor()
        self._basic_solution()
        d = self._reduced_costs(cost)
        tol = self.opts.tolerance_opt * max(1.0, float(np.abs(cost).max(initial=0.0)))
        gap = 0.0
        for j in np.flatnonzero(np.abs(d) > tol):
            bound = self.lower[j] if d[j] > 0 else self.upper[j]
            if not math.isfinite(bound):
                return math.inf
            gap += (self.x[j] - bound) * d[j]
        return abs(gap)

    def solve(self) -> SolverOutcome:
        """Run phase one, then phase two on the original costs."""
        n, m = self.n, self.m
        phase_one = np.concatenate([np.zeros(n), np.ones(m)])
        status = self.run_phase(phase_one)
        infeasibility = float(self.x[n:].sum())
        logger.debug(
            f"phase one: status={status}, infeasibility={infeasibility:.3e}, "
            f"iterations={self.iterations}"
        )
        if status is SolverStatus.ITERATION_LIMIT:
            return self._outcome(status, math.nan)
        if infeasibility > self.feas_tol:
            return self._outcome(SolverStatus.INFEASIBLE, math.nan)

        self.refactor()
        self.upper[n:] = 0.0
        self.x[n:][~self.is_basic[n:]] = 0.0
        phase_two = np.concatenate([self.c, np.zeros(m)])
        status = self.run_phase(phase_two)
        gap = self.duality_gap(phase_two) if status is SolverStatus.OPTIMAL else math.nan
        logger.debug(
            f"phase two: status={status}, iterations={self.iterations}, gap={gap:.3e}"
        )
        return self._outcome(status, gap)

    def _outcome(self, status: SolverStatus, gap: float) -> SolverOutcome:
        x = self.x[: self.n].copy()
        if status is SolverStatus.OPTIMAL:
            x = np.clip(x, self.lower[: self.n], self.upper[: self.n])
            objective = float(self.c @ x)
            if gap > self.opts.tolerance_opt * (1.0 + abs(objective)):
                logger.warning(f"duality gap {gap:.3e} above tolerance at reported optimum")
        else:
            objective = math.nan
        return SolverOutcome(
            x_star=x,
            status=status,
            residual_l2=float(np.linalg.norm(self.A @ x - self.b)),
            objective=objective,
            iterations=self.iterations,
            duality_gap=gap,
            duals=self.y.copy(),
        )


def _solve_without_rows(c, lower, upper) -> SolverOutcome:
    """Separable case: every variable goes to its cheaper bound."""
    resting = np.where(np.isfinite(lower), lower, np.where(np.isfinite(upper), upper, 0.0))
    x = np.where(c > 0, lower, np.where(c < 0, upper, resting))
    if not np.all(np.isfinite(x)):
        return SolverOutcome(x, SolverStatus.UNBOUNDED, 0.0, math.nan, 0)
    return SolverOutcome(
        x, SolverStatus.OPTIMAL, 0.0, float(c @ x), 0, duality_gap=0.0, duals=np.zeros(0)
    )


def lp_solve(
    costs,
    equality_matrix,
    rhs,
    lower,
    upper,
    opts: SolverOptions | None = None,
) -> SolverOutcome:
    """
    Solve  min c^T x  s.t.  A x = b,  lower <= x <= upper  (bounds may be infinite).

    Args:
        costs: Objective vector c, length n
        equality_matrix: Constraint matrix A, shape (m, n)
        rhs: Right-hand side b, length m
        lower: Lower bounds, length n (-inf allowed)
        upper: Upper bounds, length n (+inf allowed)
        opts: Tolerances and pivot limit

    Returns:
        SolverOutcome with status optimal, infeasible, unbounded or iteration_limit

    Raises:
        SolverError: If dimensions disagree or some lower bound exceeds its upper bound
    """
    opts = opts or SolverOptions()
    c = np.asarray(costs, dtype=np.float64)
    A = np.atleast_2d(np.asarray(equality_matrix, dtype=np.float64))
    b = np.asarray(rhs, dtype=np.float64).reshape(-1)
    lo = np.asarray(lower, dtype=np.float64).reshape(-1)
    hi = np.asarray(upper, dtype=np.float64).reshape(-1)

    n = c.size
    if A.size == 0:
        A = A.reshape(0, n)
    if A.shape[1] != n or lo.size != n or hi.size != n or A.shape[0] != b.size:
        raise SolverError(
            f"inconsistent LP dimensions: c={c.size}, A={A.shape}, b={b.size}, "
            f"lower={lo.size}, upper={hi.size}"
        )
    if np.any(lo > hi):
        raise SolverError("lower bound exceeds upper bound")
    if np.any(lo == np.inf) or np.any(hi == -np.inf):
        raise SolverError("bounds must leave each variable a nonempty range")

    if A.shape[0] == 0:
        return _solve_without_rows(c, lo, hi)
    return BoundedSimplex(c, A, b, lo, hi, opts).solve()
