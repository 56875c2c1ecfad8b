"""Recovery programs: box-constrained BP, nonnegative BP and box-constrained least squares."""

from __future__ import annotations

import math
from collections.abc import Callable
from dataclasses import dataclass
from typing import Literal

import numpy as np
from loguru import logger

from src.lp import lp_solve
from src.models import BinarySignal, SolverOptions, SolverOutcome, SolverStatus
from src.operators import MeasurementOperator, apply, apply_adjoint, to_dense

Program = Literal["bp", "ls", "bp+"]

_POWER_ITERATIONS = 30
_LIPSCHITZ_SAFETY = 1.01


def _check_measurements(op: MeasurementOperator, y) -> np.ndarray:
    y = np.asarray(y, dtype=np.float64)
    if y.ndim != 1 or y.size != op.m:
        raise ValueError(f"y must have length M={op.m}, got shape {y.shape}")
    return y


def solve_box_bp(
    op: MeasurementOperator, y, opts: SolverOptions | None = None
) -> SolverOutcome:
    """min ||x||_1 s.t. Ax = y, x in [0,1]^N; on the box the objective is sum(x)."""
    y = _check_measurements(op, y)
    n = op.n
    return lp_solve(np.ones(n), to_dense(op), y, np.zeros(n), np.ones(n), opts)


def solve_nonneg_bp(
    op: MeasurementOperator, y, opts: SolverOptions | None = None
) -> SolverOutcome:
    """min ||x||_1 s.t. Ax = y, x >= 0."""
    y = _check_measurements(op, y)
    n = op.n
    return lp_solve(np.ones(n), to_dense(op), y, np.zeros(n), np.full(n, np.inf), opts)


def estimate_lipschitz(op: MeasurementOperator) -> float:
    """Largest eigenvalue of A^T A by power iteration, inflated by a safety factor."""
    v = np.random.default_rng(0).standard_normal(op.n)
    v /= np.linalg.norm(v)
    lam = 0.0
    for _ in range(_POWER_ITERATIONS):
        w = apply_adjoint(op, apply(op, v))
        lam = float(np.linalg.norm(w))
        if lam == 0.0:
            break
        v = w / lam
    return lam * _LIPSCHITZ_SAFETY


def projected_gradient_norm(op: MeasurementOperator, x, y, ax=None) -> float:
    """||x - clip(x - grad f(x))||_2 for f(x) = 1/2 ||Ax - y||^2; zero exactly at box-LS minimizers."""
    x = np.asarray(x, dtype=np.float64)
    ax = apply(op, x) if ax is None else ax
    grad = apply_adjoint(op, ax - np.asarray(y, dtype=np.float64))
    return float(np.linalg.norm(x - np.clip(x - grad, 0.0, 1.0)))


def solve_box_ls(
    op: MeasurementOperator, y, opts: SolverOptions | None = None
) -> SolverOutcome:
    """
    min ||Ax - y||_2 s.t. x in [0,1]^N by accelerated projected gradient.

    Momentum is restarted whenever the objective would increase; if a plain
    projected step still increases it, the Lipschitz estimate is doubled.
    The returned point is feasible exactly since projection is clipping.
    """
    opts = opts or SolverOptions()
    y = _check_measurements(op, y)
    lipschitz = estimate_lipschitz(op)

    x = np.zeros(op.n)
    if lipschitz == 0.0:
        return _ls_outcome(op, x, y, SolverStatus.OPTIMAL, 0)

    ax = apply(op, x)
    f_x = 0.5 * float(np.dot(ax - y, ax - y))
    z, az = x, ax
    t = 1.0
    status = SolverStatus.ITERATION_LIMIT
    iterations = 0
    while iterations < opts.max_iterations:
        iterations += 1
        grad = apply_adjoint(op, az - y)
        x_new = np.clip(z - grad / lipschitz, 0.0, 1.0)
        ax_new = apply(op, x_new)
        f_new = 0.5 * float(np.dot(ax_new - y, ax_new - y))

        if f_new > f_x * (1.0 + 1e-12) + 1e-300:
            if z is x:
                lipschitz *= 2.0
                logger.debug(f"box-LS: Lipschitz estimate raised to {lipschitz:.4e}")
            z, az, t = x, ax, 1.0
            continue

        if projected_gradient_norm(op, x_new, y, ax_new) <= opts.tolerance_opt:
            x = x_new
            status = SolverStatus.OPTIMAL
            break

        t_new = 0.5 * (1.0 + math.sqrt(1.0 + 4.0 * t * t))
        beta = (t - 1.0) / t_new
        z = x_new + beta * (x_new - x)
        az = ax_new + beta * (ax_new - ax)
        x, ax, f_x, t = x_new, ax_new, f_new, t_new

    logger.debug(f"box-LS finished: status={status}, iterations={iterations}")
    return _ls_outcome(op, x, y, status, iterations)


def _ls_outcome(op, x, y, status, iterations) -> SolverOutcome:
    residual = float(np.linalg.norm(apply(op, x) - y))
    return SolverOutcome(
        x_star=x,
        status=status,
        residual_l2=residual,
        objective=residual,
        iterations=iterations,
    )


PROGRAMS: dict[str, Callable[..., SolverOutcome]] = {
    "bp": solve_box_bp,
    "ls": solve_box_ls,
    "bp+": solve_nonneg_bp,
}


def solve_program(
    program: Program, op: MeasurementOperator, y, opts: SolverOptions | None = None
) -> SolverOutcome:
    """Dispatch to one of the recovery programs by name."""
    try:
        solver = PROGRAMS[program]
    except KeyError:
        raise ValueError(
            f"unknown program '{program}', expected one of {sorted(PROGRAMS)}"
        ) from None
    return solver(op, y, opts)


@dataclass(frozen=True)
class RoundingResult:
    """Thresholded signal and whether it reproduces the measurements."""

    signal: BinarySignal
    consistent: bool
    residual_l2: float


def round_to_binary(
    x, op: MeasurementOperator, y, opts: SolverOptions | None = None
) -> RoundingResult:
    """Threshold at 1/2 (ties round down) and test ||A r - y|| against the feasibility tolerance."""
    opts = opts or SolverOptions()
    y = _check_measurements(op, y)
    rounded = BinarySignal((np.asarray(x, dtype=np.float64) > 0.5).astype(np.float64))
    residual = float(np.linalg.norm(apply(op, rounded.values) - y))
    limit = 10.0 * opts.tolerance_feas * (1.0 + float(np.linalg.norm(y)))
    return RoundingResult(signal=rounded, consistent=residual <= limit, residual_l2=residual)
