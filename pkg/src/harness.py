"""Seeded Monte-Carlo experiments over (s, M) grids and small exhaustive oracles."""

from __future__ import annotations

import hashlib
import math
from collections.abc import Callable, Iterable
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from functools import partial
from typing import Literal

import numpy as np
from loguru import logger

from src.binsense_config import get_settings
from src.certificates import (
    build_certificate,
    certified_noise_radius,
    measurement_requirement,
    noise_error_bound,
    prior_noise_bound,
    search_certificate_lp,
)
from src.errors import BinsenseError, ValidationSizeError
from src.models import BinarySignal, ExperimentConfig, SolverOptions
from src.operators import MeasurementOperator, apply, make_circulant, make_toeplitz, to_dense
from src.randomness import (
    GENERATOR,
    NOISE,
    SELECTION,
    SIGNAL,
    Seed,
    sample_binary_signal,
    sample_generator,
    sample_noise,
    sample_selection,
)
from src.solvers import solve_box_bp, solve_box_ls, solve_program

PROGRAM_ORDER = ("bp", "ls", "bp+")

# ============================================================================
# Trial records
# ============================================================================


@dataclass(frozen=True)
class ProgramResult:
    """Outcome of one recovery program on one trial."""

    status: str
    error_l2: float
    residual_l2: float
    iterations: int
    success: bool


@dataclass(frozen=True)
class CertificateSummary:
    verified: bool
    certifies: bool
    t_target: float
    t_actual: float
    r: float
    noise_radius: float = math.nan


@dataclass(frozen=True)
class TrialResult:
    """Everything one seeded trial produced, keyed by its grid cell."""

    s: int
    m: int
    trial: int
    seed_labels: tuple[int | str, ...]
    operator_digest: str
    signal_digest: str
    programs: dict[str, ProgramResult]
    certificate: CertificateSummary | None
    eta: float | None = None
    noise_bound: float = math.nan


def signal_digest(x: BinarySignal) -> str:
    return hashlib.sha256(x.values.tobytes()).hexdigest()[:16]


@dataclass(frozen=True)
class TrialInstance:
    """Operator, ground truth and measurements of one trial."""

    op: MeasurementOperator
    x0: BinarySignal
    y: np.ndarray


def build_instance(config: ExperimentConfig, s: int, m: int, trial: int) -> TrialInstance:
    """
    Draw generator, row selection, signal and noise from streams labelled (purpose, s, M, trial).

    The operator bias is config.mu plus the mean of the ensemble, so 0/1
    entries contribute their own bias of 1/2.
    """
    seed = Seed(base=config.base_seed)
    n = config.n
    length = n if config.operator_kind == "circulant" else 2 * n - 1
    draw = sample_generator(config.ensemble, length, seed.child(GENERATOR, s, m, trial))
    theta = sample_selection(n, m, seed.child(SELECTION, s, m, trial))
    x0 = sample_binary_signal(n, s, seed.child(SIGNAL, s, m, trial))

    make = make_circulant if config.operator_kind == "circulant" else make_toeplitz
    op = make(
        draw.values,
        theta,
        config.mu + draw.bias,
        sigma=config.ensemble.sigma,
        subgauss_norm=config.ensemble.subgauss_norm,
        seed=config.base_seed,
    )
    y = apply(op, x0.values)
    if config.eta:
        y = y + sample_noise(m, config.eta, seed.child(NOISE, s, m, trial))
    return TrialInstance(op=op, x0=x0, y=y)


def _run_program(program, op, y, x0, opts: SolverOptions) -> ProgramResult:
    try:
        outcome = solve_program(program, op, y, opts)
    except (BinsenseError, np.linalg.LinAlgError) as e:
        logger.warning(f"program {program} failed: {e}")
        return ProgramResult("error", math.nan, math.nan, 0, False)
    error = outcome.error_to(x0)
    return ProgramResult(
        status=str(outcome.status),
        error_l2=error,
        residual_l2=outcome.residual_l2,
        iterations=outcome.iterations,
        success=outcome.optimal and error <= opts.success_radius,
    )


def _certificate_summary(op, x0, eta) -> CertificateSummary | None:
    if op.mu <= 0 or op.sigma <= 0:
        return None
    cert = build_certificate(op, x0)
    radius = math.nan
    if eta is not None and cert.certifies:
        radius = certified_noise_radius(cert, eta)
    return CertificateSummary(
        verified=cert.verified,
        certifies=cert.certifies,
        t_target=cert.t_target,
        t_actual=cert.t_actual,
        r=cert.r,
        noise_radius=radius,
    )


def run_trial(config: ExperimentConfig, s: int, m: int, trial_index: int) -> TrialResult:
    """Sample one instance, run the configured programs and the analytic certificate."""
    inst = build_instance(config, s, m, trial_index)
    op, x0 = inst.op, inst.x0
    programs = {
        p: _run_program(p, op, inst.y, x0, config.solver) for p in config.programs
    }
    certificate = _certificate_summary(op, x0, config.eta) if config.certify else None
    bound = math.nan
    if config.eta is not None and op.mu > 0 and op.sigma > 0:
        bound = noise_error_bound(s, config.n, m, op.sigma, op.mu, config.eta)
    return TrialResult(
        s=s,
        m=m,
        trial=trial_index,
        seed_labels=(config.base_seed, s, m, trial_index),
        operator_digest=op.digest(),
        signal_digest=signal_digest(x0),
        programs=programs,
        certificate=certificate,
        eta=config.eta,
        noise_bound=bound,
    )


# ============================================================================
# Grid aggregation
# ============================================================================


@dataclass
class CellStats:
    """Success counts, error statistics and noise-bound checks of one (s, M) cell."""

    s: int
    m: int
    trials: int = 0
    successes: dict[str, int] = field(default_factory=dict)
    error_sums: dict[str, float] = field(default_factory=dict)
    error_max: dict[str, float] = field(default_factory=dict)
    cert_evaluated: int = 0
    cert_verified: int = 0
    radius_trials: int = 0
    radius_hits: dict[str, int] = field(default_factory=dict)
    bound_sum: float = 0.0
    bound_trials: int = 0

    def add(self, result: TrialResult) -> None:
        self.trials += 1
        for name, prog in result.programs.items():
            self.successes[name] = self.successes.get(name, 0) + int(prog.success)
            self.error_sums[name] = self.error_sums.get(name, 0.0) + prog.error_l2
            self.error_max[name] = max(self.error_max.get(name, -math.inf), prog.error_l2)
        if result.certificate is not None:
            self.cert_evaluated += 1
            self.cert_verified += int(result.certificate.verified)
            radius = result.certificate.noise_radius
            if math.isfinite(radius):
                self.radius_trials += 1
                for name, prog in result.programs.items():
                    hit = math.isfinite(prog.error_l2) and prog.error_l2 <= radius
                    self.radius_hits[name] = self.radius_hits.get(name, 0) + int(hit)
        if math.isfinite(result.noise_bound):
            self.bound_trials += 1
            self.bound_sum += result.noise_bound

    def rate(self, program: str) -> float:
        if program not in self.successes or self.trials == 0:
            return math.nan
        return self.successes[program] / self.trials

    def mean_error(self, program: str) -> float:
        if program not in self.error_sums or self.trials == 0:
            return math.nan
        return self.error_sums[program] / self.trials

    @property
    def cert_rate(self) -> float:
        """Fraction of trials whose analytic certificate verified; NaN if none was built."""
        return self.cert_verified / self.cert_evaluated if self.cert_evaluated else math.nan

    def radius_rate(self, program: str) -> float:
        """Fraction of noisy certified trials whose error stayed within 2 r eta / t_actual."""
        if program not in self.radius_hits or self.radius_trials == 0:
            return math.nan
        return self.radius_hits[program] / self.radius_trials

    @property
    def mean_noise_bound(self) -> float:
        return self.bound_sum / self.bound_trials if self.bound_trials else math.nan


@dataclass
class PhaseGrid:
    """Per-cell statistics of a phase-transition experiment."""

    config: ExperimentConfig
    cells: dict[tuple[int, int], CellStats] = field(default_factory=dict)
    complete: bool = True

    def add(self, result: TrialResult) -> None:
        key = (result.s, result.m)
        if key not in self.cells:
            self.cells[key] = CellStats(s=result.s, m=result.m)
        self.cells[key].add(result)

    def required_measurements(self, s: int) -> float:
        """Sample-complexity annotation for sparsity s; NaN for an unbiased or degenerate ensemble."""
        cfg = self.config
        bias = cfg.mu + cfg.ensemble.mean
        if bias <= 0 or cfg.ensemble.sigma <= 0:
            return math.nan
        return measurement_requirement(
            s, cfg.n, bias, cfg.ensemble.sigma, cfg.ensemble.subgauss_norm, cfg.failure_prob
        )

    def prior_bound(self, s: int, m: int) -> float:
        """Unstructured-matrix noise bound at the run's eta, for comparison; NaN without noise."""
        cfg = self.config
        bias = cfg.mu + cfg.ensemble.mean
        if cfg.eta is None or bias <= 0 or cfg.ensemble.sigma <= 0:
            return math.nan
        return prior_noise_bound(s, cfg.n, m, cfg.ensemble.sigma, bias, cfg.eta)

    def cell(self, s: int, m: int) -> CellStats | None:
        return self.cells.get((s, m))

    def ordered_cells(self) -> list[CellStats]:
        """Cells ordered by M, then s."""
        return [self.cells[k] for k in sorted(self.cells, key=lambda k: (k[1], k[0]))]

    def rate_matrix(self, program: str) -> np.ndarray:
        """Success rates, rows indexed by M (ascending) and columns by s (ascending); NaN where missing."""
        s_vals = sorted(self.config.s_values)
        m_vals = sorted(self.config.m_values)
        out = np.full((len(m_vals), len(s_vals)), np.nan)
        for r, m in enumerate(m_vals):
            for c, s in enumerate(s_vals):
                cell = self.cell(s, m)
                if cell is not None:
                    out[r, c] = cell.rate(program)
        return out

    @classmethod
    def from_results(
        cls, config: ExperimentConfig, results: Iterable[TrialResult], complete: bool = True
    ) -> PhaseGrid:
        """Aggregate in (s, M, trial) order so sums do not depend on scheduling."""
        grid = cls(config=config, complete=complete)
        for result in sorted(results, key=lambda r: (r.s, r.m, r.trial)):
            grid.add(result)
        return grid


def _grid_tasks(config: ExperimentConfig) -> list[tuple[int, int, int]]:
    return [
        (s, m, t)
        for s in config.s_values
        for m in config.m_values
        for t in range(config.trials)
    ]


def _run_task(config: ExperimentConfig, task: tuple[int, int, int]) -> TrialResult:
    s, m, t = task
    return run_trial(config, s, m, t)


def run_phase_grid(
    config: ExperimentConfig,
    threads: int | None = None,
    on_result: Callable[[TrialResult], None] | None = None,
) -> PhaseGrid:
    """
    Run every (s, M, trial) of the grid, optionally across worker processes.

    threads defaults to BINSENSE_THREADS. On KeyboardInterrupt the trials
    finished so far are aggregated into a grid marked incomplete.
    """
    threads = get_settings().binsense_threads if threads is None else threads
    tasks = _grid_tasks(config)
    logger.info(
        f"phase grid: {len(config.s_values)}x{len(config.m_values)} cells, "
        f"{config.trials} trials each, {len(tasks)} trials on {max(threads, 1)} worker(s)"
    )
    results: list[TrialResult] = []
    complete = True
    try:
        if threads > 1:
            with ProcessPoolExecutor(max_workers=threads) as pool:
                for result in pool.map(partial(_run_task, config), tasks, chunksize=4):
                    results.append(result)
                    if on_result:
                        on_result(result)
        else:
            for task in tasks:
                result = _run_task(config, task)
                results.append(result)
                if on_result:
                    on_result(result)
                if result.trial == config.trials - 1:
                    logger.debug(f"cell s={result.s} M={result.m} done")
    except KeyboardInterrupt:
        complete = False
        logger.warning(f"interrupted after {len(results)} of {len(tasks)} trials")
    grid = PhaseGrid.from_results(config, results, complete=complete)
    logger.info(f"phase grid finished: {len(results)} trials, complete={complete}")
    return grid


# ============================================================================
# Exhaustive oracle
# ============================================================================

BruteForceKind = Literal["unique", "multiple", "none"]

_ENUM_CHUNK = 1 << 14


@dataclass(frozen=True)
class BruteForceResult:
    kind: BruteForceKind
    solutions: tuple[BinarySignal, ...]

    @property
    def solution(self) -> BinarySignal | None:
        return self.solutions[0] if self.kind == "unique" else None


def brute_force_unique(op: MeasurementOperator, y, tol: float | None = None) -> BruteForceResult:
    """
    Enumerate all x in {0,1}^N with ||Ax - y||_2 <= tol (default 1e-8 (1 + ||y||_2)).

    Raises:
        ValidationSizeError: If N exceeds the configured enumeration cap
    """
    n = op.n
    cap = get_settings().binsense_brute_force_max_n
    if n > cap:
        raise ValidationSizeError(f"brute force is capped at N={cap}, got N={n}")
    y = np.asarray(y, dtype=np.float64)
    tol = 1e-8 * (1.0 + float(np.linalg.norm(y))) if tol is None else tol
    A = to_dense(op)
    bits = np.arange(n)
    found: list[BinarySignal] = []
    for start in range(0, 1 << n, _ENUM_CHUNK):
        codes = np.arange(start, min(start + _ENUM_CHUNK, 1 << n))
        X = ((codes[:, None] >> bits[None, :]) & 1).astype(np.float64)
        resid = np.linalg.norm(X @ A.T - y[None, :], axis=1)
        found.extend(BinarySignal(X[k]) for k in np.flatnonzero(resid <= tol))
    kind: BruteForceKind = "none" if not found else ("unique" if len(found) == 1 else "multiple")
    return BruteForceResult(kind=kind, solutions=tuple(found))


@dataclass(frozen=True)
class OracleCheck:
    """Brute force, certificate search and solvers on one noiseless instance and its complement."""

    brute_force: BruteForceKind
    certificate_t: float | None
    complement_certificate_t: float | None
    bp_recovers: bool
    ls_recovers: bool
    bp_complement_recovers: bool
    weight_tie: bool = False

    @property
    def certified(self) -> bool:
        return self.certificate_t is not None

    @property
    def consistent(self) -> bool:
        """
        Rules checked against the exhaustive oracle:

        - x0 is always a binary solution, so "none" never occurs;
        - a certificate exists for S exactly when one exists for S^c;
        - a certificate forces a unique binary solution that BP recovers on
          both sides and LS recovers on S;
        - without a certificate BP cannot recover both 1_S and 1_{S^c}, unless
          another binary solution of equal weight makes the optimum a tie.
        """
        if self.brute_force == "none":
            return False
        if self.certified != (self.complement_certificate_t is not None):
            return False
        both = self.bp_recovers and self.bp_complement_recovers
        if self.certified:
            return self.brute_force == "unique" and both and self.ls_recovers
        if self.brute_force == "multiple" and self.weight_tie:
            return True
        return not both


def oracle_consistency_trial(
    op: MeasurementOperator, x0: BinarySignal, opts: SolverOptions | None = None
) -> OracleCheck:
    """
    Cross-check the exhaustive oracle against LP certificate search and the solvers.

    Both 1_S and 1_{S^c} are measured with the same operator. Disagreements
    are logged with the certificate margins.
    """
    opts = opts or SolverOptions()
    flipped = x0.complement()
    y = apply(op, x0.values)
    y_flipped = apply(op, flipped.values)
    brute = brute_force_unique(op, y)
    found = search_certificate_lp(op, x0.support, opts)
    found_flipped = search_certificate_lp(op, flipped.support, opts)
    bp = solve_box_bp(op, y, opts)
    bp_flipped = solve_box_bp(op, y_flipped, opts)
    ls = solve_box_ls(op, y, opts)
    tie = any(
        sol.s == x0.s and not np.array_equal(sol.values, x0.values) for sol in brute.solutions
    )
    check = OracleCheck(
        brute_force=brute.kind,
        certificate_t=None if found is None else found.t_best,
        complement_certificate_t=None if found_flipped is None else found_flipped.t_best,
        bp_recovers=bp.optimal and bp.error_to(x0) <= opts.success_radius,
        ls_recovers=ls.optimal and ls.error_to(x0) <= opts.success_radius,
        bp_complement_recovers=(
            bp_flipped.optimal and bp_flipped.error_to(flipped) <= opts.success_radius
        ),
        weight_tie=tie,
    )
    if not check.consistent:
        logger.warning(f"oracle disagreement on s={x0.s}: {check}")
    return check


# ============================================================================
# Complement symmetry and statistical checks
# ============================================================================


@dataclass(frozen=True)
class ComplementPair:
    """Recovery of 1_S and 1_{S^c} on one shared operator."""

    s: int
    m: int
    trial: int
    success_support: bool
    success_complement: bool
    t_actual: float

    @property
    def agree(self) -> bool:
        return self.success_support == self.success_complement


def complement_pair_trial(
    config: ExperimentConfig, s: int, m: int, trial: int, program: str = "bp"
) -> ComplementPair:
    """Run one program on x0 and 1 - x0 with the same operator; log disagreements."""
    inst = build_instance(config.model_copy(update={"eta": None}), s, m, trial)
    op, x0 = inst.op, inst.x0
    flipped = x0.complement()
    first = _run_program(program, op, apply(op, x0.values), x0, config.solver)
    second = _run_program(program, op, apply(op, flipped.values), flipped, config.solver)
    t_actual = math.nan
    if op.mu > 0 and op.sigma > 0:
        t_actual = build_certificate(op, x0).t_actual
    pair = ComplementPair(s, m, trial, first.success, second.success, t_actual)
    if not pair.agree:
        logger.warning(
            f"complement disagreement s={s} M={m} trial={trial}: "
            f"S {first.status} err={first.error_l2:.3e}, "
            f"S^c {second.status} err={second.error_l2:.3e}, t_actual={t_actual:.4g}"
        )
    return pair


@dataclass(frozen=True)
class SymmetryCheck:
    s: int
    m: int
    rate: float
    mirror_rate: float
    slack: float

    @property
    def ok(self) -> bool:
        return abs(self.rate - self.mirror_rate) <= self.slack + 1e-12


def _binomial_slack(p1: float, p2: float, trials: int) -> float:
    """Two standard errors of a rate difference, floored at one trial."""
    p = 0.5 * (p1 + p2)
    return max(2.0 * math.sqrt(2.0 * p * (1.0 - p) / trials), 1.0 / trials)


def symmetry_report(grid: PhaseGrid, program: str = "bp") -> list[SymmetryCheck]:
    """Compare rate(s, M) with rate(N - s, M) wherever both cells exist."""
    n = grid.config.n
    checks = []
    for cell in grid.ordered_cells():
        mirror = grid.cell(n - cell.s, cell.m)
        if mirror is None or cell.s > n - cell.s:
            continue
        p1, p2 = cell.rate(program), mirror.rate(program)
        if math.isnan(p1) or math.isnan(p2):
            continue
        trials = min(cell.trials, mirror.trials)
        checks.append(SymmetryCheck(cell.s, cell.m, p1, p2, _binomial_slack(p1, p2, trials)))
    return checks


@dataclass(frozen=True)
class MonotonicityCheck:
    s: int
    m_low: int
    m_high: int
    rate_low: float
    rate_high: float
    slack: float

    @property
    def ok(self) -> bool:
        return self.rate_high >= self.rate_low - self.slack - 1e-12


def monotonicity_report(grid: PhaseGrid, program: str = "bp") -> list[MonotonicityCheck]:
    """For each s, compare the success rate at consecutive M values."""
    checks = []
    m_vals = sorted(grid.config.m_values)
    for s in sorted(grid.config.s_values):
        for lo, hi in zip(m_vals, m_vals[1:]):
            a, b = grid.cell(s, lo), grid.cell(s, hi)
            if a is None or b is None:
                continue
            p1, p2 = a.rate(program), b.rate(program)
            if math.isnan(p1) or math.isnan(p2):
                continue
            slack = _binomial_slack(p1, p2, min(a.trials, b.trials))
            checks.append(MonotonicityCheck(s, lo, hi, p1, p2, slack))
    return checks
