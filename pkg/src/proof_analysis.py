"""Dense validators for the quadratic-form machinery behind the certificate margins.

For a centered circulant operator with generator b, selected rows Theta and a
support S, the margin of the analytic certificate at coordinate i splits into

    X1(i) = sum_{l in Theta} b[i - l]
    X2(i) = sum_{k in S} sum_{j in Theta} b[k - j] b[i - j]
    X3(i) = (sum_{k in S} sum_{m in Theta} b[k - m]) * X1(i)

(indices mod N). X2 and X3 are quadratic forms <b, L b> with explicit 0/1
representers; this module builds them, audits their norms and compares
sample means against the exact expectations. Everything here is dense and
capped in size.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from loguru import logger

from src.binsense_config import get_settings
from src.errors import OperatorError, ValidationSizeError
from src.models import EnsembleSpec, ProofAuditConfig
from src.operators import MeasurementOperator, make_circulant
from src.randomness import GENERATOR, SELECTION, SIGNAL, Seed, sample_generator, sample_selection

_POWER_MAX_ITERATIONS = 5000
_POWER_RTOL = 1e-13


def _check_size(n: int) -> None:
    cap = get_settings().binsense_validator_max_n
    if n > cap:
        raise ValidationSizeError(f"validators are capped at N={cap}, got N={n}")


def _index_set(values, n: int, what: str) -> np.ndarray:
    raw = np.asarray(list(values), dtype=np.int64)
    arr = np.unique(raw)
    if arr.size != raw.size:
        raise OperatorError(f"{what} contains duplicate indices")
    if arr.size and (arr.min() < 0 or arr.max() >= n):
        raise OperatorError(f"{what} index out of range for N={n}")
    return arr


def _check_index(i: int, n: int) -> int:
    if not 0 <= i < n:
        raise OperatorError(f"index i={i} out of range for N={n}")
    return int(i)


# ============================================================================
# Direct sums
# ============================================================================


@dataclass(frozen=True)
class XTerms:
    x1: float
    x2: float
    x3: float


def _phi_beta_rows(draws: np.ndarray, theta: np.ndarray, support: np.ndarray) -> np.ndarray:
    """(Phi 1_S)_j for j in Theta, one row per generator draw."""
    n = draws.shape[1]
    if support.size == 0:
        return np.zeros((draws.shape[0], theta.size))
    idx = (support[:, None] - theta[None, :]) % n
    return draws[:, idx].sum(axis=1)


def _x_terms_batch(draws, theta, support, i):
    n = draws.shape[1]
    b_i = draws[:, (i - theta) % n]
    phi_beta = _phi_beta_rows(draws, theta, support)
    x1 = b_i.sum(axis=1)
    x2 = (phi_beta * b_i).sum(axis=1)
    x3 = phi_beta.sum(axis=1) * x1
    return x1, x2, x3


def x_terms(op: MeasurementOperator, support, i: int, b=None) -> XTerms:
    """
    Evaluate X1(i), X2(i), X3(i) by direct summation.

    Args:
        op: Circulant operator supplying N and Theta
        support: Index set S
        i: Coordinate, 0 <= i < N
        b: Generator to evaluate at (defaults to the operator's own)
    """
    if op.kind != "circulant":
        raise OperatorError("X-term decomposition is defined for circulant operators")
    n = op.n
    i = _check_index(i, n)
    b = op.generator if b is None else np.asarray(b, dtype=np.float64)
    if b.shape != (n,):
        raise OperatorError(f"generator must have length {n}, got shape {b.shape}")
    x1, x2, x3 = _x_terms_batch(b[None, :], op.theta, _index_set(support, n, "S"), i)
    return XTerms(x1=float(x1[0]), x2=float(x2[0]), x3=float(x3[0]))


# ============================================================================
# Representers
# ============================================================================


def representer_x2(n: int, theta, support, i: int) -> np.ndarray:
    """L(i) with L[j, l] = 1 iff j in i - Theta and l in j - i + S, so <b, L b> = X2(i)."""
    _check_size(n)
    i = _check_index(i, n)
    theta = _index_set(theta, n, "theta")
    support = _index_set(support, n, "S")
    L = np.zeros((n, n))
    for m in theta:
        j = (i - m) % n
        L[j, (j - i + support) % n] = 1.0
    return L


@dataclass(frozen=True)
class X3Representer:
    """K1 K2 factorization of the X3 representer."""

    k1: np.ndarray
    k2: np.ndarray
    l3: np.ndarray
    product_error: float


def representer_x3(n: int, theta, support, i: int) -> X3Representer:
    """
    K1[a, m] = 1 iff a in i - Theta and m in Theta;  K2[k, l] = 1 iff k in Theta and k + l in S.

    l3 = K1 K2, and product_error compares it with the closed form
    [a in i - Theta] * |Theta intersect (S - l)|.
    """
    _check_size(n)
    i = _check_index(i, n)
    theta = _index_set(theta, n, "theta")
    support = _index_set(support, n, "S")
    rows = (i - theta) % n

    k1 = np.zeros((n, n))
    k1[np.ix_(rows, theta)] = 1.0
    k2 = np.zeros((n, n))
    for k in theta:
        k2[k, (support - k) % n] = 1.0
    l3 = k1 @ k2

    counts = np.zeros(n)
    for l in range(n):
        counts[l] = np.intersect1d(theta, (support - l) % n).size
    closed = np.zeros((n, n))
    closed[rows, :] = counts
    return X3Representer(
        k1=k1, k2=k2, l3=l3, product_error=float(np.abs(l3 - closed).max(initial=0.0))
    )


def gram_representer(n: int, theta, support) -> tuple[np.ndarray, np.ndarray]:
    """
    L[a, j] = 1 iff a in Theta and j in S - a, so ||Phi 1_S||^2 = <b, K b> with K = L^T L.

    K[k, l] = |Theta intersect (S - k) intersect (S - l)|.
    """
    _check_size(n)
    theta = _index_set(theta, n, "theta")
    support = _index_set(support, n, "S")
    L = np.zeros((n, n))
    for a in theta:
        L[a, (support - a) % n] = 1.0
    return L, L.T @ L


@dataclass(frozen=True)
class CountingReport:
    """Row sums of K against the bound s^2."""

    row_sums: np.ndarray
    bound: int

    @property
    def holds(self) -> bool:
        return bool(np.all(self.row_sums <= self.bound))


def counting_lemma(n: int, theta, support) -> CountingReport:
    """Check sum_k |Theta intersect (S - k) intersect (S - l)| <= s^2 for every l."""
    _, K = gram_representer(n, theta, support)
    s = len(list(support))
    return CountingReport(row_sums=K.sum(axis=0), bound=s * s)


# ============================================================================
# Norm audit
# ============================================================================


@dataclass(frozen=True)
class NormAudit:
    hs_norm: float
    hs_norm_squared: float
    op_norm: float
    gershgorin_bound: float
    spectral_radius: float
    power_iterations: int


def _power_op_norm(matrix: np.ndarray) -> tuple[float, int]:
    """Largest singular value from power iteration on A^T A (Rayleigh quotient, never above the truth)."""
    gram = matrix.T @ matrix
    if not np.any(gram):
        return 0.0, 0
    v = np.random.default_rng(0).standard_normal(gram.shape[0])
    v /= np.linalg.norm(v)
    lam = 0.0
    for it in range(1, _POWER_MAX_ITERATIONS + 1):
        w = gram @ v
        new_lam = float(v @ w)
        norm_w = float(np.linalg.norm(w))
        if norm_w == 0.0:
            return 0.0, it
        v = w / norm_w
        if abs(new_lam - lam) <= _POWER_RTOL * new_lam:
            lam = new_lam
            break
        lam = new_lam
    return math.sqrt(max(float(v @ gram @ v), lam, 0.0)), it


def norm_audit(matrix) -> NormAudit:
    """
    Hilbert-Schmidt norm, operator norm and the Gershgorin bound of a square matrix.

    The Gershgorin bound is the larger of the row-disc and column-disc extents,
    max_i |a_ii| + sum_{j != i} |a_ij| (and its transpose), which also bounds
    the operator norm.
    """
    A = np.asarray(matrix, dtype=np.float64)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValidationSizeError(f"norm audit needs a square matrix, got shape {A.shape}")
    _check_size(A.shape[0])
    absA = np.abs(A)
    row_disc = float(absA.sum(axis=1).max(initial=0.0))
    col_disc = float(absA.sum(axis=0).max(initial=0.0))
    hs_sq = float((A * A).sum())
    op_norm, iterations = _power_op_norm(A)
    radius = float(np.abs(np.linalg.eigvals(A)).max(initial=0.0)) if A.size else 0.0
    return NormAudit(
        hs_norm=math.sqrt(hs_sq),
        hs_norm_squared=hs_sq,
        op_norm=op_norm,
        gershgorin_bound=max(row_disc, col_disc),
        spectral_radius=radius,
        power_iterations=iterations,
    )


@dataclass(frozen=True)
class HSConvention:
    """Claimed Hilbert-Schmidt value next to the counted norm and squared norm."""

    name: str
    hs_norm: float
    hs_norm_squared: float
    claimed: float

    @property
    def matches_norm(self) -> bool:
        return math.isclose(self.hs_norm, self.claimed, rel_tol=1e-12, abs_tol=1e-12)

    @property
    def matches_squared(self) -> bool:
        return math.isclose(self.hs_norm_squared, self.claimed, rel_tol=1e-12, abs_tol=1e-12)

    @property
    def discrepancy(self) -> bool:
        """The claim equals the squared norm rather than the norm."""
        return not self.matches_norm


def hs_conventions(n: int, theta, support, i: int) -> list[HSConvention]:
    """Compare the stated HS values of L(i), K1, K2 (Ms, M^2, Ms) and of the Gram factor (sqrt(Ms))."""
    m = len(list(theta))
    s = len(list(support))
    x3 = representer_x3(n, theta, support, i)
    gram_l, _ = gram_representer(n, theta, support)
    out = []
    for name, mat, claimed in (
        ("L", representer_x2(n, theta, support, i), float(m * s)),
        ("K1", x3.k1, float(m * m)),
        ("K2", x3.k2, float(m * s)),
        ("gram_L", gram_l, math.sqrt(m * s)),
    ):
        hs_sq = float((mat * mat).sum())
        out.append(HSConvention(name, math.sqrt(hs_sq), hs_sq, claimed))
    return out


# ============================================================================
# Representer report
# ============================================================================


@dataclass(frozen=True)
class RepresenterReport:
    """Exactness and norm audit of one representer at coordinate i."""

    name: str
    i: int
    exactness_error: float
    relative_error: float
    hs_norm: float
    hs_norm_squared: float
    op_norm: float
    gershgorin_bound: float
    spectral_radius: float
    stated_bound_hs: float
    stated_bound_op: float

    @property
    def bounds_hold(self) -> bool:
        slack = 1.0 + 1e-9
        return (
            self.op_norm <= self.stated_bound_op * slack
            and self.op_norm <= self.gershgorin_bound * slack
            and self.spectral_radius <= self.gershgorin_bound * slack
        )


def _report(name, i, matrix, forms, exact, hs_bound, op_bound) -> RepresenterReport:
    audit = norm_audit(matrix)
    diff = np.abs(forms - exact)
    return RepresenterReport(
        name=name,
        i=i,
        exactness_error=float(diff.max(initial=0.0)),
        relative_error=float((diff / (1.0 + np.abs(exact))).max(initial=0.0)),
        hs_norm=audit.hs_norm,
        hs_norm_squared=audit.hs_norm_squared,
        op_norm=audit.op_norm,
        gershgorin_bound=audit.gershgorin_bound,
        spectral_radius=audit.spectral_radius,
        stated_bound_hs=hs_bound,
        stated_bound_op=op_bound,
    )


def representer_report(
    n: int, theta, support, i: int, draws: np.ndarray
) -> list[RepresenterReport]:
    """
    Audit L(i), L3(i) = K1 K2 and the Gram representer K against direct sums.

    Args:
        n: Dimension
        theta: Selected rows
        support: Support S
        i: Coordinate
        draws: Generator draws, shape (trials, n), used for the exactness check
    """
    draws = np.atleast_2d(np.asarray(draws, dtype=np.float64))
    theta_arr = _index_set(theta, n, "theta")
    support_arr = _index_set(support, n, "S")
    m, s = theta_arr.size, support_arr.size

    L2 = representer_x2(n, theta_arr, support_arr, i)
    x3 = representer_x3(n, theta_arr, support_arr, i)
    _, K = gram_representer(n, theta_arr, support_arr)

    _, x2_direct, x3_direct = _x_terms_batch(draws, theta_arr, support_arr, i)
    gram_direct = (_phi_beta_rows(draws, theta_arr, support_arr) ** 2).sum(axis=1)

    def forms(mat):
        return np.einsum("tn,nk,tk->t", draws, mat, draws)

    reports = [
        _report("L", i, L2, forms(L2), x2_direct, float(m * s), float(s)),
        _report("L3", i, x3.l3, forms(x3.l3), x3_direct, float(m**3 * s), float(m * s)),
        _report("K", i, K, forms(K), gram_direct, math.sqrt(m * s**3), float(s * s)),
    ]
    for r in reports:
        if not r.bounds_hold:
            logger.warning(
                f"representer {r.name} at i={i}: op_norm={r.op_norm:.6g} exceeds a bound "
                f"(stated {r.stated_bound_op:.6g}, Gershgorin {r.gershgorin_bound:.6g})"
            )
    return reports


# ============================================================================
# Expectations
# ============================================================================


def _audit_sigma(op: MeasurementOperator) -> float:
    if op.sigma <= 0:
        raise OperatorError("expectation formulas need a positive sigma")
    return op.sigma


def expected_x2(op: MeasurementOperator, support, i: int) -> float:
    """M sigma^2 if i in S, else 0."""
    i = _check_index(i, op.n)
    return op.m * _audit_sigma(op) ** 2 if i in set(int(k) for k in support) else 0.0


@dataclass(frozen=True)
class X3Expectation:
    """E X3(i), its per-k terms E_{k,i}, and the bracketing interval."""

    value: float
    pair_terms: dict[int, float]
    lower: float
    upper: float

    @property
    def bracketed(self) -> bool:
        tol = 1e-12 * max(1.0, self.upper)
        return self.lower - tol <= self.value <= self.upper + tol


def pair_expectation(n: int, theta, k: int, i: int, sigma: float) -> float:
    """E_{k,i} = |Theta intersect ((k - i + Theta) mod N)| sigma^2."""
    theta = _index_set(theta, n, "theta")
    return np.intersect1d(theta, (k - i + theta) % n).size * sigma**2


def expected_x3(op: MeasurementOperator, support, i: int) -> X3Expectation:
    """E X3(i) = sum_{k in S} E_{k,i}; lies in [0, sM sigma^2] off S and [M sigma^2, sM sigma^2] on S."""
    if op.kind != "circulant":
        raise OperatorError("X3 expectation is defined for circulant operators")
    i = _check_index(i, op.n)
    sigma = _audit_sigma(op)
    support_arr = _index_set(support, op.n, "S")
    terms = {int(k): pair_expectation(op.n, op.theta, int(k), i, sigma) for k in support_arr}
    s, m, sigma2 = support_arr.size, op.m, sigma**2
    lower = m * sigma2 if i in terms else 0.0
    return X3Expectation(
        value=float(sum(terms.values())),
        pair_terms=terms,
        lower=lower,
        upper=s * m * sigma2,
    )


def expected_gram(op: MeasurementOperator, support) -> float:
    """E <Phi 1_S, Phi 1_S> = M s sigma^2."""
    return op.m * len(list(support)) * _audit_sigma(op) ** 2


# ============================================================================
# Concentration
# ============================================================================


@dataclass(frozen=True)
class ExpectationReport:
    """Sample statistics of one quantity against its exact expectation."""

    quantity: str
    i: int | None
    formula_value: float
    empirical_mean: float
    std_error: float
    z_score: float
    empirical_variance: float
    tail_2sd: float
    tail_3sd: float
    trials: int
    degenerate: bool

    def within(self, k: float = 4.0) -> bool:
        return abs(self.z_score) <= k


def _expectation_report(quantity, i, samples, formula) -> ExpectationReport:
    trials = samples.size
    mean = float(samples.mean())
    var = float(samples.var(ddof=1)) if trials > 1 else 0.0
    sd = math.sqrt(var)
    se = sd / math.sqrt(trials)
    degenerate = se == 0.0
    if degenerate:
        z = 0.0 if math.isclose(mean, formula, abs_tol=1e-12) else math.inf
        tail2 = tail3 = 0.0
    else:
        z = (mean - formula) / se
        dev = np.abs(samples - formula)
        tail2 = float((dev > 2.0 * sd).mean())
        tail3 = float((dev > 3.0 * sd).mean())
    return ExpectationReport(
        quantity=quantity,
        i=i,
        formula_value=formula,
        empirical_mean=mean,
        std_error=se,
        z_score=z,
        empirical_variance=var,
        tail_2sd=tail2,
        tail_3sd=tail3,
        trials=trials,
        degenerate=degenerate,
    )


@dataclass(frozen=True)
class AuditInstance:
    """Sampled (Theta, S, audited indices) for a proof audit."""

    n: int
    theta: np.ndarray
    support: np.ndarray
    indices: np.ndarray


def audit_instance(config: ProofAuditConfig) -> AuditInstance:
    """Draw Theta, S and the audited coordinates from the configured seed."""
    _check_size(config.n)
    seed = Seed(base=config.base_seed, labels=("audit",))
    theta = sample_selection(config.n, config.m, seed.child(SELECTION))
    if config.s == 0:
        support = np.zeros(0, dtype=np.int64)
    else:
        support = sample_selection(config.n, config.s, seed.child(SIGNAL))
    indices = sample_selection(config.n, min(config.indices, config.n), seed.child("indices"))
    return AuditInstance(n=config.n, theta=theta, support=support, indices=indices)


def generator_draws(spec: EnsembleSpec, n: int, trials: int, seed: Seed) -> np.ndarray:
    """Independent centered generator draws, shape (trials, n)."""
    return sample_generator(spec, trials * n, seed).values.reshape(trials, n)


MIN_SWEEP_TRIALS = 1000


def concentration_sweep(
    config: ProofAuditConfig,
    trials: int | None = None,
    draws: np.ndarray | None = None,
) -> list[ExpectationReport]:
    """
    Compare sample means of X1, X2, X3 (per audited i) and of ||Phi 1_S||^2 with their formulas.

    X1 has mean 0 and variance M sigma^2. draws overrides the sampled
    generators, e.g. to exercise degenerate input. Fewer than
    MIN_SWEEP_TRIALS draws are accepted with a warning.
    """
    trials = config.trials if trials is None else trials
    inst = audit_instance(config)
    sigma = config.ensemble.sigma
    if draws is None:
        seed = Seed(base=config.base_seed, labels=("audit", GENERATOR))
        draws = generator_draws(config.ensemble, config.n, trials, seed)
    draws = np.atleast_2d(np.asarray(draws, dtype=np.float64))
    if draws.shape[0] < MIN_SWEEP_TRIALS:
        logger.warning(
            f"concentration sweep over {draws.shape[0]} draws; "
            f"at least {MIN_SWEEP_TRIALS} are needed for the 4 standard error checks"
        )

    op = make_circulant(np.zeros(config.n), inst.theta, sigma=sigma)
    reports = []
    for i in inst.indices:
        i = int(i)
        x1, x2, x3 = _x_terms_batch(draws, inst.theta, inst.support, i)
        reports.append(_expectation_report("X1", i, x1, 0.0))
        reports.append(_expectation_report("X2", i, x2, expected_x2(op, inst.support, i)))
        reports.append(_expectation_report("X3", i, x3, expected_x3(op, inst.support, i).value))
    gram = (_phi_beta_rows(draws, inst.theta, inst.support) ** 2).sum(axis=1)
    reports.append(_expectation_report("gram", None, gram, expected_gram(op, inst.support)))
    logger.info(
        f"concentration sweep: {len(reports)} quantities over {draws.shape[0]} draws, "
        f"{sum(not r.within() for r in reports)} outside 4 standard errors"
    )
    return reports
