"""Dual certificates for binary recovery from biased measurements.

A vector nu certifies recovery of 1_S when A^T nu lies in

    H_S^t = { w : w_i <= -t for i in S,  w_i >= t for i not in S }

for some t > 0. The analytic certificate is built from the sparser of x0 and
1 - x0; the LP search decides existence for small instances.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from loguru import logger

from src.errors import CertificateError
from src.lp import lp_solve
from src.models import BinarySignal, SolverOptions
from src.operators import MeasurementOperator, apply, apply_adjoint, to_dense

# ============================================================================
# Symmetrization
# ============================================================================


@dataclass(frozen=True)
class SymmetrizedSignal:
    """beta0 is the sparser of x0 and 1 - x0; flipped records which one."""

    beta0: BinarySignal
    flipped: bool


def symmetrize(x0: BinarySignal) -> SymmetrizedSignal:
    """Return the sparser of x0 and 1 - x0 (ties keep x0)."""
    if x0.s <= x0.n - x0.s:
        return SymmetrizedSignal(beta0=x0, flipped=False)
    return SymmetrizedSignal(beta0=x0.complement(), flipped=True)


# ============================================================================
# Margin bookkeeping
# ============================================================================


@dataclass(frozen=True)
class MarginReport:
    """Worst margins of A^T nu against a support S and a target t."""

    verified: bool
    t: float
    worst_in_support: float
    worst_off_support: float

    @property
    def t_actual(self) -> float:
        """Largest t' with A^T nu in H_S^{t'}."""
        return min(-self.worst_in_support, self.worst_off_support)


def _support_mask(n: int, support) -> np.ndarray:
    mask = np.zeros(n, dtype=bool)
    idx = np.asarray(list(support), dtype=np.int64)
    if idx.size and (idx.min() < 0 or idx.max() >= n):
        raise CertificateError(f"support index out of range for N={n}")
    mask[idx] = True
    return mask


def _margin_report(margins: np.ndarray, support, t: float) -> MarginReport:
    mask = _support_mask(margins.size, support)
    worst_in = float(margins[mask].max()) if mask.any() else -math.inf
    worst_off = float(margins[~mask].min()) if (~mask).any() else math.inf
    verified = t > 0 and worst_in <= -t and worst_off >= t
    return MarginReport(
        verified=bool(verified),
        t=t,
        worst_in_support=worst_in,
        worst_off_support=worst_off,
    )


@dataclass(frozen=True, eq=False)
class DualCertificate:
    """
    Certificate vector nu over the selected rows with its margin report.

    margins holds (A^T nu)_i for i = 0..N-1. verified compares against
    t_target; t_actual is the margin actually achieved.
    """

    nu: np.ndarray
    rho: float
    t_target: float
    margins: np.ndarray
    support: tuple[int, ...]
    verified: bool
    t_actual: float
    r_squared_bound: float = math.nan

    @property
    def certifies(self) -> bool:
        """A^T nu lies in H_S^t for some t > 0."""
        return self.t_actual > 0

    @property
    def r(self) -> float:
        return float(np.linalg.norm(self.nu))

    @classmethod
    def from_nu(
        cls,
        op: MeasurementOperator,
        nu,
        support,
        t_target: float,
        rho: float = math.nan,
        r_squared_bound: float = math.nan,
    ) -> DualCertificate:
        """Evaluate margins of an arbitrary nu against S."""
        nu = np.asarray(nu, dtype=np.float64)
        margins = apply_adjoint(op, nu)
        support = tuple(sorted(int(i) for i in support))
        report = _margin_report(margins, support, t_target)
        return cls(
            nu=nu,
            rho=rho,
            t_target=t_target,
            margins=margins,
            support=support,
            verified=report.verified,
            t_actual=report.t_actual,
            r_squared_bound=r_squared_bound,
        )


# ============================================================================
# Analytic certificate
# ============================================================================


def build_certificate(op: MeasurementOperator, x0: BinarySignal) -> DualCertificate:
    """
    Build nu = -(rho*1 + Phi beta0 - mean(Phi beta0)*1) with rho = -sigma^2/(4 mu).

    Phi is the centered part of op. The certificate refers to S = supp(beta0);
    negating nu certifies the complement, so either support may be recovered.

    Raises:
        CertificateError: If mu or sigma is not positive, or x0 has the wrong length
    """
    if op.mu <= 0:
        raise CertificateError("certificate needs a positive bias mu")
    if op.sigma <= 0:
        raise CertificateError("certificate needs a positive entry deviation sigma")
    if x0.n != op.n:
        raise CertificateError(f"signal length {x0.n} does not match N={op.n}")

    beta0 = symmetrize(x0).beta0
    sigma2 = op.sigma**2
    rho = -sigma2 / (4.0 * op.mu)
    phi_beta = apply(op.centered(), beta0.values)
    nu = -(rho + phi_beta - phi_beta.mean())
    t_target = op.m * sigma2 / 16.0
    cert = DualCertificate.from_nu(
        op,
        nu,
        beta0.support,
        t_target,
        rho=rho,
        r_squared_bound=nu_norm_bound(op.m, op.sigma, op.mu, beta0.s),
    )
    logger.debug(
        f"certificate for s={beta0.s}: t_target={t_target:.4g}, "
        f"t_actual={cert.t_actual:.4g}, verified={cert.verified}"
    )
    return cert


def verify_certificate(
    cert: DualCertificate, support, t: float | None = None
) -> MarginReport:
    """Check cert.margins against H_S^t, with t defaulting to cert.t_target."""
    return _margin_report(cert.margins, support, cert.t_target if t is None else t)


# ============================================================================
# Certificate search by linear programming
# ============================================================================


class CertificateSearch(NamedTuple):
    nu: np.ndarray
    t_best: float


def search_certificate_lp(
    op: MeasurementOperator,
    support,
    opts: SolverOptions | None = None,
    tolerance: float = 1e-7,
) -> CertificateSearch | None:
    """
    Solve max t s.t. A^T nu in H_S^t, ||nu||_inf <= 1.

    Variables are (nu, t, slack) with one equality row per coordinate i:
    sign_i (A^T nu)_i + t + slack_i = 0, sign_i = +1 on S and -1 off S.
    Returns None when the best t does not exceed tolerance.
    """
    At = to_dense(op).T
    n, m = At.shape
    mask = _support_mask(n, support)
    signs = np.where(mask, 1.0, -1.0)

    equality = np.hstack([signs[:, None] * At, np.ones((n, 1)), np.eye(n)])
    costs = np.zeros(m + 1 + n)
    costs[m] = -1.0
    lower = np.concatenate([-np.ones(m), [0.0], np.zeros(n)])
    upper = np.concatenate([np.ones(m), [np.inf], np.full(n, np.inf)])

    outcome = lp_solve(costs, equality, np.zeros(n), lower, upper, opts)
    if not outcome.optimal:
        logger.warning(f"certificate LP ended with status {outcome.status}")
        return None
    nu = outcome.x_star[:m]
    t_best = float(outcome.x_star[m])
    logger.debug(f"certificate LP: t_best={t_best:.4g} after {outcome.iterations} pivots")
    if t_best <= tolerance:
        return None
    return CertificateSearch(nu=nu, t_best=t_best)


# ============================================================================
# Noise bounds and sample complexity
# ============================================================================


def noise_error_bound(s: int, n: int, m: int, sigma: float, mu: float, eta: float) -> float:
    """sqrt(9 (16 sigma^2/mu^2 + min(s, N-s)) / (M sigma^2)) * eta."""
    if m <= 0 or sigma <= 0 or mu <= 0:
        raise CertificateError("noise bound needs positive M, sigma and mu")
    k = min(s, n - s)
    return math.sqrt(9.0 * (16.0 * sigma**2 / mu**2 + k) / (m * sigma**2)) * eta


def prior_noise_bound(s: int, n: int, m: int, sigma: float, mu: float, eta: float) -> float:
    """The corresponding bound for unstructured biased matrices, for comparison tables."""
    if m <= 0 or sigma <= 0 or mu <= 0:
        raise CertificateError("noise bound needs positive M, sigma and mu")
    k = min(s, n - s)
    return math.sqrt((sigma**2 / mu**2 + 32.0 * k) / (m * sigma**2)) * eta


def nu_norm_bound(m: int, sigma: float, mu: float, s: int) -> float:
    """A-priori bound M sigma^2 (sigma^2/(16 mu^2) + 2s) on ||nu||_2^2."""
    return m * sigma**2 * (sigma**2 / (16.0 * mu**2) + 2.0 * s)


def certified_noise_radius(cert: DualCertificate, eta: float) -> float:
    """
    Error radius 2 ||nu||_2 eta / t_actual for box least squares with ||n||_2 <= eta.

    Raises:
        CertificateError: If the certificate achieves no positive margin, or eta < 0
    """
    if eta < 0:
        raise CertificateError("noise level eta must be nonnegative")
    if not cert.certifies:
        raise CertificateError(
            f"certificate has no positive margin (t_actual={cert.t_actual:.4g})"
        )
    return 2.0 * cert.r * eta / cert.t_actual


def measurement_requirement(
    s: int, n: int, mu: float, sigma: float, subgauss_norm: float, eps: float
) -> float:
    """max(R^2/mu^2, min(s, N-s) 2R^4/sigma^4) log(N/eps), universal constant taken as 1."""
    if mu <= 0 or sigma <= 0 or not 0 < eps < 1:
        raise CertificateError("requirement needs mu, sigma > 0 and eps in (0, 1)")
    r2 = subgauss_norm**2
    k = min(s, n - s)
    return max(r2 / mu**2, k * 2.0 * r2**2 / sigma**4) * math.log(n / eps)


def noise_measurement_requirement(subgauss_norm: float, sigma: float, eps: float) -> float:
    """(R/sigma)^{4/3} log(1/eps): the extra requirement for the noisy least-squares bound."""
    if sigma <= 0 or not 0 < eps < 1:
        raise CertificateError("requirement needs sigma > 0 and eps in (0, 1)")
    return (subgauss_norm / sigma) ** (4.0 / 3.0) * math.log(1.0 / eps)
