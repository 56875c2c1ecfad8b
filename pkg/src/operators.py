"""Biased partial circulant and Toeplitz measurement operators.

All indices are 0-based. A circulant operator with generator b, row set theta
and bias mu has rows

    A[k, j] = mu + b[(j - k) mod N],      k in theta,

and a Toeplitz operator with generator c = (c_{-N+1}, ..., c_{N-1}) has rows

    A[k, j] = mu + c_{j - k},             k in theta.

The Toeplitz generator is stored as an array of length 2N-1 where position p
holds c_{p - (N-1)}.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, replace
from typing import Literal

import numpy as np
from loguru import logger

from src.binsense_config import get_settings
from src.errors import DenseBudgetError, OperatorError

OperatorKind = Literal["circulant", "toeplitz"]
ApplyMethod = Literal["fft", "dense"]


def _as_theta(theta, n: int) -> np.ndarray:
    """Validate a row index set and return it sorted ascending as a read-only array."""
    arr = np.asarray(list(theta) if not isinstance(theta, np.ndarray) else theta)
    if arr.ndim != 1:
        raise OperatorError("theta must be a 1-D index set")
    if arr.size == 0:
        raise OperatorError("theta must select at least one row")
    if not np.issubdtype(arr.dtype, np.integer):
        if not np.all(np.equal(np.mod(arr, 1), 0)):
            raise OperatorError("theta entries must be integers")
    arr = arr.astype(np.int64)
    if arr.min() < 0 or arr.max() >= n:
        raise OperatorError(f"theta index out of range for N={n}")
    if np.unique(arr).size != arr.size:
        raise OperatorError("theta contains duplicate indices")
    arr = np.sort(arr)
    arr.setflags(write=False)
    return arr


def _as_generator(values, expected: int | None = None) -> np.ndarray:
    arr = np.array(values, dtype=np.float64)
    if arr.ndim != 1 or arr.size == 0:
        raise OperatorError("generator must be a non-empty 1-D vector")
    if expected is not None and arr.size != expected:
        raise OperatorError(
            f"generator must have length {expected}, got {arr.size}"
        )
    arr.setflags(write=False)
    return arr


# ============================================================================
# Specs and operator
# ============================================================================


@dataclass(frozen=True, eq=False)
class CirculantSpec:
    """Generator b (length N), selected rows theta and bias mu."""

    b: np.ndarray
    theta: np.ndarray
    mu: float = 0.0

    def __post_init__(self) -> None:
        b = _as_generator(self.b)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "theta", _as_theta(self.theta, b.size))
        if self.mu < 0:
            raise OperatorError("bias mu must be nonnegative")
        object.__setattr__(self, "mu", float(self.mu))

    @property
    def n(self) -> int:
        return int(self.b.size)

    @property
    def generator(self) -> np.ndarray:
        return self.b


@dataclass(frozen=True, eq=False)
class ToeplitzSpec:
    """Generator c (length 2N-1, c[p] = c_{p-N+1}), selected rows theta and bias mu."""

    c: np.ndarray
    theta: np.ndarray
    mu: float = 0.0

    def __post_init__(self) -> None:
        c = _as_generator(self.c)
        if c.size % 2 == 0:
            raise OperatorError(
                f"Toeplitz generator must have odd length 2N-1, got {c.size}"
            )
        object.__setattr__(self, "c", c)
        object.__setattr__(self, "theta", _as_theta(self.theta, (c.size + 1) // 2))
        if self.mu < 0:
            raise OperatorError("bias mu must be nonnegative")
        object.__setattr__(self, "mu", float(self.mu))

    @property
    def n(self) -> int:
        return int((self.c.size + 1) // 2)

    @property
    def generator(self) -> np.ndarray:
        return self.c


@dataclass(frozen=True, eq=False)
class MeasurementOperator:
    """
    Biased partial circulant or Toeplitz operator A = mu*1 + Phi_theta.

    sigma and subgauss_norm describe the law of the centered generator entries
    and feed the certificate formulas; seed records where the generator came from.
    """

    kind: OperatorKind
    spec: CirculantSpec | ToeplitzSpec
    sigma: float = 1.0
    subgauss_norm: float = 1.0
    seed: int = 0

    def __post_init__(self) -> None:
        expected = CirculantSpec if self.kind == "circulant" else ToeplitzSpec
        if not isinstance(self.spec, expected):
            raise OperatorError(f"{self.kind} operator needs a {expected.__name__}")
        if self.sigma < 0 or self.subgauss_norm < 0:
            raise OperatorError("sigma and subgauss_norm must be nonnegative")

    @property
    def n(self) -> int:
        return self.spec.n

    @property
    def m(self) -> int:
        return int(self.spec.theta.size)

    @property
    def theta(self) -> np.ndarray:
        return self.spec.theta

    @property
    def mu(self) -> float:
        return self.spec.mu

    @property
    def generator(self) -> np.ndarray:
        return self.spec.generator

    def centered(self) -> MeasurementOperator:
        """The same operator without its bias (Phi_theta)."""
        return self.with_bias(0.0)

    def with_bias(self, mu: float) -> MeasurementOperator:
        return replace(self, spec=replace(self.spec, mu=mu))

    def digest(self) -> str:
        """Short content hash identifying the operator exactly."""
        h = hashlib.sha256()
        h.update(self.kind.encode())
        h.update(np.float64(self.mu).tobytes())
        h.update(self.generator.tobytes())
        h.update(self.theta.tobytes())
        return h.hexdigest()[:16]


def make_circulant(
    b,
    theta,
    mu: float = 0.0,
    *,
    sigma: float = 1.0,
    subgauss_norm: float | None = None,
    seed: int = 0,
) -> MeasurementOperator:
    """Build A = mu*1 + Phi_theta(b) with Phi[k, j] = b[(j - k) mod N]."""
    spec = CirculantSpec(b=b, theta=theta, mu=mu)
    return MeasurementOperator(
        kind="circulant",
        spec=spec,
        sigma=sigma,
        subgauss_norm=sigma if subgauss_norm is None else subgauss_norm,
        seed=seed,
    )


def make_toeplitz(
    c,
    theta,
    mu: float = 0.0,
    *,
    n: int | None = None,
    sigma: float = 1.0,
    subgauss_norm: float | None = None,
    seed: int = 0,
) -> MeasurementOperator:
    """Build A = mu*1 + T_theta(c) with T[k, j] = c_{j - k}."""
    c_arr = np.asarray(c, dtype=np.float64)
    if n is not None and c_arr.size != 2 * n - 1:
        raise OperatorError(
            f"Toeplitz generator for N={n} must have length {2 * n - 1}, got {c_arr.size}"
        )
    spec = ToeplitzSpec(c=c_arr, theta=theta, mu=mu)
    return MeasurementOperator(
        kind="toeplitz",
        spec=spec,
        sigma=sigma,
        subgauss_norm=sigma if subgauss_norm is None else subgauss_norm,
        seed=seed,
    )


def embed_toeplitz_in_circulant(c) -> CirculantSpec:
    """
    Embed T(c) as the top-left N x N block of a (2N-1)-dimensional circulant.

    The circulant generator is [c_0, ..., c_{N-1}, c_{-N+1}, ..., c_{-1}].
    All 2N-1 rows are selected and the bias is zero.
    """
    c_arr = _as_generator(c)
    if c_arr.size % 2 == 0:
        raise OperatorError(
            f"Toeplitz generator must have odd length 2N-1, got {c_arr.size}"
        )
    n = (c_arr.size + 1) // 2
    g = np.concatenate([c_arr[n - 1 :], c_arr[: n - 1]])
    return CirculantSpec(b=g, theta=np.arange(2 * n - 1), mu=0.0)


# ============================================================================
# Fast path
# ============================================================================


def _next_pow2(k: int) -> int:
    return 1 << max(k - 1, 0).bit_length()


def cyclic_convolve(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """
    Cyclic convolution (a * b)[k] = sum_j a[(k - j) mod n] b[j].

    Computed as an exact linear convolution on a zero-padded power-of-two FFT
    grid, then folded back onto length n.
    """
    n = a.size
    length = 2 * n - 1
    nfft = _next_pow2(length)
    lin = np.fft.irfft(np.fft.rfft(a, nfft) * np.fft.rfft(b, nfft), nfft)[:length]
    out = lin[:n].copy()
    out[: n - 1] += lin[n:length]
    return out


def _circulant_generator(op: MeasurementOperator) -> np.ndarray:
    if op.kind == "circulant":
        return op.spec.b
    return embed_toeplitz_in_circulant(op.spec.c).b


def _check_length(vec, expected: int, what: str) -> np.ndarray:
    arr = np.asarray(vec, dtype=np.float64)
    if arr.ndim != 1 or arr.size != expected:
        raise OperatorError(
            f"{what} must have length {expected}, got shape {arr.shape}"
        )
    return arr


def apply(op: MeasurementOperator, x, method: ApplyMethod = "fft") -> np.ndarray:
    """y = A x, rows ordered by theta."""
    x = _check_length(x, op.n, "x")
    if method == "dense":
        return to_dense(op) @ x
    g = _circulant_generator(op)
    big = g.size
    xp = np.zeros(big)
    xp[: op.n] = x
    # Phi[k, j] = g[(j - k) mod n] is convolution with the reversed generator
    g_rev = np.roll(g[::-1], 1)
    full = cyclic_convolve(g_rev, xp)
    return full[op.theta] + op.mu * x.sum()


def apply_adjoint(op: MeasurementOperator, v, method: ApplyMethod = "fft") -> np.ndarray:
    """A^T v for v indexed by the selected rows."""
    v = _check_length(v, op.m, "v")
    if method == "dense":
        return to_dense(op).T @ v
    g = _circulant_generator(op)
    u = np.zeros(g.size)
    u[op.theta] = v
    full = cyclic_convolve(g, u)
    return full[: op.n] + op.mu * v.sum()


def to_dense(op: MeasurementOperator, budget_bytes: int | None = None) -> np.ndarray:
    """Materialize the M x N matrix from the defining formulas."""
    budget = get_settings().dense_budget_bytes if budget_bytes is None else budget_bytes
    needed = op.m * op.n * 8
    if needed > budget:
        raise DenseBudgetError(
            f"dense {op.m}x{op.n} operator needs {needed} bytes, budget is {budget}"
        )
    k = op.theta[:, None]
    j = np.arange(op.n)[None, :]
    if op.kind == "circulant":
        mat = op.spec.b[(j - k) % op.n]
    else:
        mat = op.spec.c[(j - k) + (op.n - 1)]
    logger.debug(f"materialized dense {op.kind} operator {op.m}x{op.n}")
    return mat + op.mu
