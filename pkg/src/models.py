"""Shared domain types: binary signals, generator ensembles, solver records."""

from __future__ import annotations

import math
import sys
from collections.abc import Iterable
from dataclasses import dataclass, field
from enum import Enum
from typing import Literal

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from src.errors import SamplingError

if sys.version_info >= (3, 11):
    from enum import StrEnum
else:  # backport of enum.StrEnum for Python 3.10

    class StrEnum(str, Enum):
        __str__ = str.__str__
        __format__ = str.__format__

        @staticmethod
        def _generate_next_value_(name, start, count, last_values):
            return name.lower()

# ============================================================================
# Binary signals
# ============================================================================


@dataclass(frozen=True, eq=False)
class BinarySignal:
    """A length-N 0/1 vector together with its support bookkeeping."""

    values: np.ndarray

    def __post_init__(self) -> None:
        arr = np.asarray(self.values, dtype=np.float64).copy()
        if arr.ndim != 1:
            raise SamplingError(f"binary signal must be 1-D, got shape {arr.shape}")
        if not np.all((arr == 0.0) | (arr == 1.0)):
            raise SamplingError("binary signal entries must be 0 or 1")
        arr.setflags(write=False)
        object.__setattr__(self, "values", arr)

    @classmethod
    def from_support(cls, n: int, support: Iterable[int]) -> BinarySignal:
        """Build the indicator vector 1_S of length n."""
        idx = np.fromiter(support, dtype=np.int64)
        if idx.size and (idx.min() < 0 or idx.max() >= n):
            raise SamplingError(f"support index out of range for n={n}")
        values = np.zeros(n)
        values[idx] = 1.0
        return cls(values)

    @property
    def n(self) -> int:
        return int(self.values.size)

    @property
    def support(self) -> tuple[int, ...]:
        return tuple(int(i) for i in np.flatnonzero(self.values))

    @property
    def s(self) -> int:
        return int(np.count_nonzero(self.values))

    def complement(self) -> BinarySignal:
        """Return 1 - x."""
        return BinarySignal(1.0 - self.values)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, BinarySignal):
            return NotImplemented
        return bool(np.array_equal(self.values, other.values))

    __hash__ = None  # type: ignore[assignment]

    def __repr__(self) -> str:
        return f"BinarySignal(n={self.n}, support={list(self.support)})"


# ============================================================================
# Generator ensembles
# ============================================================================


class EnsembleSpec(BaseModel):
    """
    Law of the i.i.d. generator entries.

    gaussian(scale) and rademacher(scale) are centered. bernoulli01 draws 0/1
    entries, modelled as a bias of 1/2 plus a centered +-1/2 Rademacher part.
    """

    model_config = ConfigDict(frozen=True)

    distribution: Literal["gaussian", "rademacher", "bernoulli01"] = "gaussian"
    scale: float = Field(default=1.0, gt=0.0)

    @model_validator(mode="after")
    def _check_scale(self) -> EnsembleSpec:
        if self.distribution == "bernoulli01" and self.scale != 1.0:
            raise ValueError("bernoulli01 has a fixed law; scale must be 1")
        return self

    @property
    def mean(self) -> float:
        return 0.5 if self.distribution == "bernoulli01" else 0.0

    @property
    def sigma(self) -> float:
        """Standard deviation of one entry."""
        return 0.5 if self.distribution == "bernoulli01" else self.scale

    @property
    def subgauss_norm(self) -> float:
        """Psi_2 norm sup_p p^{-1/2} E(|X - mean|^p)^{1/p} of the centered part."""
        if self.distribution == "gaussian":
            # supremum attained at p = 1
            return self.scale * math.sqrt(2.0 / math.pi)
        return self.sigma

    @property
    def label(self) -> str:
        if self.distribution == "bernoulli01":
            return "bernoulli01"
        return f"{self.distribution}({self.scale!r})"

    @classmethod
    def parse(cls, text: str) -> EnsembleSpec:
        """Parse 'gaussian', 'gaussian(2.0)', 'rademacher(1)' or 'bernoulli01'."""
        text = text.strip()
        if "(" in text:
            if not text.endswith(")"):
                raise ValueError(f"malformed ensemble '{text}'")
            name, _, arg = text[:-1].partition("(")
            return cls(distribution=name.strip(), scale=float(arg))
        return cls(distribution=text)


def psi2_norm_profile(spec: EnsembleSpec, p_values: Iterable[float]) -> list[float]:
    """Evaluate p^{-1/2} E(|X|^p)^{1/p} of the centered part on a grid of p >= 1."""
    out = []
    for p in p_values:
        if spec.distribution == "gaussian":
            moment = (
                spec.scale**p
                * 2.0 ** (p / 2.0)
                * math.gamma((p + 1.0) / 2.0)
                / math.sqrt(math.pi)
            )
            out.append(p**-0.5 * moment ** (1.0 / p))
        else:
            out.append(p**-0.5 * spec.sigma)
    return out


# ============================================================================
# Solver records
# ============================================================================


class SolverOptions(BaseModel):
    """Tolerances and limits shared by the LP and least-squares solvers."""

    model_config = ConfigDict(frozen=True)

    tolerance_feas: float = Field(default=1e-8, gt=0.0)
    tolerance_opt: float = Field(default=1e-8, gt=0.0)
    max_iterations: int = Field(default=100_000, gt=0)
    success_radius: float = Field(default=1e-4, gt=0.0)


class SolverStatus(StrEnum):
    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"
    ITERATION_LIMIT = "iteration_limit"
    UNBOUNDED = "unbounded"


@dataclass
class SolverOutcome:
    """Result of one solver call."""

    x_star: np.ndarray
    status: SolverStatus
    residual_l2: float
    objective: float
    iterations: int
    duality_gap: float = math.nan
    duals: np.ndarray | None = field(default=None, repr=False)

    @property
    def optimal(self) -> bool:
        return self.status is SolverStatus.OPTIMAL

    def error_to(self, x0: BinarySignal | np.ndarray) -> float:
        """l2 distance from x_star to a ground truth vector."""
        ref = x0.values if isinstance(x0, BinarySignal) else np.asarray(x0)
        return float(np.linalg.norm(self.x_star - ref))


# ============================================================================
# Experiment configuration
# ============================================================================

ProgramName = Literal["bp", "ls", "bp+"]
OperatorKindName = Literal["circulant", "toeplitz"]


class ExperimentConfig(BaseModel):
    """One Monte-Carlo experiment over an (s, M) grid."""

    model_config = ConfigDict(frozen=True)

    n: int = Field(default=100, ge=1)
    s_values: tuple[int, ...] = tuple(range(5, 101, 5))
    m_values: tuple[int, ...] = tuple(range(5, 101, 5))
    trials: int = Field(default=25, ge=1)
    ensemble: EnsembleSpec = EnsembleSpec()
    operator_kind: OperatorKindName = "circulant"
    mu: float = Field(default=1.0, ge=0.0)
    programs: tuple[ProgramName, ...] = ("bp", "ls")
    eta: float | None = Field(default=None, ge=0.0)
    base_seed: int = Field(default=0, ge=0, lt=2**64)
    certify: bool = True
    failure_prob: float = Field(default=0.1, gt=0.0, lt=1.0)
    solver: SolverOptions = SolverOptions()

    @field_validator("ensemble", mode="before")
    @classmethod
    def _parse_ensemble(cls, v):
        return EnsembleSpec.parse(v) if isinstance(v, str) else v

    @model_validator(mode="after")
    def _check_grid(self) -> ExperimentConfig:
        if not self.s_values or not self.m_values:
            raise ValueError("s_values and m_values must be nonempty")
        if any(s < 0 or s > self.n for s in self.s_values):
            raise ValueError(f"every s must lie in [0, {self.n}]")
        if any(m < 1 or m > self.n for m in self.m_values):
            raise ValueError(f"every M must lie in [1, {self.n}]")
        if not self.programs:
            raise ValueError("at least one program must be requested")
        if len(set(self.programs)) != len(self.programs):
            raise ValueError("programs must not repeat")
        return self

    @property
    def total_trials(self) -> int:
        return len(self.s_values) * len(self.m_values) * self.trials


class ProofAuditConfig(BaseModel):
    """Instance and sample size for the proof-machinery validators."""

    model_config = ConfigDict(frozen=True)

    n: int = Field(default=32, ge=1)
    m: int = Field(default=16, ge=1)
    s: int = Field(default=3, ge=0)
    ensemble: EnsembleSpec = EnsembleSpec(distribution="rademacher")
    trials: int = Field(default=5000, ge=1)
    indices: int = Field(default=8, ge=1)
    representer_draws: int = Field(default=50, ge=1)
    base_seed: int = Field(default=0, ge=0, lt=2**64)

    @field_validator("ensemble", mode="before")
    @classmethod
    def _parse_ensemble(cls, v):
        return EnsembleSpec.parse(v) if isinstance(v, str) else v

    @model_validator(mode="after")
    def _check_sizes(self) -> ProofAuditConfig:
        if self.m > self.n:
            raise ValueError(f"M={self.m} exceeds N={self.n}")
        if self.s > self.n:
            raise ValueError(f"s={self.s} exceeds N={self.n}")
        return self
