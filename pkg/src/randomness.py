"""Deterministic, seedable generation of generators, row selections and binary signals.

Every draw comes from a counter-based Philox stream keyed by a base seed and a
tuple of labels (purpose, s, M, trial index, ...). Identical (base, labels)
give identical output regardless of the order in which streams are created.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator

from src.errors import SamplingError
from src.models import BinarySignal, EnsembleSpec

# Stream purposes used by the harness
GENERATOR = "generator"
SELECTION = "selection"
SIGNAL = "signal"
NOISE = "noise"


def _label_to_int(label: int | str) -> int:
    if isinstance(label, str):
        return int.from_bytes(
            hashlib.blake2b(label.encode("utf-8"), digest_size=8).digest(), "little"
        )
    return int(label)


class Seed(BaseModel):
    """Base seed plus stream labels."""

    model_config = ConfigDict(frozen=True)

    base: int = Field(default=0, ge=0, lt=2**64)
    labels: tuple[int | str, ...] = ()

    @field_validator("labels")
    @classmethod
    def _nonnegative(cls, v: tuple[int | str, ...]) -> tuple[int | str, ...]:
        for label in v:
            if isinstance(label, int) and label < 0:
                raise ValueError("integer stream labels must be nonnegative")
        return v

    def child(self, *labels: int | str) -> Seed:
        """Derive a stream with additional labels."""
        return Seed(base=self.base, labels=self.labels + tuple(labels))

    def spawn_key(self) -> tuple[int, ...]:
        return tuple(_label_to_int(label) for label in self.labels)

    def generator(self) -> np.random.Generator:
        seq = np.random.SeedSequence(self.base, spawn_key=self.spawn_key())
        return np.random.Generator(np.random.Philox(seq))


@dataclass(frozen=True)
class GeneratorDraw:
    """Centered generator entries plus the bias carried by their law."""

    values: np.ndarray
    bias: float


def sample_generator(spec: EnsembleSpec, length: int, seed: Seed) -> GeneratorDraw:
    """
    Draw i.i.d. generator entries.

    For bernoulli01 the returned values are the centered part (+-1/2) and the
    bias 1/2 is reported separately, so operators stay of the form mu*1 + Phi.
    """
    if length < 1:
        raise SamplingError("generator length must be at least 1")
    rng = seed.generator()
    if spec.distribution == "gaussian":
        values = rng.normal(0.0, spec.scale, size=length)
    else:
        signs = 2.0 * rng.integers(0, 2, size=length) - 1.0
        values = spec.sigma * signs
    return GeneratorDraw(values=values, bias=spec.mean)


def sample_selection(n: int, m: int, seed: Seed) -> np.ndarray:
    """Uniform m-subset of {0, ..., n-1} by partial Fisher-Yates, returned sorted."""
    if m < 1 or n < 1:
        raise SamplingError(f"selection needs 1 <= m <= n, got n={n}, m={m}")
    if m > n:
        raise SamplingError(f"cannot select m={m} rows out of n={n}")
    rng = seed.generator()
    perm = np.arange(n)
    for i in range(m):
        j = int(rng.integers(i, n))
        perm[i], perm[j] = perm[j], perm[i]
    return np.sort(perm[:m])


def sample_binary_signal(n: int, s: int, seed: Seed) -> BinarySignal:
    """x0 in {0,1}^n with a uniformly random support of size s."""
    if s < 0 or s > n:
        raise SamplingError(f"sparsity s={s} outside [0, {n}]")
    if s == 0:
        return BinarySignal(np.zeros(n))
    return BinarySignal.from_support(n, sample_selection(n, s, seed))


def sample_noise(m: int, eta: float, seed: Seed) -> np.ndarray:
    """Gaussian direction rescaled to exactly ||n||_2 = eta."""
    if eta < 0:
        raise SamplingError("noise level eta must be nonnegative")
    if eta == 0:
        return np.zeros(m)
    g = seed.generator().standard_normal(m)
    return g * (eta / np.linalg.norm(g))
