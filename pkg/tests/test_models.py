"""Unit tests for the shared domain models."""

from __future__ import annotations

import math

import numpy as np
import pytest
from pydantic import ValidationError

from src.errors import SamplingError
from src.models import (
    BinarySignal,
    EnsembleSpec,
    ExperimentConfig,
    ProofAuditConfig,
    SolverOutcome,
    SolverStatus,
    psi2_norm_profile,
)


class TestBinarySignal:
    """Test the 0/1 signal record."""

    def test_from_support(self):
        """from_support sets ones exactly on the given indices."""
        x = BinarySignal.from_support(5, [1, 3])
        np.testing.assert_array_equal(x.values, [0, 1, 0, 1, 0])
        assert x.support == (1, 3)
        assert x.s == 2
        assert x.n == 5

    def test_complement(self):
        """The complement swaps zeros and ones."""
        x = BinarySignal.from_support(4, [0])
        assert x.complement() == BinarySignal.from_support(4, [1, 2, 3])

    def test_rejects_non_binary(self):
        """Fractional entries are rejected."""
        with pytest.raises(SamplingError, match="0 or 1"):
            BinarySignal(np.array([0.0, 0.5]))

    def test_rejects_out_of_range_support(self):
        """Support indices must lie in [0, N)."""
        with pytest.raises(SamplingError):
            BinarySignal.from_support(3, [3])

    def test_values_read_only(self):
        """Signal values cannot be mutated in place."""
        x = BinarySignal.from_support(3, [0])
        with pytest.raises(ValueError):
            x.values[0] = 0.0


class TestEnsembleSpec:
    """Test ensemble moments and parsing."""

    def test_parse_variants(self):
        """Ensemble names parse with and without a scale."""
        assert EnsembleSpec.parse("gaussian") == EnsembleSpec()
        assert EnsembleSpec.parse("rademacher(2)").scale == 2.0
        assert EnsembleSpec.parse(" bernoulli01 ").distribution == "bernoulli01"

    def test_parse_rejects_unknown(self):
        """Unknown distributions are rejected."""
        with pytest.raises(ValueError):
            EnsembleSpec.parse("cauchy")

    def test_parse_rejects_unbalanced(self):
        """A missing closing parenthesis is malformed."""
        with pytest.raises(ValueError, match="malformed"):
            EnsembleSpec.parse("gaussian(2")

    def test_bernoulli_scale_fixed(self):
        """The 0/1 ensemble takes no scale."""
        with pytest.raises(ValidationError):
            EnsembleSpec(distribution="bernoulli01", scale=2.0)

    def test_moments(self):
        """Mean, standard deviation and Psi_2 norm per ensemble."""
        bern = EnsembleSpec(distribution="bernoulli01")
        assert (bern.mean, bern.sigma, bern.subgauss_norm) == (0.5, 0.5, 0.5)
        rad = EnsembleSpec(distribution="rademacher", scale=3.0)
        assert (rad.mean, rad.sigma, rad.subgauss_norm) == (0.0, 3.0, 3.0)
        gauss = EnsembleSpec(scale=2.0)
        assert gauss.subgauss_norm == pytest.approx(2.0 * math.sqrt(2.0 / math.pi))

    def test_label_round_trip(self):
        """Labels parse back to the same ensemble."""
        for spec in (EnsembleSpec(scale=1.5), EnsembleSpec(distribution="bernoulli01")):
            assert EnsembleSpec.parse(spec.label) == spec

    @pytest.mark.parametrize("distribution", ["gaussian", "rademacher"])
    def test_profile_supremum(self, distribution):
        """The psi_2 profile peaks at p = 1 with the reported norm."""
        spec = EnsembleSpec(distribution=distribution, scale=1.3)
        profile = psi2_norm_profile(spec, [1, 2, 3, 4, 6, 8, 10])
        assert profile[0] == pytest.approx(spec.subgauss_norm)
        assert max(profile) == pytest.approx(profile[0])

    def test_gaussian_second_moment(self):
        """At p = 2 the profile is sigma / sqrt(2)."""
        profile = psi2_norm_profile(EnsembleSpec(scale=2.0), [2])
        assert profile[0] == pytest.approx(2.0 / math.sqrt(2.0))


class TestSolverOutcome:
    """Test the solver result record."""

    def test_error_to_signal(self):
        """error_to accepts signals and plain arrays."""
        outcome = SolverOutcome(
            x_star=np.array([1.0, 0.0, 0.5]),
            status=SolverStatus.OPTIMAL,
            residual_l2=0.0,
            objective=1.5,
            iterations=3,
        )
        assert outcome.optimal
        assert outcome.error_to(BinarySignal.from_support(3, [0])) == pytest.approx(0.5)


class TestExperimentConfig:
    """Test grid validation."""

    def test_defaults(self):
        """The default grid is the N = 100 desk-scale experiment."""
        config = ExperimentConfig()
        assert config.s_values[0] == 5 and config.s_values[-1] == 100
        assert config.total_trials == 20 * 20 * 25

    def test_ensemble_from_string(self):
        """Ensembles may be given as strings."""
        config = ExperimentConfig(n=10, s_values=(1,), m_values=(5,), ensemble="rademacher")
        assert config.ensemble.distribution == "rademacher"

    def test_rejects_large_sparsity(self):
        """Every s must lie in [0, N]."""
        with pytest.raises(ValidationError, match="every s"):
            ExperimentConfig(n=10, s_values=(11,), m_values=(5,))

    def test_rejects_zero_rows(self):
        """Every M must lie in [1, N]."""
        with pytest.raises(ValidationError, match="every M"):
            ExperimentConfig(n=10, s_values=(1,), m_values=(0,))

    def test_rejects_repeated_programs(self):
        """Programs may not repeat."""
        with pytest.raises(ValidationError, match="repeat"):
            ExperimentConfig(n=10, s_values=(1,), m_values=(5,), programs=("bp", "bp"))

    def test_rejects_unknown_program(self):
        """Only bp, ls and bp+ are accepted."""
        with pytest.raises(ValidationError):
            ExperimentConfig(n=10, s_values=(1,), m_values=(5,), programs=("l1",))

    def test_frozen(self):
        """Configurations are immutable."""
        config = ExperimentConfig(n=10, s_values=(1,), m_values=(5,))
        with pytest.raises(ValidationError):
            config.n = 20


class TestProofAuditConfig:
    """Test audit size validation."""

    def test_rejects_rows_above_dimension(self):
        """M may not exceed N."""
        with pytest.raises(ValidationError):
            ProofAuditConfig(n=8, m=9)

    def test_default_ensemble(self):
        """Audits default to the Rademacher ensemble."""
        assert ProofAuditConfig().ensemble.distribution == "rademacher"
