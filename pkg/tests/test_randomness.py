"""Unit tests for seeded sampling of generators, selections, signals and noise."""

from __future__ import annotations

import numpy as np
import pytest
from pydantic import ValidationError

from src.errors import SamplingError
from src.models import EnsembleSpec
from src.randomness import (
    Seed,
    sample_binary_signal,
    sample_generator,
    sample_noise,
    sample_selection,
)


class TestSeed:
    """Test stream derivation."""

    def test_same_labels_same_stream(self):
        """Labels given at once or via child produce the same stream."""
        a = Seed(base=7, labels=("generator", 3, 10, 0)).generator().standard_normal(5)
        b = Seed(base=7).child("generator", 3, 10, 0).generator().standard_normal(5)
        np.testing.assert_array_equal(a, b)

    def test_different_labels_differ(self):
        """Different trial labels give different streams."""
        a = Seed(base=7, labels=("generator", 0)).generator().standard_normal(5)
        b = Seed(base=7, labels=("generator", 1)).generator().standard_normal(5)
        assert not np.array_equal(a, b)

    def test_creation_order_irrelevant(self):
        """A stream does not depend on which streams were created before it."""
        base = Seed(base=1)
        first = base.child("signal").generator().integers(0, 1000, 10)
        base.child("noise").generator().standard_normal(100)
        again = base.child("signal").generator().integers(0, 1000, 10)
        np.testing.assert_array_equal(first, again)

    def test_rejects_negative_labels(self):
        """Integer labels must be nonnegative."""
        with pytest.raises(ValidationError):
            Seed(base=0, labels=(-1,))

    def test_rejects_negative_base(self):
        """The base seed must be nonnegative."""
        with pytest.raises(ValidationError):
            Seed(base=-3)

    def test_streams_uncorrelated(self):
        """Sample correlation of two labelled streams stays within 4/sqrt(n)."""
        n = 100_000
        a = Seed(base=0, labels=("a",)).generator().standard_normal(n)
        b = Seed(base=0, labels=("b",)).generator().standard_normal(n)
        assert abs(np.corrcoef(a, b)[0, 1]) < 4.0 / np.sqrt(n)


class TestGenerator:
    """Test generator draws per ensemble."""

    def test_rademacher_entries(self):
        """Rademacher draws are +-1 with no bias."""
        draw = sample_generator(EnsembleSpec(distribution="rademacher"), 200, Seed(base=2))
        assert set(np.unique(draw.values)) <= {-1.0, 1.0}
        assert draw.bias == 0.0

    def test_rademacher_scale(self):
        """Rademacher draws take the configured magnitude."""
        spec = EnsembleSpec(distribution="rademacher", scale=2.5)
        draw = sample_generator(spec, 50, Seed(base=2))
        np.testing.assert_array_equal(np.abs(draw.values), 2.5)

    def test_bernoulli_split(self):
        """0/1 entries are reported as bias 1/2 plus a +-1/2 part."""
        draw = sample_generator(EnsembleSpec(distribution="bernoulli01"), 200, Seed(base=2))
        assert set(np.unique(draw.values)) <= {-0.5, 0.5}
        assert draw.bias == 0.5
        assert set(np.unique(draw.values + draw.bias)) <= {0.0, 1.0}

    def test_gaussian_moments(self):
        """Gaussian draws have the configured mean and scale."""
        spec = EnsembleSpec(distribution="gaussian", scale=2.0)
        draw = sample_generator(spec, 100_000, Seed(base=9))
        assert abs(draw.values.mean()) < 4 * 2.0 / np.sqrt(100_000)
        assert abs(draw.values.std() - 2.0) < 0.05

    def test_deterministic(self):
        """The same seed produces the same generator."""
        spec = EnsembleSpec()
        a = sample_generator(spec, 30, Seed(base=5, labels=("generator",)))
        b = sample_generator(spec, 30, Seed(base=5, labels=("generator",)))
        np.testing.assert_array_equal(a.values, b.values)

    def test_rejects_empty(self):
        """A zero-length generator is rejected."""
        with pytest.raises(SamplingError):
            sample_generator(EnsembleSpec(), 0, Seed())


class TestSelection:
    """Test uniform row selection."""

    def test_sorted_distinct(self):
        """Selections are sorted and distinct."""
        theta = sample_selection(50, 20, Seed(base=3))
        assert theta.size == 20
        assert np.all(np.diff(theta) > 0)
        assert theta.min() >= 0 and theta.max() < 50

    def test_full_selection(self):
        """Selecting all N rows returns every index."""
        np.testing.assert_array_equal(sample_selection(8, 8, Seed(base=3)), np.arange(8))

    def test_reproducible(self):
        """The same seed selects the same rows."""
        a = sample_selection(100, 10, Seed(base=4, labels=("selection", 1)))
        b = sample_selection(100, 10, Seed(base=4, labels=("selection", 1)))
        np.testing.assert_array_equal(a, b)

    def test_uniform_inclusion(self):
        """Each index is selected with probability m/n, within 4 standard errors."""
        n, m, draws = 20, 5, 20_000
        counts = np.zeros(n)
        for t in range(draws):
            counts[sample_selection(n, m, Seed(base=0, labels=(t,)))] += 1
        p = m / n
        se = np.sqrt(p * (1 - p) / draws)
        assert np.all(np.abs(counts / draws - p) < 4 * se)

    @pytest.mark.parametrize("n,m", [(5, 6), (5, 0), (0, 0)])
    def test_rejects_bad_sizes(self, n, m):
        """M must lie in [1, N]."""
        with pytest.raises(SamplingError):
            sample_selection(n, m, Seed())


class TestSignalAndNoise:
    """Test binary signals and the noise draw."""

    def test_empty_support(self):
        """s = 0 gives the zero signal."""
        x = sample_binary_signal(10, 0, Seed())
        assert x.s == 0
        np.testing.assert_array_equal(x.values, 0.0)

    def test_full_support(self):
        """s = N gives the all-ones signal."""
        x = sample_binary_signal(10, 10, Seed())
        np.testing.assert_array_equal(x.values, 1.0)

    def test_sparsity(self):
        """The signal has exactly s ones."""
        x = sample_binary_signal(8, 3, Seed(base=1))
        assert x.s == 3
        assert len(x.support) == 3

    def test_rejects_large_sparsity(self):
        """s may not exceed N."""
        with pytest.raises(SamplingError):
            sample_binary_signal(4, 5, Seed())

    def test_noise_norm_is_exact(self):
        """The noise vector is rescaled to norm eta exactly."""
        noise = sample_noise(30, 0.3, Seed(base=8))
        assert np.linalg.norm(noise) == pytest.approx(0.3, rel=1e-12)

    def test_zero_noise(self):
        """eta = 0 gives the zero vector."""
        np.testing.assert_array_equal(sample_noise(4, 0.0, Seed()), 0.0)

    def test_negative_noise_rejected(self):
        """A negative noise level is rejected."""
        with pytest.raises(SamplingError):
            sample_noise(4, -1.0, Seed())
