"""Unit tests for vector, signal and operator manifest files."""

from __future__ import annotations

import numpy as np
import pytest

from src.errors import ManifestError
from src.models import BinarySignal
from src.operators import make_circulant, make_toeplitz
from tools.data_manager import (
    format_operator,
    parse_operator,
    parse_vector,
    read_operator,
    read_run_manifest,
    read_signal,
    read_vector,
    write_operator,
    write_run_manifest,
    write_signal,
    write_vector,
)


class TestVectors:
    """Test plain vector files."""

    def test_round_trip_is_exact(self, tmp_path):
        """Vectors survive a write and read bit for bit."""
        values = np.random.default_rng(0).standard_normal(50) * 1e3
        path = write_vector(tmp_path / "y.txt", values)
        np.testing.assert_array_equal(read_vector(path), values)

    def test_creates_parent_directory(self, tmp_path):
        """Writing creates missing parent directories."""
        path = write_vector(tmp_path / "a" / "b" / "y.txt", [1.0])
        assert path.exists()

    def test_malformed(self):
        """Non-numeric vector text is rejected."""
        with pytest.raises(ManifestError, match="malformed vector"):
            parse_vector("1.0 abc")

    def test_missing_file(self, tmp_path):
        """Reading a missing file raises."""
        with pytest.raises(ManifestError, match="cannot read"):
            read_vector(tmp_path / "missing.txt")

    def test_signal_format(self, tmp_path):
        """Signals are written as 0/1 integers."""
        signal = BinarySignal.from_support(4, [1, 2])
        path = write_signal(tmp_path / "signal.txt", signal)
        assert path.read_text() == "0 1 1 0\n"
        assert read_signal(path) == signal

    def test_signal_rejects_fractions(self, tmp_path):
        """Signal files must hold only 0 and 1."""
        path = tmp_path / "signal.txt"
        path.write_text("0 0.5 1\n")
        with pytest.raises(ValueError):
            read_signal(path)


class TestOperatorManifest:
    """Test operator manifests."""

    def test_circulant_round_trip(self, tmp_path):
        """A circulant manifest reloads to the same operator."""
        rng = np.random.default_rng(1)
        op = make_circulant(rng.standard_normal(9), [1, 4, 6], 1.25, sigma=1.0, seed=17)
        loaded = read_operator(write_operator(tmp_path / "operator.txt", op))
        assert loaded.digest() == op.digest()
        assert (loaded.sigma, loaded.subgauss_norm, loaded.seed) == (1.0, 1.0, 17)

    def test_toeplitz_round_trip(self, tmp_path):
        """A Toeplitz manifest reloads to the same operator."""
        rng = np.random.default_rng(2)
        op = make_toeplitz(rng.standard_normal(7), [0, 2], 0.5, n=4, sigma=2.0, subgauss_norm=2.0)
        loaded = read_operator(write_operator(tmp_path / "operator.txt", op))
        assert loaded.kind == "toeplitz"
        assert loaded.n == 4
        assert loaded.digest() == op.digest()

    def test_header_line(self):
        """The first line is the operator header."""
        op = make_circulant([1.0, 2.0, 3.0], [0, 2], 1.0, seed=5)
        lines = format_operator(op).splitlines()
        assert lines[0] == "circulant 3 2 1.0 1.0 1.0 5"
        assert lines[2] == "0 2"

    def test_truncated(self):
        """A manifest missing lines is rejected."""
        with pytest.raises(ManifestError, match="3 non-empty lines"):
            parse_operator("circulant 3 2 1.0 1.0 1.0 0\n1 2 3\n")

    def test_theta_count_mismatch(self):
        """The row list must have M entries."""
        with pytest.raises(ManifestError, match="theta has 1"):
            parse_operator("circulant 3 2 1.0 1.0 1.0 0\n1 2 3\n0\n")

    def test_dimension_mismatch(self):
        """The generator length must match the kind and N."""
        with pytest.raises(ManifestError, match="N=4"):
            parse_operator("circulant 4 1 1.0 1.0 1.0 0\n1 2 3\n0\n")

    def test_malformed_header(self):
        """A header with bad fields is rejected."""
        with pytest.raises(ManifestError, match="7 fields"):
            parse_operator("circulant 3 2\n1 2 3\n0 1\n")

    def test_unknown_kind(self):
        """Only circulant and toeplitz kinds are accepted."""
        with pytest.raises(ManifestError, match="malformed operator header"):
            parse_operator("hankel 3 1 1.0 1.0 1.0 0\n1 2 3\n0\n")


class TestRunManifest:
    """Test key=value run manifests."""

    def test_round_trip(self, tmp_path):
        """Run manifests reload to the same entries."""
        path = write_run_manifest(tmp_path / "manifest.txt", {"n": 10, "eta": "none"})
        assert path.read_text() == "n=10\neta=none\n"
        assert read_run_manifest(path) == {"n": "10", "eta": "none"}
