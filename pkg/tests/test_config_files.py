"""Unit tests for key=value parsing and experiment configuration loading."""

from __future__ import annotations

import pytest
from pydantic import ValidationError

from src.errors import ManifestError
from tools.models import (
    OperatorManifestHeader,
    load_experiment_config,
    load_proof_audit_config,
    parse_int_list,
    parse_key_value_text,
)


class TestKeyValueText:
    """Test the key=value line format."""

    def test_comments_and_blanks(self):
        """Comments and blank lines are skipped."""
        text = "n=10\n\n# comment\ns_values = 1,2  # trailing\n"
        assert parse_key_value_text(text) == {"n": "10", "s_values": "1,2"}

    def test_duplicate_key(self):
        """A key may appear only once."""
        with pytest.raises(ManifestError, match="duplicate key 'n'"):
            parse_key_value_text("n=1\nn=2\n")

    def test_missing_separator(self):
        """Lines without '=' are malformed."""
        with pytest.raises(ManifestError, match="line 2"):
            parse_key_value_text("n=1\ntrials 5\n")


class TestIntList:
    """Test grid axis parsing."""

    def test_comma_list(self):
        """Comma-separated integers parse in order."""
        assert parse_int_list("5, 10,15") == (5, 10, 15)

    def test_inclusive_range(self):
        """start:stop:step ranges include the stop value."""
        assert parse_int_list("5:20:5") == (5, 10, 15, 20)
        assert parse_int_list("1:3") == (1, 2, 3)

    def test_bad_step(self):
        """A non-positive range step is rejected."""
        with pytest.raises(ManifestError, match="malformed range"):
            parse_int_list("1:5:0")


class TestExperimentConfig:
    """Test loading experiment configurations from files and flags."""

    def test_from_file(self, tmp_path):
        """An experiment configuration loads from a file."""
        path = tmp_path / "exp.txt"
        path.write_text(
            "N=12\n"
            "s_values=1:3\n"
            "m_values=6,12\n"
            "trials=3\n"
            "ensemble=rademacher(1)\n"
            "operator=toeplitz\n"
            "seed=4\n"
            "programs=bp,bp+\n"
            "tolerance_opt=1e-9\n"
            "eta=none\n"
        )
        config = load_experiment_config(path)
        assert config.n == 12
        assert config.s_values == (1, 2, 3)
        assert config.m_values == (6, 12)
        assert config.ensemble.distribution == "rademacher"
        assert config.operator_kind == "toeplitz"
        assert config.base_seed == 4
        assert config.programs == ("bp", "bp+")
        assert config.solver.tolerance_opt == 1e-9
        assert config.eta is None

    def test_overrides_win(self, tmp_path):
        """Overrides replace values from the file."""
        path = tmp_path / "exp.txt"
        path.write_text("n=12\ns_values=1\nm_values=6\ntrials=3\n")
        config = load_experiment_config(path, {"trials": 7, "n": None})
        assert config.trials == 7
        assert config.n == 12

    def test_unknown_key(self, tmp_path):
        """Unknown keys are rejected."""
        path = tmp_path / "exp.txt"
        path.write_text("n=12\nwidth=3\n")
        with pytest.raises(ManifestError, match="unknown experiment key 'width'"):
            load_experiment_config(path)

    def test_manifest_only_keys_ignored(self):
        """Bookkeeping keys written by runs are ignored on load."""
        config = load_experiment_config(
            overrides={"n": 8, "s_values": "1", "m_values": "4", "complete": "true"}
        )
        assert config.n == 8

    def test_invalid_grid(self):
        """Grid validation errors surface as manifest errors."""
        with pytest.raises(ValidationError):
            load_experiment_config(overrides={"n": 5, "s_values": "6", "m_values": "4"})


class TestProofAuditConfig:
    """Test loading proof-audit configurations."""

    def test_overrides(self):
        """Overrides alone build a configuration."""
        config = load_proof_audit_config(overrides={"n": 16, "m": 8, "seed": 3})
        assert (config.n, config.m, config.base_seed) == (16, 8, 3)

    def test_unknown_key(self):
        """Unknown keys are rejected."""
        with pytest.raises(ManifestError, match="unknown proof-audit keys"):
            load_proof_audit_config(overrides={"programs": "bp"})


class TestOperatorHeader:
    """Test the operator manifest header line."""

    def test_round_trip(self):
        """A header line parses back to the same header."""
        header = OperatorManifestHeader(
            kind="toeplitz", n=4, m=2, mu=0.1, sigma=1.5, subgauss_norm=1.5, seed=9
        )
        assert OperatorManifestHeader.from_line(header.to_line()) == header

    def test_wrong_field_count(self):
        """A header needs exactly seven fields."""
        with pytest.raises(ManifestError, match="7 fields"):
            OperatorManifestHeader.from_line("circulant 4 2")

    def test_non_numeric(self):
        """Numeric header fields must parse."""
        with pytest.raises(ManifestError, match="malformed"):
            OperatorManifestHeader.from_line("circulant four 2 1.0 1.0 1.0 0")
