"""Reads and writes the plain-text files exchanged by the CLI commands."""

from __future__ import annotations

from pathlib import Path

import numpy as np
from loguru import logger

from src.errors import ManifestError
from src.models import BinarySignal
from src.operators import MeasurementOperator, make_circulant, make_toeplitz
from tools.models import OperatorManifestHeader, parse_key_value_file


def format_vector(values) -> str:
    """Whitespace-separated shortest round-trip decimals."""
    return " ".join(repr(float(v)) for v in np.asarray(values, dtype=np.float64))


def parse_vector(text: str) -> np.ndarray:
    try:
        return np.array([float(tok) for tok in text.split()], dtype=np.float64)
    except ValueError as e:
        raise ManifestError(f"malformed vector: {e}") from e


def write_vector(path: Path, values) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(format_vector(values) + "\n", encoding="utf-8")
    logger.debug(f"wrote vector of length {np.size(values)} to {path}")
    return path


def read_vector(path: Path) -> np.ndarray:
    try:
        return parse_vector(Path(path).read_text(encoding="utf-8"))
    except OSError as e:
        raise ManifestError(f"cannot read {path}: {e}") from e


def write_signal(path: Path, signal: BinarySignal) -> Path:
    """Signals are stored as a line of 0/1 integers."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(" ".join(str(int(v)) for v in signal.values) + "\n", encoding="utf-8")
    return path


def read_signal(path: Path) -> BinarySignal:
    return BinarySignal(read_vector(path))


# ============================================================================
# Operator manifests
# ============================================================================


def format_operator(op: MeasurementOperator) -> str:
    """Header line, generator line, theta line."""
    header = OperatorManifestHeader(
        kind=op.kind,
        n=op.n,
        m=op.m,
        mu=op.mu,
        sigma=op.sigma,
        subgauss_norm=op.subgauss_norm,
        seed=op.seed,
    )
    theta = " ".join(str(int(k)) for k in op.theta)
    return f"{header.to_line()}\n{format_vector(op.generator)}\n{theta}\n"


def parse_operator(text: str) -> MeasurementOperator:
    """
    Rebuild an operator from its manifest text.

    Raises:
        ManifestError: If the manifest is truncated or its counts disagree
    """
    lines = [line for line in text.splitlines() if line.strip()]
    if len(lines) != 3:
        raise ManifestError(f"operator manifest needs 3 non-empty lines, got {len(lines)}")
    header = OperatorManifestHeader.from_line(lines[0])
    generator = parse_vector(lines[1])
    try:
        theta = [int(tok) for tok in lines[2].split()]
    except ValueError as e:
        raise ManifestError(f"malformed theta line: {e}") from e
    if len(theta) != header.m:
        raise ManifestError(f"header says M={header.m} but theta has {len(theta)} entries")

    make = make_circulant if header.kind == "circulant" else make_toeplitz
    op = make(
        generator,
        theta,
        header.mu,
        sigma=header.sigma,
        subgauss_norm=header.subgauss_norm,
        seed=header.seed,
    )
    if op.n != header.n:
        raise ManifestError(f"header says N={header.n} but the generator implies N={op.n}")
    return op


def write_operator(path: Path, op: MeasurementOperator) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(format_operator(op), encoding="utf-8")
    logger.debug(f"wrote {op.kind} operator {op.m}x{op.n} ({op.digest()}) to {path}")
    return path


def read_operator(path: Path) -> MeasurementOperator:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as e:
        raise ManifestError(f"cannot read {path}: {e}") from e
    return parse_operator(text)


# ============================================================================
# Run manifests
# ============================================================================


def write_run_manifest(path: Path, entries: dict[str, object]) -> Path:
    """key=value lines in insertion order."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = [f"{key}={value}" for key, value in entries.items()]
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


def read_run_manifest(path: Path) -> dict[str, str]:
    return parse_key_value_file(path)
