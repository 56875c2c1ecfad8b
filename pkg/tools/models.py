"""Pydantic models and key=value parsing for the CLI's text files."""

from __future__ import annotations

from pathlib import Path
from typing import Any, Literal

from pydantic import BaseModel, ConfigDict, Field

from src.errors import ManifestError
from src.models import ExperimentConfig, ProofAuditConfig, SolverOptions

# ============================================================================
# key=value files
# ============================================================================


def parse_key_value_text(text: str) -> dict[str, str]:
    """
    Parse 'key=value' lines; blank lines and '#' comments are skipped.

    Raises:
        ManifestError: On a line without '=' or a repeated key
    """
    out: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise ManifestError(f"line {lineno}: expected key=value, got '{raw.strip()}'")
        key = key.strip()
        if key in out:
            raise ManifestError(f"line {lineno}: duplicate key '{key}'")
        out[key] = value.strip()
    return out


def parse_key_value_file(path: Path) -> dict[str, str]:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as e:
        raise ManifestError(f"cannot read {path}: {e}") from e
    return parse_key_value_text(text)


def parse_int_list(text: str) -> tuple[int, ...]:
    """'5,10,15' or the inclusive range 'start:stop:step' (step defaults to 1)."""
    text = text.strip()
    if ":" in text:
        parts = [int(p) for p in text.split(":")]
        if len(parts) == 2:
            parts.append(1)
        if len(parts) != 3 or parts[2] <= 0:
            raise ManifestError(f"malformed range '{text}', expected start:stop[:step]")
        start, stop, step = parts
        return tuple(range(start, stop + 1, step))
    return tuple(int(p) for p in text.split(",") if p.strip())


_EXPERIMENT_ALIASES = {"operator": "operator_kind", "seed": "base_seed", "N": "n"}
_SOLVER_KEYS = set(SolverOptions.model_fields)
# written into run manifests, ignored when a manifest is replayed as a config
_MANIFEST_ONLY_KEYS = {"seed_labels", "complete", "trials_run", "trial"}


def _experiment_fields(raw: dict[str, Any]) -> dict[str, Any]:
    fields: dict[str, Any] = {}
    solver: dict[str, Any] = {}
    for key, value in raw.items():
        if value is None or key in _MANIFEST_ONLY_KEYS:
            continue
        key = _EXPERIMENT_ALIASES.get(key, key)
        if key in _SOLVER_KEYS:
            solver[key] = value
        elif key in ("s_values", "m_values") and isinstance(value, str):
            fields[key] = parse_int_list(value)
        elif key == "programs" and isinstance(value, str):
            fields[key] = tuple(p.strip() for p in value.split(",") if p.strip())
        elif key == "eta" and isinstance(value, str) and value.lower() in ("", "none"):
            fields[key] = None
        elif key in ExperimentConfig.model_fields:
            fields[key] = value
        else:
            raise ManifestError(f"unknown experiment key '{key}'")
    if solver:
        fields["solver"] = SolverOptions(**solver)
    return fields


def load_experiment_config(
    path: Path | None = None, overrides: dict[str, Any] | None = None
) -> ExperimentConfig:
    """Read a key=value experiment file (if any) and apply flag overrides on top."""
    raw: dict[str, Any] = dict(parse_key_value_file(path)) if path else {}
    raw.update({k: v for k, v in (overrides or {}).items() if v is not None})
    return ExperimentConfig(**_experiment_fields(raw))


def load_proof_audit_config(
    path: Path | None = None, overrides: dict[str, Any] | None = None
) -> ProofAuditConfig:
    raw: dict[str, Any] = dict(parse_key_value_file(path)) if path else {}
    raw.update({k: v for k, v in (overrides or {}).items() if v is not None})
    raw = {_EXPERIMENT_ALIASES.get(k, k): v for k, v in raw.items()}
    unknown = set(raw) - set(ProofAuditConfig.model_fields)
    if unknown:
        raise ManifestError(f"unknown proof-audit keys: {', '.join(sorted(unknown))}")
    return ProofAuditConfig(**raw)


# ============================================================================
# Operator manifest header
# ============================================================================


class OperatorManifestHeader(BaseModel):
    """First line of an operator manifest: 'kind N M mu sigma R seed'."""

    model_config = ConfigDict(frozen=True)

    kind: Literal["circulant", "toeplitz"]
    n: int = Field(ge=1)
    m: int = Field(ge=1)
    mu: float = Field(ge=0.0)
    sigma: float = Field(ge=0.0)
    subgauss_norm: float = Field(ge=0.0)
    seed: int = Field(ge=0)

    def to_line(self) -> str:
        return (
            f"{self.kind} {self.n} {self.m} {self.mu!r} {self.sigma!r} "
            f"{self.subgauss_norm!r} {self.seed}"
        )

    @classmethod
    def from_line(cls, line: str) -> OperatorManifestHeader:
        parts = line.split()
        if len(parts) != 7:
            raise ManifestError(
                f"operator header needs 7 fields 'kind N M mu sigma R seed', got {len(parts)}"
            )
        kind, n, m, mu, sigma, r, seed = parts
        try:
            return cls(
                kind=kind,
                n=int(n),
                m=int(m),
                mu=float(mu),
                sigma=float(sigma),
                subgauss_norm=float(r),
                seed=int(seed),
            )
        except ValueError as e:
            raise ManifestError(f"malformed operator header '{line.strip()}': {e}") from e
