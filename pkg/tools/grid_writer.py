"""Writes phase-grid results: CSV table, PGM heatmaps and the run manifest."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from loguru import logger

from src.harness import PROGRAM_ORDER, PhaseGrid
from src.models import ExperimentConfig
from tools.data_manager import write_run_manifest

CSV_HEADER = "s,M,trials,success_bp,success_ls,success_bpplus,cert_rate,mean_err_bp,mean_err_ls"
ANNOTATION_HEADER = (
    "s,M,m_required,noise_trials,radius_rate_bp,radius_rate_ls,mean_noise_bound,prior_noise_bound"
)

_PROGRAM_FILE_TAGS = {"bp": "bp", "ls": "ls", "bp+": "bpplus"}


@dataclass
class OutputPaths:
    csv: Path
    annotations: Path
    manifest: Path
    heatmaps: dict[str, Path] = field(default_factory=dict)


def _fmt(value: float, spec: str) -> str:
    return "" if math.isnan(value) else format(value, spec)


def grid_csv(grid: PhaseGrid) -> str:
    """CSV text, one row per cell in (s, M) order; columns of programs not run stay empty."""
    lines = [CSV_HEADER]
    for key in sorted(grid.cells):
        cell = grid.cells[key]
        row = [
            str(cell.s),
            str(cell.m),
            str(cell.trials),
            _fmt(cell.rate("bp"), ".6f"),
            _fmt(cell.rate("ls"), ".6f"),
            _fmt(cell.rate("bp+"), ".6f"),
            _fmt(cell.cert_rate, ".6f"),
            _fmt(cell.mean_error("bp"), ".6e"),
            _fmt(cell.mean_error("ls"), ".6e"),
        ]
        lines.append(",".join(row))
    return "\n".join(lines) + "\n"


def annotation_csv(grid: PhaseGrid) -> str:
    """
    Per-cell annotations next to grid.csv.

    m_required is the sample-complexity estimate for the cell's s. The radius
    rates count noisy trials whose certificate certified, and the two bounds
    are the structured and unstructured noise-error formulas at the run's eta.
    Noise columns stay empty for noiseless runs.
    """
    lines = [ANNOTATION_HEADER]
    for key in sorted(grid.cells):
        cell = grid.cells[key]
        row = [
            str(cell.s),
            str(cell.m),
            _fmt(grid.required_measurements(cell.s), ".6e"),
            str(cell.radius_trials),
            _fmt(cell.radius_rate("bp"), ".6f"),
            _fmt(cell.radius_rate("ls"), ".6f"),
            _fmt(cell.mean_noise_bound, ".6e"),
            _fmt(grid.prior_bound(cell.s, cell.m), ".6e"),
        ]
        lines.append(",".join(row))
    return "\n".join(lines) + "\n"


def heatmap_pgm(grid: PhaseGrid, program: str) -> bytes:
    """
    8-bit binary PGM of success rates.

    s runs along x and M along y with the origin bottom-left, so the first
    stored row is the largest M. Missing cells are black.
    """
    rates = grid.rate_matrix(program)[::-1, :]
    pixels = np.where(np.isnan(rates), 0.0, np.rint(rates * 255.0)).astype(np.uint8)
    height, width = pixels.shape
    return f"P5\n{width} {height}\n255\n".encode("ascii") + pixels.tobytes()


def manifest_entries(config: ExperimentConfig, grid: PhaseGrid | None = None) -> dict[str, object]:
    """Flattened configuration and seeds for replaying a run."""
    entries: dict[str, object] = {
        "n": config.n,
        "s_values": ",".join(str(s) for s in config.s_values),
        "m_values": ",".join(str(m) for m in config.m_values),
        "trials": config.trials,
        "ensemble": config.ensemble.label,
        "operator_kind": config.operator_kind,
        "mu": repr(config.mu),
        "programs": ",".join(config.programs),
        "eta": "none" if config.eta is None else repr(config.eta),
        "base_seed": config.base_seed,
        "seed_labels": "purpose,s,M,trial",
        "certify": str(config.certify).lower(),
        "failure_prob": repr(config.failure_prob),
        "tolerance_feas": repr(config.solver.tolerance_feas),
        "tolerance_opt": repr(config.solver.tolerance_opt),
        "max_iterations": config.solver.max_iterations,
        "success_radius": repr(config.solver.success_radius),
    }
    if grid is not None:
        entries["complete"] = str(grid.complete).lower()
        entries["trials_run"] = sum(c.trials for c in grid.cells.values())
    return entries


def emit_outputs(grid: PhaseGrid, out_dir: Path, heatmaps: bool = True) -> OutputPaths:
    """
    Write grid.csv, annotations.csv, heatmap_<program>.pgm per run program and manifest.txt.

    Raises:
        OSError: If the output directory is not writable
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    csv_path = out_dir / "grid.csv"
    csv_path.write_text(grid_csv(grid), encoding="utf-8")
    annotation_path = out_dir / "annotations.csv"
    annotation_path.write_text(annotation_csv(grid), encoding="utf-8")

    paths = OutputPaths(
        csv=csv_path, annotations=annotation_path, manifest=out_dir / "manifest.txt"
    )
    if heatmaps:
        for program in PROGRAM_ORDER:
            if program not in grid.config.programs:
                continue
            path = out_dir / f"heatmap_{_PROGRAM_FILE_TAGS[program]}.pgm"
            path.write_bytes(heatmap_pgm(grid, program))
            paths.heatmaps[program] = path
    write_run_manifest(paths.manifest, manifest_entries(grid.config, grid))
    logger.info(f"wrote {len(grid.cells)} cells to {out_dir}")
    return paths
