"""CLI entry point for binsense experiments."""

from __future__ import annotations

import math
import sys
from collections.abc import Iterator
from contextlib import contextmanager
from pathlib import Path

# Add project root to Python path
project_root = Path(__file__).parent.parent
if str(project_root) not in sys.path:
    sys.path.insert(0, str(project_root))

import numpy as np
import typer
from dotenv import load_dotenv
from loguru import logger
from pydantic import ValidationError
from rich.console import Console
from rich.table import Table

from src import certificates, proof_analysis
from src.errors import BinsenseError
from src.harness import PhaseGrid, build_instance, monotonicity_report, run_phase_grid, symmetry_report
from src.models import SolverOptions, psi2_norm_profile
from src.operators import make_circulant
from src.randomness import Seed
from src.solvers import round_to_binary, solve_program
from tools import data_manager
from tools.config import get_settings
from tools.grid_writer import emit_outputs, manifest_entries
from tools.models import load_experiment_config, load_proof_audit_config

load_dotenv()
settings = get_settings()

# Configure logger
logger.remove()  # Remove default handler
logger.add(
    sys.stderr,
    format="<green>{time:HH:mm:ss}</green> | <level>{level: <8}</level> | <level>{message}</level>",
    level="INFO",
)
logger.add(
    settings.log_path,
    rotation=settings.log_rotation,
    retention=settings.log_retention,
    format="{time} | {level} | {message}",
)

app = typer.Typer(help="binsense - binary signal recovery from biased circulant/Toeplitz measurements")
console = Console()

EXIT_VALIDATION = 2
EXIT_SOLVER = 3


@contextmanager
def _exit_codes(action: str) -> Iterator[None]:
    """Map input errors to exit code 2 and anything unexpected to 1."""
    try:
        yield
    except typer.Exit:
        raise
    except (ValidationError, BinsenseError, ValueError) as e:
        console.print(f"[red]Error: {e}[/red]")
        logger.error(f"{action}: {e}")
        raise typer.Exit(code=EXIT_VALIDATION)
    except Exception as e:
        console.print(f"[red]Error: {e}[/red]")
        logger.exception(f"Failed to {action}")
        raise typer.Exit(code=1)


def _parse_floats(text: str) -> list[float]:
    return [float(v) for v in text.split(",") if v.strip()]


def _hs_flag(convention: proof_analysis.HSConvention) -> str:
    if not convention.discrepancy:
        return "[green]matches[/green]"
    if convention.matches_squared:
        return "[yellow]stated value is the squared norm[/yellow]"
    return "[yellow]mismatch[/yellow]"


_PSI2_GRID = tuple(range(1, 17))


def _noise_table(grid: PhaseGrid) -> Table:
    """Noisy-run summary: certified trials, radius hit rates and the two noise bounds per cell."""
    table = Table(
        "s", "M", "certified", "within radius (bp)", "within radius (ls)", "error bound", "unstructured bound",
        title=f"Noise (eta={grid.config.eta:g})",
    )
    for cell in grid.ordered_cells():
        table.add_row(
            str(cell.s), str(cell.m), f"{cell.radius_trials}/{cell.trials}",
            _num_text(cell.radius_rate("bp")), _num_text(cell.radius_rate("ls")),
            _num_text(cell.mean_noise_bound), _num_text(grid.prior_bound(cell.s, cell.m)),
        )
    return table


def _num_text(value: float) -> str:
    return "-" if math.isnan(value) else f"{value:.4g}"


@app.command()
def gen(
    n: int = typer.Option(..., "--n", help="Signal dimension N"),
    m: int = typer.Option(..., "--m", help="Number of measurements M"),
    s: int = typer.Option(..., "--s", help="Sparsity of the binary signal"),
    kind: str = typer.Option("circulant", "--kind", help="circulant or toeplitz"),
    mu: float = typer.Option(1.0, "--mu", help="Bias added on top of the ensemble mean"),
    ensemble: str = typer.Option("gaussian", "--ensemble", help="gaussian(a), rademacher(a) or bernoulli01"),
    seed: int = typer.Option(0, "--seed", help="Base seed"),
    trial: int = typer.Option(0, "--trial", help="Trial index used in the stream labels"),
    eta: float = typer.Option(None, "--eta", help="Exact noise norm added to y"),
    out: Path = typer.Option(Path("instance"), "--out", "-o", help="Output directory"),
):
    """
    Generate a seeded instance: operator manifest, ground-truth signal and measurements.

    Writes operator.txt, signal.txt and y.txt under --out. The same (seed, s, M,
    trial) always produces the same files.
    """
    with _exit_codes("generate instance"):
        config = load_experiment_config(
            overrides={
                "n": n,
                "s_values": str(s),
                "m_values": str(m),
                "trials": trial + 1,
                "operator_kind": kind,
                "mu": mu,
                "ensemble": ensemble,
                "base_seed": seed,
                "eta": eta,
            }
        )
        inst = build_instance(config, s, m, trial)
        op_path = data_manager.write_operator(out / "operator.txt", inst.op)
        sig_path = data_manager.write_signal(out / "signal.txt", inst.x0)
        y_path = data_manager.write_vector(out / "y.txt", inst.y)
        entries = {**manifest_entries(config), "trial": trial}
        manifest_path = data_manager.write_run_manifest(out / "manifest.txt", entries)
        profile = psi2_norm_profile(config.ensemble, _PSI2_GRID)

        table = Table("Field", "Value", title="Generated instance")
        table.add_row("kind", inst.op.kind)
        table.add_row("N x M", f"{inst.op.n} x {inst.op.m}")
        table.add_row("mu / sigma / R", f"{inst.op.mu:g} / {inst.op.sigma:g} / {inst.op.subgauss_norm:.4g}")
        table.add_row("s", str(inst.x0.s))
        table.add_row("ensemble", config.ensemble.label)
        table.add_row("max p^-1/2 ||X||_p, p=1..16", f"{max(profile):.4g}")
        table.add_row("operator digest", inst.op.digest())
        console.print(table)
        console.print(f"[green]✓ Wrote {op_path}, {sig_path}, {y_path}, {manifest_path}[/green]")


@app.command()
def solve(
    operator: Path = typer.Option(..., "--operator", help="Operator manifest"),
    y: Path = typer.Option(..., "--y", help="Measurement vector file"),
    program: str = typer.Option("bp", "--program", "-p", help="bp, ls or bp+"),
    tol: float = typer.Option(1e-8, "--tol", help="Feasibility and optimality tolerance"),
    max_iter: int = typer.Option(100_000, "--max-iter", help="Iteration / pivot limit"),
    signal: Path = typer.Option(None, "--signal", help="Ground truth, to report the l2 error"),
    out: Path = typer.Option(None, "--out", "-o", help="Write the outcome block to this file"),
):
    """
    Solve one recovery program and print the outcome block.

    Exits with code 3 when the solver does not reach an optimal status.
    """
    with _exit_codes("solve"):
        op = data_manager.read_operator(operator)
        yv = data_manager.read_vector(y)
        opts = SolverOptions(tolerance_feas=tol, tolerance_opt=tol, max_iterations=max_iter)
        with console.status(f"[bold blue]Solving ({program}) on {op.m}x{op.n}..."):
            outcome = solve_program(program, op, yv, opts)
        rounded = round_to_binary(outcome.x_star, op, yv, opts)

        lines = [
            f"status={outcome.status}",
            f"objective={outcome.objective!r}",
            f"residual={outcome.residual_l2!r}",
            f"iterations={outcome.iterations}",
            f"rounded_consistent={str(rounded.consistent).lower()}",
        ]
        if signal is not None:
            x0 = data_manager.read_signal(signal)
            lines.append(f"error_l2={outcome.error_to(x0)!r}")
        lines.append(f"x_star={data_manager.format_vector(outcome.x_star)}")
        block = "\n".join(lines) + "\n"
        if out is not None:
            out.parent.mkdir(parents=True, exist_ok=True)
            out.write_text(block, encoding="utf-8")
            console.print(f"[green]✓ Wrote outcome to {out}[/green]")
        console.print(block, end="", markup=False, highlight=False, soft_wrap=True)

        if not outcome.optimal:
            console.print(f"[red]Solver ended with status {outcome.status}[/red]")
            raise typer.Exit(code=EXIT_SOLVER)


@app.command()
def certify(
    operator: Path = typer.Option(..., "--operator", help="Operator manifest"),
    signal: Path = typer.Option(..., "--signal", help="Binary signal file"),
    etas: str = typer.Option("0.1,1", "--eta", help="Comma-separated noise levels"),
    lp: bool = typer.Option(False, "--lp", help="Also search for a certificate by LP"),
    eps: float = typer.Option(0.1, "--eps", help="Failure probability for the sample-complexity estimates"),
):
    """
    Build the analytic dual certificate and report its margins and noise radii.

    The radius uses the observed margin t_actual; the structured error bound is shown
    next to it for comparison.
    """
    with _exit_codes("certify"):
        op = data_manager.read_operator(operator)
        x0 = data_manager.read_signal(signal)
        cert = certificates.build_certificate(op, x0)

        table = Table("Quantity", "Value", title="Analytic certificate")
        table.add_row("verified (t_target)", "[green]yes[/green]" if cert.verified else "[yellow]no[/yellow]")
        table.add_row("certifies (t_actual > 0)", "[green]yes[/green]" if cert.certifies else "[yellow]no[/yellow]")
        table.add_row("rho", f"{cert.rho:.6g}")
        table.add_row("t_target", f"{cert.t_target:.6g}")
        table.add_row("t_actual", f"{cert.t_actual:.6g}")
        table.add_row("r = ||nu||_2", f"{cert.r:.6g}")
        table.add_row("r^2 a-priori bound", f"{cert.r_squared_bound:.6g}")
        console.print(table)

        noise = Table("eta", "certified radius", "error bound", "unstructured bound", title="Noise radii")
        for eta in _parse_floats(etas):
            radius = (
                f"{certificates.certified_noise_radius(cert, eta):.6g}" if cert.certifies else "n/a"
            )
            bound = certificates.noise_error_bound(x0.s, op.n, op.m, op.sigma, op.mu, eta)
            prior = certificates.prior_noise_bound(x0.s, op.n, op.m, op.sigma, op.mu, eta)
            noise.add_row(f"{eta:g}", radius, f"{bound:.6g}", f"{prior:.6g}")
        console.print(noise)

        needs = Table("Requirement", "Value", title=f"Sample complexity (eps={eps:g})")
        needs.add_row("M (this operator)", str(op.m))
        needs.add_row(
            "exact recovery",
            f"{certificates.measurement_requirement(x0.s, op.n, op.mu, op.sigma, op.subgauss_norm, eps):.4g}",
        )
        needs.add_row(
            "noisy least squares",
            f"{certificates.noise_measurement_requirement(op.subgauss_norm, op.sigma, eps):.4g}",
        )
        console.print(needs)

        if lp:
            with console.status("[bold blue]Searching certificate by LP..."):
                found = certificates.search_certificate_lp(op, x0.support)
            if found is None:
                console.print("[yellow]LP search: no certificate (t_best <= tolerance)[/yellow]")
            else:
                console.print(f"[green]LP search: t_best={found.t_best:.6g}[/green]")


@app.command()
def phase(
    config: Path = typer.Option(None, "--config", "-c", help="key=value experiment file"),
    n: int = typer.Option(None, "--n", help="Signal dimension N"),
    s_values: str = typer.Option(None, "--s-values", help="'5,10' or 'start:stop:step'"),
    m_values: str = typer.Option(None, "--m-values", help="'5,10' or 'start:stop:step'"),
    trials: int = typer.Option(None, "--trials", help="Trials per cell"),
    ensemble: str = typer.Option(None, "--ensemble", help="gaussian(a), rademacher(a) or bernoulli01"),
    kind: str = typer.Option(None, "--kind", help="circulant or toeplitz"),
    mu: float = typer.Option(None, "--mu", help="Bias on top of the ensemble mean"),
    programs: str = typer.Option(None, "--programs", help="Comma-separated subset of bp,ls,bp+"),
    eta: float = typer.Option(None, "--eta", help="Exact noise norm"),
    seed: int = typer.Option(None, "--seed", help="Base seed"),
    threads: int = typer.Option(None, "--threads", help="Worker processes (default BINSENSE_THREADS)"),
    out: Path = typer.Option(None, "--out", "-o", help="Output directory"),
):
    """
    Run a phase-transition grid and write grid.csv, annotations.csv, heatmaps and manifest.txt.

    Flags override keys of --config. Interrupting with Ctrl-C still writes the
    trials finished so far, with complete=false in the manifest.
    """
    with _exit_codes("run phase grid"):
        cfg = load_experiment_config(
            config,
            overrides={
                "n": n,
                "s_values": s_values,
                "m_values": m_values,
                "trials": trials,
                "ensemble": ensemble,
                "operator_kind": kind,
                "mu": mu,
                "programs": programs,
                "eta": eta,
                "base_seed": seed,
            },
        )
        out_dir = out or settings.runs_dir / "phase"
        console.print(
            f"[bold]Phase grid:[/bold] N={cfg.n}, {len(cfg.s_values)}x{len(cfg.m_values)} cells, "
            f"{cfg.trials} trials, {cfg.operator_kind}, {cfg.ensemble.label}, mu={cfg.mu:g}"
        )
        with console.status(f"[bold blue]Running {cfg.total_trials} trials..."):
            grid = run_phase_grid(cfg, threads=threads)
        paths = emit_outputs(grid, out_dir)

        table = Table("Program", "Mean rate", "Symmetry violations", "Monotonicity violations", title="Summary")
        for program in cfg.programs:
            rates = grid.rate_matrix(program)
            sym = symmetry_report(grid, program)
            mono = monotonicity_report(grid, program)
            mean_rate = float(np.nanmean(rates)) if np.any(~np.isnan(rates)) else math.nan
            table.add_row(
                program,
                f"{mean_rate:.3f}",
                f"{sum(not c.ok for c in sym)}/{len(sym)}",
                f"{sum(not c.ok for c in mono)}/{len(mono)}",
            )
        console.print(table)
        if cfg.eta is not None:
            console.print(_noise_table(grid))
        console.print(f"[green]✓ Wrote {paths.csv}[/green]")
        console.print(f"  {paths.annotations}")
        for path in paths.heatmaps.values():
            console.print(f"  {path}")
        console.print(f"  {paths.manifest}")

        if not grid.complete:
            console.print("[yellow]Grid incomplete (interrupted); partial results written[/yellow]")
            raise typer.Exit(code=130)


@app.command("validate-proof")
def validate_proof(
    config: Path = typer.Option(None, "--config", "-c", help="key=value audit file"),
    n: int = typer.Option(None, "--n", help="Dimension N (at most the validator cap)"),
    m: int = typer.Option(None, "--m", help="Number of selected rows M"),
    s: int = typer.Option(None, "--s", help="Support size"),
    ensemble: str = typer.Option(None, "--ensemble", help="gaussian(a), rademacher(a) or bernoulli01"),
    seed: int = typer.Option(None, "--seed", help="Base seed"),
    trials: int = typer.Option(None, "--trials", help="Generator draws for the expectation checks"),
):
    """
    Audit the quadratic-form representers, their norm bounds and the expectation formulas.

    Exits with code 2 if any exactness, bound or expectation check fails.
    Hilbert-Schmidt convention mismatches are reported but do not fail the audit.
    """
    with _exit_codes("validate proof"):
        cfg = load_proof_audit_config(
            config,
            overrides={"n": n, "m": m, "s": s, "ensemble": ensemble, "base_seed": seed, "trials": trials},
        )
        inst = proof_analysis.audit_instance(cfg)
        draws = proof_analysis.generator_draws(
            cfg.ensemble, cfg.n, cfg.representer_draws, Seed(base=cfg.base_seed, labels=("representer",))
        )
        failures = 0

        table = Table(
            "Quantity", "i", "Exactness", "op norm", "Gershgorin", "Stated bound", "HS^2", "Pass",
            title=f"Representers (N={cfg.n}, M={cfg.m}, s={cfg.s})",
        )
        for i in inst.indices:
            for r in proof_analysis.representer_report(cfg.n, inst.theta, inst.support, int(i), draws):
                ok = r.relative_error <= 1e-9 and r.bounds_hold
                failures += not ok
                table.add_row(
                    r.name, str(r.i), f"{r.relative_error:.1e}", f"{r.op_norm:.4g}",
                    f"{r.gershgorin_bound:.4g}", f"{r.stated_bound_op:.4g}",
                    f"{r.hs_norm_squared:.4g}", "[green]✓[/green]" if ok else "[red]✗[/red]",
                )
        counting = proof_analysis.counting_lemma(cfg.n, inst.theta, inst.support)
        failures += not counting.holds
        table.add_row(
            "counting", "-", "-", f"{counting.row_sums.max(initial=0):.4g}", "-",
            str(counting.bound), "-", "[green]✓[/green]" if counting.holds else "[red]✗[/red]",
        )
        console.print(table)

        hs = Table("Matrix", "||.||_HS", "||.||_HS^2", "Stated", "Flag", title="Hilbert-Schmidt conventions")
        for c in proof_analysis.hs_conventions(cfg.n, inst.theta, inst.support, int(inst.indices[0])):
            hs.add_row(
                c.name, f"{c.hs_norm:.6g}", f"{c.hs_norm_squared:.6g}", f"{c.claimed:.6g}", _hs_flag(c)
            )
        console.print(hs)

        with console.status(f"[bold blue]Sampling {cfg.trials} generator draws..."):
            reports = proof_analysis.concentration_sweep(cfg)
        exp = Table("Quantity", "i", "Formula", "Empirical", "z", "Tail 2sd", "Tail 3sd", title="Expectations")
        for r in reports:
            exp.add_row(
                r.quantity, "-" if r.i is None else str(r.i), f"{r.formula_value:.6g}",
                f"{r.empirical_mean:.6g}", f"{r.z_score:.2f}", f"{r.tail_2sd:.4f}", f"{r.tail_3sd:.4f}",
            )
        console.print(exp)
        op = make_circulant(np.zeros(cfg.n), inst.theta, sigma=cfg.ensemble.sigma)
        brackets_ok = all(
            proof_analysis.expected_x3(op, inst.support, int(i)).bracketed for i in inst.indices
        )
        within = sum(r.within(4.0) for r in reports) / len(reports)
        failures += not brackets_ok
        failures += within < 0.95
        console.print(
            f"\n[bold]Expectation checks:[/bold] {within:.1%} within 4 standard errors, "
            f"brackets {'hold' if brackets_ok else 'violated'}"
        )

        if failures:
            console.print(f"[red]✗ {failures} check(s) failed[/red]")
            raise typer.Exit(code=EXIT_VALIDATION)
        console.print("[green]✓ All proof checks passed[/green]")


if __name__ == "__main__":
    app()
