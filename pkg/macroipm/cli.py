"""
Command-line entry point for macro-ipm.

Usage:
    # Level-set solution and its Eulerian fields
    macroipm solve-levelset --config config/runs/cos.yaml
    macroipm reconstruct --config config/runs/cos.yaml
    macroipm diagnose --config config/runs/cos.yaml

    # Independent references
    macroipm fv-run --config config/runs/cos.yaml
    macroipm jko-flat --config config/runs/flat.yaml

    # Level-set vs finite volume gap table
    macroipm compare --config config/runs/cos.yaml

    # Any field can be overridden
    macroipm fv-run --config config/runs/flat.yaml --override fv.cfl=0.3 --out /tmp/flat

Artifacts land under --out (default <output_root>/<name>):
    levelset/   eta_checkpoint.txt, convergence.txt, graph.txt
    fields/     levelset/{rho,v,m,curves}_t<time>.csv
    fv/         rho_t<time>.csv, v_t<time>.csv, manifest.json, diagnostics.*
    jko/        trajectory.csv, reports.csv
    diagnostics/ diagnostics.txt, diagnostics.csv, regularity.csv
    compare/    gaps.csv
    provenance/ <subcommand>.json
"""

from __future__ import annotations

import csv
import functools
import json
import logging
import sys
from collections.abc import Callable
from dataclasses import replace
from pathlib import Path
from typing import Any

import click
import numpy as np
from dotenv import load_dotenv
from rich.console import Console
from rich.logging import RichHandler
from rich.markup import escape
from rich.progress import BarColumn, Progress, SpinnerColumn, TextColumn
from rich.table import Table

from .diagnostics import (
    InitialDensity,
    build_records,
    expansion_check,
    lipschitz_constant,
    log_lipschitz_modulus,
    mixing_width,
    mixing_zone_area,
    write_records,
)
from .errors import (
    ConfigValidationError,
    MacroIPMError,
    MissingArtifactError,
    SolverDivergenceError,
)
from .export import export_field, read_curves_csv, read_field, write_curves_csv
from .fv_oracle import run_fv
from .initial_data import compute_s0, dump_graph, load_graph
from .jko_flat import (
    Theta1D,
    burgers_cell_average,
    l1_gap,
    run_jko,
    write_reports_csv,
    write_trajectory_csv,
)
from .levelset import AnsatzField, read_checkpoint, solve_eta, write_checkpoint
from .provenance import ArtifactTracker, Operation
from .reconstruction import (
    DensityField,
    EulerianGrid,
    density_field,
    flux_field,
    level_curves,
    velocity_field,
)
from .run_config import RunConfig, config_hash, load_config
from .settings import get_settings

logger = logging.getLogger(__name__)

console = Console()

CURVE_LEVELS = np.linspace(-1.0, 1.0, 9)


def setup_logging(level: str) -> None:
    logging.basicConfig(
        level=level.upper(),
        format="%(message)s",
        datefmt="[%X]",
        handlers=[RichHandler(console=Console(stderr=True), show_path=False)],
        force=True,
    )
    logging.captureWarnings(True)


def _tag(t: float) -> str:
    return f"{t:.6g}"


class RunContext:
    """Resolved configuration, its hash and the output directory for one subcommand."""

    def __init__(self, config: RunConfig, out_dir: Path) -> None:
        self.config = config
        self.hash = config_hash(config)
        self.out = out_dir

    def require(self, relative: str) -> Path:
        path = self.out / relative
        if not path.exists():
            raise MissingArtifactError(f"{path} not found; run the producing subcommand first")
        return path


def run_options(func: Callable) -> Callable:
    """--config/--out/--override plus error handling shared by every subcommand."""

    @click.option("--config", "config_path", required=True, type=click.Path(path_type=Path))
    @click.option("--out", "out_dir", default=None, type=click.Path(path_type=Path))
    @click.option("--override", "overrides", multiple=True, help="dotted key=value, repeatable")
    @functools.wraps(func)
    def wrapper(config_path: Path, out_dir: Path | None, overrides: tuple[str, ...], **kwargs: Any):
        try:
            config = load_config(config_path, overrides)
            out = out_dir or config.resolve_output_dir(get_settings().output_root)
            ctx = RunContext(config, Path(out))
            logger.info("%s: %s (%s) -> %s", func.__name__, config.name, ctx.hash, ctx.out)
            return func(ctx, **kwargs)
        except MacroIPMError as e:
            console.print(f"[red]Error: {escape(str(e))}[/red]")
            sys.exit(e.exit_code)

    return wrapper


@click.group()
@click.option("--log-level", default=None, help="overrides MACROIPM_LOG_LEVEL")
def cli(log_level: str | None) -> None:
    """Entropy solutions of the macroscopic IPM equation."""
    load_dotenv(override=False)
    setup_logging(log_level or get_settings().log_level)


# ---------------------------------------------------------------------------
# Level-set solution
# ---------------------------------------------------------------------------


@cli.command("solve-levelset")
@run_options
def solve_levelset(ctx: RunContext) -> None:
    """Solve the fixed-point equation for eta and write the checkpoint."""
    cfg = ctx.config
    gamma = cfg.build_graph()
    root = ctx.out / "levelset"
    with ArtifactTracker(ctx.out, Operation.SOLVE_LEVELSET, ctx.hash) as tracker:
        s0 = compute_s0(gamma, n_quad=cfg.levelset.n_quad_s0, n_modes=cfg.levelset.n_modes)
        try:
            trajectory, report = solve_eta(
                gamma, cfg.horizon, cfg.alpha, cfg.mu, cfg.levelset, s0=s0,
                workers=get_settings().workers,
            )
        except SolverDivergenceError as e:
            if e.report is not None:
                path = root / "convergence.txt"
                path.parent.mkdir(parents=True, exist_ok=True)
                path.write_text(e.report.to_text())
                tracker.add_artifact(path)
            raise

        root.mkdir(parents=True, exist_ok=True)
        graph_path = root / "graph.txt"
        graph_path.write_text(dump_graph(gamma))
        tracker.add_artifact(graph_path)
        tracker.add_artifact(write_checkpoint(trajectory, root / "eta_checkpoint.txt", ctx.hash))
        conv = root / "convergence.txt"
        conv.write_text(report.to_text())
        tracker.add_artifact(conv)
        tracker.metrics.update(
            iterations=report.iterations,
            final_residual=report.final_residual,
            nondegeneracy=report.nondegeneracy,
        )

    table = Table(title=f"Picard iteration ({cfg.name})")
    table.add_column("k", justify="right")
    table.add_column("lambda_k", justify="right")
    table.add_column("ratio", justify="right")
    for k, lam in enumerate(report.lambdas, start=1):
        prev = report.lambdas[k - 2] if k > 1 else 0.0
        ratio = f"{lam / prev:.3f}" if prev > 0 else "-"
        table.add_row(str(k), f"{lam:.3e}", ratio)
    console.print(table)
    console.print(f"[green]Converged[/green] after {report.iterations} iterations")


def _ansatz(ctx: RunContext, tracker: ArtifactTracker) -> AnsatzField:
    checkpoint = ctx.require("levelset/eta_checkpoint.txt")
    graph = ctx.require("levelset/graph.txt")
    tracker.add_input(checkpoint)
    tracker.add_input(graph)
    trajectory, header = read_checkpoint(checkpoint)
    if header.get("config_hash") and header["config_hash"] != ctx.hash:
        logger.info("checkpoint was written under config %s", header["config_hash"])
    gamma = load_graph(graph.read_text())
    lcfg = ctx.config.levelset
    s0 = compute_s0(gamma, n_quad=lcfg.n_quad_s0, n_modes=trajectory.grid.n_modes, check=False)
    return AnsatzField(gamma, s0, trajectory)


def _levelset_grid(cfg: RunConfig) -> EulerianGrid:
    return EulerianGrid(cfg.eulerian.n_x1, cfg.eulerian.n_x2, cfg.half_height(), "nodes")


def _fv_grid(cfg: RunConfig) -> EulerianGrid:
    return EulerianGrid(cfg.fv.n_x1, cfg.fv.n_x2, cfg.fv_half_height(), "cells")


@cli.command()
@run_options
def reconstruct(ctx: RunContext) -> None:
    """Sample rho, v, m and level curves of the level-set solution at the output times."""
    cfg = ctx.config
    root = ctx.out / "fields" / "levelset"
    workers = get_settings().workers
    with ArtifactTracker(ctx.out, Operation.RECONSTRUCT, ctx.hash) as tracker:
        field = _ansatz(ctx, tracker)
        grid = _levelset_grid(cfg)
        with Progress(
            SpinnerColumn(), TextColumn("{task.description}"), BarColumn(), console=console
        ) as progress:
            task = progress.add_task("Reconstructing", total=len(cfg.output_times))
            for t in cfg.output_times:
                density = density_field(field, t, grid).with_hash(ctx.hash)
                velocity = velocity_field(field, t, grid, workers=workers).with_hash(ctx.hash)
                flux = flux_field(density, velocity).with_hash(ctx.hash)
                for name, f in (("rho", density), ("v", velocity), ("m", flux)):
                    tracker.add_artifact(export_field(f, root / f"{name}_t{_tag(t)}.csv"))
                curves = replace(level_curves(field, t, CURVE_LEVELS), config_hash=ctx.hash)
                tracker.add_artifact(write_curves_csv(curves, root / f"curves_t{_tag(t)}.csv"))
                progress.advance(task)
        tracker.metrics["times"] = list(cfg.output_times)
    console.print(f"[green]Wrote fields for {len(cfg.output_times)} times to[/green] {root}")


# ---------------------------------------------------------------------------
# References
# ---------------------------------------------------------------------------


@cli.command("fv-run")
@run_options
def fv_run(ctx: RunContext) -> None:
    """Run the finite-volume entropy scheme to every output time."""
    cfg = ctx.config
    root = ctx.out / "fv"
    with ArtifactTracker(ctx.out, Operation.FV_RUN, ctx.hash) as tracker:
        grid = _fv_grid(cfg)
        run = run_fv(cfg.build_graph(), grid, cfg.output_times, cfl=cfg.fv.cfl, mu=cfg.mu)
        files = []
        for density, velocity in zip(run.densities[1:], run.velocities[1:]):
            tag = _tag(density.time)
            rho_path = export_field(density.with_hash(ctx.hash), root / f"rho_t{tag}.csv")
            v_path = export_field(velocity.with_hash(ctx.hash), root / f"v_t{tag}.csv")
            tracker.add_artifact(rho_path)
            tracker.add_artifact(v_path)
            files.append({"time": density.time, "rho": rho_path.name, "v": v_path.name})
        if run.records:
            for path in write_records(run.records, root):
                tracker.add_artifact(path)

        manifest = {
            "config_hash": ctx.hash,
            "cfl": cfg.fv.cfl,
            "steps": run.steps,
            "mass_drift": run.mass_drift,
            "max_production": {repr(c): p for c, p in run.max_production.items()},
            "outputs": files,
        }
        manifest_path = root / "manifest.json"
        manifest_path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
        tracker.add_artifact(manifest_path)
        tracker.metrics.update(steps=run.steps, mass_drift=run.mass_drift)

    table = Table(title=f"Finite volume ({cfg.name})")
    table.add_column("t", justify="right")
    table.add_column("mixing width", justify="right")
    table.add_column("mixing area", justify="right")
    for density in run.densities[1:]:
        table.add_row(
            _tag(density.time),
            f"{mixing_width(density):.5f}",
            f"{mixing_zone_area(density):.5f}",
        )
    console.print(table)
    console.print(f"{run.steps} steps, relative mass drift {run.mass_drift:.2e}")


@cli.command("jko-flat")
@run_options
def jko_flat(ctx: RunContext) -> None:
    """Minimizing movements for the flat interface against the Burgers rarefaction."""
    jcfg = ctx.config.jko
    root = ctx.out / "jko"
    with ArtifactTracker(ctx.out, Operation.JKO_FLAT, ctx.hash) as tracker:
        theta0 = Theta1D.step(jcfg.n_cells, jcfg.half_width)
        with Progress(
            SpinnerColumn(), TextColumn("{task.description}"), BarColumn(), console=console
        ) as progress:
            task = progress.add_task("Minimizing movements", total=jcfg.n_steps)
            traj = run_jko(
                theta0, jcfg.step, jcfg.n_steps, jcfg, on_step=lambda k, r: progress.advance(task)
            )
        tracker.add_artifact(write_trajectory_csv(traj, root / "trajectory.csv"))
        tracker.add_artifact(write_reports_csv(traj, root / "reports.csv"))
        t_end = float(traj.times[-1])
        gap = l1_gap(traj.final, burgers_cell_average(t_end, theta0.edges))
        residual = max((r.el_residual for r in traj.reports), default=0.0)
        tracker.metrics.update(
            l1_gap=gap,
            max_el_residual=residual,
            converged=traj.converged,
            mass_drift=abs(traj.final.mass - theta0.mass),
            transport_cells=theta0.n * traj.refine,
        )

    table = Table(title="Minimizing movements")
    table.add_column("t", justify="right")
    table.add_column("h", justify="right")
    table.add_column("L1 gap to Burgers", justify="right")
    table.add_column("max EL residual", justify="right")
    table.add_row(_tag(t_end), repr(jcfg.step), f"{gap:.4e}", f"{residual:.3e}")
    console.print(table)
    console.print(f"transport grid: {theta0.n * traj.refine} cells")
    if not traj.converged:
        console.print("[yellow]Warning: some inner solves hit max_inner[/yellow]")


# ---------------------------------------------------------------------------
# Checks
# ---------------------------------------------------------------------------


@cli.command()
@run_options
def diagnose(ctx: RunContext) -> None:
    """Energy, dissipation, entropy and regularity diagnostics of the reconstructed fields."""
    cfg = ctx.config
    times = cfg.output_times
    if len(times) < 3:
        raise ConfigValidationError("output_times", "diagnose needs at least 3 output times")
    fields = ctx.out / "fields" / "levelset"
    root = ctx.out / "diagnostics"
    with ArtifactTracker(ctx.out, Operation.DIAGNOSE, ctx.hash) as tracker:
        graph_path = ctx.require("levelset/graph.txt")
        tracker.add_input(graph_path)
        gamma = load_graph(graph_path.read_text())

        loaded: dict[str, list] = {"rho": [], "v": [], "m": [], "curves": []}
        for t in times:
            for name in loaded:
                path = ctx.require(f"fields/levelset/{name}_t{_tag(t)}.csv")
                tracker.add_input(path)
                loaded[name].append(read_curves_csv(path) if name == "curves" else read_field(path))

        records = build_records(loaded["rho"], loaded["v"], loaded["m"], InitialDensity(gamma))
        for path in write_records(records, root):
            tracker.add_artifact(path)

        regularity = root / "regularity.csv"
        with regularity.open("w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["time", "lipschitz", "log_lipschitz", "mixing_width", "mixing_area"])
            for d, v in zip(loaded["rho"], loaded["v"]):
                values = (
                    d.time,
                    lipschitz_constant(d),
                    log_lipschitz_modulus(v),
                    mixing_width(d),
                    mixing_zone_area(d),
                )
                writer.writerow([repr(float(x)) for x in values])
        tracker.add_artifact(regularity)

        curves = loaded["curves"]
        if len(curves) >= 4 and times[-1] >= 10.0 * times[0]:
            lcfg = cfg.levelset
            s0 = compute_s0(gamma, n_quad=lcfg.n_quad_s0, n_modes=lcfg.n_modes, check=False)
            fit = expansion_check(curves, gamma, s0, mu=cfg.mu)
            tracker.metrics["expansion_slope"] = None if fit.exact_zero else fit.slope
        else:
            logger.info("expansion law skipped: needs >= 4 output times spanning a decade")
        tracker.metrics["max_hull_violation"] = max(r.hull_violation_max for r in records)

    table = Table(title=f"Diagnostics ({cfg.name})")
    for col in ("t", "E_rel", "dE/dt", "int m2", "hull"):
        table.add_column(col, justify="right")
    for r in records:
        table.add_row(
            _tag(r.time),
            f"{r.e_rel:.6e}",
            f"{r.dissipation_lhs:.6e}",
            f"{r.dissipation_rhs:.6e}",
            f"{r.hull_violation_max:.1e}",
        )
    console.print(table)


def _fv_densities(ctx: RunContext, tracker: ArtifactTracker) -> dict[str, DensityField]:
    manifest_path = ctx.require("fv/manifest.json")
    tracker.add_input(manifest_path)
    manifest = json.loads(manifest_path.read_text())
    out = {}
    for entry in manifest["outputs"]:
        path = ctx.require(f"fv/{entry['rho']}")
        tracker.add_input(path)
        out[_tag(entry["time"])] = read_field(path)
    return out


@cli.command()
@run_options
def compare(ctx: RunContext) -> None:
    """L1/Linf gaps between the level-set density and the finite-volume density."""
    cfg = ctx.config
    tol = cfg.tolerances
    rows = []
    with ArtifactTracker(ctx.out, Operation.COMPARE, ctx.hash) as tracker:
        field = _ansatz(ctx, tracker)
        fv = _fv_densities(ctx, tracker)
        for t in cfg.output_times:
            reference = fv.get(_tag(t))
            if reference is None:
                raise MissingArtifactError(f"fv output for t={_tag(t)} not in fv/manifest.json")
            grid = reference.grid
            levelset = density_field(field, t, grid)
            diff = np.abs(levelset.rho - reference.rho)
            l1 = grid.integrate(diff)
            area = mixing_zone_area(reference)
            relative = l1 / area if area > 0 else l1
            rows.append(
                {
                    "time": t,
                    "l1": l1,
                    "linf": float(np.max(diff)),
                    "mixing_area": area,
                    "relative_l1": relative,
                    "width_levelset": mixing_width(levelset),
                    "width_fv": mixing_width(reference),
                    "pass": relative <= tol.compare_l1 and float(np.max(diff)) <= tol.compare_linf,
                }
            )
        path = ctx.out / "compare" / "gaps.csv"
        path.parent.mkdir(parents=True, exist_ok=True)
        with path.open("w", newline="") as fh:
            writer = csv.DictWriter(fh, fieldnames=list(rows[0]), lineterminator="\n")
            writer.writeheader()
            for row in rows:
                writer.writerow(
                    {k: repr(v) if isinstance(v, float) else str(v).lower() for k, v in row.items()}
                )
        tracker.add_artifact(path)
        tracker.metrics["all_pass"] = all(r["pass"] for r in rows)

    table = Table(title=f"Level set vs finite volume ({cfg.name})")
    for col in ("t", "L1", "Linf", "L1 / mixing area", ""):
        table.add_column(col, justify="right")
    for r in rows:
        status = "[green]ok[/green]" if r["pass"] else "[red]over tolerance[/red]"
        table.add_row(
            _tag(r["time"]), f"{r['l1']:.3e}", f"{r['linf']:.3e}", f"{r['relative_l1']:.3%}", status
        )
    console.print(table)
    if not all(r["pass"] for r in rows):
        logger.warning(
            "compare: gaps above tolerance (l1 %.3g, linf %.3g)", tol.compare_l1, tol.compare_linf
        )


def main() -> None:
    cli()


if __name__ == "__main__":
    main()
