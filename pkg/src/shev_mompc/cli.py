"""Command-line interface: simulate, pareto sweeps, fuel identification.

Exit codes: 0 on success, 2 for input/validation problems, 3 for runtime
or solver aborts. Verbosity is controlled by the SHEV_MOMPC_LOG
environment variable (error, info or debug).
"""
from __future__ import annotations

import functools
import json
import logging
import os
import sys

import click
import numpy as np

from . import __version__
from .config import RunConfig, default_config, dump_config, load_config
from .controller import pareto_sweep, simplex_weight_grid
from .cycles import DriveCycle, load_cycle, preview, reference_trajectory, resample
from .errors import (
    CallbackError,
    DegenerateDataError,
    DomainError,
    ParseError,
    ShevError,
    SimulationAbort,
    ValidationError,
)
from .harness import compute_metrics, replay_check, run_closed_loop, write_atomic
from .powertrain import FuelSample, VehicleState, fit_fuel_coefficients

logger = logging.getLogger(__name__)

MPH_TO_MPS = 0.44704

EXIT_INPUT = 2
EXIT_RUNTIME = 3


def _setup_logging() -> None:
    level = os.environ.get("SHEV_MOMPC_LOG", "error").lower()
    chosen = {"error": logging.ERROR, "info": logging.INFO,
              "debug": logging.DEBUG}.get(level, logging.ERROR)
    logging.basicConfig(level=chosen,
                        format="%(asctime)s %(name)s %(levelname)s %(message)s")


def _exit_codes(func):
    """Map package errors onto the documented exit codes."""

    @functools.wraps(func)
    def wrapper(*args, **kwargs):
        try:
            return func(*args, **kwargs)
        except (ValidationError, ParseError, DegenerateDataError, FileNotFoundError) as exc:
            click.echo(f"error: {exc}", err=True)
            sys.exit(EXIT_INPUT)
        except (SimulationAbort, CallbackError, DomainError, ShevError) as exc:
            click.echo(f"runtime error: {exc}", err=True)
            sys.exit(EXIT_RUNTIME)

    return wrapper


def _load_run_config(config_path: str | None) -> RunConfig:
    if config_path is None:
        return default_config()
    if not os.path.exists(config_path):
        raise FileNotFoundError(f"config file not found: {config_path}")
    return load_config(config_path)


def _load_cycle_for_run(cycle_path: str | None, cfg: RunConfig, unit: str) -> DriveCycle:
    path = cycle_path or cfg.cycle_path
    if path is None:
        raise ValidationError("no cycle file given (use --cycle or config.cycle_path)")
    if not os.path.exists(path):
        raise FileNotFoundError(f"cycle file not found: {path}")
    cycle = load_cycle(path)
    if unit == "mph":
        cycle = DriveCycle(times=cycle.times, speeds=cycle.speeds * MPH_TO_MPS,
                           name=cycle.name)
    return resample(cycle, cfg.controller.dt)


def _resolve_out_dir(out: str | None, cfg: RunConfig) -> str:
    out_dir = out or cfg.output_dir
    if out_dir is None:
        raise ValidationError("no output directory given (use --out or config.output_dir)")
    os.makedirs(out_dir, exist_ok=True)
    return out_dir


@click.group()
@click.version_option(version=__version__, prog_name="shev-mompc")
def main() -> None:
    """Series hybrid electric vehicle simulation and energy-management MPC."""
    _setup_logging()


@main.command()
@click.option("--cycle", "cycle_path", type=str, default=None, help="Drive cycle CSV (t_s,v_mps).")
@click.option("--config", "config_path", type=str, default=None, help="JSON run configuration.")
@click.option("--out", "out", type=str, default=None, help="Output directory.")
@click.option("--unit", type=click.Choice(["mps", "mph"]), default="mps",
              help="Unit of the cycle's speed column.")
@click.option("--figures/--no-figures", default=True, help="Render report figures.")
@_exit_codes
def simulate(cycle_path, config_path, out, unit, figures) -> None:
    """Run the closed loop over a drive cycle and write the trace artifacts."""
    cfg = _load_run_config(config_path)
    cycle = _load_cycle_for_run(cycle_path, cfg, unit)
    out_dir = _resolve_out_dir(out, cfg)

    log = run_closed_loop(
        cycle, cfg.controller, cfg.plant,
        initial_state=VehicleState(cfg.initial.position, cfg.initial.velocity),
        initial_soc=cfg.initial.soc)
    if not replay_check(log, cfg.plant):
        raise SimulationAbort("trace failed its own replay verification")
    metrics = compute_metrics(log, cfg.battery)

    log.to_csv(os.path.join(out_dir, "trace.csv"))
    write_atomic(os.path.join(out_dir, "metrics.json"),
                 json.dumps(metrics.to_dict(), indent=2) + "\n")
    write_atomic(os.path.join(out_dir, "summary.txt"), _summary_text(cycle, metrics))
    write_atomic(os.path.join(out_dir, "config.json"), dump_config(cfg))
    if figures:
        from .report import render_simulation_figures

        render_simulation_figures(
            log, out_dir,
            soc_limits=(cfg.battery.soc_min, cfg.battery.soc_max),
            current_limits=(cfg.battery.current_min, cfg.battery.current_max))
    click.echo(f"simulated {len(log)} steps -> {out_dir}")


def _summary_text(cycle: DriveCycle, metrics) -> str:
    lines = [
        f"cycle:                 {cycle.name or 'unnamed'} ({len(cycle)} samples, "
        f"{cycle.duration:.0f} s)",
        f"total fuel [g]:        {metrics.total_fuel_g:.3f}",
        f"velocity RMSE [m/s]:   {metrics.velocity_rmse:.4f}",
        f"position RMSE [m]:     {metrics.position_rmse:.4f}",
        f"final SOC [-]:         {metrics.soc_final:.5f}",
        f"SOC range [-]:         [{metrics.soc_min:.5f}, {metrics.soc_max:.5f}]",
        f"current range [A]:     [{metrics.current_min:.2f}, {metrics.current_max:.2f}]",
        f"bound violations:      {metrics.violation_count}",
        f"mean solver iters:     {metrics.mean_solve_iterations:.2f}",
        f"fallback steps:        {metrics.fallback_count}",
    ]
    return "\n".join(lines) + "\n"


@main.command()
@click.option("--cycle", "cycle_path", type=str, default=None, help="Drive cycle CSV (t_s,v_mps).")
@click.option("--config", "config_path", type=str, default=None, help="JSON run configuration.")
@click.option("--out", "out", type=str, default=None, help="Output directory.")
@click.option("--grid", type=int, default=10, show_default=True,
              help="Number of weight triples spread over the simplex.")
@click.option("--t-index", "t_index", type=int, default=None,
              help="Cycle index of the swept window (default: steepest reference acceleration).")
@click.option("--unit", type=click.Choice(["mps", "mph"]), default="mps")
@click.option("--jobs", type=int, default=1, show_default=True,
              help="Concurrent solves for the sweep.")
@click.option("--figures/--no-figures", default=True, help="Render report figures.")
@_exit_codes
def pareto(cycle_path, config_path, out, grid, t_index, unit, jobs, figures) -> None:
    """Sweep objective weights on one horizon window and report dominance."""
    if grid < 1:
        raise ValidationError("--grid must be at least 1")
    if jobs < 1:
        raise ValidationError("--jobs must be at least 1")
    cfg = _load_run_config(config_path)
    cycle = _load_cycle_for_run(cycle_path, cfg, unit)
    out_dir = _resolve_out_dir(out, cfg)

    ref = reference_trajectory(cycle, cfg.controller.dt)
    if t_index is None:
        t_index = int(np.argmax(np.diff(ref.v_ref))) if len(ref) > 1 else 0
    if not 0 <= t_index < len(ref):
        raise ValidationError(f"--t-index must lie in [0, {len(ref) - 1}]")
    window = preview(ref, t_index, cfg.controller.horizon)
    state = VehicleState(position=float(ref.s_ref[t_index]),
                         velocity=float(ref.v_ref[t_index]))

    triples = simplex_weight_grid(grid)
    points = pareto_sweep(state, cfg.initial.soc, window, triples,
                          cfg.controller, cfg.plant, jobs=jobs)

    rows = ["alpha1,alpha2,alpha3,J_m,J_fb,dominated"]
    for p in points:
        rows.append(f"{p.weights[0]!r},{p.weights[1]!r},{p.weights[2]!r},"
                    f"{p.cost_motion!r},{p.cost_energy!r},{int(p.dominated)}")
    write_atomic(os.path.join(out_dir, "pareto.csv"), "\n".join(rows) + "\n")
    if figures:
        from .report import render_pareto_figure

        render_pareto_figure(points, os.path.join(out_dir, "fig_pareto.png"))
    kept = sum(1 for p in points if not p.dominated)
    click.echo(f"swept {len(points)} weight triples at t={t_index}; "
               f"{kept} non-dominated -> {out_dir}")


FUEL_HEADER = "P_e_W,mdot_f_gps"


def _parse_fuel_samples(path: str) -> list[FuelSample]:
    with open(path) as fh:
        lines = [ln.strip() for ln in fh if ln.strip()]
    if not lines or lines[0].replace(" ", "") != FUEL_HEADER:
        raise ParseError(f"expected header '{FUEL_HEADER}'")
    samples = []
    for lineno, line in enumerate(lines[1:], start=2):
        parts = line.split(",")
        if len(parts) != 2:
            raise ParseError(f"line {lineno}: expected 2 columns")
        try:
            samples.append(FuelSample(engine_power=float(parts[0]),
                                      fuel_rate=float(parts[1])))
        except ValueError as exc:
            raise ParseError(f"line {lineno}: {exc}") from None
    return samples


@main.command("identify-fuel")
@click.option("--samples", "samples_path", type=str, required=True,
              help="CSV of engine power / fuel rate samples (P_e_W,mdot_f_gps).")
@_exit_codes
def identify_fuel(samples_path) -> None:
    """Fit the affine fuel model by least squares and print it as JSON."""
    if not os.path.exists(samples_path):
        raise FileNotFoundError(f"samples file not found: {samples_path}")
    fit = fit_fuel_coefficients(_parse_fuel_samples(samples_path))
    click.echo(json.dumps({"alpha": fit.alpha, "beta": fit.beta,
                           "r_squared": fit.r_squared}))


if __name__ == "__main__":
    main()
