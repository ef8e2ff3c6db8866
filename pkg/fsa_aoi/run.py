# fsa_aoi/run.py
"""
Command-line entry point.

    python -m fsa_aoi.run analytic experiments/fig4a.json
    python -m fsa_aoi.run --threads 8 simulate experiments/fig4a.json --mode both
    python -m fsa_aoi.run optimal-f --lam 0.02 --r 10 --eta 0.8
    python -m fsa_aoi.run compare --eta-sa 0.25
    python -m fsa_aoi.run figures 4a 5a --out-dir results
"""

import logging
import math
import sys
from functools import wraps
from pathlib import Path

import click

from fsa_aoi.config import settings
from fsa_aoi.utils import bipolar
from fsa_aoi.utils.errors import ConfigError, FsaAoiError
from fsa_aoi.utils.experiment import apply_overrides, load_experiment, parse_theta, run_sweep
from fsa_aoi.utils.figures import figure_names, write_figures, y_curve
from fsa_aoi.utils.models import BipolarConfig, ProtocolParams, is_infinite

logger = logging.getLogger(__name__)


def setup_logging(verbose: bool = False):
    """Set up logging configuration."""
    logging.basicConfig(
        level=logging.DEBUG if verbose else getattr(logging, settings.LOG_LEVEL, logging.INFO),
        format=settings.LOG_FORMAT,
        handlers=[logging.StreamHandler(sys.stderr)],
    )


def exit_codes(command):
    """Map typed failures to the documented exit codes."""

    @wraps(command)
    def wrapper(*args, **kwargs):
        try:
            return command(*args, **kwargs)
        except ConfigError as exc:
            click.echo(f"Configuration error: {exc}", err=True)
            sys.exit(settings.EXIT_CONFIG_ERROR)
        except FsaAoiError as exc:
            click.echo(f"Numerical failure: {exc}", err=True)
            sys.exit(settings.EXIT_NUMERICAL_ERROR)
        except OSError as exc:
            click.echo(f"I/O error: {exc}", err=True)
            sys.exit(settings.EXIT_IO_ERROR)

    return wrapper


def _fmt(value) -> str:
    if value is None:
        return "n/a"
    if is_infinite(value):
        return settings.INF_TOKEN
    return f"{float(value):.6g}"


def _output_path(config) -> Path:
    if config.output_path:
        return Path(config.output_path)
    return Path(settings.OUTPUT_DIR) / f"{config.name}.{config.output_format}"


def _run_and_write(ctx, config_path, mode, overrides):
    config = apply_overrides(load_experiment(config_path), **overrides)
    result = run_sweep(config, threads=ctx.obj["threads"], mode=mode or config.mode)
    path = _output_path(config)
    result.write(path, config.output_format)
    click.echo(f"{len(result)} row(s) written to {path}")
    if "within_tolerance" in result.columns:
        agreed = int(result.frame["within_tolerance"].sum())
        click.echo(f"{agreed}/{len(result)} point(s) within {settings.AGREEMENT_TOLERANCE:.0%} of the analytic mean")


def _bipolar_options(command):
    command = click.option("--theta", default="0dB", show_default=True, help="SIR threshold, linear or e.g. '0dB'")(command)
    command = click.option("--alpha", default=3.5, show_default=True, type=float, help="Path-loss exponent")(command)
    command = click.option("--r", "r", default=10.0, show_default=True, type=float, help="Link distance (m)")(command)
    command = click.option("--lam", default=1e-2, show_default=True, type=float, help="Transmitter density (1/m^2)")(command)
    return command


def _bipolar_config(lam, r, alpha, theta) -> BipolarConfig:
    try:
        return BipolarConfig(lam=lam, r=r, alpha=alpha, theta=parse_theta(theta))
    except ValueError as exc:
        raise ConfigError(str(exc))


@click.group()
@click.option("--threads", default=settings.DEFAULT_THREADS, show_default=True, type=int,
              help="Worker processes for simulations (FSA_AOI_THREADS)")
@click.option("--verbose", is_flag=True, help="Debug logging")
@click.pass_context
def cli(ctx, threads, verbose):
    """AoI of frame slotted ALOHA in Poisson bipolar and cellular networks."""
    setup_logging(verbose)
    ctx.ensure_object(dict)
    ctx.obj["threads"] = max(1, threads)


@cli.command()
@click.argument("config_path", type=click.Path(dir_okay=False))
@click.option("--eta", type=float, help="Override the protocol update rate")
@click.option("--frame-size", type=int, help="Override the frame size")
@click.option("--output", "output_path", help="Output file")
@click.option("--format", "output_format", type=click.Choice(["csv", "json"]), help="Output format")
@click.pass_context
@exit_codes
def analytic(ctx, config_path, eta, frame_size, output_path, output_format):
    """Evaluate the closed-form and integral results over the experiment grid."""
    _run_and_write(ctx, config_path, "analytic", dict(eta=eta, frame_size=frame_size, output_path=output_path,
                                                      output_format=output_format))


@cli.command()
@click.argument("config_path", type=click.Path(dir_okay=False))
@click.option("--mode", type=click.Choice(["simulate", "both"]), default="simulate", show_default=True)
@click.option("--eta", type=float, help="Override the protocol update rate")
@click.option("--frame-size", type=int, help="Override the frame size")
@click.option("--realizations", "num_realizations", type=int, help="Topologies per grid point")
@click.option("--slots", "slots_per_realization", type=int, help="Slots per topology")
@click.option("--seed", type=int, help="Master seed")
@click.option("--output", "output_path", help="Output file")
@click.option("--format", "output_format", type=click.Choice(["csv", "json"]), help="Output format")
@click.pass_context
@exit_codes
def simulate(ctx, config_path, mode, eta, frame_size, num_realizations, slots_per_realization, seed,
             output_path, output_format):
    """Monte Carlo estimates over the experiment grid."""
    _run_and_write(ctx, config_path, mode, dict(
        eta=eta, frame_size=frame_size, num_realizations=num_realizations,
        slots_per_realization=slots_per_realization, seed=seed, output_path=output_path,
        output_format=output_format,
    ))


@cli.command("optimal-f")
@_bipolar_options
@click.option("--eta", default=0.8, show_default=True, type=float, help="Update rate")
@click.option("--f-max", default=settings.DEFAULT_F_MAX, show_default=True, type=int, help="Bracket end")
@click.option("--step", default=0.25, show_default=True, type=float, help="Spacing of the y(F) samples")
@click.option("--curve-out", type=click.Path(dir_okay=False), help="Write the y(F) samples as CSV")
@exit_codes
def optimal_f(lam, r, alpha, theta, eta, f_max, step, curve_out):
    """Optimal frame size of the bipolar network."""
    cfg = _bipolar_config(lam, r, alpha, theta)
    if not 0 < eta <= 1:
        raise ConfigError("eta must lie in (0, 1]")
    best = bipolar.optimal_frame(cfg, eta, f_max)
    achieved = bipolar.avg_aoi_bipolar(cfg, ProtocolParams(eta, best))
    click.echo(f"F* = {best}")
    click.echo(f"average AoI at F*: {_fmt(achieved)} slots")

    upper = min(float(f_max), 20.0)
    count = int(math.floor((upper - 1.0) / step)) + 1
    curve = y_curve(cfg, eta, [1.0 + k * step for k in range(count)])
    for frame, y in zip(curve["frame_size"], curve["y_per_slot"]):
        if float(frame).is_integer():
            click.echo(f"  y({frame:g}) = {_fmt(y)}")
    if curve_out:
        Path(curve_out).parent.mkdir(parents=True, exist_ok=True)
        curve.to_csv(curve_out, index=False, float_format=settings.CSV_FLOAT_FORMAT)
        click.echo(f"y(F) samples written to {curve_out}")


@cli.command()
@_bipolar_options
@click.option("--eta-sa", required=True, type=float, help="Slotted ALOHA update rate")
@exit_codes
def compare(lam, r, alpha, theta, eta_sa):
    """FSA conversions of an SA update rate and their AoI gains."""
    cfg = _bipolar_config(lam, r, alpha, theta)
    if not 0 < eta_sa <= 1:
        raise ConfigError("eta-sa must lie in (0, 1]")
    sa = bipolar.avg_aoi_sa(cfg, eta_sa)
    click.echo(f"SA   eta={eta_sa:g}: average AoI {_fmt(sa)} slots")
    schemes = (("a", bipolar.conversion_scheme_a), ("b", bipolar.conversion_scheme_b))
    for label, convert in schemes:
        try:
            p = convert(eta_sa)
        except ValueError as exc:
            click.echo(f"FSA ({label}): not applicable ({exc})")
            continue
        fsa = bipolar.avg_aoi_bipolar(cfg, p)
        delta = None if is_infinite(fsa) or is_infinite(sa) else float(fsa) - float(sa)
        if is_infinite(sa) and not is_infinite(fsa):
            delta = -math.inf
        click.echo(
            f"FSA ({label}) eta={p.eta:g}, F={p.frame_size}: average AoI {_fmt(fsa)} slots, "
            f"Q1 = {_fmt(bipolar.q1(cfg, p))}, change vs SA = {_fmt(delta)}"
        )


@cli.command()
@click.argument("names", nargs=-1)
@click.option("--all", "all_figures", is_flag=True, help="Every canned figure")
@click.option("--out-dir", default=settings.OUTPUT_DIR, show_default=True, help="Directory for the CSVs")
@click.option("--simulate", is_flag=True, help="Add simulated columns where the preset defines them")
@click.pass_context
@exit_codes
def figures(ctx, names, all_figures, out_dir, simulate):
    """Write the data behind the canned figures as CSV."""
    available = figure_names()
    names = available if all_figures else list(names)
    if not names:
        raise ConfigError(f"Name at least one figure or pass --all; available: {', '.join(available)}")
    unknown = [name for name in names if name not in available]
    if unknown:
        raise ConfigError(f"Unknown figure(s) {unknown}; available: {', '.join(available)}")
    for path in write_figures(names, out_dir, threads=ctx.obj["threads"], simulate=simulate):
        click.echo(str(path))


if __name__ == "__main__":
    cli(obj={})
