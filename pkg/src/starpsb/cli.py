"""CLI entry point for starpsb."""

from __future__ import annotations

import logging
import sys

import click

from starpsb import __version__

_EXPERIMENTS = {
    "convergence": "convergence",
    "power": "power-sweep",
    "bits": "bits-sweep",
    "audit": "oracle-audit",
}


@click.group()
@click.version_option(version=__version__, prog_name="starpsb")
def main() -> None:
    """starpsb: secrecy beamforming for coupled phase-shift STAR-RIS."""
    pass


@main.command()
@click.option(
    "--experiment",
    type=click.Choice(sorted(_EXPERIMENTS)),
    required=True,
    help="Study to run",
)
@click.option(
    "-c",
    "--config",
    "config_path",
    default=None,
    help="Path to config file (default: ~/.starpsb/config.yaml)",
)
@click.option("--trials", type=click.IntRange(min=1), default=None, help="Monte-Carlo trials")
@click.option("--seed", type=click.IntRange(min=0), default=None, help="Base seed")
@click.option("--out", "out_dir", default="results", show_default=True, help="Output directory")
@click.option(
    "--paper-scale",
    is_flag=True,
    help="Use M=8, N=20 and 100 trials instead of the desk-scale defaults",
)
@click.option("--schemes", default=None, help="Comma-separated scheme names")
@click.option("--workers", type=click.IntRange(min=1), default=None, help="Worker processes")
@click.option(
    "-v",
    "--verbose",
    is_flag=True,
    help="Enable verbose (DEBUG) logging",
)
def simulate(
    experiment: str,
    config_path: str | None,
    trials: int | None,
    seed: int | None,
    out_dir: str,
    paper_scale: bool,
    schemes: str | None,
    workers: int | None,
    verbose: bool,
) -> None:
    """Run a study and write its tables under --out."""
    from starpsb.config import build_experiment_spec, load_config
    from starpsb.container import Container
    from starpsb.core.errors import StarPsbError
    from starpsb.core.models import ExperimentKind
    from starpsb.experiments import run_experiment
    from starpsb.schemes.registry import parse_scheme

    try:
        config = load_config(config_path)
    except Exception as e:
        click.echo(f"Error loading config: {e}", err=True)
        sys.exit(1)

    _setup_logging(verbose, config.log_level)

    try:
        selected = (
            [parse_scheme(name) for name in schemes.split(",") if name.strip()]
            if schemes
            else None
        )
        spec = build_experiment_spec(
            config,
            ExperimentKind(_EXPERIMENTS[experiment]),
            out_dir=out_dir,
            trials=trials,
            seed=seed,
            paper_scale=paper_scale,
            schemes=selected,
            workers=workers,
        )
    except StarPsbError as e:
        click.echo(f"Error: {e}", err=True)
        sys.exit(1)

    container = Container.create_default(config, spec.out_dir)

    try:
        result = run_experiment(spec, container)
    except StarPsbError as e:
        click.echo(f"Simulation failed: {e}", err=True)
        sys.exit(1)

    for label, path in result.paths.items():
        click.echo(f"  {label}: {path}")
    click.echo(f"{spec.kind.value} complete.")


@main.command("show-config")
@click.option(
    "-c",
    "--config",
    "config_path",
    default=None,
    help="Path to config file",
)
@click.option("--seed", type=click.IntRange(min=0), default=0, show_default=True)
def show_config(config_path: str | None, seed: int) -> None:
    """Print the resolved watts-domain network for one seed."""
    from starpsb.config import load_config

    try:
        config = load_config(config_path)
    except Exception as e:
        click.echo(f"Error loading config: {e}", err=True)
        sys.exit(1)

    click.echo(config.network.to_network(seed).to_json())


def _setup_logging(verbose: bool, level_name: str = "INFO") -> None:
    """Configure logging for a simulation run."""
    level = logging.DEBUG if verbose else getattr(logging, level_name.upper(), logging.INFO)
    logging.basicConfig(
        level=level,
        format="%(asctime)s %(levelname)s [%(name)s] %(message)s",
        datefmt="%H:%M:%S",
    )
