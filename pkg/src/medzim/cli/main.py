"""This module provides the CLI for running `medzim` analyses and simulations."""

from collections.abc import Callable
from pathlib import Path
from typing import Any

import click

from . import debug

config_option = click.option(
    "--config",
    "-c",
    type=click.Path(exists=True, path_type=Path),
    default=None,
    help="Path to a YAML config file, or a directory of them. Flags override its content.",
)

_SHARED_OPTIONS = [
    config_option,
    click.option("--out", type=click.Path(path_type=Path), default=None, help="Output directory."),
    click.option("--seed", type=int, default=None, help="Seed of every random stream."),
    click.option(
        "--threads", type=click.IntRange(min=1), default=None, help="Number of worker threads."
    ),
    click.option(
        "--mechanism",
        type=click.Choice(["lod", "exp"]),
        default=None,
        help="How present taxa are observed as zero.",
    ),
    click.option("--eta", type=float, default=None, help="Rate of the exponential mechanism."),
    click.option("--x1", type=float, default=None, help="Reference exposure."),
    click.option("--x2", type=float, default=None, help="Target exposure."),
    click.option(
        "--cde-m", type=float, default=None, help="Mediator value of the controlled direct effect."
    ),
    click.option(
        "--beta4/--no-beta4",
        default=None,
        help="Keep the exposure × presence interaction.",
    ),
    click.option(
        "--beta5/--no-beta5",
        default=None,
        help="Keep the exposure × abundance interaction.",
    ),
]

_MECHANISM_NAMES = {"lod": "LOD", "exp": "EXPONENTIAL"}
_SCENARIO_NAMES = {"low": "LOW_RA", "high": "HIGH_RA"}


def shared_options(f: Callable[..., Any]) -> Callable[..., Any]:
    for option in reversed(_SHARED_OPTIONS):
        f = option(f)
    return f


def _shared_overrides(
    out: Path | None,
    seed: int | None,
    threads: int | None,
    mechanism: str | None,
    eta: float | None,
    x1: float | None,
    x2: float | None,
    cde_m: float | None,
    beta4: bool | None,
    beta5: bool | None,
) -> dict[str, Any]:
    return {
        "out": out,
        "seed": seed,
        "threads": threads,
        "model.mechanism": None if mechanism is None else _MECHANISM_NAMES[mechanism],
        "model.eta": eta,
        "model.beta4": beta4,
        "model.beta5": beta5,
        "contrast.x1": x1,
        "contrast.x2": x2,
        "contrast.cde_m": cde_m,
    }


def _dotlist(overrides: dict[str, Any]) -> list[str]:
    return [f"{key}={value}" for key, value in overrides.items() if value is not None]


def _run(command: Callable[..., None], config: Path | None, overrides: dict[str, Any]) -> None:
    """Load the configuration and run `command`, reporting known failures without a traceback."""
    from .omegaconfig import load

    try:
        command(load(config, _dotlist(overrides)))
    except (ValueError, RuntimeError, OSError) as e:
        if debug.DEBUG:
            raise
        raise click.ClickException(str(e)) from e


@click.group()
@click.option("-v", "--verbose", is_flag=True)
@click.option("--quiet/--no-quiet", default=False)
@click.option(
    "--logfile",
    type=click.Path(path_type=Path),
    default=None,
    help="File to output the log messages in addition to stdout/stderr.",
)
@click.option("--debug", is_flag=True)
def main(verbose, quiet, logfile, debug):
    """Causal mediation analysis with zero-inflated microbiome mediators."""
    from .logging_implementation import logging_setup

    logging_setup(verbose, quiet, logfile, debug)


@main.command()
@shared_options
@click.option(
    "--ra",
    type=click.Path(exists=True, dir_okay=False, path_type=Path),
    default=None,
    help="Relative abundance table, samples as rows.",
)
@click.option(
    "--meta",
    type=click.Path(exists=True, dir_okay=False, path_type=Path),
    default=None,
    help="Sample metadata with sample_id, library_size, x and y.",
)
@click.option("--fdr", type=float, default=None, help="Target false discovery rate.")
def analyze(config, ra, meta, fdr, **shared):
    """Screen every taxon of a table as a mediator."""
    from .analyze_implementation import analyze as analyze_implementation

    overrides = _shared_overrides(**shared) | {"analyze.ra": ra, "analyze.meta": meta, "fdr": fdr}
    _run(analyze_implementation, config, overrides)


@main.command()
@shared_options
@click.option(
    "--scenario",
    type=click.Choice(["low", "high"]),
    default=None,
    help="Relative abundance scenario of the generating parameters.",
)
@click.option("--n", "n", type=click.IntRange(min=2), default=None, help="Subjects per replicate.")
@click.option("--reps", type=click.IntRange(min=1), default=None, help="Number of replicates.")
@click.option(
    "--fit-beta5/--no-fit-beta5",
    default=None,
    help="Estimate the exposure × abundance interaction, which the generator sets to zero.",
)
def simulate1(config, scenario, n, reps, fit_beta5, **shared):
    """Run the single-taxon simulation study."""
    from .simulate_implementation import simulate1 as simulate1_implementation

    overrides = _shared_overrides(**shared) | {
        "simulate1.scenario": None if scenario is None else _SCENARIO_NAMES[scenario],
        "simulate1.n": n,
        "simulate1.n_reps": reps,
        "simulate1.fit_beta5": fit_beta5,
    }
    _run(simulate1_implementation, config, overrides)


@main.command()
@shared_options
@click.option("--n", "n", type=click.IntRange(min=2), default=None, help="Subjects per replicate.")
@click.option("--k-plus-1", type=click.IntRange(min=2), default=None, help="Number of taxa.")
@click.option("--reps", type=click.IntRange(min=1), default=None, help="Number of replicates.")
@click.option("--fdr", type=float, default=None, help="Target false discovery rate.")
@click.option(
    "--export",
    type=click.Path(file_okay=False, path_type=Path),
    default=None,
    help="Directory where the first replicate is written as analyze inputs.",
)
def simulate2(config, n, k_plus_1, reps, fdr, export, **shared):
    """Run the multi-taxon screening simulation study."""
    from .simulate_implementation import simulate2 as simulate2_implementation

    overrides = _shared_overrides(**shared) | {
        "simulate2.n": n,
        "simulate2.k_plus_1": k_plus_1,
        "simulate2.n_reps": reps,
        "simulate2.export": export,
        "fdr": fdr,
    }
    _run(simulate2_implementation, config, overrides)
