import logging
from pathlib import Path

import click
from rich.console import Console
from rich.logging import RichHandler
from rich.traceback import install

__all__ = ["setup"]


def setup(
    level: int = logging.NOTSET, logfile: Path | None = None, capture_warnings: bool = True
) -> None:
    """Configure the logging level and message format.

    Parameters
    ----------
    level : int
        Level of the ``medzim`` logger. Third party loggers stay at INFO or above.
    logfile : Path | None
        Optional file to which log records are appended, in addition to the terminal.
    capture_warnings : bool
        Route ``warnings`` (numpy overflow, scipy integration warnings) through logging,
        so that they also end up in `logfile`. Defaults to True.
    """
    FORMAT = "[white]%(name)s[/]\t %(message)s"

    handlers: list[logging.Handler] = [RichHandler(markup=True, show_path=False)]
    install(suppress=[click])
    if logfile is not None:
        logfile.parent.mkdir(parents=True, exist_ok=True)
        handlers.append(
            RichHandler(
                markup=True,
                show_path=False,
                console=Console(file=logfile.open("a+"), width=120),  # noqa: SIM115
            )
        )
    logging.basicConfig(
        level=max(logging.INFO, level),
        format=FORMAT,
        datefmt="[%X]",
        handlers=handlers,
        force=True,
    )
    logging.getLogger("medzim").setLevel(level)
    logging.captureWarnings(capture_warnings)
    # numerical warnings are only interesting when debugging a fit
    logging.getLogger("py.warnings").setLevel(
        logging.DEBUG if level <= logging.DEBUG else logging.ERROR
    )
