import logging
from pathlib import Path

from medzim.utils.log import setup

from . import debug as debug_flag

log = logging.getLogger(__name__)


def verbosity_level(verbose: bool, quiet: bool, debug: bool) -> int:
    """Level of the ``medzim`` logger for the global CLI flags.

    ``--debug`` wins over ``--quiet``.
    """
    if debug:
        return logging.DEBUG
    if quiet:
        return logging.ERROR
    return logging.DEBUG if verbose else logging.INFO


def logging_setup(verbose: bool, quiet: bool, logfile: Path | None, debug: bool) -> None:
    debug_flag.DEBUG = debug
    setup(verbosity_level(verbose, quiet, debug), logfile=logfile)
