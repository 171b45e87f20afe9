import logging
import os

from rich.progress import (
    BarColumn,
    MofNCompleteColumn,
    Progress,
    TextColumn,
    TimeElapsedColumn,
    TimeRemainingColumn,
)

__all__ = ["default_bar", "disable_progress"]


log = logging.getLogger(__name__)

PROGRESS_ENV_NAME = "MEDZIM_DEBUG"


def disable_progress() -> bool:
    """Whether progress bars should be hidden, e.g. in CI logs or while debugging."""
    match os.getenv(PROGRESS_ENV_NAME, "").lower():
        case "true" | "1":
            return True
        case _:
            return False


def default_bar(transient: bool = False, disable: bool = False) -> Progress:
    """The progress bar used for per-taxon fits and simulation replicates."""
    disabled = disable or disable_progress()
    if disabled and not disable:
        log.debug(f"Progress bar is disabled by {PROGRESS_ENV_NAME}.")
    return Progress(
        TextColumn("[progress.description]{task.description}"),
        BarColumn(),
        MofNCompleteColumn(),
        TimeElapsedColumn(),
        TimeRemainingColumn(),
        refresh_per_second=1,
        transient=transient,
        disable=disabled,
    )
