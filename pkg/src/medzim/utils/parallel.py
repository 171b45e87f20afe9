"""Bounded worker pool shared by the per-taxon screen and the replicate studies."""

import logging
import os
from collections.abc import Callable, Sequence
from concurrent.futures import ThreadPoolExecutor, wait
from typing import TypeVar

import numpy as np

from .progress import default_bar

log = logging.getLogger(__name__)

__all__ = ["ordered_map", "resolve_threads", "spawn_generators"]

T = TypeVar("T")
R = TypeVar("R")


def resolve_threads(threads: int | None) -> int:
    """Number of worker threads, defaulting to the available parallelism."""
    if threads is None:
        return os.cpu_count() or 1
    if threads < 1:
        raise ValueError(f"Thread count must be positive, got {threads}.")
    return threads


def spawn_generators(seed: int, n: int) -> list[np.random.Generator]:
    """Independent random streams, one per task, derived from a single seed."""
    return [np.random.default_rng(child) for child in np.random.SeedSequence(seed).spawn(n)]


def ordered_map(
    fn: Callable[[T], R],
    items: Sequence[T],
    threads: int | None = None,
    description: str = "Working...",
    show_progress: bool = True,
) -> list[R]:
    """Apply `fn` to every item with a bounded thread pool.

    Results are returned in the order of `items`, whatever the completion order, so that
    the thread count never changes an output.

    Parameters
    ----------
    fn : Callable[[T], R]
        A function without side effects on shared state.
    items : Sequence[T]
        The inputs.
    threads : int | None
        Maximum number of worker threads. Defaults to the available parallelism.
    description : str
        Text of the progress bar.
    show_progress : bool
        Set to False for maps nested in another map, since only one live progress bar
        can be displayed at a time.

    Returns
    -------
    list[R]
        ``[fn(item) for item in items]``.
    """
    n_workers = resolve_threads(threads)
    if n_workers == 1 or len(items) <= 1:
        with default_bar(disable=not show_progress) as progress:
            task = progress.add_task(description, total=len(items))
            results = []
            for item in items:
                results.append(fn(item))
                progress.advance(task)
            return results

    with default_bar(disable=not show_progress) as progress:
        task = progress.add_task(description, total=len(items))
        with ThreadPoolExecutor(max_workers=n_workers) as executor:
            futures = [executor.submit(fn, item) for item in items]
            for future in futures:
                future.add_done_callback(lambda _: progress.advance(task))
            log.debug(f"{len(futures)} tasks submitted to {n_workers} workers.")
            try:
                wait(futures)
            except KeyboardInterrupt:
                log.error(
                    "Keyboard interrupt. [red]Please wait[/] while running tasks finish."
                )
                executor.shutdown(wait=False, cancel_futures=True)
                raise
            except Exception as e:
                log.error(f"Exception while waiting for tasks: {e}\nCancelling...")
                executor.shutdown(wait=True, cancel_futures=True)
                raise
    return [future.result() for future in futures]
