import difflib
import logging
from pathlib import Path
from typing import Any

import numpy as np
import pandas as pd
import scipy
from omegaconf import OmegaConf

import medzim

__all__ = ["MANIFEST_NAME", "git_style_diff", "package_versions", "save_manifest"]

log = logging.getLogger(__name__)

MANIFEST_NAME = "run_manifest.yaml"


def git_style_diff(a: str, b: str) -> str:
    diff = difflib.unified_diff(
        a.splitlines(keepends=True), b.splitlines(keepends=True), lineterm=""
    )
    return "".join(diff)


def package_versions() -> dict[str, str]:
    """Versions of the packages that determine numerical results."""
    return {
        "medzim": medzim.__version__,
        "numpy": np.__version__,
        "scipy": scipy.__version__,
        "pandas": pd.__version__,
    }


def save_manifest(command: str, config: dict[str, Any], directory: Path) -> Path:
    """Write the manifest of a run to `directory`.

    If the directory already holds a manifest for a different run, nothing is written and
    the run is aborted, so that outputs of two configurations never mix.

    Parameters
    ----------
    command : str
        The CLI command of the run.
    config : dict[str, Any]
        The resolved configuration, as plain containers.
    directory : Path
        The output directory, created if needed.

    Returns
    -------
    Path
        Path of the manifest.
    """
    directory.mkdir(parents=True, exist_ok=True)
    manifest_path = directory / MANIFEST_NAME
    manifest = {"command": command, "config": config, "versions": package_versions()}
    manifest_yaml = OmegaConf.to_yaml(OmegaConf.create(manifest))
    if manifest_path.exists():
        saved_yaml = manifest_path.read_text()
        if saved_yaml != manifest_yaml:
            log.error(
                "Diff current run / saved manifest:\n"
                f"{git_style_diff(manifest_yaml, saved_yaml)}"
            )
            raise ValueError(
                f"{manifest_path} describes a different run. Aborting; use another --out."
            )
        log.debug(f"Manifest {manifest_path} matches the current run.")
    else:
        manifest_path.write_text(manifest_yaml)
        log.debug(f"Manifest is saved to [cyan]{manifest_path}[/].")
    return manifest_path
