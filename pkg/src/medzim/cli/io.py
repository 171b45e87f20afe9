"""Reading the ``analyze`` inputs and writing the tab-separated outputs."""

import logging
import math
from pathlib import Path
from typing import Any

import numpy as np
import pandas as pd
from thefuzz import process

from medzim.screen import ROW_SUM_SLACK, TaxaTable

log = logging.getLogger(__name__)

__all__ = [
    "IngestError",
    "META_COLUMNS",
    "ingest",
    "read_table",
    "write_taxa_table",
    "write_tsv",
    "format_cell",
]

META_COLUMNS = ("sample_id", "library_size", "x", "y")
SAMPLE_ID = "sample_id"


class IngestError(ValueError):
    """An input file is malformed.

    Attributes
    ----------
    path : Path
    line : int | None
        1-based line in the file, the header being line 1.
    column : int | None
        1-based column in the file.
    """

    def __init__(
        self, path: Path, message: str, line: int | None = None, column: int | None = None
    ) -> None:
        location = ":".join(str(v) for v in (path, line, column) if v is not None)
        super().__init__(f"{location}: {message}")
        self.path = path
        self.line = line
        self.column = column


def _delimiter(path: Path) -> str:
    return "," if path.suffix.lower() == ".csv" else "\t"


def read_table(path: Path) -> pd.DataFrame:
    """Read a delimited UTF-8 file with a header row, every cell as a string.

    Header names must be unique once stripped.
    """
    options: dict[str, Any] = {
        "sep": _delimiter(path),
        "dtype": str,
        "keep_default_na": False,
        "encoding": "utf-8",
    }
    try:
        frame = pd.read_csv(path, **options)
        header = pd.read_csv(path, header=None, nrows=1, **options).iloc[0].str.strip()
    except (pd.errors.ParserError, UnicodeDecodeError, pd.errors.EmptyDataError) as e:
        raise IngestError(path, f"cannot parse file: {e}") from e
    if frame.shape[1] < 2:
        raise IngestError(path, "expected a header row and at least two delimited columns", 1)
    duplicated = header.duplicated().to_numpy()
    if duplicated.any():
        column = int(np.flatnonzero(duplicated)[0])
        raise IngestError(
            path, f"duplicate column {header.iloc[column]!r}", line=1, column=column + 1
        )
    return frame


def _numeric(path: Path, frame: pd.DataFrame, column: str) -> np.ndarray:  # type: ignore[type-arg]
    values = pd.to_numeric(frame[column].str.strip(), errors="coerce").to_numpy(dtype=float)
    bad = ~np.isfinite(values)
    if bad.any():
        row = int(np.flatnonzero(bad)[0])
        raise IngestError(
            path,
            f"malformed numeric cell {frame[column].iloc[row]!r} in column {column!r}",
            line=row + 2,
            column=frame.columns.get_loc(column) + 1,
        )
    return values


def _sample_ids(path: Path, frame: pd.DataFrame, column: str) -> pd.Series:
    ids = frame[column].str.strip()
    duplicated = ids.duplicated()
    if duplicated.any():
        row = int(np.flatnonzero(duplicated.to_numpy())[0])
        raise IngestError(
            path,
            f"duplicate sample id {ids.iloc[row]!r}",
            line=row + 2,
            column=frame.columns.get_loc(column) + 1,
        )
    return ids


def _read_ra(path: Path) -> tuple[pd.Series, list[str], np.ndarray]:  # type: ignore[type-arg]
    frame = read_table(path)
    id_column, *taxa = frame.columns
    ids = _sample_ids(path, frame, id_column)
    ra = np.column_stack([_numeric(path, frame, taxon) for taxon in taxa])
    outside = ~((ra >= 0) & (ra <= 1))
    if outside.any():
        row, col = (int(v[0]) for v in np.nonzero(outside))
        raise IngestError(
            path,
            f"relative abundance {ra[row, col]:g} outside [0, 1]",
            line=row + 2,
            column=col + 2,
        )
    over = ra.sum(axis=1) > 1 + ROW_SUM_SLACK
    if over.any():
        row = int(np.flatnonzero(over)[0])
        raise IngestError(path, "relative abundances of the sample sum to more than 1", row + 2)
    return ids, [str(t) for t in taxa], ra


def _read_meta(path: Path) -> pd.DataFrame:
    frame = read_table(path)
    frame.columns = [str(c).strip() for c in frame.columns]
    for column in META_COLUMNS:
        if column not in frame.columns:
            best_match, _ = process.extractOne(column, list(frame.columns))
            raise IngestError(
                path, f"missing column {column!r}. Did you mean {best_match!r} ?", line=1
            )
    meta = pd.DataFrame(
        {column: _numeric(path, frame, column) for column in META_COLUMNS[1:]},
        index=_sample_ids(path, frame, SAMPLE_ID),
    )
    small = meta["library_size"] < 1
    if small.any():
        row = int(np.flatnonzero(small.to_numpy())[0])
        raise IngestError(
            path,
            "library size must be at least 1",
            line=row + 2,
            column=frame.columns.get_loc("library_size") + 1,
        )
    return meta


def ingest(ra_path: Path, meta_path: Path) -> TaxaTable:
    """Load a relative abundance table and its sample metadata.

    Parameters
    ----------
    ra_path : Path
        Samples as rows, the first column the sample id and one column per taxon. Tab
        separated, or comma separated for a ``.csv`` suffix.
    meta_path : Path
        Columns ``sample_id``, ``library_size``, ``x`` and ``y``. Other columns are ignored.

    Returns
    -------
    TaxaTable
        The samples present in both files, in the order of `ra_path`.

    Raises
    ------
    IngestError
        On a malformed cell, an abundance outside [0, 1], a duplicate sample id or a missing
        metadata column, with the file location.
    """
    ids, taxa, ra = _read_ra(ra_path)
    meta = _read_meta(meta_path)
    in_meta = ids.isin(meta.index).to_numpy()
    only_meta = int((~meta.index.isin(ids)).sum())
    if not in_meta.all():
        log.warning(
            f"Dropped {int((~in_meta).sum())} samples of [cyan]{ra_path}[/] without metadata."
        )
    if only_meta:
        log.warning(f"Dropped {only_meta} samples of [cyan]{meta_path}[/] without abundances.")
    if not in_meta.any():
        raise IngestError(ra_path, f"no sample in common with {meta_path}")
    kept = ids[in_meta]
    meta = meta.loc[kept]
    return TaxaTable(
        ra=ra[in_meta],
        library_size=meta["library_size"].to_numpy(),
        x=meta["x"].to_numpy(),
        y=meta["y"].to_numpy(),
        taxa_names=tuple(taxa),
        sample_ids=tuple(kept),
    )


def write_taxa_table(table: TaxaTable, directory: Path) -> tuple[Path, Path]:
    """Write `table` as ``ra.tsv`` and ``meta.tsv`` in the format :func:`ingest` reads.

    Values are written with 17 significant digits so that re-ingesting is exact.
    """
    directory.mkdir(parents=True, exist_ok=True)
    ra_path, meta_path = directory / "ra.tsv", directory / "meta.tsv"
    ra = pd.DataFrame(table.ra, columns=list(table.taxa_names))
    ra.insert(0, SAMPLE_ID, list(table.sample_ids))
    ra.to_csv(ra_path, sep="\t", index=False, float_format="%.17g")
    meta = pd.DataFrame(
        {
            SAMPLE_ID: list(table.sample_ids),
            "library_size": table.library_size,
            "x": table.x,
            "y": table.y,
        }
    )
    meta.to_csv(meta_path, sep="\t", index=False, float_format="%.17g")
    log.debug(f"Taxa table written to [cyan]{directory}[/].")
    return ra_path, meta_path


def format_cell(value: Any) -> str:
    """Output format of a cell: ``%.6g`` floats, lowercase booleans and ``NA`` for missing."""
    match value:
        case None:
            return "NA"
        case bool() | np.bool_():
            return "true" if value else "false"
        case int() | np.integer():
            return str(int(value))
        case float() | np.floating():
            return "NA" if math.isnan(value) else f"{float(value):.6g}"
        case _:
            return str(value)


def write_tsv(frame: pd.DataFrame, path: Path) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    cells = frame.astype(object).map(format_cell)
    cells.to_csv(path, sep="\t", index=False, lineterminator="\n")
    log.info(f"Wrote [cyan]{path}[/].")
