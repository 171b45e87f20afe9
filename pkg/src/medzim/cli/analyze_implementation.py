import logging

from medzim.screen import heatmap_matrix, screen_all
from medzim.utils.config import save_manifest
from medzim.utils.enums import Effect, TaxonStatus

from .io import ingest, write_tsv
from .omegaconfig import ConfigError, RunConfig

log = logging.getLogger(__name__)

RESULTS_NAME = "results.tsv"
HEATMAP_NAME = "heatmap.tsv"


def analyze(config: RunConfig) -> None:
    """Screen every taxon of the input table and write the results, heatmap and manifest."""
    if config.analyze.ra is None or config.analyze.meta is None:
        raise ConfigError("analyze needs both --ra and --meta (analyze.ra, analyze.meta).")
    table = ingest(config.analyze.ra, config.analyze.meta)
    log.info(
        f"Loaded {table.n_samples} samples × {table.n_taxa} taxa from "
        f"[cyan]{config.analyze.ra}[/]."
    )
    save_manifest("analyze", config.manifest(), config.out)
    result = screen_all(
        table,
        config.model.build(),
        config.optimizer.build(config.seed),
        config.contrast.build(),
        fdr_target=config.fdr,
        min_positive=config.min_positive,
        threads=config.threads,
    )
    counts = result.status_counts
    n_discoveries = int(result.discoveries(Effect.NIE1).sum())
    log.info(
        ", ".join(f"{counts[status]} {status.value}" for status in TaxonStatus)
        + f" taxa; {n_discoveries} NIE1 discoveries at FDR {config.fdr}."
    )
    write_tsv(result.to_frame(), config.out / RESULTS_NAME)
    write_tsv(heatmap_matrix(result, table).reset_index(), config.out / HEATMAP_NAME)
