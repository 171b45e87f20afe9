import logging

from medzim.simulate import (
    DEFAULT_LIBRARY_POOL,
    Setting1Spec,
    Setting2Spec,
    gen_setting2,
    load_library_pool,
    run_replicates,
    run_screening_replicates,
    scenario_params,
)
from medzim.utils.config import save_manifest
from medzim.utils.parallel import spawn_generators

from .io import write_taxa_table, write_tsv
from .omegaconfig import RunConfig

log = logging.getLogger(__name__)

SUMMARY_NAME = "summary.tsv"
METRICS_NAME = "metrics.tsv"


def simulate1(config: RunConfig) -> None:
    """Run the single-taxon replicate study and write its bias and coverage summary."""
    section = config.simulate1
    pool = (
        DEFAULT_LIBRARY_POOL
        if section.library_pool is None
        else load_library_pool(section.library_pool)
    )
    model = config.model.build(beta5=config.model.beta5 and section.fit_beta5)
    spec = Setting1Spec(
        n=section.n,
        true_params=scenario_params(section.scenario),
        mechanism=model.mechanism,
        library_pool=pool,
    )
    save_manifest("simulate1", config.manifest(), config.out)
    log.info(
        f"Simulating {section.n_reps} replicates of {section.n} subjects "
        f"({section.scenario.value})."
    )
    summary = run_replicates(
        spec,
        section.n_reps,
        model,
        config.optimizer.build(config.seed),
        config.contrast.build(),
        seed=config.seed,
        threads=config.threads,
    )
    if summary.n_failed:
        log.warning(f"{summary.n_failed} of {summary.n_reps} replicates were excluded.")
    write_tsv(summary.to_frame(), config.out / SUMMARY_NAME)


def simulate2(config: RunConfig) -> None:
    """Run the multi-taxon screening study and write its discovery metrics."""
    section = config.simulate2
    pool = (
        DEFAULT_LIBRARY_POOL
        if section.library_pool is None
        else load_library_pool(section.library_pool)
    )
    model = config.model.build()
    spec = Setting2Spec(
        n=section.n, k_plus_1=section.k_plus_1, mechanism=model.mechanism, library_pool=pool
    )
    save_manifest("simulate2", config.manifest(), config.out)
    if section.export is not None:
        # replicate 0 draws from the first spawned stream, whatever the replicate count
        first = spawn_generators(config.seed, 1)[0]
        ra_path, _ = write_taxa_table(gen_setting2(spec, first).table, section.export)
        log.info(f"First replicate exported to [cyan]{ra_path.parent}[/].")
    log.info(
        f"Screening {section.n_reps} replicates of {section.n} subjects × "
        f"{section.k_plus_1} taxa."
    )
    summary = run_screening_replicates(
        spec,
        section.n_reps,
        model,
        config.optimizer.build(config.seed),
        config.contrast.build(),
        fdr_target=config.fdr,
        seed=config.seed,
        threads=config.threads,
        min_positive=config.min_positive,
    )
    write_tsv(summary.to_frame(), config.out / METRICS_NAME)
