"""Taxon-by-taxon mediation screen with false discovery rate control."""

import logging
from collections.abc import Sequence
from dataclasses import dataclass, field
from typing import Any

import numpy as np
import pandas as pd
from numpy.typing import ArrayLike, NDArray

from .dist import UPPER_CLAMP
from .effects import EffectEstimates, ExposureContrast, estimate_effects
from .estimate import (
    FitResult,
    NumericalDifferentiationError,
    OptimizerSpec,
    PreconditionError,
    fit,
)
from .model import ModelConfig, QuadratureError, SubjectData
from .utils.enums import Effect, TaxonStatus
from .utils.parallel import ordered_map

log = logging.getLogger(__name__)

__all__ = [
    "ScreenError",
    "TaxaTable",
    "TaxonResult",
    "ScreenResult",
    "DiscoveryMetrics",
    "screen_all",
    "bh_adjust",
    "discovery_metrics",
    "heatmap_matrix",
    "reported_effects",
]

# Effects that enter the false discovery rate control.
SCREENED_EFFECTS = (Effect.NIE1, Effect.NIE2)
DEFAULT_MIN_POSITIVE = 5
ROW_SUM_SLACK = 1e-6


class ScreenError(RuntimeError):
    """No taxon of the table could be analyzed."""


@dataclass(frozen=True, eq=False)
class TaxaTable:
    """Relative abundances of several taxa, with the per-sample covariates.

    Attributes
    ----------
    ra : NDArray[np.float64]
        Samples × taxa relative abundances in [0, 1]. Rows sum to at most one.
    library_size : NDArray[np.float64]
        Sequencing depth of each sample, at least 1.
    x : NDArray[np.float64]
        Exposure of each sample.
    y : NDArray[np.float64]
        Outcome of each sample.
    taxa_names : tuple[str, ...]
        Column labels of `ra`.
    sample_ids : tuple[str, ...]
        Row labels. Defaults to ``S1, S2, ...``.
    """

    ra: NDArray[np.float64] = field(repr=False)
    library_size: NDArray[np.float64] = field(repr=False)
    x: NDArray[np.float64] = field(repr=False)
    y: NDArray[np.float64] = field(repr=False)
    taxa_names: tuple[str, ...]
    sample_ids: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        ra = np.array(self.ra, dtype=float)
        vectors = {
            name: np.array(getattr(self, name), dtype=float)
            for name in ("library_size", "x", "y")
        }
        if ra.ndim != 2:
            raise ValueError("Relative abundances must be a samples × taxa matrix.")
        n, k = ra.shape
        if any(v.shape != (n,) for v in vectors.values()):
            raise ValueError(f"library_size, x and y must have one entry per sample ({n}).")
        if len(self.taxa_names) != k:
            raise ValueError(f"Got {len(self.taxa_names)} taxa names for {k} columns.")
        sample_ids = tuple(self.sample_ids) or tuple(f"S{i + 1}" for i in range(n))
        if len(sample_ids) != n:
            raise ValueError(f"Got {len(sample_ids)} sample ids for {n} samples.")
        if np.any(~((ra >= 0) & (ra <= 1))):
            raise ValueError("Relative abundances must lie in [0, 1].")
        if np.any(ra.sum(axis=1) > 1 + ROW_SUM_SLACK):
            raise ValueError("Relative abundances of a sample sum to more than one.")
        if np.any(~(vectors["library_size"] >= 1)):
            raise ValueError("Library sizes must be at least 1.")
        object.__setattr__(self, "ra", ra)
        object.__setattr__(self, "taxa_names", tuple(self.taxa_names))
        object.__setattr__(self, "sample_ids", sample_ids)
        for name, v in vectors.items():
            object.__setattr__(self, name, v)

    @property
    def n_samples(self) -> int:
        return int(self.ra.shape[0])

    @property
    def n_taxa(self) -> int:
        return int(self.ra.shape[1])

    def subject_data(self, taxon: int) -> SubjectData:
        """The single-mediator data set of one taxon. Abundances of exactly 1 are clamped."""
        m = self.ra[:, taxon]
        if np.any(m >= 1):
            log.warning(
                f"Taxon [cyan]{self.taxa_names[taxon]}[/] has {int(np.sum(m >= 1))} relative "
                f"abundances equal to 1, clamped to {UPPER_CLAMP}."
            )
            m = np.minimum(m, UPPER_CLAMP)
        return SubjectData(y=self.y, m_obs=m, l=self.library_size, x=self.x)

    def select_taxa(self, index: Sequence[int]) -> "TaxaTable":
        index = list(index)
        return TaxaTable(
            ra=self.ra[:, index],
            library_size=self.library_size,
            x=self.x,
            y=self.y,
            taxa_names=tuple(self.taxa_names[i] for i in index),
            sample_ids=self.sample_ids,
        )


@dataclass(frozen=True)
class TaxonResult:
    """Analysis of one taxon.

    `q_values` and `significant` are filled for the screened effects of fitted taxa only.
    """

    taxon: str
    status: TaxonStatus
    n_zero: int
    fit: FitResult | None = field(default=None, repr=False)
    effects: EffectEstimates | None = field(default=None, repr=False)
    q_values: dict[Effect, float] = field(default_factory=dict)
    significant: dict[Effect, bool] = field(default_factory=dict)
    message: str = ""

    def p_value(self, effect: Effect) -> float | None:
        if self.effects is None or effect not in self.effects:
            return None
        return self.effects[effect].p_value


def reported_effects(contrast: ExposureContrast) -> tuple[Effect, ...]:
    """Effects written per taxon, in output order."""
    effects = (Effect.NIE1, Effect.NIE2, Effect.NIE, Effect.NDE)
    return effects + ((Effect.CDE,) if contrast.m_controlled is not None else ())


@dataclass(frozen=True)
class ScreenResult:
    """All taxa of a screen, in table order."""

    taxa: tuple[TaxonResult, ...]
    contrast: ExposureContrast
    fdr_target: float

    def __len__(self) -> int:
        return len(self.taxa)

    def p_values(self, effect: Effect) -> NDArray[np.float64]:
        """Raw p-values, ``nan`` where unavailable."""
        return np.array(
            [np.nan if (p := t.p_value(effect)) is None else p for t in self.taxa], dtype=float
        )

    def discoveries(self, effect: Effect) -> NDArray[np.bool_]:
        return np.array([t.significant.get(effect, False) for t in self.taxa], dtype=bool)

    @property
    def status_counts(self) -> dict[TaxonStatus, int]:
        return {s: sum(t.status is s for t in self.taxa) for s in TaxonStatus}

    def to_frame(self) -> pd.DataFrame:
        """One row per taxon, with the fixed column order of ``results.tsv``."""
        rows: list[dict[str, Any]] = []
        for t in self.taxa:
            row: dict[str, Any] = {
                "taxon": t.taxon,
                "status": t.status.value,
                "n_zero": t.n_zero,
                "converged": None if t.fit is None else t.fit.converged,
                "condition_number": None if t.fit is None else t.fit.condition_number,
            }
            for effect in reported_effects(self.contrast):
                name = effect.value
                inference = None if t.effects is None else t.effects.get(effect)
                row[name] = None if inference is None else inference.estimate
                row[f"{name}_se"] = None if inference is None else inference.se
                row[f"{name}_lo"] = None if inference is None else inference.lo
                row[f"{name}_hi"] = None if inference is None else inference.hi
                row[f"{name}_p"] = None if inference is None else inference.p_value
                if effect in SCREENED_EFFECTS:
                    row[f"{name}_q"] = t.q_values.get(effect)
                    row[f"{name}_significant"] = (
                        t.significant.get(effect) if effect in t.q_values else None
                    )
            rows.append(row)
        return pd.DataFrame(rows, columns=_columns(self.contrast))


def _columns(contrast: ExposureContrast) -> list[str]:
    columns = ["taxon", "status", "n_zero", "converged", "condition_number"]
    for effect in reported_effects(contrast):
        name = effect.value
        columns += [name] + [f"{name}_{suffix}" for suffix in ("se", "lo", "hi", "p")]
        if effect in SCREENED_EFFECTS:
            columns += [f"{name}_q", f"{name}_significant"]
    return columns


def bh_adjust(pvals: ArrayLike) -> NDArray[np.float64]:
    """Benjamini–Hochberg adjusted p-values.

    ``q_(i) = min_{j >= i} m p_(j) / j`` over the sorted p-values, capped at 1 and returned
    in the input order. Rejecting ``q <= α`` is the step-up procedure at level ``α``.
    """
    p = np.asarray(pvals, dtype=float)
    if p.ndim != 1:
        raise ValueError("p-values must be a vector.")
    if p.size == 0:
        return np.empty(0)
    if np.any(~((p >= 0) & (p <= 1))):
        raise ValueError("p-values must lie in [0, 1].")
    m = p.size
    order = np.argsort(p, kind="stable")
    ranked = p[order] * m / np.arange(1, m + 1)
    q_sorted = np.minimum.accumulate(ranked[::-1])[::-1]
    q = np.empty(m)
    q[order] = np.minimum(q_sorted, 1.0)
    return q


@dataclass(frozen=True)
class DiscoveryMetrics:
    """Recall, precision and F1 of a set of discoveries against the true mediators.

    `recall` and `f1` are None when there is no true mediator. Precision is 1 when there is
    no false positive.
    """

    recall: float | None
    precision: float
    f1: float | None
    true_positives: int
    false_positives: int
    false_negatives: int

    @classmethod
    def from_counts(cls, tp: int, fp: int, fn: int) -> "DiscoveryMetrics":
        precision = 1.0 if fp == 0 else tp / (tp + fp)
        recall = None if tp + fn == 0 else tp / (tp + fn)
        if recall is None:
            f1 = None
        elif recall == 0 or precision == 0:
            f1 = 0.0
        else:
            f1 = 2 * recall * precision / (recall + precision)
        return cls(recall, precision, f1, tp, fp, fn)


def discovery_metrics(flags: ArrayLike, truth: ArrayLike) -> DiscoveryMetrics:
    flags_ = np.asarray(flags, dtype=bool)
    truth_ = np.asarray(truth, dtype=bool)
    if flags_.shape != truth_.shape:
        raise ValueError("Discovery flags and truth must have the same length.")
    tp = int(np.sum(flags_ & truth_))
    fp = int(np.sum(flags_ & ~truth_))
    fn = int(np.sum(~flags_ & truth_))
    return DiscoveryMetrics.from_counts(tp, fp, fn)


def _analyze_taxon(
    table: TaxaTable,
    k: int,
    cfg: ModelConfig,
    opt: OptimizerSpec,
    contrast: ExposureContrast,
    min_positive: int,
) -> TaxonResult:
    name = table.taxa_names[k]
    data = table.subject_data(k)
    n_zero = data.n_zero
    n_positive = len(data) - n_zero
    if n_positive < min_positive:
        return TaxonResult(
            name,
            TaxonStatus.SKIPPED,
            n_zero,
            message=f"positive in {n_positive} samples, fewer than {min_positive}",
        )
    taxon_cfg = cfg if n_zero > 0 else cfg.without_zero_inflation()
    try:
        result = fit(data, taxon_cfg, opt)
    except (PreconditionError, QuadratureError, NumericalDifferentiationError) as e:
        log.warning(f"Taxon [cyan]{name}[/] failed: {e}")
        return TaxonResult(name, TaxonStatus.FAILED, n_zero, message=str(e))
    effects = [e for e in reported_effects(contrast) if n_zero > 0 or e is not Effect.NIE2]
    estimates = estimate_effects(result, contrast, effects)
    status = TaxonStatus.FITTED if result.converged else TaxonStatus.NOT_CONVERGED
    if not result.converged:
        log.warning(f"Taxon [cyan]{name}[/] did not converge.")
    return TaxonResult(name, status, n_zero, result, estimates, message=result.message)


def screen_all(
    table: TaxaTable,
    cfg: ModelConfig,
    opt: OptimizerSpec,
    contrast: ExposureContrast,
    fdr_target: float = 0.2,
    min_positive: int = DEFAULT_MIN_POSITIVE,
    threads: int | None = None,
    show_progress: bool = True,
) -> ScreenResult:
    """Analyze every taxon of `table` as the single mediator, then control the FDR.

    Taxa without observed zeros are fit without zero inflation, and get no NIE2 inference.
    Taxa positive in fewer than `min_positive` samples are skipped. Only fitted taxa with an
    available p-value enter the Benjamini–Hochberg family of each screened effect.

    Parameters
    ----------
    table : TaxaTable
        The abundances and covariates.
    cfg : ModelConfig
        Model of a zero-inflated taxon.
    opt : OptimizerSpec
        Optimizer settings, shared by every taxon.
    contrast : ExposureContrast
        The exposure change.
    fdr_target : float
        Target false discovery rate, in (0, 1).
    min_positive : int
        Minimum number of samples where the taxon is observed.
    threads : int | None
        Worker threads. Results do not depend on it.
    show_progress : bool
        Display a progress bar over the taxa.

    Returns
    -------
    ScreenResult
        Per-taxon results in table order.

    Raises
    ------
    ScreenError
        If no taxon could be fitted.
    """
    if not 0 < fdr_target < 1:
        raise ValueError(f"FDR target must lie in (0, 1), got {fdr_target}.")
    results = ordered_map(
        lambda k: _analyze_taxon(table, k, cfg, opt, contrast, min_positive),
        range(table.n_taxa),
        threads,
        description="Fitting taxa...",
        show_progress=show_progress,
    )
    fitted = [r for r in results if r.fit is not None]
    if not fitted:
        raise ScreenError(
            f"None of the {table.n_taxa} taxa could be fitted "
            f"({sum(r.status is TaxonStatus.SKIPPED for r in results)} skipped)."
        )

    for effect in SCREENED_EFFECTS:
        family = [
            i
            for i, r in enumerate(results)
            if r.status.usable and r.p_value(effect) is not None
        ]
        q = bh_adjust([results[i].p_value(effect) for i in family])
        for i, q_i in zip(family, q.tolist(), strict=True):
            results[i].q_values[effect] = q_i
            results[i].significant[effect] = q_i <= fdr_target

    n_failed = sum(not r.status.usable for r in results)
    if n_failed:
        log.warning(f"{n_failed} of {len(results)} taxa excluded from the FDR control.")
    return ScreenResult(tuple(results), contrast, fdr_target)


def heatmap_matrix(result: ScreenResult, table: TaxaTable) -> pd.DataFrame:
    """Signed mediation strengths, taxa × samples.

    Entry ``(taxon, sample)`` is ``sign(NIE1) (1 - p)`` with ``p`` the raw NIE1 p-value,
    where the taxon is observed in the sample, and missing elsewhere.
    """
    if len(result) != table.n_taxa:
        raise ValueError("Screen result and table have different taxa.")
    strengths = np.full(table.n_taxa, np.nan)
    for k, t in enumerate(result.taxa):
        p = t.p_value(Effect.NIE1)
        if p is not None and t.effects is not None:
            strengths[k] = np.sign(t.effects[Effect.NIE1].estimate) * (1 - p)
    values = np.where(table.ra.T > 0, strengths[:, None], np.nan)
    return pd.DataFrame(
        values,
        index=pd.Index(table.taxa_names, name="taxon"),
        columns=list(table.sample_ids),
    )
