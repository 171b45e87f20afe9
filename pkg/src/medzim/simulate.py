"""Data generators of the two simulation settings and the replicate studies built on them.

Setting 1 draws a single zero-inflated Beta mediator per subject. Setting 2 draws whole
compositions from a zero-inflated Dirichlet law where only the first taxon carries zeros and
mediates the exposure effect.
"""

import logging
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import pandas as pd
from numpy.typing import ArrayLike, NDArray
from scipy import stats

from .dist import UPPER_CLAMP, DirichletMixtureSpec, zid_sample
from .effects import ExposureContrast, effect_value, estimate_effects
from .estimate import NumericalDifferentiationError, OptimizerSpec, PreconditionError, fit
from .model import LOD, ModelConfig, ModelParams, QuadratureError, SubjectData, ZeroMechanism
from .model.likelihood import outcome_mean
from .screen import DiscoveryMetrics, ScreenError, TaxaTable, discovery_metrics, screen_all
from .utils.enums import Effect, Scenario
from .utils.parallel import ordered_map, spawn_generators

log = logging.getLogger(__name__)

__all__ = [
    "LOW_RA_PARAMS",
    "HIGH_RA_PARAMS",
    "DEFAULT_LIBRARY_POOL",
    "scenario_params",
    "load_library_pool",
    "Setting1Spec",
    "Setting2Spec",
    "SimulatedStudy",
    "SimulatedScreen",
    "ReplicateSummary",
    "ScreeningSummary",
    "gen_setting1",
    "gen_setting2",
    "run_replicates",
    "run_screening_replicates",
]

LOW_RA_PARAMS = ModelParams(
    beta0=-2.0,
    beta1=100.0,
    beta2=4.0,
    beta3=5.0,
    beta4=3.0,
    beta5=0.0,
    delta=1.0,
    alpha0=-6.2,
    alpha1=0.4,
    phi=50.0,
    gamma0=-1.16,
    gamma1=-0.5,
)
HIGH_RA_PARAMS = LOW_RA_PARAMS.replace(alpha0=-1.0)

# Log-spaced stand-in for an empirical library size distribution spanning 31,607 to 911,652 reads.
DEFAULT_LIBRARY_POOL: NDArray[np.float64] = np.round(np.geomspace(31_607, 911_652, 24))
DEFAULT_LIBRARY_POOL.setflags(write=False)

SUMMARY_EFFECTS = (Effect.NIE1, Effect.NIE2, Effect.NIE)


def scenario_params(scenario: Scenario) -> ModelParams:
    match scenario:
        case Scenario.LOW_RA:
            return LOW_RA_PARAMS
        case Scenario.HIGH_RA:
            return HIGH_RA_PARAMS
        case _:
            raise ValueError(f"Unknown scenario {scenario}.")


def load_library_pool(path: Path) -> NDArray[np.float64]:
    """Read a one-column text file of library sizes, one positive integer per line."""
    frame = pd.read_csv(path, header=None, comment="#", sep=r"\s+")
    if frame.shape[1] != 1 or frame.empty:
        raise ValueError(f"Library pool {path} must have exactly one non-empty column.")
    pool = pd.to_numeric(frame.iloc[:, 0], errors="coerce").to_numpy(dtype=float)
    bad = ~(np.isfinite(pool) & (pool >= 1) & (pool == np.round(pool)))
    if bad.any():
        line = int(np.flatnonzero(bad)[0]) + 1
        raise ValueError(f"Library pool {path}: line {line} is not a positive integer.")
    return pool


def _validate_pool(pool: ArrayLike) -> NDArray[np.float64]:
    pool_ = np.array(pool, dtype=float)
    if pool_.ndim != 1 or pool_.size == 0 or np.any(~(pool_ >= 1)):
        raise ValueError("The library pool must be a non-empty vector of sizes >= 1.")
    pool_.setflags(write=False)
    return pool_


@dataclass(frozen=True, eq=False)
class Setting1Spec:
    """Single-taxon simulation.

    Attributes
    ----------
    n : int
        Sample size.
    true_params : ModelParams
        Generating parameters. ``beta5 = 0`` gives the outcome model without the linear
        interaction.
    mechanism : ZeroMechanism
        How present taxa are missed.
    library_pool : NDArray[np.float64]
        Library sizes, resampled with replacement.
    exposure_probability : float
        The exposure is ``Ber(exposure_probability)``.
    """

    n: int = 100
    true_params: ModelParams = LOW_RA_PARAMS
    mechanism: ZeroMechanism = field(default_factory=LOD)
    library_pool: NDArray[np.float64] = field(
        default_factory=lambda: DEFAULT_LIBRARY_POOL, repr=False
    )
    exposure_probability: float = 0.5

    def __post_init__(self) -> None:
        if self.n < 2:
            raise ValueError(f"Sample size must be at least 2, got {self.n}.")
        if not 0 < self.exposure_probability < 1:
            raise ValueError("The exposure probability must lie in (0, 1).")
        object.__setattr__(self, "library_pool", _validate_pool(self.library_pool))


@dataclass(frozen=True, eq=False)
class SimulatedStudy:
    """A setting 1 data set with its latent true abundances."""

    data: SubjectData
    m_true: NDArray[np.float64] = field(repr=False)

    @property
    def false_zeros(self) -> NDArray[np.bool_]:
        return (self.m_true > 0) & (self.data.m_obs == 0)  # type: ignore[no-any-return]


def gen_setting1(spec: Setting1Spec, rng: np.random.Generator) -> SimulatedStudy:
    """Draw one setting 1 data set.

    The exposure is Bernoulli, the true abundance zero-inflated Beta given the exposure,
    the library size resampled from the pool, and the observed abundance is zero whenever the
    mechanism misses a present taxon. The outcome is drawn from the true abundance.
    """
    p, n = spec.true_params, spec.n
    x = rng.binomial(1, spec.exposure_probability, size=n).astype(float)
    mu = p.mediator_mean(x)
    structural = rng.random(n) < p.zero_mass(x)
    draws = np.clip(rng.beta(mu * p.phi, (1 - mu) * p.phi), np.finfo(float).tiny, UPPER_CLAMP)
    m_true = np.where(structural, 0.0, draws)
    l = rng.choice(spec.library_pool, size=n, replace=True)  # noqa: E741
    m_obs = np.where(spec.mechanism.observe_zero(m_true, l, rng), 0.0, m_true)
    y = outcome_mean(m_true, m_true > 0, x, p) + rng.normal(0.0, p.delta, size=n)
    return SimulatedStudy(SubjectData(y=y, m_obs=m_obs, l=l, x=x), m_true)


@dataclass(frozen=True, eq=False)
class Setting2Spec:
    """Multi-taxon simulation where the first taxon is the only mediator.

    The first ``min(K, 2)`` Dirichlet link coefficients are fixed to `alpha0_head` and
    `alpha1_head`; the others are drawn uniformly from `alpha0_tail` and `alpha1_tail` once
    per data set.

    Attributes
    ----------
    n : int
        Sample size.
    k_plus_1 : int
        Number of taxa, including the reference taxon.
    outcome_betas : tuple[float, float, float, float, float]
        ``(β0, β1, β2, β3, β4)`` of the outcome model
        ``Y = β0 + β1 M1 + β2 1(M1>0) + β3 X + β4 X 1(M1>0) + ε`` with standard normal ``ε``.
    phi : float
        Dirichlet dispersion.
    gamma0, gamma1 : float
        Structural zero link of the first taxon.
    mechanism : ZeroMechanism
        How the first taxon is missed when present.
    library_pool : NDArray[np.float64]
        Library sizes, resampled with replacement.
    """

    n: int = 300
    k_plus_1: int = 10
    outcome_betas: tuple[float, float, float, float, float] = (-1.73, 35.0, 2.0, 4.55, 1.0)
    phi: float = 50.0
    gamma0: float = -1.5
    gamma1: float = 1.0
    alpha0_head: tuple[float, float] = (-3.0, 1.0)
    alpha1_head: tuple[float, float] = (1.0, 1.5)
    alpha0_tail: tuple[float, float] = (1.0, 2.0)
    alpha1_tail: tuple[float, float] = (-2.0, -1.0)
    mechanism: ZeroMechanism = field(default_factory=LOD)
    library_pool: NDArray[np.float64] = field(
        default_factory=lambda: DEFAULT_LIBRARY_POOL, repr=False
    )

    def __post_init__(self) -> None:
        if self.k_plus_1 < 2:
            raise ValueError(f"Setting 2 needs at least 2 taxa, got {self.k_plus_1}.")
        if self.n < 2:
            raise ValueError(f"Sample size must be at least 2, got {self.n}.")
        object.__setattr__(self, "library_pool", _validate_pool(self.library_pool))

    def dirichlet(self, rng: np.random.Generator) -> DirichletMixtureSpec:
        k = self.k_plus_1 - 1
        n_head = min(k, 2)
        alpha0 = np.concatenate(
            [self.alpha0_head[:n_head], rng.uniform(*self.alpha0_tail, size=k - n_head)]
        )
        alpha1 = np.concatenate(
            [self.alpha1_head[:n_head], rng.uniform(*self.alpha1_tail, size=k - n_head)]
        )
        return DirichletMixtureSpec(alpha0, alpha1, self.phi, self.gamma0, self.gamma1)


@dataclass(frozen=True, eq=False)
class SimulatedScreen:
    """A setting 2 data set with the true mediator flags."""

    table: TaxaTable
    truth: NDArray[np.bool_] = field(repr=False)


def gen_setting2(spec: Setting2Spec, rng: np.random.Generator) -> SimulatedScreen:
    """Draw one setting 2 data set.

    Structural and false zeros only affect the first taxon. When it is missed, the other
    taxa of the sample are rescaled to sum to one.
    """
    dirichlet = spec.dirichlet(rng)
    x = rng.binomial(1, 0.5, size=spec.n).astype(float)
    compositions = np.vstack([zid_sample(dirichlet, float(xi), rng) for xi in x])
    l = rng.choice(spec.library_pool, size=spec.n, replace=True)  # noqa: E741
    m1 = compositions[:, 0]
    missed = spec.mechanism.observe_zero(m1, l, rng)
    observed = compositions.copy()
    observed[missed, 0] = 0.0
    observed[missed, 1:] /= observed[missed, 1:].sum(axis=1, keepdims=True)
    b0, b1, b2, b3, b4 = spec.outcome_betas
    present = (m1 > 0).astype(float)
    y = b0 + b1 * m1 + b2 * present + b3 * x + b4 * x * present + rng.standard_normal(spec.n)
    table = TaxaTable(
        ra=observed,
        library_size=l,
        x=x,
        y=y,
        taxa_names=tuple(f"taxon{k + 1}" for k in range(spec.k_plus_1)),
    )
    truth = np.zeros(spec.k_plus_1, dtype=bool)
    truth[0] = True
    return SimulatedScreen(table, truth)


@dataclass(frozen=True)
class _Replicate:
    estimates: dict[str, tuple[float, float | None]] = field(default_factory=dict)
    failure: str = ""


def _setting1_replicate(
    spec: Setting1Spec,
    cfg: ModelConfig,
    opt: OptimizerSpec,
    contrast: ExposureContrast,
    rng: np.random.Generator,
) -> _Replicate:
    study = gen_setting1(spec, rng)
    try:
        result = fit(study.data, cfg, opt)
    except (PreconditionError, QuadratureError, NumericalDifferentiationError) as e:
        return _Replicate(failure=str(e))
    if not result.converged:
        return _Replicate(failure=f"not converged: {result.message}")
    se = result.standard_errors or {}
    estimates: dict[str, tuple[float, float | None]] = {
        name: (getattr(result.params_hat, name), se.get(name)) for name in result.free_names
    }
    for inference in estimate_effects(result, contrast, SUMMARY_EFFECTS).values():
        estimates[inference.effect.value] = (inference.estimate, inference.se)
    return _Replicate(estimates)


@dataclass(frozen=True)
class ReplicateSummary:
    """Bias, standard errors and coverage of the estimates over simulated replicates.

    `rows` has the columns of ``summary.tsv``; not-applicable cells hold None.
    """

    rows: tuple[dict[str, object], ...]
    n_reps: int
    n_failed: int

    COLUMNS = ("name", "true", "mean_estimate", "bias", "bias_pct", "se", "mean_se", "cp", "n_used")

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(list(self.rows), columns=list(self.COLUMNS))

    def row(self, name: str) -> dict[str, object]:
        return next(r for r in self.rows if r["name"] == name)


def _summarize(
    truths: dict[str, float], replicates: list[_Replicate], level: float
) -> tuple[dict[str, object], ...]:
    z = float(stats.norm.ppf(0.5 + level / 2))
    used = [r for r in replicates if not r.failure]
    rows = []
    for name, truth in truths.items():
        estimates = np.array([r.estimates[name][0] for r in used], dtype=float)
        ses = np.array(
            [np.nan if (s := r.estimates[name][1]) is None else s for r in used], dtype=float
        )
        has_se = np.isfinite(ses)
        mean_estimate = float(estimates.mean()) if estimates.size else None
        bias = None if mean_estimate is None else mean_estimate - truth
        covered = np.abs(estimates[has_se] - truth) <= z * ses[has_se]
        rows.append(
            {
                "name": name,
                "true": truth,
                "mean_estimate": mean_estimate,
                "bias": bias,
                "bias_pct": None if bias is None or truth == 0 else 100 * bias / truth,
                "se": float(estimates.std(ddof=1)) if estimates.size > 1 else None,
                "mean_se": float(ses[has_se].mean()) if has_se.any() else None,
                "cp": float(100 * covered.mean()) if has_se.any() else None,
                "n_used": int(estimates.size),
            }
        )
    return tuple(rows)


def run_replicates(
    spec: Setting1Spec,
    n_reps: int,
    cfg: ModelConfig,
    opt: OptimizerSpec | None = None,
    contrast: ExposureContrast | None = None,
    seed: int = 0,
    threads: int | None = None,
    level: float = 0.95,
) -> ReplicateSummary:
    """Simulate, fit and summarize `n_reps` setting 1 data sets.

    Each replicate draws from its own random stream spawned from `seed`, so the summary
    does not depend on `threads`. Replicates whose fit fails or does not converge are
    logged and excluded.
    """
    if n_reps < 1:
        raise ValueError(f"Need at least one replicate, got {n_reps}.")
    opt = opt or OptimizerSpec()
    contrast = contrast or ExposureContrast()
    truth_params = cfg.conform(spec.true_params)
    truths = {name: float(getattr(truth_params, name)) for name in cfg.free_names}
    truths.update({e.value: effect_value(e, truth_params, contrast) for e in SUMMARY_EFFECTS})

    replicates = ordered_map(
        lambda rng: _setting1_replicate(spec, cfg, opt, contrast, rng),
        spawn_generators(seed, n_reps),
        threads,
        description="Simulating replicates...",
    )
    failed = [(i, r.failure) for i, r in enumerate(replicates) if r.failure]
    for i, reason in failed:
        log.warning(f"Replicate {i} excluded: {reason}")
    if len(failed) == n_reps:
        raise RuntimeError(f"All {n_reps} replicates failed.")
    return ReplicateSummary(_summarize(truths, replicates, level), n_reps, len(failed))


@dataclass(frozen=True)
class ScreeningSummary:
    """Discovery metrics over setting 2 replicates, the rows of ``metrics.tsv``.

    Recall, precision and F1 are means over the replicates where they are defined.
    `f1_pooled` is computed from the true and false positive counts summed over replicates.
    NIE2 gets recall only, since the first taxon is the only one with zeros.
    """

    rows: tuple[dict[str, object], ...]
    n_reps: int
    n_failed: int

    COLUMNS = ("effect", "recall", "precision", "f1", "f1_pooled", "n_used", "n_failed")

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(list(self.rows), columns=list(self.COLUMNS))

    def row(self, effect: Effect) -> dict[str, object]:
        return next(r for r in self.rows if r["effect"] == effect.value)


def _mean_or_none(values: list[float | None]) -> float | None:
    defined = [v for v in values if v is not None]
    return math.fsum(defined) / len(defined) if defined else None


def run_screening_replicates(
    spec: Setting2Spec,
    n_reps: int,
    cfg: ModelConfig,
    opt: OptimizerSpec | None = None,
    contrast: ExposureContrast | None = None,
    fdr_target: float = 0.2,
    seed: int = 0,
    threads: int | None = None,
    min_positive: int = 5,
) -> ScreeningSummary:
    """Simulate and screen `n_reps` setting 2 data sets, then average the discovery metrics."""
    if n_reps < 1:
        raise ValueError(f"Need at least one replicate, got {n_reps}.")
    opt = opt or OptimizerSpec()
    contrast = contrast or ExposureContrast()

    def replicate(rng: np.random.Generator) -> dict[Effect, tuple[int, int, int]] | str:
        simulated = gen_setting2(spec, rng)
        try:
            result = screen_all(
                simulated.table,
                cfg,
                opt,
                contrast,
                fdr_target,
                min_positive,
                threads=1,
                show_progress=False,
            )
        except ScreenError as e:
            return str(e)
        counts = {}
        for effect in (Effect.NIE1, Effect.NIE2):
            m = discovery_metrics(result.discoveries(effect), simulated.truth)
            counts[effect] = (m.true_positives, m.false_positives, m.false_negatives)
        return counts

    outcomes = ordered_map(
        replicate, spawn_generators(seed, n_reps), threads, description="Screening replicates..."
    )
    used = [o for o in outcomes if not isinstance(o, str)]
    n_failed = n_reps - len(used)
    for i, o in enumerate(outcomes):
        if isinstance(o, str):
            log.warning(f"Replicate {i} excluded: {o}")
    if not used:
        raise RuntimeError(f"All {n_reps} replicates failed.")

    rows = []
    for effect in (Effect.NIE1, Effect.NIE2):
        per_rep = [DiscoveryMetrics.from_counts(*o[effect]) for o in used]
        pooled = DiscoveryMetrics.from_counts(*(sum(o[effect][j] for o in used) for j in range(3)))
        presence_only = effect is Effect.NIE2
        rows.append(
            {
                "effect": effect.value,
                "recall": _mean_or_none([m.recall for m in per_rep]),
                "precision": (
                    None if presence_only else _mean_or_none([m.precision for m in per_rep])
                ),
                "f1": None if presence_only else _mean_or_none([m.f1 for m in per_rep]),
                "f1_pooled": None if presence_only or not used else pooled.f1,
                "n_used": len(used),
                "n_failed": n_failed,
            }
        )
    return ScreeningSummary(tuple(rows), n_reps, n_failed)
