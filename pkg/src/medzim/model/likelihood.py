"""Per-subject log-likelihood contributions and the complete log-likelihood.

A subject with a positive observed abundance (group 1) contributes the joint density of its
outcome and abundance. A subject observed as zero (group 2) is either a structural zero or a
present taxon that the sampling missed; the second branch integrates the outcome density
against the Beta density and the detection failure probability over the unobserved
abundance.
"""

import logging
import math
from collections.abc import Sequence
from typing import Any

import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy import integrate, special, stats

from ..dist import beta_logpdf
from ..utils.enums import QuadratureMethod
from .params import ModelConfig, ModelParams, SubjectData, SubjectRecord, as_subject_data

log = logging.getLogger(__name__)

__all__ = [
    "QuadratureError",
    "outcome_mean",
    "loglik_group1",
    "loglik_group2",
    "loglik_contributions",
    "loglik_total",
]

HALF_LOG_2PI = 0.5 * math.log(2 * math.pi)

# Points of a panel, edges included, used to scale the adaptive integrand before integration.
_SCALE_GRID = np.concatenate([[1e-9], (np.arange(64) + 0.5) / 64, [1 - 1e-9]])


class QuadratureError(RuntimeError):
    """The adaptive rule did not reach its tolerance within the subdivision budget.

    Attributes
    ----------
    index : int
        Index of the offending subject in the data set.
    """

    def __init__(self, index: int, message: str) -> None:
        super().__init__(f"Quadrature failed for subject {index}: {message}")
        self.index = index


def outcome_mean(
    m: ArrayLike, present: ArrayLike, x: ArrayLike, p: ModelParams
) -> NDArray[np.float64] | float:
    """Mean of the outcome regression at abundance `m`, presence `present` and exposure `x`.

    Returns ``β0 + β1 m + β2 present + β3 x + β4 x present + β5 x m``.
    """
    m_, r_, x_ = (np.asarray(v, dtype=float) for v in (m, present, x))
    out = (
        p.beta0
        + p.beta1 * m_
        + p.beta2 * r_
        + p.beta3 * x_
        + p.beta4 * x_ * r_
        + p.beta5 * x_ * m_
    )
    return float(out) if out.ndim == 0 else out


def _shapes(
    p: ModelParams, x: NDArray[np.float64]
) -> tuple[NDArray[np.float64], NDArray[np.float64], NDArray[np.float64]]:
    mu = p.mediator_mean(x)
    return mu * p.phi, (1 - mu) * p.phi, p.zero_mass(x)


def _group1(data: SubjectData, p: ModelParams) -> NDArray[np.float64]:
    a, b, zero_mass = _shapes(p, data.x)
    mean = outcome_mean(data.m_obs, 1.0, data.x, p)
    with np.errstate(divide="ignore", invalid="ignore"):
        return (  # type: ignore[no-any-return]
            stats.norm.logpdf(data.y, loc=mean, scale=p.delta)
            + np.log1p(-zero_mass)
            + beta_logpdf(data.m_obs, a, b)
        )


def _log_g(
    m: NDArray[np.float64],
    y: NDArray[np.float64],
    x: NDArray[np.float64],
    b: NDArray[np.float64],
    p: ModelParams,
) -> NDArray[np.float64]:
    """``(b - 1) ln(1 - m) - (y - mean(m))² / 2δ²``, the smooth part of the integrand."""
    residual = y - outcome_mean(m, 1.0, x, p)
    return (b - 1) * np.log1p(-m) - residual**2 / (2 * p.delta**2)  # type: ignore[no-any-return]


def _outcome_peak(
    data: SubjectData, p: ModelParams
) -> tuple[NDArray[np.float64], NDArray[np.float64]]:
    """Precision and center of the outcome density seen as a Gaussian factor in ``m``."""
    slope = p.beta1 + p.beta5 * data.x
    intercept = outcome_mean(0.0, 1.0, data.x, p)
    with np.errstate(divide="ignore", invalid="ignore"):
        precision = slope**2 / p.delta**2
        center = np.where(slope != 0, (data.y - intercept) / slope, 0.0)
    return precision, center  # type: ignore[return-value]


def _log_integral_fixed(
    data: SubjectData,
    a: NDArray[np.float64],
    b: NDArray[np.float64],
    p: ModelParams,
    cfg: ModelConfig,
) -> NDArray[np.float64]:
    precision, center = _outcome_peak(data, p)
    nodes, log_weights = cfg.mechanism.fixed_rule(
        data.l, a, b, cfg.quadrature.order, precision, center
    )
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = log_weights + _log_g(nodes, data.y[:, None], data.x[:, None], b[:, None], p)
        return special.logsumexp(terms, axis=1)  # type: ignore[no-any-return]


def _log_integral_adaptive(
    data: SubjectData,
    a: NDArray[np.float64],
    b: NDArray[np.float64],
    p: ModelParams,
    cfg: ModelConfig,
    index: NDArray[np.intp],
) -> NDArray[np.float64]:
    spec = cfg.quadrature
    mechanism = cfg.mechanism
    precision, center = _outcome_peak(data, p)
    with np.errstate(divide="ignore", invalid="ignore"):
        edges = mechanism.panel_edges(data.l, a, b, precision, center)
    out = np.empty(len(data))
    for i in range(len(data)):
        y, x, l_, a_i, b_i = data.y[i], data.x[i], data.l[i], a[i], b[i]
        parts: list[float] = []
        for lo, hi in zip(edges[i, :-1].tolist(), edges[i, 1:].tolist(), strict=True):
            if not hi > lo:
                continue
            # the panel at 0 keeps m^(a-1) in the algebraic weight
            origin = lo == 0.0

            def log_f(t: NDArray[np.float64] | float) -> NDArray[np.float64]:
                m = lo + (hi - lo) * np.asarray(t, dtype=float)  # noqa: B023
                out = mechanism.log_weight(m, l_) + _log_g(m, y, x, b_i, p)  # noqa: B023
                return out if origin else out + (a_i - 1.0) * np.log(m)  # noqa: B023

            with np.errstate(divide="ignore", invalid="ignore"):
                shift = float(np.max(log_f(_SCALE_GRID)))
            if shift == -np.inf:
                continue
            if not np.isfinite(shift):
                parts = [np.nan]
                break
            weight: dict[str, Any] = {"weight": "alg", "wvar": (a_i - 1.0, 0.0)} if origin else {}
            result = integrate.quad(
                lambda t: float(np.exp(log_f(t) - shift)),  # noqa: B023
                0.0,
                1.0,
                epsabs=spec.abs_tol,
                epsrel=spec.rel_tol,
                limit=spec.max_subdivisions,
                full_output=1,
                **weight,
            )
            if len(result) > 3:
                raise QuadratureError(int(index[i]), str(result[3]))
            value = result[0]
            if value > 0:
                log_width = a_i * math.log(hi) if origin else math.log(hi - lo)
                parts.append(log_width + shift + math.log(value))
        out[i] = special.logsumexp(parts) if parts else -np.inf
    return out
def _group2(
    data: SubjectData, p: ModelParams, cfg: ModelConfig, index: NDArray[np.intp]
) -> NDArray[np.float64]:
    a, b, zero_mass = _shapes(p, data.x)
    match cfg.quadrature.method:
        case QuadratureMethod.GAUSS:
            log_integral = _log_integral_fixed(data, a, b, p, cfg)
        case QuadratureMethod.ADAPTIVE:
            log_integral = _log_integral_adaptive(data, a, b, p, cfg, index)
        case _:
            raise ValueError(f"Unknown quadrature method {cfg.quadrature.method}.")
    structural_residual = data.y - p.beta0 - p.beta3 * data.x
    with np.errstate(divide="ignore", invalid="ignore"):
        structural = np.log(zero_mass) - structural_residual**2 / (2 * p.delta**2)
        missed = np.log1p(-zero_mass) - special.betaln(a, b) + log_integral
        out = -HALF_LOG_2PI - math.log(p.delta) + np.logaddexp(structural, missed)
    return out  # type: ignore[no-any-return]


def loglik_group1(rec: SubjectRecord, p: ModelParams, cfg: ModelConfig) -> float:
    """Contribution of a subject observed with a positive abundance.

    This is ``ln N(y; mean(m, 1, x), δ) + ln(1 - Δ) + ln Beta(m; μφ, (1 - μ)φ)``. A non-finite
    value signals parameters outside the model.
    """
    if not rec.m_obs > 0:
        raise ValueError("Group 1 contributions need a positive observed abundance.")
    return float(_group1(SubjectData.from_records([rec]), p)[0])


def loglik_group2(rec: SubjectRecord, p: ModelParams, cfg: ModelConfig) -> float:
    """Contribution of a subject observed as zero.

    Parameters
    ----------
    rec : SubjectRecord
        A subject with ``m_obs == 0``.
    p : ModelParams
        Parameters at which to evaluate.
    cfg : ModelConfig
        Selects the zero mechanism and the quadrature.

    Returns
    -------
    float
        ``ln[Δ N(y; β0 + β3 x, δ) + (1 - Δ) / B(a, b) ∫ w(m) m^(a-1) (1 - m)^(b-1)
        N(y; mean(m, 1, x), δ) dm]``.

    Raises
    ------
    QuadratureError
        When the adaptive rule does not converge.
    """
    if rec.m_obs != 0:
        raise ValueError("Group 2 contributions need a zero observed abundance.")
    return float(_group2(SubjectData.from_records([rec]), p, cfg, np.zeros(1, dtype=np.intp))[0])


def loglik_contributions(
    data: Sequence[SubjectRecord] | SubjectData, p: ModelParams, cfg: ModelConfig
) -> NDArray[np.float64]:
    """Per-subject contributions, in the order of `data`."""
    data = as_subject_data(data)
    out = np.empty(len(data))
    present = data.r
    if present.any():
        out[present] = _group1(data.take(present), p)
    if (~present).any():
        zero_index = np.flatnonzero(~present)
        out[~present] = _group2(data.take(zero_index), p, cfg, zero_index)
    return out


def loglik_total(
    data: Sequence[SubjectRecord] | SubjectData, p: ModelParams, cfg: ModelConfig
) -> float:
    """The complete log-likelihood, the sum of all subject contributions.

    The sum is correctly rounded, so reordering the subjects leaves it unchanged.

    Raises
    ------
    QuadratureError
        When the adaptive rule does not converge for a subject observed as zero.
    """
    contributions = loglik_contributions(data, p, cfg)
    if not np.all(np.isfinite(contributions)):
        return -math.inf
    return math.fsum(contributions.tolist())
