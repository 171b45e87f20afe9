"""Closed-form causal effects, their gradients, and delta-method inference.

For an exposure change from ``x1`` to ``x2``, with ``μ(x) = expit(α0 + α1 x)`` and
``Δ(x) = expit(γ0 + γ1 x)``:

- ``NIE1 = (β1 + β5 x2) [(1 - Δ(x2)) μ(x2) - (1 - Δ(x1)) μ(x1)]``
- ``NIE2 = (β2 + β4 x2) (Δ(x1) - Δ(x2))``
- ``NIE = NIE1 + NIE2``
- ``NDE = (x2 - x1) [β3 + β4 (1 - Δ(x1)) + β5 (1 - Δ(x1)) μ(x1)]``
- ``CDE = (x2 - x1) [β3 + β4 1(m > 0) + β5 m]``
"""

import logging
import math
from collections.abc import Iterable, Iterator, Mapping, Sequence
from dataclasses import dataclass

import numpy as np
from numpy.typing import NDArray
from scipy import stats

from .estimate import FitResult
from .model import PARAM_NAMES, ModelParams
from .utils.enums import Effect

log = logging.getLogger(__name__)

__all__ = [
    "ExposureContrast",
    "EffectInference",
    "EffectEstimates",
    "nie1",
    "nie2",
    "nie",
    "nde",
    "cde",
    "effect_value",
    "effect_gradient",
    "delta_ci",
    "estimate_effects",
]

FloatArray = NDArray[np.float64]


@dataclass(frozen=True)
class ExposureContrast:
    """The exposure change ``x1 → x2``, and the mediator value held fixed by the CDE."""

    x1: float = 0.0
    x2: float = 1.0
    m_controlled: float | None = None

    def __post_init__(self) -> None:
        if self.x1 == self.x2:
            raise ValueError(f"The contrast needs x1 != x2, got x1 = x2 = {self.x1}.")
        if self.m_controlled is not None and not 0 <= self.m_controlled <= 1:
            raise ValueError(
                f"The controlled mediator must lie in [0, 1], got {self.m_controlled}."
            )

    @property
    def width(self) -> float:
        return self.x2 - self.x1


@dataclass(frozen=True)
class _Links:
    """Mediator law at both ends of a contrast, with the link derivatives."""

    mu1: float
    mu2: float
    delta1: float
    delta2: float

    @classmethod
    def at(cls, p: ModelParams, c: ExposureContrast) -> "_Links":
        return cls(
            mu1=float(p.mediator_mean(c.x1)),
            mu2=float(p.mediator_mean(c.x2)),
            delta1=float(p.zero_mass(c.x1)),
            delta2=float(p.zero_mass(c.x2)),
        )

    @property
    def mean1(self) -> float:
        """``E(M_x1) = (1 - Δ(x1)) μ(x1)``."""
        return (1 - self.delta1) * self.mu1

    @property
    def mean2(self) -> float:
        return (1 - self.delta2) * self.mu2


def nie1(p: ModelParams, c: ExposureContrast) -> float:
    """Indirect effect through the change of the mediator on its numeric scale."""
    k = _Links.at(p, c)
    return (p.beta1 + p.beta5 * c.x2) * (k.mean2 - k.mean1)


def nie2(p: ModelParams, c: ExposureContrast) -> float:
    """Indirect effect through the change of the mediator from zero to a positive value."""
    k = _Links.at(p, c)
    return (p.beta2 + p.beta4 * c.x2) * (k.delta1 - k.delta2)


def nie(p: ModelParams, c: ExposureContrast) -> float:
    return nie1(p, c) + nie2(p, c)


def nde(p: ModelParams, c: ExposureContrast) -> float:
    """Direct effect, with the mediator kept at its natural law under ``x1``."""
    k = _Links.at(p, c)
    return c.width * (p.beta3 + p.beta4 * (1 - k.delta1) + p.beta5 * k.mean1)


def cde(p: ModelParams, c: ExposureContrast) -> float:
    """Direct effect with the mediator held at ``c.m_controlled``."""
    if c.m_controlled is None:
        raise ValueError("The controlled direct effect needs a controlled mediator value.")
    m = c.m_controlled
    return c.width * (p.beta3 + p.beta4 * float(m > 0) + p.beta5 * m)


def effect_value(effect: Effect, p: ModelParams, c: ExposureContrast) -> float:
    match effect:
        case Effect.NIE1:
            return nie1(p, c)
        case Effect.NIE2:
            return nie2(p, c)
        case Effect.NIE:
            return nie(p, c)
        case Effect.NDE:
            return nde(p, c)
        case Effect.CDE:
            return cde(p, c)
        case _:
            raise ValueError(f"Unknown effect {effect}.")


def _full_gradient(effect: Effect, p: ModelParams, c: ExposureContrast) -> dict[str, float]:
    k = _Links.at(p, c)
    g = dict.fromkeys(PARAM_NAMES, 0.0)
    # derivatives of μ(x) and Δ(x) with respect to their link intercepts
    dmu1, dmu2 = k.mu1 * (1 - k.mu1), k.mu2 * (1 - k.mu2)
    dd1, dd2 = k.delta1 * (1 - k.delta1), k.delta2 * (1 - k.delta2)
    match effect:
        case Effect.NIE1:
            slope = p.beta1 + p.beta5 * c.x2
            diff = k.mean2 - k.mean1
            g["beta1"] = diff
            g["beta5"] = c.x2 * diff
            g["alpha0"] = slope * ((1 - k.delta2) * dmu2 - (1 - k.delta1) * dmu1)
            g["alpha1"] = slope * ((1 - k.delta2) * dmu2 * c.x2 - (1 - k.delta1) * dmu1 * c.x1)
            g["gamma0"] = slope * (-k.mu2 * dd2 + k.mu1 * dd1)
            g["gamma1"] = slope * (-k.mu2 * dd2 * c.x2 + k.mu1 * dd1 * c.x1)
        case Effect.NIE2:
            slope = p.beta2 + p.beta4 * c.x2
            diff = k.delta1 - k.delta2
            g["beta2"] = diff
            g["beta4"] = c.x2 * diff
            g["gamma0"] = slope * (dd1 - dd2)
            g["gamma1"] = slope * (dd1 * c.x1 - dd2 * c.x2)
        case Effect.NIE:
            first = _full_gradient(Effect.NIE1, p, c)
            second = _full_gradient(Effect.NIE2, p, c)
            g = {name: first[name] + second[name] for name in PARAM_NAMES}
        case Effect.NDE:
            w = c.width
            g["beta3"] = w
            g["beta4"] = w * (1 - k.delta1)
            g["beta5"] = w * k.mean1
            g["alpha0"] = w * p.beta5 * (1 - k.delta1) * dmu1
            g["alpha1"] = w * p.beta5 * (1 - k.delta1) * dmu1 * c.x1
            g["gamma0"] = -w * (p.beta4 + p.beta5 * k.mu1) * dd1
            g["gamma1"] = -w * (p.beta4 + p.beta5 * k.mu1) * dd1 * c.x1
        case Effect.CDE:
            if c.m_controlled is None:
                raise ValueError("The controlled direct effect needs a controlled mediator value.")
            w = c.width
            g["beta3"] = w
            g["beta4"] = w * float(c.m_controlled > 0)
            g["beta5"] = w * c.m_controlled
        case _:
            raise ValueError(f"Unknown effect {effect}.")
    return g


def effect_gradient(
    effect: Effect,
    p: ModelParams,
    c: ExposureContrast,
    names: Sequence[str] = PARAM_NAMES,
) -> FloatArray:
    """Analytic gradient of an effect with respect to the parameters `names`.

    Pass the free names of a :class:`~medzim.model.ModelConfig` to match the dimension of a
    fitted covariance matrix.
    """
    g = _full_gradient(effect, p, c)
    return np.array([g[name] for name in names], dtype=float)


@dataclass(frozen=True)
class EffectInference:
    """Point estimate and Wald inference of one effect.

    The inference fields are None when the covariance of the fit is unavailable, in which
    case `note` says why.
    """

    effect: Effect
    estimate: float
    se: float | None = None
    lo: float | None = None
    hi: float | None = None
    p_value: float | None = None
    note: str = ""

    @property
    def available(self) -> bool:
        return self.se is not None


def delta_ci(
    effect: Effect, fit: FitResult, c: ExposureContrast, level: float = 0.95
) -> EffectInference:
    """Delta-method confidence interval and two-sided Wald p-value of an effect.

    Parameters
    ----------
    effect : Effect
        Which effect.
    fit : FitResult
        A fit with its covariance matrix.
    c : ExposureContrast
        The exposure change.
    level : float
        Confidence level.

    Returns
    -------
    EffectInference
        ``se = sqrt(gᵀ Σ g)`` with ``g`` the effect gradient at the estimate, and the interval
        ``estimate ± z se``.
    """
    if not 0 < level < 1:
        raise ValueError(f"Confidence level must lie in (0, 1), got {level}.")
    estimate = effect_value(effect, fit.params_hat, c)
    if fit.cov_hat is None:
        return EffectInference(effect, estimate, note="covariance unavailable")
    g = effect_gradient(effect, fit.params_hat, c, fit.free_names)
    variance = float(g @ fit.cov_hat @ g)
    roundoff = 1e-10 * float(np.abs(g) @ np.abs(fit.cov_hat) @ np.abs(g))
    if not math.isfinite(variance) or variance < -roundoff:
        log.warning(f"Negative delta-method variance {variance:.3g} for {effect.value}.")
        return EffectInference(effect, estimate, note="negative variance")
    se = math.sqrt(max(variance, 0.0))
    z = float(stats.norm.ppf(0.5 + level / 2))
    if se > 0:
        p_value = float(2 * stats.norm.sf(abs(estimate) / se))
    else:
        p_value = 1.0 if estimate == 0 else 0.0
    return EffectInference(
        effect, estimate, se=se, lo=estimate - z * se, hi=estimate + z * se, p_value=p_value
    )


class EffectEstimates(Mapping[Effect, EffectInference]):
    """The effects estimated from one fit, keyed by :class:`Effect`."""

    def __init__(self, inferences: Iterable[EffectInference]) -> None:
        self._items = {inference.effect: inference for inference in inferences}

    def __getitem__(self, effect: Effect) -> EffectInference:
        return self._items[effect]

    def __iter__(self) -> Iterator[Effect]:
        return iter(self._items)

    def __len__(self) -> int:
        return len(self._items)

    def __repr__(self) -> str:
        return f"EffectEstimates({list(self._items.values())!r})"


def estimate_effects(
    fit: FitResult,
    c: ExposureContrast,
    effects: Iterable[Effect] | None = None,
    level: float = 0.95,
) -> EffectEstimates:
    """Delta-method inference of several effects.

    By default NIE1, NIE2, NIE and NDE, and the CDE when `c` fixes a mediator value.
    """
    if effects is None:
        effects = [Effect.NIE1, Effect.NIE2, Effect.NIE, Effect.NDE]
        if c.m_controlled is not None:
            effects.append(Effect.CDE)
    return EffectEstimates(delta_ci(effect, fit, c, level) for effect in effects)
