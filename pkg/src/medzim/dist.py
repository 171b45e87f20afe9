"""Special functions, the zero-inflated Beta law and the zero-inflated Dirichlet generator.

All samplers take an explicit :class:`numpy.random.Generator`; nothing here touches the
global random state.
"""

import logging
from dataclasses import dataclass, field

import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy import special

log = logging.getLogger(__name__)

__all__ = [
    "DomainError",
    "ZIBParams",
    "DirichletMixtureSpec",
    "expit",
    "logit",
    "log_beta_fn",
    "beta_logpdf",
    "zib_logpdf",
    "zib_mean",
    "zib_sample",
    "zid_sample",
]

# Largest value kept for a Beta draw; the Beta support is the open interval (0, 1).
UPPER_CLAMP = 1.0 - 1e-12


class DomainError(ValueError):
    """An argument is outside the mathematical domain of a function."""


def expit(t: ArrayLike) -> NDArray[np.float64] | float:
    """Inverse logit, ``1 / (1 + exp(-t))``, without overflow for large ``|t|``."""
    return special.expit(t)  # type: ignore[no-any-return]


def logit(p: ArrayLike) -> NDArray[np.float64] | float:
    """Log-odds, the inverse of :func:`expit`."""
    return special.logit(p)  # type: ignore[no-any-return]


def log_beta_fn(a: ArrayLike, b: ArrayLike) -> NDArray[np.float64] | float:
    """Natural logarithm of the Beta function ``B(a, b)``.

    Parameters
    ----------
    a, b : ArrayLike
        Positive shape parameters.

    Returns
    -------
    NDArray[np.float64] | float
        ``ln Γ(a) + ln Γ(b) - ln Γ(a + b)``, evaluated by cephes' ``betaln`` which keeps full
        double precision where the three log-gamma terms would cancel.
    """
    a_, b_ = np.asarray(a, dtype=float), np.asarray(b, dtype=float)
    if np.any(~(a_ > 0)) or np.any(~(b_ > 0)):
        raise DomainError(f"Beta function needs positive arguments, got a={a}, b={b}.")
    return special.betaln(a_, b_)  # type: ignore[no-any-return]


@dataclass(frozen=True)
class ZIBParams:
    """Parameters of a zero-inflated Beta law.

    Attributes
    ----------
    delta : float
        Point mass at zero, in (0, 1).
    mu : float
        Mean of the Beta component, in (0, 1).
    phi : float
        Dispersion of the Beta component. The shapes are ``mu * phi`` and ``(1 - mu) * phi``.
    """

    delta: float
    mu: float
    phi: float

    def __post_init__(self) -> None:
        if not 0 < self.delta < 1:
            raise DomainError(f"delta must lie in (0, 1), got {self.delta}.")
        if not 0 < self.mu < 1:
            raise DomainError(f"mu must lie in (0, 1), got {self.mu}.")
        if not self.phi > 0:
            raise DomainError(f"phi must be positive, got {self.phi}.")
        if not (self.a > 0 and self.b > 0):
            raise DomainError(f"Degenerate Beta shapes a={self.a}, b={self.b}.")

    @property
    def a(self) -> float:
        return self.mu * self.phi

    @property
    def b(self) -> float:
        return (1 - self.mu) * self.phi


def beta_logpdf(m: ArrayLike, a: ArrayLike, b: ArrayLike) -> NDArray[np.float64]:
    """Log-density of ``Beta(a, b)`` on the open interval (0, 1)."""
    m_ = np.asarray(m, dtype=float)
    a_, b_ = np.asarray(a, dtype=float), np.asarray(b, dtype=float)
    return (  # type: ignore[no-any-return]
        (a_ - 1) * np.log(m_) + (b_ - 1) * np.log1p(-m_) - special.betaln(a_, b_)
    )


def zib_logpdf(m: ArrayLike, p: ZIBParams) -> NDArray[np.float64] | float:
    """Log-density of the zero-inflated Beta law, with respect to ``δ_0 + Lebesgue``.

    Parameters
    ----------
    m : ArrayLike
        Values in [0, 1). The value 1 is outside the support and rejected.
    p : ZIBParams
        The law.

    Returns
    -------
    NDArray[np.float64] | float
        ``ln Δ`` at zero, ``ln(1 - Δ) + ln Beta(m; μφ, (1 - μ)φ)`` elsewhere.
    """
    m_ = np.asarray(m, dtype=float)
    if np.any(~((m_ >= 0) & (m_ < 1))):
        raise DomainError("Zero-inflated Beta values must lie in [0, 1).")
    positive = m_ > 0
    safe = np.where(positive, m_, 0.5)
    out = np.where(
        positive,
        np.log1p(-p.delta) + beta_logpdf(safe, p.a, p.b),
        np.log(p.delta),
    )
    return float(out) if out.ndim == 0 else out


def zib_mean(p: ZIBParams) -> float:
    """Marginal mean ``(1 - Δ) μ``."""
    return (1 - p.delta) * p.mu


def zib_sample(p: ZIBParams, n: int, rng: np.random.Generator) -> NDArray[np.float64]:
    """Draw `n` values from the zero-inflated Beta law.

    Each value is zero with probability ``Δ`` and a ``Beta(μφ, (1 - μ)φ)`` variate
    otherwise. Draws that round to 1 are pulled back into [0, 1).
    """
    if n < 1:
        raise DomainError(f"Sample size must be at least 1, got {n}.")
    zero = rng.random(n) < p.delta
    positive = np.minimum(rng.beta(p.a, p.b, size=n), UPPER_CLAMP)
    return np.where(zero, 0.0, positive)


@dataclass(frozen=True, eq=False)
class DirichletMixtureSpec:
    """A zero-inflated Dirichlet law whose means follow a multinomial logit in the exposure.

    Taxon ``k <= K`` has mean ``exp(alpha0[k] + alpha1[k] x) / (1 + sum_j exp(...))`` and the
    reference taxon ``K + 1`` has mean ``1 / (1 + sum_j exp(...))``. Only the first taxon is
    zero-inflated, with probability ``expit(gamma0 + gamma1 x)``.

    Attributes
    ----------
    alpha0 : NDArray[np.float64]
        K intercepts.
    alpha1 : NDArray[np.float64]
        K slopes.
    phi : float
        Dispersion, the Dirichlet concentrations are ``mu_k * phi``.
    gamma0, gamma1 : float
        Zero-mass link coefficients of the first taxon.
    """

    alpha0: NDArray[np.float64] = field(repr=False)
    alpha1: NDArray[np.float64] = field(repr=False)
    phi: float
    gamma0: float
    gamma1: float

    def __post_init__(self) -> None:
        alpha0 = np.asarray(self.alpha0, dtype=float)
        alpha1 = np.asarray(self.alpha1, dtype=float)
        if alpha0.ndim != 1 or alpha0.shape != alpha1.shape or alpha0.size < 1:
            raise DomainError("alpha0 and alpha1 must be vectors of the same positive length.")
        if not self.phi > 0:
            raise DomainError(f"phi must be positive, got {self.phi}.")
        object.__setattr__(self, "alpha0", alpha0)
        object.__setattr__(self, "alpha1", alpha1)

    @property
    def n_components(self) -> int:
        """Number of taxa, ``K + 1``."""
        return self.alpha0.size + 1

    def means(self, x: float) -> NDArray[np.float64]:
        """Component means at exposure `x`; they sum to one."""
        eta = np.concatenate([self.alpha0 + self.alpha1 * x, [0.0]])
        return special.softmax(eta)  # type: ignore[no-any-return]

    def zero_probability(self, x: float) -> float:
        return float(expit(self.gamma0 + self.gamma1 * x))


def zid_sample(
    spec: DirichletMixtureSpec, x: float, rng: np.random.Generator
) -> NDArray[np.float64]:
    """Draw one composition of ``K + 1`` taxa at exposure `x`.

    A ``Dirichlet(mu_1 phi, ..., mu_{K+1} phi)`` composition is drawn, then the first taxon
    is set to a structural zero with probability ``expit(gamma0 + gamma1 x)`` and the other
    components are rescaled to sum to one.
    """
    composition = rng.dirichlet(spec.means(x) * spec.phi)
    if rng.random() < spec.zero_probability(x):
        composition[0] = 0.0
        rest = composition[1:].sum()
        if rest > 0:
            composition[1:] /= rest
        else:
            composition[-1] = 1.0
    return composition  # type: ignore[no-any-return]
