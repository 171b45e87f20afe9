"""Parameter vector, model configuration and subject records of the joint model."""

import dataclasses
import logging
from collections.abc import Iterator, Sequence
from dataclasses import dataclass, field, fields

import numpy as np
from numpy.typing import ArrayLike, NDArray

from ..dist import expit
from ..utils.enums import QuadratureMethod
from .mechanisms import LOD, ZeroMechanism

log = logging.getLogger(__name__)

__all__ = [
    "PARAM_NAMES",
    "NO_ZERO_INFLATION",
    "ModelParams",
    "QuadratureSpec",
    "ModelConfig",
    "SubjectRecord",
    "SubjectData",
    "as_subject_data",
]

PARAM_NAMES: tuple[str, ...] = (
    "beta0",
    "beta1",
    "beta2",
    "beta3",
    "beta4",
    "beta5",
    "delta",
    "alpha0",
    "alpha1",
    "phi",
    "gamma0",
    "gamma1",
)

# gamma0 value encoding a point mass of zero at M = 0.
NO_ZERO_INFLATION = -np.inf

POSITIVE_PARAMS = ("delta", "phi")


@dataclass(frozen=True)
class ModelParams:
    """The parameter vector ``ζ`` of the outcome and mediator models.

    The flat ordering is ``(β0, β1, β2, β3, β4, β5, δ, α0, α1, φ, γ0, γ1)``.

    Attributes
    ----------
    beta0, beta1, beta2, beta3, beta4, beta5 : float
        Coefficients of the outcome regression
        ``Y = β0 + β1 M + β2 1(M>0) + β3 X + β4 X 1(M>0) + β5 X M + ε``.
    delta : float
        Standard deviation of the Gaussian error ``ε``.
    alpha0, alpha1 : float
        Logit link of the Beta mean, ``logit μ = α0 + α1 X``.
    phi : float
        Dispersion of the Beta component.
    gamma0, gamma1 : float
        Logit link of the structural zero mass, ``logit Δ = γ0 + γ1 X``. ``gamma0 = -inf``
        encodes a mediator without structural zeros.
    """

    beta0: float
    beta1: float
    beta2: float
    beta3: float
    beta4: float
    beta5: float
    delta: float
    alpha0: float
    alpha1: float
    phi: float
    gamma0: float
    gamma1: float

    def __post_init__(self) -> None:
        for f in fields(self):
            value = getattr(self, f.name)
            object.__setattr__(self, f.name, float(value))
            if f.name == "gamma0" and value == NO_ZERO_INFLATION:
                continue
            if not np.isfinite(value):
                raise ValueError(f"Parameter {f.name} must be finite, got {value}.")
        for name in POSITIVE_PARAMS:
            if not getattr(self, name) > 0:
                raise ValueError(f"Parameter {name} must be positive, got {getattr(self, name)}.")

    @classmethod
    def from_vector(
        cls, vector: ArrayLike, names: Sequence[str] = PARAM_NAMES, **pinned: float
    ) -> "ModelParams":
        """Build parameters from a flat vector over `names`, completed with `pinned` values."""
        values = dict(zip(names, np.asarray(vector, dtype=float).tolist(), strict=True))
        values.update(pinned)
        return cls(**values)

    def to_vector(self, names: Sequence[str] = PARAM_NAMES) -> NDArray[np.float64]:
        return np.array([getattr(self, name) for name in names], dtype=float)

    def as_dict(self) -> dict[str, float]:
        return {name: getattr(self, name) for name in PARAM_NAMES}

    def replace(self, **changes: float) -> "ModelParams":
        return dataclasses.replace(self, **changes)

    def mediator_mean(self, x: ArrayLike) -> NDArray[np.float64]:
        """``μ(x) = expit(α0 + α1 x)``."""
        return np.asarray(expit(self.alpha0 + self.alpha1 * np.asarray(x, dtype=float)))

    def zero_mass(self, x: ArrayLike) -> NDArray[np.float64]:
        """``Δ(x) = expit(γ0 + γ1 x)``."""
        return np.asarray(expit(self.gamma0 + self.gamma1 * np.asarray(x, dtype=float)))


@dataclass(frozen=True)
class QuadratureSpec:
    """How the integral over false zeros is computed.

    Attributes
    ----------
    method : QuadratureMethod
        Both split the detection window into panels at the regime changes of the detection
        weight and around the peak of the outcome density. ``GAUSS`` applies a fixed-order
        rule on each panel, Gauss–Jacobi on the panel at 0 so that the endpoint singularity
        of the Beta density is integrated exactly. ``ADAPTIVE`` applies QUADPACK's adaptive
        rules, with the algebraic weight on the panel at 0.
    order : int
        Number of nodes of the fixed rule on each panel.
    abs_tol, rel_tol : float
        Tolerances of the adaptive rule.
    max_subdivisions : int
        Subinterval budget of the adaptive rule.
    """

    method: QuadratureMethod = QuadratureMethod.GAUSS
    order: int = 48
    abs_tol: float = 1e-14
    rel_tol: float = 1e-11
    max_subdivisions: int = 200

    def __post_init__(self) -> None:
        if not (self.abs_tol > 0 and self.rel_tol > 0):
            raise ValueError("Quadrature tolerances must be positive.")
        if self.order < 2 or self.max_subdivisions < 2:
            raise ValueError("Quadrature order and subdivision budget must be at least 2.")


@dataclass(frozen=True)
class ModelConfig:
    """Which terms of the joint model are estimated.

    Attributes
    ----------
    include_interaction_indicator : bool
        Keep ``β4 X 1(M>0)``. When False, ``β4`` is pinned to 0.
    include_interaction_linear : bool
        Keep ``β5 X M``. When False, ``β5`` is pinned to 0.
    zero_inflated : bool
        Model structural zeros. When False, ``Δ ≡ 0`` and ``β2``, ``β4`` and ``γ1`` are pinned
        to 0, which is the model for taxa that are never observed as zero.
    mechanism : ZeroMechanism
        The rule under which a present taxon is observed as zero. Defaults to LOD.
    quadrature : QuadratureSpec
        Integration settings for subjects observed as zero.
    """

    include_interaction_indicator: bool = True
    include_interaction_linear: bool = True
    zero_inflated: bool = True
    mechanism: ZeroMechanism = field(default_factory=LOD)
    quadrature: QuadratureSpec = field(default_factory=QuadratureSpec)

    @property
    def pinned(self) -> dict[str, float]:
        """Parameters held fixed, with their values."""
        pinned: dict[str, float] = {}
        if not self.include_interaction_indicator:
            pinned["beta4"] = 0.0
        if not self.include_interaction_linear:
            pinned["beta5"] = 0.0
        if not self.zero_inflated:
            pinned.update(beta2=0.0, beta4=0.0, gamma0=NO_ZERO_INFLATION, gamma1=0.0)
        return pinned

    @property
    def free_names(self) -> tuple[str, ...]:
        """Names of the estimated parameters, in ``ζ`` order."""
        pinned = self.pinned
        return tuple(name for name in PARAM_NAMES if name not in pinned)

    @property
    def dim(self) -> int:
        return len(self.free_names)

    def without_zero_inflation(self) -> "ModelConfig":
        return dataclasses.replace(self, zero_inflated=False)

    def conform(self, params: ModelParams) -> ModelParams:
        """Overwrite the pinned coordinates of `params`."""
        return params.replace(**self.pinned)


@dataclass(frozen=True)
class SubjectRecord:
    """One subject of a single-taxon analysis.

    Attributes
    ----------
    y : float
        Continuous outcome.
    m_obs : float
        Observed relative abundance, in [0, 1).
    l : float
        Library size, at least 1.
    x : float
        Exposure.
    """

    y: float
    m_obs: float
    l: float  # noqa: E741
    x: float

    def __post_init__(self) -> None:
        if not 0 <= self.m_obs < 1:
            raise ValueError(f"Observed abundance must lie in [0, 1), got {self.m_obs}.")
        if not self.l >= 1:
            raise ValueError(f"Library size must be at least 1, got {self.l}.")

    @property
    def r(self) -> int:
        """Presence indicator ``1(m_obs > 0)``."""
        return int(self.m_obs > 0)


@dataclass(frozen=True, eq=False)
class SubjectData:
    """Column-oriented view of a sequence of :class:`SubjectRecord`.

    The likelihood and the optimizer work on these arrays; records are the user-facing
    unit.
    """

    y: NDArray[np.float64]
    m_obs: NDArray[np.float64]
    l: NDArray[np.float64]  # noqa: E741
    x: NDArray[np.float64]

    def __post_init__(self) -> None:
        arrays = {
            name: np.array(getattr(self, name), dtype=float) for name in ("y", "m_obs", "l", "x")
        }
        shapes = {array.shape for array in arrays.values()}
        if len(shapes) != 1 or arrays["y"].ndim != 1:
            raise ValueError("y, m_obs, l and x must be vectors of the same length.")
        if np.any(~((arrays["m_obs"] >= 0) & (arrays["m_obs"] < 1))):
            raise ValueError("Observed abundances must lie in [0, 1).")
        if np.any(~(arrays["l"] >= 1)):
            raise ValueError("Library sizes must be at least 1.")
        if np.any(~np.isfinite(arrays["y"])) or np.any(~np.isfinite(arrays["x"])):
            raise ValueError("Outcome and exposure must be finite.")
        for name, array in arrays.items():
            array.setflags(write=False)
            object.__setattr__(self, name, array)

    @classmethod
    def from_records(cls, records: Sequence[SubjectRecord]) -> "SubjectData":
        return cls(
            y=np.array([rec.y for rec in records], dtype=float),
            m_obs=np.array([rec.m_obs for rec in records], dtype=float),
            l=np.array([rec.l for rec in records], dtype=float),
            x=np.array([rec.x for rec in records], dtype=float),
        )

    def records(self) -> Iterator[SubjectRecord]:
        for i in range(len(self)):
            yield self[i]

    def __len__(self) -> int:
        return self.y.size

    def __getitem__(self, i: int) -> SubjectRecord:
        return SubjectRecord(
            y=float(self.y[i]), m_obs=float(self.m_obs[i]), l=float(self.l[i]), x=float(self.x[i])
        )

    def take(self, index: ArrayLike) -> "SubjectData":
        index = np.asarray(index)
        return SubjectData(
            y=self.y[index], m_obs=self.m_obs[index], l=self.l[index], x=self.x[index]
        )

    @property
    def r(self) -> NDArray[np.bool_]:
        return self.m_obs > 0

    @property
    def n_zero(self) -> int:
        return int(np.sum(~self.r))


def as_subject_data(data: "Sequence[SubjectRecord] | SubjectData") -> SubjectData:
    if isinstance(data, SubjectData):
        return data
    if len(data) == 0:
        raise ValueError("No subject records.")
    return SubjectData.from_records(data)
