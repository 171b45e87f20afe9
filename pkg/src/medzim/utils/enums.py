"""The Enum types used in medzim."""

from __future__ import annotations

from enum import Enum
from typing import TYPE_CHECKING

if TYPE_CHECKING:
    from ..model.mechanisms import ZeroMechanism


class Mechanism(Enum):
    """The rule under which a present taxon is observed as a zero."""

    LOD = "lod"
    EXPONENTIAL = "exp"

    def build(self, eta: float | None = None) -> ZeroMechanism:
        from ..model.mechanisms import LOD, Exponential

        match self:
            case Mechanism.LOD:
                return LOD()
            case Mechanism.EXPONENTIAL:
                if eta is None:
                    raise ValueError("The exponential mechanism needs a rate eta.")
                return Exponential(eta=eta)
            case _:
                raise ValueError(f"Unknown mechanism {self.value}.")


class QuadratureMethod(Enum):
    """How the false-zero integral of the likelihood is computed."""

    GAUSS = "gauss"
    ADAPTIVE = "adaptive"


class Effect(Enum):
    """The causal effects of the exposure on the outcome."""

    NIE1 = "NIE1"
    NIE2 = "NIE2"
    NIE = "NIE"
    NDE = "NDE"
    CDE = "CDE"

    @property
    def description(self) -> str:
        match self:
            case Effect.NIE1:
                return "indirect effect through the numeric change of the mediator"
            case Effect.NIE2:
                return "indirect effect through the presence change of the mediator"
            case Effect.NIE:
                return "natural indirect effect"
            case Effect.NDE:
                return "natural direct effect"
            case Effect.CDE:
                return "controlled direct effect"
            case _:
                raise ValueError(f"Unknown effect {self.value}.")


class Scenario(Enum):
    """Abundance scenarios of the single-taxon simulation."""

    LOW_RA = "LOW_RA"
    HIGH_RA = "HIGH_RA"


class TaxonStatus(Enum):
    """Outcome of the analysis of one taxon in a screen."""

    FITTED = "fitted"
    NOT_CONVERGED = "not_converged"
    FAILED = "failed"
    SKIPPED = "skipped"

    @property
    def usable(self) -> bool:
        return self is TaxonStatus.FITTED
