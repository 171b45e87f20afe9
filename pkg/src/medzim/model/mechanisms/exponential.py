from dataclasses import dataclass
from typing import Any

import numpy as np
from numpy.typing import ArrayLike

from .abc import FloatArray, ZeroMechanism

__all__ = ["Exponential"]

# Spreads of the ``m^(a-1) exp(-η l m)`` kernel, as ``(a + c1 √a + c0) / (η l)``, at which the
# window gets extra panel edges.
KERNEL_SPREADS = ((4.0, 4.0), (10.0, 40.0))


@dataclass(frozen=True)
class Exponential(ZeroMechanism):
    """Exponential thinning mechanism.

    A present taxon is observed as zero with probability ``exp(-η m l)``, which decays with
    the expected read count ``m l``. Every abundance in ``(0, 1)`` can be missed.

    Attributes
    ----------
    eta : float
        Positive rate.
    """

    eta: float

    def __post_init__(self) -> None:
        if not self.eta > 0:
            raise ValueError(f"The exponential mechanism needs eta > 0, got {self.eta}.")

    @property
    def name(self) -> str:
        return "exp"

    def detection_failure(self, m: ArrayLike, l: ArrayLike) -> FloatArray:  # noqa: E741
        m_, l_ = np.asarray(m, dtype=float), np.asarray(l, dtype=float)
        return np.exp(-self.eta * m_ * l_)  # type: ignore[no-any-return]

    def log_weight(self, m: ArrayLike, l: ArrayLike) -> FloatArray:  # noqa: E741
        m_, l_ = np.asarray(m, dtype=float), np.asarray(l, dtype=float)
        return -self.eta * m_ * l_  # type: ignore[no-any-return]

    def upper_limit(self, l: ArrayLike) -> FloatArray:  # noqa: E741
        return np.ones(np.shape(l))

    def log_weight_slope(self, l: ArrayLike) -> FloatArray:  # noqa: E741
        return -self.eta * np.asarray(l, dtype=float)  # type: ignore[no-any-return]

    def breakpoints(self, l: ArrayLike, a: ArrayLike) -> FloatArray:  # noqa: E741
        scale = self.eta * np.atleast_1d(np.asarray(l, dtype=float))
        a_ = np.broadcast_to(np.asarray(a, dtype=float), scale.shape)
        return np.column_stack(
            [(a_ + c1 * np.sqrt(a_) + c0) / scale for c1, c0 in KERNEL_SPREADS]
        )

    def describe(self) -> dict[str, Any]:
        return {"mechanism": self.name, "eta": self.eta}
