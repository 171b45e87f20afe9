from dataclasses import dataclass

import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy import special

from .abc import FloatArray, ZeroMechanism

__all__ = ["LOD"]


@dataclass(frozen=True)
class LOD(ZeroMechanism):
    """Limit-of-detection mechanism.

    A present taxon is observed as zero exactly when its sample absolute abundance ``m l``
    is below one read.
    """

    @property
    def name(self) -> str:
        return "lod"

    def detection_failure(self, m: ArrayLike, l: ArrayLike) -> FloatArray:  # noqa: E741
        m_, l_ = np.asarray(m, dtype=float), np.asarray(l, dtype=float)
        return (m_ * l_ < 1).astype(float)

    def upper_limit(self, l: ArrayLike) -> FloatArray:  # noqa: E741
        return np.minimum(1.0, 1.0 / np.asarray(l, dtype=float))  # type: ignore[no-any-return]

    def log_weight_slope(self, l: ArrayLike) -> FloatArray:  # noqa: E741
        return np.zeros(np.shape(l))

    def log_weight(self, m: ArrayLike, l: ArrayLike) -> FloatArray:  # noqa: E741
        # every node of the window lies below the detection limit
        return np.zeros(np.broadcast_shapes(np.shape(m), np.shape(l)))

    def zero_probability(
        self,
        delta: ArrayLike,
        a: ArrayLike,
        b: ArrayLike,
        l: ArrayLike,  # noqa: E741
        order: int = 64,
    ) -> FloatArray:
        upper = np.minimum(1.0, 1.0 / np.asarray(l, dtype=float))
        delta_ = np.asarray(delta, dtype=float)
        return delta_ + (1 - delta_) * special.betainc(a, b, upper)  # type: ignore[no-any-return]

    def observe_zero(
        self,
        m: ArrayLike,
        l: ArrayLike,  # noqa: E741
        rng: np.random.Generator,
    ) -> NDArray[np.bool_]:
        m_ = np.asarray(m, dtype=float)
        return (m_ > 0) & (m_ * np.asarray(l, dtype=float) < 1)  # type: ignore[no-any-return]
