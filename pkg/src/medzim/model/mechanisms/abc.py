from abc import ABC, abstractmethod
from typing import Any

import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy import special

from ..quadrature import composite_rule, log_concave_mode, panel_edges

__all__ = ["ZeroMechanism"]

FloatArray = NDArray[np.float64]


class ZeroMechanism(ABC):
    """Abstract base class for the rule under which a present taxon is observed as zero.

    A truly absent taxon (``M = 0``) is always observed as zero. A present taxon is observed
    as zero with probability :meth:`detection_failure` ``(m, l)``, which depends on its true
    relative abundance ``m`` and the library size ``l`` only.
    """

    @property
    @abstractmethod
    def name(self) -> str:
        """A short string id of the mechanism, as used on the command line."""
        ...

    @abstractmethod
    def detection_failure(self, m: ArrayLike, l: ArrayLike) -> FloatArray:  # noqa: E741
        """``Pr(M* = 0 | M = m, L = l)`` for ``m > 0``."""
        ...

    @abstractmethod
    def upper_limit(self, l: ArrayLike) -> FloatArray:  # noqa: E741
        """End of the window of abundances that can be observed as zero."""
        ...

    def log_weight(self, m: ArrayLike, l: ArrayLike) -> FloatArray:  # noqa: E741
        """Log detection failure probability inside the window."""
        with np.errstate(divide="ignore"):
            return np.log(self.detection_failure(m, l))

    @abstractmethod
    def log_weight_slope(self, l: ArrayLike) -> FloatArray:  # noqa: E741
        """Derivative in ``m`` of :meth:`log_weight`, which is linear inside the window."""
        ...

    def breakpoints(self, l: ArrayLike, a: ArrayLike) -> FloatArray:  # noqa: E741
        """Interior panel edges where the detection weight changes regime, shape (n, k)."""
        return np.empty((np.atleast_1d(np.asarray(l)).size, 0))

    def panel_edges(
        self,
        l: ArrayLike,  # noqa: E741
        a: ArrayLike,
        b: ArrayLike,
        precision: ArrayLike = 0.0,
        center: ArrayLike = 0.0,
    ) -> FloatArray:
        """Panels covering the window for each subject.

        Parameters
        ----------
        l : ArrayLike
            Library sizes, shape (n,).
        a, b : ArrayLike
            Beta shapes of each subject.
        precision, center : ArrayLike
            An optional Gaussian factor ``exp(-precision (m - center)² / 2)`` of the integrand,
            around whose peak panels are refined.

        Returns
        -------
        FloatArray
            Sorted edges, shape (n, panels + 1).
        """
        l_ = np.atleast_1d(np.asarray(l, dtype=float))
        a_, b_ = (np.broadcast_to(np.asarray(v, dtype=float), l_.shape) for v in (a, b))
        upper = np.broadcast_to(self.upper_limit(l_), l_.shape)
        mode, scale = log_concave_mode(
            upper, a_, b_, self.log_weight_slope(l_), precision, center
        )
        return panel_edges(upper, self.breakpoints(l_, a_), mode, scale)

    def fixed_rule(
        self,
        l: ArrayLike,  # noqa: E741
        a: ArrayLike,
        b: ArrayLike,
        order: int,
        precision: ArrayLike = 0.0,
        center: ArrayLike = 0.0,
    ) -> tuple[FloatArray, FloatArray]:
        """Fixed-order quadrature of ``∫_0^1 m^(a-1) w(m) f(m) dm`` for each subject.

        Here ``w`` is the detection failure probability and ``f`` a smooth function. The
        window is split by :meth:`panel_edges`; the panel at 0 uses Gauss–Jacobi nodes for
        the weight ``t^(a-1)`` and the others Gauss–Legendre nodes, each with `order` nodes.

        Returns
        -------
        nodes : FloatArray
            Abundances at which to evaluate ``f``, shape (n, panels * order).
        log_weights : FloatArray
            Log-weights such that the integral is ``Σ_k exp(log_weights) f(nodes)``.
        """
        l_ = np.atleast_1d(np.asarray(l, dtype=float))
        edges = self.panel_edges(l_, a, b, precision, center)
        nodes, log_weights = composite_rule(edges, np.broadcast_to(a, l_.shape), order)
        return nodes, log_weights + self.log_weight(nodes, l_[:, None])

    def zero_probability(
        self,
        delta: ArrayLike,
        a: ArrayLike,
        b: ArrayLike,
        l: ArrayLike,  # noqa: E741
        order: int = 48,
    ) -> FloatArray:
        """Model-implied ``Pr(M* = 0 | x, l)`` for a zero-inflated ``Beta(a, b)`` mediator."""
        delta_, a_, b_, l_ = np.broadcast_arrays(
            *(np.atleast_1d(np.asarray(v, dtype=float)) for v in (delta, a, b, l))
        )
        nodes, log_weights = self.fixed_rule(l_, a_, b_, order)
        with np.errstate(divide="ignore", invalid="ignore"):
            log_terms = log_weights + (b_[:, None] - 1) * np.log1p(-nodes)
        missed = np.exp(special.logsumexp(log_terms, axis=1) - special.betaln(a_, b_))
        return delta_ + (1 - delta_) * missed  # type: ignore[no-any-return]

    def observe_zero(
        self,
        m: ArrayLike,
        l: ArrayLike,  # noqa: E741
        rng: np.random.Generator,
    ) -> NDArray[np.bool_]:
        """Draw which present abundances are observed as zero."""
        m_ = np.asarray(m, dtype=float)
        fails = rng.random(m_.shape) < self.detection_failure(m_, l)
        return (m_ > 0) & fails  # type: ignore[no-any-return]

    def describe(self) -> dict[str, Any]:
        """A plain description, written to run manifests."""
        return {"mechanism": self.name}
