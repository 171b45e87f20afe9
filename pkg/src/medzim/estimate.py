"""Maximum-likelihood fitting and observed information of the joint model.

The optimizer works in an unconstrained space where ``δ`` and ``φ`` are log-transformed.
The observed information is differentiated in the original parameterization, which is the
one the delta method uses.
"""

import logging
import math
from collections.abc import Callable, Sequence
from dataclasses import dataclass, field
from typing import Any

import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy import linalg, optimize

from .dist import expit, logit
from .model import (
    PARAM_NAMES,
    ModelConfig,
    ModelParams,
    QuadratureError,
    SubjectData,
    SubjectRecord,
    as_subject_data,
    loglik_total,
)
from .model.params import POSITIVE_PARAMS
from .utils.parallel import spawn_generators

log = logging.getLogger(__name__)

__all__ = [
    "PreconditionError",
    "NumericalDifferentiationError",
    "OptimizerSpec",
    "FitResult",
    "to_unconstrained",
    "from_unconstrained",
    "numerical_gradient",
    "numerical_hessian",
    "initial_params",
    "fit",
]

FloatArray = NDArray[np.float64]

# Range kept for the moment-based starting values.
PHI_INIT_RANGE = (1.0, 1e4)
LINK_INIT_BOUND = 20.0


class PreconditionError(ValueError):
    """The data cannot identify the requested model."""


class NumericalDifferentiationError(RuntimeError):
    """The objective is not finite around a point, even after shrinking the step.

    Attributes
    ----------
    coordinate : int
        Index of the coordinate being differentiated.
    """

    def __init__(self, coordinate: int) -> None:
        super().__init__(f"Objective is not finite around coordinate {coordinate}.")
        self.coordinate = coordinate


@dataclass(frozen=True)
class OptimizerSpec:
    """Settings of the quasi-Newton maximization.

    Attributes
    ----------
    method : str
        A BFGS-family method of :func:`scipy.optimize.minimize`, ``"BFGS"`` or ``"L-BFGS-B"``.
    max_iters : int
        Iteration budget of each restart.
    grad_tol : float
        Convergence threshold on the sup-norm of the gradient of the per-subject mean
        negative log-likelihood, in the unconstrained space.
    n_restarts : int
        Number of starts. The first one is the deterministic moment-based start, the others
        jitter it multiplicatively.
    seed : int
        Seed of the restart jitter.
    jitter : float
        Relative scale of the restart jitter.
    hessian_step : float
        Relative and absolute floor of the finite-difference step of the information matrix.
    """

    method: str = "BFGS"
    max_iters: int = 500
    grad_tol: float = 1e-5
    n_restarts: int = 1
    seed: int = 0
    jitter: float = 0.1
    hessian_step: float = 1e-5

    def __post_init__(self) -> None:
        if self.method not in ("BFGS", "L-BFGS-B"):
            raise ValueError(f"Unsupported optimizer {self.method!r}.")
        if not (self.grad_tol > 0 and self.hessian_step > 0 and self.jitter >= 0):
            raise ValueError("Optimizer tolerances must be positive.")
        if self.n_restarts < 1 or self.max_iters < 1:
            raise ValueError("Optimizer needs at least one restart and one iteration.")


@dataclass(frozen=True)
class FitResult:
    """Outcome of :func:`fit`.

    Attributes
    ----------
    params_hat : ModelParams
        The estimate, pinned coordinates included.
    loglik_at_max : float
        Complete log-likelihood at the estimate.
    info_obs : FloatArray | None
        Observed information over `free_names`, or None when it could not be computed.
    cov_hat : FloatArray | None
        Inverse of `info_obs`, or None when the information is not positive definite.
    converged : bool
        Whether `gradient_norm_at_max` is within ``OptimizerSpec.grad_tol``.
    iterations : int
        Iterations of the best restart.
    gradient_norm_at_max : float
        Sup-norm of the unconstrained gradient of the per-subject mean negative
        log-likelihood at the estimate. The gradient of the total log-likelihood is ``n``
        times larger.
    condition_number : float
        Condition number of `info_obs`, ``nan`` when unavailable.
    free_names : tuple[str, ...]
        Names of the estimated coordinates, in the order of the matrices.
    loglik_trace : tuple[float, ...]
        Log-likelihood after each accepted iteration of the best restart.
    message : str
        Diagnostic of the optimizer.
    """

    params_hat: ModelParams
    loglik_at_max: float
    info_obs: FloatArray | None
    cov_hat: FloatArray | None
    converged: bool
    iterations: int
    gradient_norm_at_max: float
    condition_number: float
    free_names: tuple[str, ...]
    loglik_trace: tuple[float, ...] = field(default=(), repr=False)
    message: str = ""

    @property
    def standard_errors(self) -> dict[str, float] | None:
        if self.cov_hat is None:
            return None
        return dict(zip(self.free_names, np.sqrt(np.diag(self.cov_hat)).tolist(), strict=True))


def to_unconstrained(p: ModelParams, names: Sequence[str] = PARAM_NAMES) -> FloatArray:
    """Map parameters to ℝᵈ, with ``δ ↦ ln δ`` and ``φ ↦ ln φ``."""
    z = p.to_vector(names)
    for j, name in enumerate(names):
        if name in POSITIVE_PARAMS:
            z[j] = math.log(z[j])
    return z


def from_unconstrained(
    z: ArrayLike, names: Sequence[str] = PARAM_NAMES, **pinned: float
) -> ModelParams:
    """Inverse of :func:`to_unconstrained`, completed with `pinned` values."""
    values = np.array(z, dtype=float)
    for j, name in enumerate(names):
        if name in POSITIVE_PARAMS:
            values[j] = math.exp(values[j])
    return ModelParams.from_vector(values, names, **pinned)


def _steps(z: FloatArray, rel: float, floor: float) -> FloatArray:
    return np.maximum(floor, rel * np.abs(z))


def numerical_gradient(
    f: Callable[[FloatArray], float],
    z: ArrayLike,
    rel_step: float = 1e-5,
    abs_step: float = 1e-5,
) -> FloatArray:
    """Central-difference gradient of `f` at `z`.

    Coordinate ``j`` uses the step ``max(abs_step, rel_step |z_j|)``. A non-finite evaluation
    shrinks that step tenfold once.

    Raises
    ------
    NumericalDifferentiationError
        If a shifted evaluation is still not finite after the shrink.
    """
    z_ = np.asarray(z, dtype=float)
    grad = np.empty_like(z_)
    for j, h in enumerate(_steps(z_, rel_step, abs_step)):
        for step in (h, h / 10):
            shifted = z_.copy()
            shifted[j] = z_[j] + step
            forward = f(shifted)
            shifted[j] = z_[j] - step
            backward = f(shifted)
            if np.isfinite(forward) and np.isfinite(backward):
                grad[j] = (forward - backward) / (2 * step)
                break
        else:
            raise NumericalDifferentiationError(j)
    return grad


def numerical_hessian(
    f: Callable[[FloatArray], float],
    z: ArrayLike,
    rel_step: float = 1e-5,
    abs_step: float = 1e-5,
    inner_step: float = 1e-4,
) -> FloatArray:
    """Symmetrized Hessian of `f`, by central differences of its numerical gradient.

    The outer step of coordinate ``j`` is ``max(abs_step, rel_step |z_j|)``; the gradient
    itself uses the coarser `inner_step` rule.
    """
    z_ = np.asarray(z, dtype=float)
    d = z_.size
    hess = np.empty((d, d))
    for j, h in enumerate(_steps(z_, rel_step, abs_step)):
        shifted = z_.copy()
        shifted[j] = z_[j] + h
        forward = numerical_gradient(f, shifted, inner_step, inner_step)
        shifted[j] = z_[j] - h
        backward = numerical_gradient(f, shifted, inner_step, inner_step)
        hess[:, j] = (forward - backward) / (2 * h)
    return (hess + hess.T) / 2  # type: ignore[no-any-return]


def _check_preconditions(data: SubjectData, cfg: ModelConfig) -> None:
    if len(data) == 0:
        raise PreconditionError("No subjects to fit.")
    if np.ptp(data.x) == 0:
        raise PreconditionError("The exposure is constant; no effect is identifiable.")
    if not data.r.any():
        raise PreconditionError("No positive abundance; the Beta component is not identifiable.")
    if cfg.zero_inflated and data.r.all():
        raise PreconditionError(
            "No observed zero; fit this mediator without zero inflation instead."
        )
    if len(data) <= cfg.dim:
        raise PreconditionError(
            f"{len(data)} subjects cannot identify {cfg.dim} free parameters."
        )


def _irls_logit(design: FloatArray, target: FloatArray, n_iter: int = 50) -> FloatArray:
    """Fractional logit regression, ``E[target] = expit(design @ coef)``, by IRLS."""
    coef = np.zeros(design.shape[1])
    coef[0] = float(logit(np.clip(target.mean(), 1e-6, 1 - 1e-6)))
    for _ in range(n_iter):
        eta = design @ coef
        mu = np.asarray(expit(eta))
        w = np.maximum(mu * (1 - mu), 1e-10)
        working = eta + (target - mu) / w
        sqrt_w = np.sqrt(w)[:, None]
        update, *_ = linalg.lstsq(design * sqrt_w, working * sqrt_w[:, 0])
        update = np.clip(update, -LINK_INIT_BOUND, LINK_INIT_BOUND)
        if np.max(np.abs(update - coef)) < 1e-10:
            return update  # type: ignore[no-any-return]
        coef = update
    return coef


def initial_params(data: Sequence[SubjectRecord] | SubjectData, cfg: ModelConfig) -> ModelParams:
    """Moment-based starting values.

    The outcome coefficients come from least squares treating observed zeros as true zeros,
    the Beta mean link from a fractional logit fit on positive abundances, the dispersion
    from the method of moments, and the zero-mass link from a logistic fit of the
    observed-zero indicator.
    """
    data = as_subject_data(data)
    pinned = cfg.pinned
    m, r, x = data.m_obs, data.r.astype(float), data.x
    columns = {
        "beta0": np.ones_like(x),
        "beta1": m,
        "beta2": r,
        "beta3": x,
        "beta4": x * r,
        "beta5": x * m,
    }
    beta_names = [name for name in columns if name not in pinned]
    design = np.column_stack([columns[name] for name in beta_names])
    coef, *_ = linalg.lstsq(design, data.y)
    residual = data.y - design @ coef
    dof = max(len(data) - len(beta_names), 1)
    values: dict[str, float] = dict(zip(beta_names, coef.tolist(), strict=True))
    values["delta"] = max(math.sqrt(float(residual @ residual) / dof), 1e-3)

    positive = data.r
    link_design = np.column_stack([np.ones(int(positive.sum())), x[positive]])
    alpha = _irls_logit(link_design, m[positive])
    values.update(alpha0=float(alpha[0]), alpha1=float(alpha[1]))
    mu = np.asarray(expit(link_design @ alpha))
    variance = float(np.mean((m[positive] - mu) ** 2))
    phi = float(np.mean(mu * (1 - mu))) / variance - 1 if variance > 0 else PHI_INIT_RANGE[1]
    values["phi"] = float(np.clip(phi, *PHI_INIT_RANGE))

    if cfg.zero_inflated:
        gamma = _irls_logit(np.column_stack([np.ones_like(x), x]), 1 - r)
        values.update(gamma0=float(gamma[0]), gamma1=float(gamma[1]))
    values.update(pinned)
    for name in PARAM_NAMES:
        values.setdefault(name, 0.0)
    return ModelParams(**values)


@dataclass
class _Restart:
    z: FloatArray
    objective: float
    iterations: int
    message: str
    trace: list[float]


def _run_restart(
    objective: Callable[[FloatArray], float],
    z0: FloatArray,
    opt: OptimizerSpec,
    scale: float,
) -> _Restart:
    trace: list[float] = []

    def callback(intermediate_result: optimize.OptimizeResult) -> None:
        trace.append(-float(intermediate_result.fun) * scale)

    options: dict[str, Any] = {"maxiter": opt.max_iters, "gtol": opt.grad_tol}
    res = optimize.minimize(
        objective,
        z0,
        method=opt.method,
        jac=lambda z: numerical_gradient(objective, z),
        callback=callback,
        options=options,
    )
    return _Restart(
        z=np.asarray(res.x, dtype=float),
        objective=float(res.fun),
        iterations=int(res.nit),
        message=str(res.message),
        trace=trace,
    )


def _information(
    data: SubjectData, params: ModelParams, cfg: ModelConfig, opt: OptimizerSpec
) -> tuple[FloatArray | None, FloatArray | None, float, str]:
    names, pinned = cfg.free_names, cfg.pinned

    def loglik(zeta: FloatArray) -> float:
        try:
            p = ModelParams.from_vector(zeta, names, **pinned)
        except ValueError:
            return -math.inf
        return loglik_total(data, p, cfg)

    try:
        step = opt.hessian_step
        hess = numerical_hessian(loglik, params.to_vector(names), step, step)
    except NumericalDifferentiationError as e:
        return None, None, math.nan, f"information not computable: {e}"
    info = -hess
    if not np.all(np.isfinite(info)):
        return None, None, math.nan, "information not finite"
    eigenvalues, eigenvectors = linalg.eigh(info)
    condition = (
        float(np.max(np.abs(eigenvalues)) / np.min(np.abs(eigenvalues)))
        if np.min(np.abs(eigenvalues)) > 0
        else math.inf
    )
    if eigenvalues[0] <= 0:
        log.warning(
            f"Observed information is not positive definite (smallest eigenvalue "
            f"{eigenvalues[0]:.3g}); covariance unavailable."
        )
        return info, None, condition, "singular information"
    cov = (eigenvectors / eigenvalues) @ eigenvectors.T
    return info, (cov + cov.T) / 2, condition, ""


def fit(
    data: Sequence[SubjectRecord] | SubjectData,
    cfg: ModelConfig,
    opt: OptimizerSpec | None = None,
) -> FitResult:
    """Maximum-likelihood estimate of the joint model.

    Parameters
    ----------
    data : Sequence[SubjectRecord] | SubjectData
        The subjects of one taxon.
    cfg : ModelConfig
        Which parameters are free, the zero mechanism and the quadrature.
    opt : OptimizerSpec | None
        Optimizer settings, defaults to ``OptimizerSpec()``.

    Returns
    -------
    FitResult
        The restart with the highest log-likelihood. Non-convergence is reported through
        `converged` and `message`, never raised.

    Raises
    ------
    PreconditionError
        When the data cannot identify the model.
    """
    opt = opt or OptimizerSpec()
    data = as_subject_data(data)
    _check_preconditions(data, cfg)
    names, pinned = cfg.free_names, cfg.pinned
    n = len(data)

    def objective(z: FloatArray) -> float:
        try:
            p = from_unconstrained(z, names, **pinned)
        except (ValueError, OverflowError):
            return math.inf
        ll = loglik_total(data, p, cfg)
        return -ll / n if math.isfinite(ll) else math.inf

    start = initial_params(data, cfg)
    z_start = to_unconstrained(start, names)
    starts = [z_start] + [
        z_start * (1 + opt.jitter * rng.standard_normal(z_start.size))
        for rng in spawn_generators(opt.seed, opt.n_restarts - 1)
    ]

    best: _Restart | None = None
    failures: list[str] = []
    for k, z0 in enumerate(starts):
        if not math.isfinite(objective(z0)):
            failures.append(f"restart {k}: start outside the model")
            continue
        try:
            restart = _run_restart(objective, z0, opt, n)
        except (NumericalDifferentiationError, QuadratureError) as e:
            log.debug(f"Restart {k} failed: {e}")
            failures.append(f"restart {k}: {e}")
            continue
        log.debug(
            f"Restart {k}: loglik={-restart.objective * n:.6g} after {restart.iterations} "
            f"iterations ({restart.message})"
        )
        if best is None or restart.objective < best.objective:
            best = restart

    if best is None:
        log.warning("Every optimizer restart failed; returning the starting values.")
        return FitResult(
            params_hat=start,
            loglik_at_max=loglik_total(data, start, cfg),
            info_obs=None,
            cov_hat=None,
            converged=False,
            iterations=0,
            gradient_norm_at_max=math.nan,
            condition_number=math.nan,
            free_names=names,
            message="; ".join(failures),
        )

    params_hat = from_unconstrained(best.z, names, **pinned)
    try:
        gradient_norm = float(np.max(np.abs(numerical_gradient(objective, best.z))))
    except NumericalDifferentiationError:
        gradient_norm = math.nan
    converged = gradient_norm <= opt.grad_tol
    info, cov, condition, info_message = _information(data, params_hat, cfg, opt)
    message = "; ".join(filter(None, [best.message, info_message, *failures]))
    if not converged:
        log.warning(f"Fit did not converge: {message}")
    log.debug(f"Gradient norm {gradient_norm:.3g}, condition number {condition:.3g}")
    return FitResult(
        params_hat=params_hat,
        loglik_at_max=loglik_total(data, params_hat, cfg),
        info_obs=info,
        cov_hat=cov,
        converged=converged,
        iterations=best.iterations,
        gradient_norm_at_max=gradient_norm,
        condition_number=condition,
        free_names=names,
        loglik_trace=tuple(best.trace),
        message=message,
    )
