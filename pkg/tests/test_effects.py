import math

import numpy as np
import pytest
from scipy import special, stats

from medzim.dist import ZIBParams, zib_sample
from medzim.effects import (
    EffectEstimates,
    ExposureContrast,
    cde,
    delta_ci,
    effect_gradient,
    effect_value,
    estimate_effects,
    nde,
    nie,
    nie1,
    nie2,
)
from medzim.estimate import FitResult
from medzim.model import PARAM_NAMES, ModelParams, outcome_mean
from medzim.utils.enums import Effect

UNIT = ExposureContrast()


def fake_fit(params: ModelParams, cov, names=PARAM_NAMES) -> FitResult:
    return FitResult(
        params_hat=params,
        loglik_at_max=0.0,
        info_obs=None,
        cov_hat=None if cov is None else np.asarray(cov, dtype=float),
        converged=True,
        iterations=0,
        gradient_norm_at_max=0.0,
        condition_number=1.0,
        free_names=tuple(names),
    )


def random_params(rng: np.random.Generator) -> ModelParams:
    return ModelParams(
        beta0=rng.uniform(-5, 5),
        beta1=rng.uniform(-5, 5),
        beta2=rng.uniform(-5, 5),
        beta3=rng.uniform(-5, 5),
        beta4=rng.uniform(-5, 5),
        beta5=rng.uniform(-5, 5),
        delta=rng.uniform(0.5, 2),
        alpha0=rng.uniform(-3, 3),
        alpha1=rng.uniform(-3, 3),
        phi=rng.uniform(5, 50),
        gamma0=rng.uniform(-3, 3),
        gamma1=rng.uniform(-3, 3),
    )


def test_known_values(low_ra_params):
    mu0, mu1 = special.expit(-6.2), special.expit(-5.8)
    d0, d1 = special.expit(-1.16), special.expit(-1.66)
    assert nie1(low_ra_params, UNIT) == pytest.approx(100 * ((1 - d1) * mu1 - (1 - d0) * mu0))
    assert nie2(low_ra_params, UNIT) == pytest.approx(7 * (d0 - d1))
    assert nie2(low_ra_params, UNIT) == pytest.approx(0.5523, abs=1e-4)
    assert nie1(low_ra_params, UNIT) == pytest.approx(0.0994, abs=2e-4)
    assert nde(low_ra_params, UNIT) == pytest.approx(5 + 3 * (1 - d0))


def test_nie_is_the_sum(rng):
    for _ in range(10):
        p = random_params(rng)
        assert nie(p, UNIT) == nie1(p, UNIT) + nie2(p, UNIT)


def test_null_effects(low_ra_params):
    unaffected = low_ra_params.replace(alpha1=0.0, gamma1=0.0)
    assert nie1(unaffected, UNIT) == 0.0
    assert nie2(unaffected, UNIT) == 0.0
    assert nie1(low_ra_params.replace(beta1=0.0, beta5=0.0), UNIT) == 0.0
    assert nie2(low_ra_params.replace(beta2=0.0, beta4=0.0), UNIT) == 0.0


def test_nie_antisymmetric_without_interactions(rng):
    for _ in range(10):
        p = random_params(rng).replace(beta4=0.0, beta5=0.0)
        forward = ExposureContrast(x1=0.3, x2=1.7)
        backward = ExposureContrast(x1=1.7, x2=0.3)
        assert nie(p, forward) == pytest.approx(-nie(p, backward), rel=1e-12, abs=1e-14)


def test_cde(low_ra_params):
    assert cde(low_ra_params, ExposureContrast(m_controlled=0.0)) == 5.0
    assert cde(low_ra_params, ExposureContrast(m_controlled=0.01)) == 8.0
    widened = ExposureContrast(x1=-1.0, x2=1.0, m_controlled=0.5)
    assert cde(low_ra_params.replace(beta5=2.0), widened) == pytest.approx(2 * (5 + 3 + 1))
    with pytest.raises(ValueError):
        cde(low_ra_params, UNIT)


def test_contrast_validation():
    with pytest.raises(ValueError):
        ExposureContrast(x1=1.0, x2=1.0)
    with pytest.raises(ValueError):
        ExposureContrast(m_controlled=1.5)
    assert ExposureContrast(x1=2.0, x2=-1.0).width == -3.0


def test_effect_value_dispatch(low_ra_params):
    c = ExposureContrast(m_controlled=0.2)
    for effect, f in [
        (Effect.NIE1, nie1),
        (Effect.NIE2, nie2),
        (Effect.NIE, nie),
        (Effect.NDE, nde),
        (Effect.CDE, cde),
    ]:
        assert effect_value(effect, low_ra_params, c) == f(low_ra_params, c)


@pytest.mark.parametrize("effect", list(Effect))
def test_gradient_matches_finite_differences(effect):
    rng = np.random.default_rng(list(Effect).index(effect))
    c = ExposureContrast(x1=0.2, x2=1.3, m_controlled=0.3)
    h = 1e-6
    for _ in range(50):
        p = random_params(rng)
        analytic = effect_gradient(effect, p, c)
        numeric = np.empty(len(PARAM_NAMES))
        for j, name in enumerate(PARAM_NAMES):
            value = getattr(p, name)
            up = effect_value(effect, p.replace(**{name: value + h}), c)
            down = effect_value(effect, p.replace(**{name: value - h}), c)
            numeric[j] = (up - down) / (2 * h)
        np.testing.assert_allclose(analytic, numeric, rtol=1e-6, atol=1e-7)


def test_gradient_over_free_names(low_ra_params):
    names = ("beta1", "alpha0", "gamma1")
    full = effect_gradient(Effect.NIE, low_ra_params, UNIT)
    sub = effect_gradient(Effect.NIE, low_ra_params, UNIT, names)
    np.testing.assert_array_equal(sub, full[[PARAM_NAMES.index(n) for n in names]])
    assert effect_gradient(Effect.NIE1, low_ra_params, UNIT)[PARAM_NAMES.index("phi")] == 0.0


def test_delta_ci_identity_covariance(low_ra_params):
    inference = delta_ci(Effect.NIE, fake_fit(low_ra_params, np.eye(12)), UNIT)
    g = effect_gradient(Effect.NIE, low_ra_params, UNIT)
    se = float(np.linalg.norm(g))
    z = stats.norm.ppf(0.975)
    assert inference.available
    assert inference.estimate == nie(low_ra_params, UNIT)
    assert inference.se == pytest.approx(se, rel=1e-12)
    assert inference.lo == pytest.approx(inference.estimate - z * se)
    assert inference.hi == pytest.approx(inference.estimate + z * se)
    assert inference.p_value == pytest.approx(2 * stats.norm.sf(abs(inference.estimate) / se))


def test_delta_ci_level(low_ra_params):
    fit = fake_fit(low_ra_params, np.eye(12))
    narrow = delta_ci(Effect.NDE, fit, UNIT, level=0.5)
    wide = delta_ci(Effect.NDE, fit, UNIT, level=0.99)
    assert wide.lo < narrow.lo < narrow.hi < wide.hi
    with pytest.raises(ValueError):
        delta_ci(Effect.NDE, fit, UNIT, level=1.0)


def test_delta_ci_unavailable(low_ra_params):
    missing = delta_ci(Effect.NIE, fake_fit(low_ra_params, None), UNIT)
    assert not missing.available
    assert missing.note == "covariance unavailable"
    assert missing.estimate == nie(low_ra_params, UNIT)

    negative = delta_ci(Effect.NIE, fake_fit(low_ra_params, -np.eye(12)), UNIT)
    assert not negative.available
    assert negative.note == "negative variance"
    assert negative.p_value is None


def test_delta_ci_zero_variance(low_ra_params):
    inference = delta_ci(Effect.NDE, fake_fit(low_ra_params, np.zeros((12, 12))), UNIT)
    assert inference.se == 0.0
    assert inference.p_value == 0.0
    assert inference.lo == inference.hi == inference.estimate


def test_delta_ci_is_exact_for_the_cde(low_ra_params, rng):
    names = ("beta3", "beta4", "beta5")
    root = rng.normal(size=(3, 3))
    cov = root @ root.T + np.eye(3)
    m = 0.25
    c = ExposureContrast(x1=0.0, x2=2.0, m_controlled=m)
    inference = delta_ci(Effect.CDE, fake_fit(low_ra_params, cov, names), c)
    weights = 2.0 * np.array([1.0, 1.0, m])
    assert inference.se**2 == pytest.approx(float(weights @ cov @ weights), rel=1e-12)


def test_estimate_effects(low_ra_params):
    fit = fake_fit(low_ra_params, np.eye(12))
    effects = estimate_effects(fit, UNIT)
    assert isinstance(effects, EffectEstimates)
    assert list(effects) == [Effect.NIE1, Effect.NIE2, Effect.NIE, Effect.NDE]
    assert effects[Effect.NIE].estimate == nie(low_ra_params, UNIT)

    with_cde = estimate_effects(fit, ExposureContrast(m_controlled=0.0))
    assert len(with_cde) == 5
    assert with_cde[Effect.CDE].estimate == 5.0

    only = estimate_effects(fit, UNIT, effects=[Effect.NIE2])
    assert list(only) == [Effect.NIE2]
    with pytest.raises(KeyError):
        only[Effect.NIE1]


def _counterfactual_mean(p, x_mediator, x_outcome, n, rng):
    law = ZIBParams(
        float(p.zero_mass(x_mediator)), float(p.mediator_mean(x_mediator)), p.phi
    )
    m = zib_sample(law, n, rng)
    means = outcome_mean(m, (m > 0).astype(float), x_outcome, p)
    return float(np.mean(means)), float(np.var(means) / n)


@pytest.mark.slow
def test_effects_match_monte_carlo():
    rng = np.random.default_rng(2024)
    n = 1_000_000
    for _ in range(10):
        p = random_params(rng)
        # keep both link masses away from the clamped ends
        p = p.replace(alpha0=rng.uniform(-2, 0), gamma0=rng.uniform(-2, 0))
        c = ExposureContrast(x1=0.0, x2=1.0)
        treated, v1 = _counterfactual_mean(p, c.x2, c.x2, n, rng)
        crossed, v2 = _counterfactual_mean(p, c.x1, c.x2, n, rng)
        control, v3 = _counterfactual_mean(p, c.x1, c.x1, n, rng)
        assert treated - crossed == pytest.approx(nie(p, c), abs=4 * math.sqrt(v1 + v2))
        assert crossed - control == pytest.approx(nde(p, c), abs=4 * math.sqrt(v2 + v3))
