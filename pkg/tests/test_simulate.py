import math

import numpy as np
import pandas as pd
import pytest

from medzim.effects import ExposureContrast, nie
from medzim.estimate import OptimizerSpec
from medzim.model import LOD, Exponential, ModelConfig
from medzim.simulate import (
    DEFAULT_LIBRARY_POOL,
    HIGH_RA_PARAMS,
    LOW_RA_PARAMS,
    ReplicateSummary,
    ScreeningSummary,
    Setting1Spec,
    Setting2Spec,
    gen_setting1,
    gen_setting2,
    load_library_pool,
    run_replicates,
    run_screening_replicates,
    scenario_params,
)
from medzim.utils.enums import Effect, Scenario


def test_scenarios():
    assert scenario_params(Scenario.LOW_RA) is LOW_RA_PARAMS
    assert scenario_params(Scenario.HIGH_RA).alpha0 == -1.0
    assert HIGH_RA_PARAMS.beta1 == LOW_RA_PARAMS.beta1
    assert DEFAULT_LIBRARY_POOL.min() == 31_607
    assert DEFAULT_LIBRARY_POOL.max() == 911_652


def test_spec_validation():
    with pytest.raises(ValueError):
        Setting1Spec(n=1)
    with pytest.raises(ValueError):
        Setting1Spec(exposure_probability=1.0)
    with pytest.raises(ValueError):
        Setting1Spec(library_pool=[0.5, 100])
    with pytest.raises(ValueError):
        Setting2Spec(k_plus_1=1)
    with pytest.raises(ValueError):
        Setting2Spec(library_pool=[])


# ---
# Setting 1


def test_setting1_observed_zero_rate_matches_the_model(rng):
    library = 1e5
    spec = Setting1Spec(n=20_000, library_pool=[library])
    study = gen_setting1(spec, rng)
    p = spec.true_params
    for x in (0.0, 1.0):
        group = study.data.x == x
        observed = float(np.mean(study.data.m_obs[group] == 0))
        mu = float(p.mediator_mean(x))
        expected = float(
            LOD().zero_probability(p.zero_mass(x), mu * p.phi, (1 - mu) * p.phi, library)
        )
        tolerance = 4 * math.sqrt(expected * (1 - expected) / group.sum())
        assert observed == pytest.approx(expected, abs=tolerance)


def test_setting1_records_are_consistent(low_ra_study):
    data, m_true = low_ra_study.data, low_ra_study.m_true
    assert len(data) == 100
    positive = data.m_obs > 0
    np.testing.assert_array_equal(data.m_obs[positive], m_true[positive])
    assert np.all(data.m_obs[m_true == 0] == 0)
    false_zeros = low_ra_study.false_zeros
    assert false_zeros.any()
    assert np.all(m_true[false_zeros] * data.l[false_zeros] < 1)
    assert set(np.unique(data.l)) <= set(DEFAULT_LIBRARY_POOL)
    assert set(np.unique(data.x)) <= {0.0, 1.0}


def test_setting1_is_deterministic():
    first = gen_setting1(Setting1Spec(n=50), np.random.default_rng(3))
    second = gen_setting1(Setting1Spec(n=50), np.random.default_rng(3))
    for name in ("y", "m_obs", "l", "x"):
        np.testing.assert_array_equal(getattr(first.data, name), getattr(second.data, name))


def test_setting1_high_abundance_has_no_false_zeros(rng):
    study = gen_setting1(Setting1Spec(n=500, true_params=HIGH_RA_PARAMS), rng)
    assert not study.false_zeros.any()
    assert np.all((study.data.m_obs == 0) == (study.m_true == 0))


def test_setting1_exponential_mechanism(rng):
    study = gen_setting1(Setting1Spec(n=500, mechanism=Exponential(0.01)), rng)
    assert study.false_zeros.any()
    assert np.any(study.m_true[study.false_zeros] * study.data.l[study.false_zeros] >= 1)


# ---
# Setting 2


def test_setting2_table(small_screen_table):
    table = small_screen_table
    assert (table.n_samples, table.n_taxa) == (120, 3)
    assert table.taxa_names == ("taxon1", "taxon2", "taxon3")
    assert table.sample_ids[:2] == ("S1", "S2")
    np.testing.assert_allclose(table.ra.sum(axis=1), 1.0, atol=1e-12)
    assert np.any(table.ra[:, 0] == 0)
    assert np.all(table.ra[:, 1:] > 0)


def test_setting2_truth_and_links(rng):
    spec = Setting2Spec(n=50)
    simulated = gen_setting2(spec, rng)
    np.testing.assert_array_equal(simulated.truth, [True] + [False] * 9)
    dirichlet = spec.dirichlet(rng)
    assert dirichlet.n_components == 10
    np.testing.assert_array_equal(dirichlet.alpha0[:2], [-3.0, 1.0])
    assert np.all((dirichlet.alpha0[2:] >= 1) & (dirichlet.alpha0[2:] <= 2))
    assert np.all((dirichlet.alpha1[2:] >= -2) & (dirichlet.alpha1[2:] <= -1))


def test_setting2_two_taxa(rng):
    simulated = gen_setting2(Setting2Spec(n=40, k_plus_1=2), rng)
    assert simulated.table.n_taxa == 2
    np.testing.assert_allclose(simulated.table.ra.sum(axis=1), 1.0, atol=1e-12)


# ---
# Library pools


def test_load_library_pool(tmp_path):
    path = tmp_path / "pool.txt"
    path.write_text("# reads\n1000\n2500\n")
    np.testing.assert_array_equal(load_library_pool(path), [1000.0, 2500.0])


@pytest.mark.parametrize(
    ("content", "message"),
    [("1000\n-5\n", "line 2"), ("1000\n12.5\n", "line 2"), ("1000 2\n", "exactly one")],
)
def test_load_library_pool_errors(tmp_path, content, message):
    path = tmp_path / "pool.txt"
    path.write_text(content)
    with pytest.raises(ValueError, match=message):
        load_library_pool(path)


# ---
# Replicate studies


def test_run_replicates_summary():
    summary = run_replicates(
        Setting1Spec(n=200), n_reps=2, cfg=ModelConfig(), seed=1, threads=1
    )
    assert isinstance(summary, ReplicateSummary)
    assert summary.n_reps == 2
    names = [row["name"] for row in summary.rows]
    assert names == list(ModelConfig().free_names) + ["NIE1", "NIE2", "NIE"]
    assert summary.row("beta5")["true"] == 0.0
    assert summary.row("beta5")["bias_pct"] is None
    assert summary.row("NIE")["true"] == pytest.approx(nie(LOW_RA_PARAMS, ExposureContrast()))
    assert summary.row("beta1")["n_used"] == 2 - summary.n_failed
    assert list(summary.to_frame().columns) == list(ReplicateSummary.COLUMNS)


def test_run_replicates_all_failed():
    with pytest.raises(RuntimeError, match="All 2 replicates failed"):
        run_replicates(Setting1Spec(n=5), n_reps=2, cfg=ModelConfig(), threads=1)
    with pytest.raises(ValueError):
        run_replicates(Setting1Spec(), n_reps=0, cfg=ModelConfig())


def test_run_screening_replicates_all_failed():
    with pytest.raises(RuntimeError):
        run_screening_replicates(
            Setting2Spec(n=30, k_plus_1=2), n_reps=2, cfg=ModelConfig(), min_positive=1000
        )


def test_run_screening_replicates_summary():
    summary = run_screening_replicates(
        Setting2Spec(n=80, k_plus_1=2),
        n_reps=1,
        cfg=ModelConfig(include_interaction_linear=False),
        threads=1,
    )
    assert isinstance(summary, ScreeningSummary)
    assert [row["effect"] for row in summary.rows] == ["NIE1", "NIE2"]
    assert summary.row(Effect.NIE2)["precision"] is None
    assert summary.row(Effect.NIE2)["f1"] is None
    assert summary.row(Effect.NIE1)["n_used"] == 1
    assert list(summary.to_frame().columns) == list(ScreeningSummary.COLUMNS)


@pytest.mark.slow
def test_run_replicates_is_thread_invariant():
    kwargs = dict(
        spec=Setting1Spec(n=100),
        n_reps=4,
        cfg=ModelConfig(include_interaction_linear=False),
        opt=OptimizerSpec(),
        seed=7,
    )
    single = run_replicates(threads=1, **kwargs)
    pooled = run_replicates(threads=4, **kwargs)
    pd.testing.assert_frame_equal(single.to_frame(), pooled.to_frame())


@pytest.mark.slow
def test_setting1_estimates_are_unbiased_and_covered():
    summary = run_replicates(
        Setting1Spec(n=100),
        n_reps=50,
        cfg=ModelConfig(include_interaction_linear=False),
        seed=2024,
    )
    for name in ("NIE1", "NIE2", "NIE"):
        row = summary.row(name)
        assert abs(row["bias"]) <= 3.5 * row["se"] / math.sqrt(row["n_used"])
    assert 80 <= summary.row("NIE")["cp"] <= 100
    for name in ("beta1", "beta2", "gamma1", "alpha1"):
        assert summary.row(name)["cp"] >= 80
