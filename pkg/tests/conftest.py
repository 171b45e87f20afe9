import logging
from pathlib import Path

import numpy as np
import pytest

from medzim.model import ModelConfig, ModelParams
from medzim.screen import TaxaTable
from medzim.simulate import (
    HIGH_RA_PARAMS,
    LOW_RA_PARAMS,
    Setting1Spec,
    Setting2Spec,
    SimulatedStudy,
    gen_setting1,
    gen_setting2,
)

TESTS_DIR = Path(__file__).parent


@pytest.fixture
def low_ra_params() -> ModelParams:
    return LOW_RA_PARAMS


@pytest.fixture
def high_ra_params() -> ModelParams:
    return HIGH_RA_PARAMS


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(20240117)


@pytest.fixture
def setting1_config() -> ModelConfig:
    """The model fitted in the single-taxon study, where the data have no β5 term."""
    return ModelConfig(include_interaction_linear=False)


@pytest.fixture(scope="session")
def low_ra_study() -> SimulatedStudy:
    return gen_setting1(Setting1Spec(n=100), np.random.default_rng(7))


@pytest.fixture(scope="session")
def small_screen_table() -> TaxaTable:
    return gen_setting2(Setting2Spec(n=120, k_plus_1=3), np.random.default_rng(11)).table


@pytest.fixture
def toy_ra_path() -> Path:
    return TESTS_DIR / "data" / "toy_ra.tsv"


@pytest.fixture
def toy_meta_path() -> Path:
    return TESTS_DIR / "data" / "toy_meta.tsv"


# ----
# Add pytest.mark.slow marker
# See also https://stackoverflow.com/a/47567535/24033350


def pytest_addoption(parser):
    parser.addoption("--run-slow", action="store_true", help="Don't skip tests marked with @slow")


def pytest_runtest_setup(item):
    if "slow" in item.keywords and not item.config.getoption("--run-slow"):
        pytest.skip("Need flag '--run-slow' to run this test.")


# ---
# Configure logging


def pytest_configure(config):
    """Disable the loggers."""
    for logger_name in ["py.warnings"]:
        logger = logging.getLogger(logger_name)
        logger.propagate = False
