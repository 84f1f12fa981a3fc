from fractions import Fraction

import pytest

from amores.config import load_config, shipped_config_path
from amores.contfrac import build_table, golden_table
from amores.phase import construct_theta


@pytest.fixture(scope="session")
def shipped_config():
    return load_config(shipped_config_path())


@pytest.fixture(scope="session")
def shipped_table(shipped_config):
    return build_table(shipped_config.alpha_rule, shipped_config.depth)


@pytest.fixture(scope="session")
def shipped_phase(shipped_table, shipped_config):
    return construct_theta(shipped_table, shipped_config.eta, shipped_config.J,
                           relaxed=shipped_config.relaxed)


@pytest.fixture(scope="session")
def golden():
    return golden_table(60)


@pytest.fixture(scope="session")
def golden_alpha(golden):
    return golden.convergent(golden.depth)


def frac(s) -> Fraction:
    return Fraction(s)
