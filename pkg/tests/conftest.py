from __future__ import annotations

import pytest

from quasiconv import nonlinearity as nl
from quasiconv.phase_portrait import component_Pi0


@pytest.fixture(scope="session")
def cubic():
    return nl.cubic()


@pytest.fixture(scope="session")
def unbalanced():
    return nl.unbalanced_cubic(0.3)


@pytest.fixture(scope="session")
def pi_cubic(cubic):
    return component_Pi0(cubic)


@pytest.fixture(scope="session")
def pi_unbalanced(unbalanced):
    return component_Pi0(unbalanced)
