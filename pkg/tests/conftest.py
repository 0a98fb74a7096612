import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from walkthrough import basic_session, coordinates  # noqa: E402
from symtensor.registry import Session  # noqa: E402


@pytest.fixture
def session():
    return Session()


@pytest.fixture
def coords_session():
    return coordinates(Session())


@pytest.fixture
def walk():
    """Cartesian/Spherical with transformations, plus Minkowski, Schwarzschild and Alcubierre."""
    return basic_session()
