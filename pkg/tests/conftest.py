import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from ellrad import canonical_phantoms, make_geometry  # noqa: E402


@pytest.fixture
def geom():
    """The symmetric reference geometry used by most transform tests."""
    return make_geometry(np.pi / 4)


@pytest.fixture
def phantoms(geom):
    return canonical_phantoms(geom)


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)
