import os
import sys

import pytest

sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from QScalar import QContext  # noqa: E402


@pytest.fixture(scope="session")
def ctx():
    return QContext(0.5, precision=106)


@pytest.fixture
def rng():
    import numpy as np
    return np.random.default_rng(7)
