import sys
from pathlib import Path

import pytest

from solsim.core import Grid1D

sys.path.insert(0, str(Path(__file__).parent))

# Reference point used throughout: n_sol = 1000, u0 = -0.002 gives xi = 1
# and chi = -6.667e-4 on a width-128 periodic box.
REF_N_SOL = 1000
REF_U0 = -0.002


@pytest.fixture(scope="session")
def ref_grid() -> Grid1D:
    return Grid1D(-64.0, 64.0, 1024)


@pytest.fixture(scope="session")
def small_grid() -> Grid1D:
    return Grid1D(-32.0, 32.0, 256)
