"""Shared fixtures: the expensive solver runs used by several test modules.

Session-scoped so the suite pays for each run exactly once.  The solvers are
fully deterministic (no RNG anywhere), so cached runs cannot leak state
between tests.  Building all of them takes roughly ten minutes of compute;
the acceptance module consumes every fixture, the FD module reuses the
half-scale pair.
"""

import pytest

from tubeflow import harness
from tubeflow.config import preset


@pytest.fixture(scope="session")
def t1_paper_lbm():
    """Ramp-up case (TEST 1) at full scale, N_x = 200, lattice engine."""
    return harness.run_engine(preset(1), "lbm")


@pytest.fixture(scope="session")
def t1_half_pair():
    """TEST 1 at mesh scale 1/2, both engines plus comparison report."""
    return harness.run_case(1, engine="both", scale="1/2")


@pytest.fixture(scope="session")
def t2_half_pair():
    """TEST 2 (density ratio 5) at mesh scale 1/2, both engines."""
    return harness.run_case(2, engine="both", scale="1/2")


@pytest.fixture(scope="session")
def t4_half_pair():
    """TEST 4 (volume-fraction-dependent drag) at scale 1/2, both engines."""
    return harness.run_case(4, engine="both", scale="1/2")


@pytest.fixture(scope="session")
def t3_paper_pair():
    """TEST 3 (density ratio 833.3, dashpot + freezing) at full scale."""
    return harness.run_case(3, engine="both", scale=1)


@pytest.fixture(scope="session")
def t1_convergence():
    """Observed-order study of TEST 1 across mesh scales 1/2, 1, 2."""
    return harness.convergence_study(1, ("1/2", 1, 2),
                                     fields=("alpha_g", "u_g"))
