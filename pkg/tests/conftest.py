"""Shared fixtures: the tuned critical lift and pairs derived from it.

Everything heavy is session-scoped; the golden fixed point is computed
once and reused by the spectrum and 2D suites.
"""

import pytest

from renormpairs import arnold


@pytest.fixture(scope="session")
def omega_star():
    return arnold.tune_omega(1.0, [1] * 40, tol=1e-11)


@pytest.fixture(scope="session")
def golden_lift(omega_star):
    return arnold.CircleLift(1.0, omega_star)


@pytest.fixture(scope="session")
def golden_pair(golden_lift):
    return arnold.extract_pair(golden_lift, 0, cf_terms=[1] * 30)


@pytest.fixture(scope="session")
def golden_pair_m2(golden_lift):
    return arnold.extract_pair(golden_lift, 2, cf_terms=[1] * 30)


@pytest.fixture(scope="session")
def zstar(golden_pair):
    from renormpairs import hyper1d

    seed = golden_pair
    for _ in range(12):
        seed = hyper1d.renorm_step_ac(seed)
    return hyper1d.newton_fixed_point(seed, tol=1e-9)
