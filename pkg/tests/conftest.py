"""Shared model-family fixtures.

Everything here is deterministic: seeded generators, unscrambled
low-discrepancy nets, no time- or platform-dependent state.
"""

import numpy as np
import pytest

from jcurvelab import geometry as G


@pytest.fixture(scope="session")
def flat4():
    return G.flat_family(n=2)


@pytest.fixture(scope="session")
def conformal4():
    return G.conformal_example(n=2, seed=3)


@pytest.fixture(scope="session")
def conformal4_even():
    return G.conformal_example(n=2, seed=5, even=True)


@pytest.fixture(scope="session")
def sphere1():
    return G.sphere_family(1.0)


@pytest.fixture(scope="session")
def perturbed4():
    return G.perturbed_family(eps=0.02)


@pytest.fixture(scope="session")
def perturbed4_adapted():
    return G.perturbed_family(eps=0.02, adapted=True)


@pytest.fixture(scope="session")
def all_families(flat4, conformal4, conformal4_even, sphere1, perturbed4, perturbed4_adapted):
    return {
        "flat": flat4,
        "conformal": conformal4,
        "conformal-even": conformal4_even,
        "sphere-n1": sphere1,
        "perturbed-J": perturbed4,
        "perturbed-J-adapted": perturbed4_adapted,
    }


def sample_interior(m, n):
    """Deterministic interior points clear of any derivative stencil margin."""
    return m.domain.sample(n, 2.0 * m.deriv_margin() + 1e-9)
